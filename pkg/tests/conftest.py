"""Shared fixtures: the three-coin grid model and small trained ensembles.

The coin model (biases 0.2 / 0.5 / 0.8, uniform prior) is small enough
that every quantity in the library can be checked against hand
arithmetic or the brute-force oracle.
"""

import numpy as np
import pytest

from obayes.data import generate_cluster_dataset
from obayes.models import grid_family_from_world
from obayes.models.mlp import MlpArchitecture, TrainConfig, train_mc_dropout
from obayes.numerics import RngStream
from obayes.oracle import coin_world


@pytest.fixture(scope="session")
def coin():
    return coin_world()


@pytest.fixture(scope="session")
def coin_family(coin):
    return grid_family_from_world(coin)


@pytest.fixture()
def coin_ensemble(coin_family):
    return coin_family.uniform_ensemble()


@pytest.fixture(scope="session")
def coin_x(coin):
    return coin.vocabulary[0]


@pytest.fixture(scope="session")
def cluster_data():
    """Small 4-class synthetic task: (train, eval) pair."""
    root = RngStream(1234)
    train = generate_cluster_dataset(12, 4, 2, 0.4, root.derive("train"))
    evald = generate_cluster_dataset(25, 4, 2, 0.4, root.derive("eval"))
    return train, evald


@pytest.fixture(scope="session")
def dropout_16(cluster_data):
    """Trained consistent-dropout ensemble with 16 mask samples."""
    train, _ = cluster_data
    arch = MlpArchitecture(in_dim=2, hidden=32, num_classes=4,
                           dropout_rate=0.5)
    cfg = TrainConfig(epochs=60, seed=99)
    return train_mc_dropout(train, arch, cfg, 16, RngStream(7).derive("masks"))
