"""Marginal and joint predictives over fixed parameter draws."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from obayes.models import exact_grid_posterior, grid_family_from_world
from obayes.numerics import RngStream
from obayes.oracle import (
    oracle_joint_entropy,
    oracle_joint_predictive,
    random_world,
    sample_world_dataset,
)
from obayes.predictive import (
    CategoricalLogDist,
    joint_entropy_exact,
    joint_entropy_mc,
    joint_log_prob,
    marginal_entropy,
    marginal_log_probs,
    marginal_predictive,
)


def _world_ensemble(world):
    """Grid ensemble weighted by the world's (possibly non-uniform) prior."""
    fam = grid_family_from_world(world)
    with np.errstate(divide="ignore"):
        return exact_grid_posterior(fam, np.log(world.prior), [])


class TestCategoricalLogDist:
    def test_lookup_and_probs(self):
        dist = CategoricalLogDist(np.log([0.25, 0.75]))
        assert dist[1] == pytest.approx(math.log(0.75), abs=1e-12)
        assert np.allclose(dist.probs(), [0.25, 0.75], atol=1e-12)

    def test_entropy_uniform(self):
        dist = CategoricalLogDist(np.log([0.5, 0.5]))
        assert dist.entropy() == pytest.approx(math.log(2), abs=1e-12)

    def test_entropy_with_zero_mass_class(self):
        dist = CategoricalLogDist(np.array([0.0, -math.inf]))
        assert dist.entropy() == pytest.approx(0.0, abs=1e-12)

    def test_unnormalized_rejected(self):
        with pytest.raises(ValueError):
            CategoricalLogDist(np.log([0.5, 0.4]))

    @pytest.mark.parametrize("bad", [math.nan, math.inf])
    def test_non_finite_rejected(self, bad):
        with pytest.raises(ValueError):
            CategoricalLogDist(np.array([0.0, bad]))


class TestMarginal:
    def test_coin_prior(self, coin_ensemble, coin_x):
        dist = marginal_predictive(coin_ensemble, coin_x)
        assert math.exp(dist[1]) == pytest.approx(0.5, abs=1e-12)
        assert marginal_entropy(coin_ensemble, coin_x) == pytest.approx(
            math.log(2), abs=1e-12)

    def test_single_sample_is_member(self, coin_ensemble, coin_x):
        one = coin_ensemble.take([2])
        dist = marginal_predictive(one, coin_x)
        assert math.exp(dist[1]) == pytest.approx(0.8, abs=1e-12)

    def test_rows_normalized(self, dropout_16, cluster_data):
        _, evald = cluster_data
        rows = marginal_log_probs(dropout_16, evald.xs[:12])
        sums = np.log(np.exp(rows).sum(axis=1))
        assert np.max(np.abs(sums)) < 1e-9


class TestJointLogProb:
    def test_coin_pairs(self, coin_ensemble, coin_x):
        xs = np.stack([coin_x, coin_x])
        assert math.exp(joint_log_prob(coin_ensemble, xs, [1, 1])) == \
            pytest.approx(0.31, abs=1e-12)
        assert math.exp(joint_log_prob(coin_ensemble, xs, [1, 0])) == \
            pytest.approx(0.19, abs=1e-12)

    def test_does_not_factorize_with_shared_draws(self, coin_ensemble, coin_x):
        # q(1,1) = 0.31 > 0.25 = q(1)q(1): parameters correlate the labels
        xs = np.stack([coin_x, coin_x])
        joint = joint_log_prob(coin_ensemble, xs, [1, 1])
        marg = marginal_predictive(coin_ensemble, coin_x)[1]
        assert joint > 2 * marg + 1e-6

    def test_single_point_equals_marginal(self, coin_ensemble, coin_x):
        joint = joint_log_prob(coin_ensemble, coin_x[None, :], [1])
        assert joint == pytest.approx(
            marginal_predictive(coin_ensemble, coin_x)[1], abs=1e-12)

    def test_assignment_validation(self, coin_ensemble, coin_x):
        xs = np.stack([coin_x, coin_x])
        with pytest.raises(ValueError):
            joint_log_prob(coin_ensemble, xs, [1])
        with pytest.raises(ValueError):
            joint_log_prob(coin_ensemble, xs, [1, 2])

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=25, deadline=None)
    def test_matches_oracle_on_random_worlds(self, seed):
        gen = np.random.default_rng(seed)
        world = random_world(gen, max_hypotheses=5, max_classes=3, max_vocab=4)
        ens = _world_ensemble(world)
        pairs = sample_world_dataset(world, 3, gen)
        xs = np.stack([x for x, _ in pairs])
        ys = tuple(y for _, y in pairs)
        table = oracle_joint_predictive(world, [x for x, _ in pairs])
        assert math.exp(joint_log_prob(ens, xs, ys)) == pytest.approx(
            table[ys], abs=1e-12)

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=25, deadline=None)
    def test_marginalization_consistency(self, seed):
        # summing the last label out of the n-point joint recovers the
        # (n-1)-point joint
        gen = np.random.default_rng(seed)
        world = random_world(gen, max_hypotheses=5, max_classes=3, max_vocab=4)
        ens = _world_ensemble(world)
        pairs = sample_world_dataset(world, 3, gen)
        xs = np.stack([x for x, _ in pairs])
        ys = [y for _, y in pairs]
        c = world.num_classes
        total = sum(
            math.exp(joint_log_prob(ens, xs, ys[:2] + [label]))
            for label in range(c))
        shorter = math.exp(joint_log_prob(ens, xs[:2], ys[:2]))
        assert total == pytest.approx(shorter, abs=1e-10)


class TestJointEntropyExact:
    def test_single_uniform_binary(self, coin_ensemble, coin_x):
        h = joint_entropy_exact(coin_ensemble, coin_x[None, :])
        assert h == pytest.approx(math.log(2), abs=1e-12)

    def test_coin_two_flips(self, coin_ensemble, coin_x):
        expect = -2 * 0.31 * math.log(0.31) - 2 * 0.19 * math.log(0.19)
        h = joint_entropy_exact(coin_ensemble, np.stack([coin_x, coin_x]))
        assert h == pytest.approx(expect, abs=1e-12)

    def test_single_sample_factorizes(self, dropout_16, cluster_data):
        _, evald = cluster_data
        one = dropout_16.take([3])
        xs = evald.xs[:4]
        h = joint_entropy_exact(one, xs)
        per_point = sum(
            CategoricalLogDist(row).entropy()
            for row in marginal_log_probs(one, xs))
        assert h == pytest.approx(per_point, abs=1e-10)

    def test_enumeration_limit_enforced(self, dropout_16, cluster_data):
        _, evald = cluster_data
        with pytest.raises(ValueError, match="use joint_entropy_mc"):
            joint_entropy_exact(dropout_16, evald.xs[:4], enumeration_limit=100)

    def test_matches_oracle_on_random_worlds(self):
        gen = np.random.default_rng(77)
        for _ in range(10):
            world = random_world(gen, max_hypotheses=6, max_classes=3,
                                 max_vocab=4)
            ens = _world_ensemble(world)
            xs = np.stack([x for x, _ in sample_world_dataset(world, 4, gen)])
            assert joint_entropy_exact(ens, xs) == pytest.approx(
                oracle_joint_entropy(world, list(xs)), abs=1e-9)


class TestJointEntropyMc:
    def test_covers_exact_value(self, coin_ensemble, coin_x):
        xs = np.stack([coin_x, coin_x])
        exact = joint_entropy_exact(coin_ensemble, xs)
        est, se = joint_entropy_mc(coin_ensemble, xs, 100_000, RngStream(13))
        assert se > 0
        assert abs(est - exact) < 3 * se

    def test_deterministic_given_stream(self, coin_ensemble, coin_x):
        xs = np.stack([coin_x, coin_x])
        a = joint_entropy_mc(coin_ensemble, xs, 500, RngStream(3))
        b = joint_entropy_mc(coin_ensemble, xs, 500, RngStream(3))
        assert a == b

    def test_single_sample_tracks_factorized_entropy(self, dropout_16,
                                                     cluster_data):
        _, evald = cluster_data
        one = dropout_16.take([0])
        xs = evald.xs[:3]
        exact = joint_entropy_exact(one, xs)
        est, se = joint_entropy_mc(one, xs, 50_000, RngStream(4))
        assert abs(est - exact) < 4 * max(se, 1e-4)

    def test_draw_count_validated(self, coin_ensemble, coin_x):
        with pytest.raises(ValueError):
            joint_entropy_mc(coin_ensemble, coin_x[None, :], 0, RngStream(0))
        est, se = joint_entropy_mc(coin_ensemble, coin_x[None, :], 1,
                                   RngStream(0))
        assert se == 0.0 and math.isfinite(est)

    def test_error_shrinks_with_draws(self, coin_ensemble, coin_x):
        xs = np.stack([coin_x, coin_x])
        _, se_small = joint_entropy_mc(coin_ensemble, xs, 1_000, RngStream(5))
        _, se_large = joint_entropy_mc(coin_ensemble, xs, 100_000, RngStream(5))
        assert se_large < se_small / 5  # ~ M^(-1/2)
