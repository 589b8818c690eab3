"""Experiment configuration, hashing, and run manifests.

Configs are plain dataclasses serialized to JSON. The config hash covers
the canonical JSON (sorted keys), so two runs agree on a hash exactly
when every knob and the root seed agree; the hash is stamped into
records and manifests for reproduction.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone


@dataclass(frozen=True)
class DataSpec:
    """Where examples come from: synthetic clusters, IDX files, or a grid."""

    kind: str = "clusters"
    n_per_class: int = 40
    num_classes: int = 4
    dim: int = 2
    spread: float = 0.45
    eval_per_class: int = 50
    images_path: str | None = None
    labels_path: str | None = None
    limit: int | None = None
    grid_name: str = "coin"
    grid_pool_size: int = 12
    grid_eval_size: int = 64

    def __post_init__(self):
        if self.kind not in ("clusters", "idx", "grid"):
            raise ValueError(f"unknown data kind: {self.kind}")
        if self.kind == "clusters" and (self.n_per_class < 1 or self.num_classes < 2):
            raise ValueError("cluster sizes must be positive")
        if self.kind == "idx" and (self.images_path is None or self.labels_path is None):
            raise ValueError("idx data needs images_path and labels_path")


@dataclass(frozen=True)
class ModelSpec:
    """Posterior approximation to train over the data."""

    kind: str = "mc_dropout"
    hidden: int = 64
    dropout_rate: float = 0.5
    epochs: int = 100
    batch_size: int = 32
    learning_rate: float = 1e-3
    ensemble_size: int = 128

    def __post_init__(self):
        if self.kind not in ("mc_dropout", "deep_ensemble", "grid"):
            raise ValueError(f"unknown model kind: {self.kind}")
        if self.ensemble_size < 1:
            raise ValueError("ensemble size must be positive")


@dataclass(frozen=True)
class ExperimentConfig:
    data: DataSpec = field(default_factory=DataSpec)
    model: ModelSpec = field(default_factory=ModelSpec)
    strategy: str = "active_sampling"
    num_steps: int = 70
    lookahead: int = 5
    trials: int = 5
    obi_subtrials: int = 5
    bootstrap_size: int = 64
    eval_start: int = 20
    ess_retrain_threshold: float = 12.8
    duplication_factor: int = 1
    acquisition_batch_size: int = 4
    num_batches: int = 10
    seed_train_size: int = 8
    mc_draws: int = 1024
    seed: int = 0
    out_dir: str = "results"

    def __post_init__(self):
        positive = {"num_steps": self.num_steps, "trials": self.trials,
                    "obi_subtrials": self.obi_subtrials,
                    "bootstrap_size": self.bootstrap_size,
                    "duplication_factor": self.duplication_factor,
                    "acquisition_batch_size": self.acquisition_batch_size,
                    "num_batches": self.num_batches}
        for name, value in positive.items():
            if value < 1:
                raise ValueError(f"{name} must be positive")
        if self.lookahead < 0:
            raise ValueError("lookahead must be non-negative")
        if self.eval_start < 0:
            raise ValueError("eval_start must be non-negative")
        if self.bootstrap_size > self.model.ensemble_size:
            raise ValueError("bootstrap_size cannot exceed ensemble size")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")


def config_to_json(config: ExperimentConfig) -> str:
    return json.dumps(asdict(config), sort_keys=True, indent=2) + "\n"


def config_from_dict(raw: dict) -> ExperimentConfig:
    raw = dict(raw)
    data = DataSpec(**raw.pop("data", {}))
    model = ModelSpec(**raw.pop("model", {}))
    return ExperimentConfig(data=data, model=model, **raw)


def config_from_json(text: str) -> ExperimentConfig:
    return config_from_dict(json.loads(text))


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return config_from_json(fh.read())


def config_hash(config: ExperimentConfig) -> str:
    canonical = json.dumps(asdict(config), sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def with_overrides(config: ExperimentConfig, **kwargs) -> ExperimentConfig:
    """Replace top-level fields; nested specs are replaced wholesale."""
    return replace(config, **kwargs)


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce a finished run."""

    config_hash: str
    seed: int
    artifacts: tuple
    created: str
    version: str

    @staticmethod
    def create(config: ExperimentConfig, artifacts=()) -> "RunManifest":
        from .. import __version__
        return RunManifest(config_hash=config_hash(config), seed=config.seed,
                           artifacts=tuple(artifacts),
                           created=datetime.now(timezone.utc).isoformat(),
                           version=__version__)

    def to_json(self) -> str:
        return json.dumps({"config_hash": self.config_hash, "seed": self.seed,
                           "artifacts": list(self.artifacts),
                           "created": self.created, "version": self.version},
                          sort_keys=True, indent=2) + "\n"
