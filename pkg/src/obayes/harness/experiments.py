"""The three evaluation protocols.

- obi_vs_retrain_eval: along a fixed acquisition sequence, compare a
  model that ignores the next k points (baseline), the same model
  reweighted on them (OBI), and a model retrained with them.
- repeated_pool_benchmark: matched acquisition campaigns on a pool with
  duplicated examples, recording duplicate counts and batch total
  correlation per strategy.
- al_with_obi: acquisition driven by the reweighted model, retraining
  only when the effective sample size drops below a threshold.

All protocols stream MetricRecords; emission to disk lives in io.
"""

from __future__ import annotations

import numpy as np

from ..acquisition import (
    bald_scores,
    batch_bald_gains,
    epig_scores_singleton,
    run_acquisition,
    score_pool,
)
from ..data import Dataset, DuplicationSpec, duplicate_pool, generate_cluster_dataset, load_idx_dataset, split
from ..infometrics import (
    MetricRecord,
    accuracy_from_rows,
    cross_entropy_from_rows,
    total_correlation,
)
from ..models import (
    MlpArchitecture,
    TrainConfig,
    exact_grid_posterior,
    grid_family_from_world,
    train_deep_ensemble,
    train_mc_dropout,
)
from ..models.mlp import init_deep_ensemble, init_dropout_ensemble
from ..numerics import RngStream
from ..obi import (
    PosteriorCollapseError,
    obi_bootstrap,
    obi_init,
    obi_observe,
    obi_observe_many,
    obi_predict_batch,
)
from ..oracle import GridWorld, coin_world, sample_world_dataset
from ..predictive import marginal_log_probs
from .config import ExperimentConfig


def _load_world(spec) -> GridWorld:
    if spec.grid_name == "coin":
        return coin_world()
    with open(spec.grid_name) as fh:
        return GridWorld.from_json(fh.read())


def world_dataset(world: GridWorld, n: int, stream: RngStream) -> Dataset:
    """Draws from the world's true hypothesis, as a Dataset."""
    pairs = sample_world_dataset(world, n, stream.generator())
    dim = world.vocabulary.shape[1]
    xs = np.stack([x for x, _ in pairs]) if pairs else np.zeros((0, dim))
    ys = np.array([y for _, y in pairs], dtype=np.int64)
    return Dataset(xs=xs, ys=ys, num_classes=world.num_classes,
                   provenance={"source": f"grid world {world.name}"})


def build_splits(config: ExperimentConfig, root: RngStream):
    """Pool, held-out eval set, and seed training set for one run.

    The three are disjoint by construction (independent draws from the
    same generative process, or a hard split for file-backed data).
    """
    spec = config.data
    if spec.kind == "clusters":
        pool = generate_cluster_dataset(spec.n_per_class, spec.num_classes,
                                        spec.dim, spec.spread,
                                        root.derive("pool"))
        eval_set = generate_cluster_dataset(spec.eval_per_class,
                                            spec.num_classes, spec.dim,
                                            spec.spread, root.derive("eval"))
        per_class = max(1, config.seed_train_size // spec.num_classes)
        seed_train = generate_cluster_dataset(per_class, spec.num_classes,
                                              spec.dim, spec.spread,
                                              root.derive("seed_train"))
        return pool, eval_set, seed_train, None
    if spec.kind == "grid":
        world = _load_world(spec)
        pool = world_dataset(world, spec.grid_pool_size, root.derive("pool"))
        eval_set = world_dataset(world, spec.grid_eval_size,
                                 root.derive("eval"))
        seed_train = world_dataset(world, config.seed_train_size,
                                   root.derive("seed_train"))
        return pool, eval_set, seed_train, world
    full = load_idx_dataset(spec.images_path, spec.labels_path, spec.limit)
    pool, eval_set, seed_train = split(full, [0.7, 0.25, 0.05],
                                       root.derive("split"))
    if len(seed_train) > config.seed_train_size:
        seed_train = seed_train.subset(range(config.seed_train_size),
                                       "seed train")
    return pool, eval_set, seed_train, None


def model_factory(spec, in_dim: int, num_classes: int,
                  world: GridWorld | None = None):
    """Deterministic trainer: (train_set, stream) -> PosteriorEnsemble."""
    if spec.kind == "grid":
        if world is None:
            raise ValueError("grid model requires grid data")
        family = grid_family_from_world(world)
        with np.errstate(divide="ignore"):
            prior = np.log(world.prior)

        def grid_factory(train: Dataset, stream: RngStream):
            return exact_grid_posterior(family, prior, train.examples())

        return grid_factory

    arch = MlpArchitecture(in_dim=in_dim, hidden=spec.hidden,
                           num_classes=num_classes,
                           dropout_rate=spec.dropout_rate
                           if spec.kind == "mc_dropout" else 0.0)

    def net_factory(train: Dataset, stream: RngStream):
        cfg = TrainConfig(epochs=spec.epochs, batch_size=spec.batch_size,
                          learning_rate=spec.learning_rate,
                          seed=stream.derive("train").stream_id)
        if spec.kind == "deep_ensemble":
            if len(train) == 0:
                return init_deep_ensemble(arch, spec.ensemble_size,
                                          stream.derive("init"))
            return train_deep_ensemble(train, arch, cfg, spec.ensemble_size)
        if len(train) == 0:
            return init_dropout_ensemble(arch, spec.ensemble_size,
                                         stream.derive("init"))
        return train_mc_dropout(train, arch, cfg, spec.ensemble_size,
                                stream.derive("masks"))

    return net_factory


def generate_sequences(config: ExperimentConfig, pool: Dataset,
                       eval_set: Dataset, factory,
                       root: RngStream) -> dict:
    """The matched pair of conditioning streams: active and random."""
    active = run_acquisition(config.strategy, factory, pool, eval_set,
                             config.num_steps, retrain_every=1,
                             rng=root.derive("sequence", "active"))
    random_seq = run_acquisition("random", factory, pool, eval_set,
                                 config.num_steps, retrain_every=1,
                                 rng=root.derive("sequence", "random"))
    return {"active": active, "random": random_seq}


def _eval_records(rows, eval_set, base: dict, flag: str = "") -> list:
    ce = cross_entropy_from_rows(rows, eval_set.ys)
    acc = accuracy_from_rows(rows, eval_set.ys)
    ce_flag = flag or ("collapse" if np.isinf(ce) else "")
    return [MetricRecord(metric="cross_entropy", value=ce, flag=ce_flag, **base),
            MetricRecord(metric="accuracy", value=acc, flag=flag, **base)]


def obi_vs_retrain_eval(config: ExperimentConfig,
                        sequences: dict | None = None) -> list:
    """Reweighting vs retraining along fixed acquisition sequences.

    For each prefix length t (from eval_start), each trial trains models
    on the first t and first t+k sequence points; OBI reweights the
    t-model with the k points in between, once per bootstrap sub-trial.
    Emits cross-entropy and accuracy for all three branches per cell,
    plus the OBI effective sample size.
    """
    root = RngStream(seed=config.seed)
    pool, eval_set, _, world = build_splits(config, root)
    factory = model_factory(config.model, pool.dim, pool.num_classes, world)
    if sequences is None:
        sequences = generate_sequences(config, pool, eval_set, factory, root)
    k = config.lookahead
    t_values = list(range(config.eval_start,
                          config.num_steps - k + 1))
    if not t_values:
        raise ValueError("eval_start leaves no evaluation steps")
    records = []
    for name in sorted(sequences):
        seq = sequences[name]
        if len(seq) < config.num_steps:
            raise ValueError("sequence shorter than num_steps")
        seq_data = seq.examples(pool)
        sizes = sorted({t for t in t_values} | {t + k for t in t_values})
        for trial in range(config.trials):
            models = {size: factory(seq_data.subset(range(size), "prefix"),
                                    root.derive("model", name, trial, size))
                      for size in sizes}
            eval_rows = {size: marginal_log_probs(models[size], eval_set.xs)
                         for size in sizes}
            for t in t_values:
                next_k = [seq_data.example(i) for i in range(t, t + k)]
                state0 = obi_init(models[t])
                for sub in range(config.obi_subtrials):
                    boot = obi_bootstrap(
                        state0, config.bootstrap_size,
                        root.derive("bootstrap", name, trial, t, sub))
                    coords = dict(trial=trial, sub_trial=sub, step=t, n=k,
                                  strategy=seq.strategy, name=name)
                    records += _eval_records(eval_rows[t], eval_set,
                                             dict(coords, branch="baseline"))
                    records += _eval_records(eval_rows[t + k], eval_set,
                                             dict(coords, branch="retrain"))
                    try:
                        conditioned = obi_observe_many(boot, next_k)
                        rows = obi_predict_batch(conditioned, eval_set.xs)
                        records += _eval_records(rows, eval_set,
                                                 dict(coords, branch="obi"))
                        records.append(MetricRecord(
                            metric="ess", value=conditioned.ess,
                            branch="obi", **coords))
                    except PosteriorCollapseError:
                        records.append(MetricRecord(
                            metric="cross_entropy", value=float("inf"),
                            branch="obi", flag="collapse", **coords))
                        records.append(MetricRecord(
                            metric="accuracy", value=0.0, branch="obi",
                            flag="collapse", **coords))
                        records.append(MetricRecord(
                            metric="ess", value=0.0, branch="obi",
                            flag="collapse", **coords))
    return records


def _pick_top_k(scores: np.ndarray, allowed: np.ndarray, m: int) -> list:
    """m highest-scoring allowed indices, ties to the lowest index."""
    picks = []
    mask = allowed.copy()
    for _ in range(m):
        masked = np.where(mask, scores, -np.inf)
        if not np.any(masked > -np.inf):
            remaining = np.flatnonzero(mask)
            if remaining.size == 0:
                raise ValueError("pool exhausted")
            pick = int(remaining[0])
        else:
            pick = int(np.argmax(masked))
        picks.append(pick)
        mask[pick] = False
    return picks


def _pick_batch(strategy: str, ensemble, pool: Dataset, m: int,
                allowed: np.ndarray, stream: RngStream) -> list:
    if strategy == "random":
        candidates = np.flatnonzero(allowed)
        if candidates.size < m:
            raise ValueError("pool exhausted")
        gen = stream.generator()
        return [int(i) for i in gen.choice(candidates, size=m, replace=False)]
    if strategy == "bald":
        return _pick_top_k(bald_scores(ensemble, pool.xs), allowed, m)
    if strategy == "epig":
        return _pick_top_k(epig_scores_singleton(ensemble, pool.xs, pool.xs),
                           allowed, m)
    if strategy == "batch_bald":
        picks: list = []
        mask = allowed.copy()
        for _ in range(m):
            gains = batch_bald_gains(ensemble, pool.xs, picks,
                                     allowed=np.flatnonzero(mask))
            pick = int(np.argmax(gains))
            picks.append(pick)
            mask[pick] = False
        return picks
    raise ValueError(f"unknown strategy: {strategy}")


def repeated_pool_benchmark(config: ExperimentConfig) -> list:
    """Matched batch-acquisition campaigns on a duplicated pool.

    Every strategy sees the same duplicated pool, seed training set, and
    eval set. Per batch: eval metrics of the current model, the number of
    within-batch duplicates (same original example), and the batch's
    total correlation, both over the full batch and over its distinct
    originals.
    """
    root = RngStream(seed=config.seed)
    base_pool, eval_set, seed_train, world = build_splits(config, root)
    if config.duplication_factor > 1:
        pool = duplicate_pool(base_pool,
                              DuplicationSpec(config.duplication_factor),
                              root.derive("duplicate"))
    else:
        pool = base_pool
    origins = pool.origin_indices if pool.origin_indices is not None \
        else np.arange(len(pool))
    factory = model_factory(config.model, pool.dim, pool.num_classes, world)
    m = config.acquisition_batch_size
    label = f"R{config.duplication_factor}"
    records = []
    for strategy in ("random", "bald", "batch_bald", "epig"):
        acquired: list = []
        allowed = np.ones(len(pool), dtype=bool)
        for b in range(config.num_batches):
            train = seed_train.concat(pool.subset(acquired, "acquired")) \
                if acquired else seed_train
            ensemble = factory(train, root.derive("model", strategy, b))
            rows = marginal_log_probs(ensemble, eval_set.xs)
            coords = dict(step=b, strategy=strategy, name=label)
            records += _eval_records(rows, eval_set, coords)
            batch = _pick_batch(strategy, ensemble, pool, m, allowed,
                                root.derive("batch", strategy, b))
            for pick in batch:
                allowed[pick] = False
                acquired.append(pick)
            batch_origins = [int(origins[i]) for i in batch]
            dup_count = m - len(set(batch_origins))
            records.append(MetricRecord(metric="duplicate_count",
                                        value=float(dup_count), **coords))
            tc_full = total_correlation(ensemble, pool.xs[batch])
            records.append(MetricRecord(metric="total_correlation",
                                        value=tc_full, **coords))
            distinct = sorted({orig: i for i, orig in
                               zip(batch, batch_origins)}.values())
            tc_distinct = 0.0 if len(distinct) < 2 else \
                total_correlation(ensemble, pool.xs[distinct])
            records.append(MetricRecord(metric="total_correlation_distinct",
                                        value=tc_distinct, **coords))
        train = seed_train.concat(pool.subset(acquired, "acquired"))
        final = factory(train, root.derive("model", strategy,
                                           config.num_batches))
        rows = marginal_log_probs(final, eval_set.xs)
        records += _eval_records(rows, eval_set,
                                 dict(step=config.num_batches,
                                      strategy=strategy, name=label))
    return records


def al_with_obi(config: ExperimentConfig) -> list:
    """Acquisition with reweighting between retrains.

    The scoring and prediction model is the reweighted state; a full
    retrain (on seed train plus everything acquired) triggers only when
    the effective sample size falls below the threshold or the state
    collapses. With threshold = ensemble size this degenerates to
    retraining after every acquisition.
    """
    threshold = config.ess_retrain_threshold
    size = config.model.ensemble_size
    if not 0.0 < threshold <= size:
        raise ValueError("ess_retrain_threshold must lie in (0, ensemble size]")
    root = RngStream(seed=config.seed)
    pool, eval_set, seed_train, world = build_splits(config, root)
    base_factory = model_factory(config.model, pool.dim, pool.num_classes, world)

    def factory(acquired_subset: Dataset, stream: RngStream):
        return base_factory(seed_train.concat(acquired_subset), stream)

    # Derivation labels mirror run_acquisition so a threshold of S
    # reproduces its retrain-every-step trajectory exactly.
    rng = root.derive("acquisition")
    ensemble = factory(pool.subset([], "acquired"), rng.derive("retrain", 0))
    state = obi_init(ensemble)
    random_order = rng.derive("random_order").generator().permutation(len(pool))
    allowed = np.ones(len(pool), dtype=bool)
    acquired: list = []
    retrain_count = 0
    records = []
    for step in range(config.num_steps):
        if config.strategy == "random":
            pick = int(random_order[step])
        else:
            scores = score_pool(config.strategy, state.as_ensemble(), pool,
                                eval_set)
            masked = np.where(allowed, scores, -np.inf)
            if not np.any(masked > -np.inf):
                remaining = np.flatnonzero(allowed)
                if remaining.size == 0:
                    raise ValueError("pool exhausted")
                pick = int(remaining[0])
            else:
                pick = int(np.argmax(masked))
        allowed[pick] = False
        acquired.append(pick)
        collapsed = False
        try:
            state = obi_observe(state, pool.example(pick))
        except PosteriorCollapseError:
            collapsed = True
        coords = dict(step=step, strategy=config.strategy, name="obi_policy")
        flag = "collapse" if collapsed else ""
        rows = obi_predict_batch(state, eval_set.xs)
        records += _eval_records(rows, eval_set, dict(coords, branch="obi"),
                                 flag=flag)
        records.append(MetricRecord(metric="ess", value=state.ess,
                                    branch="obi", flag=flag, **coords))
        records.append(MetricRecord(metric="acquired_pool_index",
                                    value=float(pick), **coords))
        retrain = collapsed or state.ess < threshold
        if retrain:
            retrain_count += 1
            ensemble = factory(pool.subset(acquired, "acquired"),
                               rng.derive("retrain", step + 1))
            state = obi_init(ensemble)
        records.append(MetricRecord(metric="retrain_event",
                                    value=float(int(retrain)), **coords))
    records.append(MetricRecord(metric="retrain_count", name="obi_policy",
                                strategy=config.strategy,
                                value=float(retrain_count)))
    records.append(MetricRecord(metric="retrain_count", name="always_retrain",
                                strategy=config.strategy,
                                value=float(config.num_steps)))
    return records
