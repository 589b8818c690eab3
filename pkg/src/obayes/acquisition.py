"""Pool scoring and selection.

Strategies: random, BALD (marginal mutual information), batch-greedy
BALD (joint-entropy objective, immune to duplicated pools), EPIG
(information about eval-point labels), and active sampling (label-aware
conditioned eval loss). Selection is deterministic: the argmax wins and
exact score ties resolve to the lowest pool index.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Dataset
from .models import PosteriorEnsemble, forward_log_probs
from .numerics import RngStream, log_sum_exp_axis
from .predictive import ENUMERATION_LIMIT, joint_entropy_exact, joint_entropy_mc

STRATEGIES = ("random", "bald", "batch_bald", "epig", "active_sampling")

# Label-assignment draws when a conditional entropy cannot be enumerated.
MC_ASSIGNMENT_DRAWS = 1024


@dataclass(frozen=True)
class CandidateBatch:
    """Pool indices chosen for one batch, with per-pick greedy scores."""

    indices: tuple
    scores: tuple

    def __post_init__(self):
        if len(self.indices) < 1:
            raise ValueError("batch must contain at least one index")
        if len(self.indices) != len(self.scores):
            raise ValueError("one score per index required")

    @property
    def size(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class AcquisitionStep:
    step: int
    pool_index: int
    original_index: int
    y: int
    score: float
    strategy: str


@dataclass(frozen=True)
class AcquisitionSequence:
    """Ordered picks from a fixed pool, with scores and provenance."""

    steps: tuple
    strategy: str
    seed: int
    origin: str = ""

    def __post_init__(self):
        for rec in self.steps:
            if not np.isfinite(rec.score):
                raise ValueError("acquisition scores must be finite")

    def __len__(self) -> int:
        return len(self.steps)

    def pool_indices(self) -> list:
        return [rec.pool_index for rec in self.steps]

    def examples(self, pool: Dataset) -> Dataset:
        return pool.subset(self.pool_indices(), "acquisition sequence")

    def save(self, path) -> None:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "pool_index", "original_index", "y",
                            "score", "strategy", "seed"])
            for rec in self.steps:
                writer.writerow([rec.step, rec.pool_index, rec.original_index,
                                 rec.y, repr(float(rec.score)), rec.strategy,
                                 self.seed])
        manifest = {"strategy": self.strategy, "seed": self.seed,
                    "origin": self.origin, "num_steps": len(self.steps)}
        path.with_suffix(".manifest.json").write_text(
            json.dumps(manifest, sort_keys=True, indent=2) + "\n")

    @staticmethod
    def load(path) -> "AcquisitionSequence":
        path = Path(path)
        manifest = json.loads(path.with_suffix(".manifest.json").read_text())
        steps = []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                steps.append(AcquisitionStep(
                    step=int(row["step"]), pool_index=int(row["pool_index"]),
                    original_index=int(row["original_index"]),
                    y=int(row["y"]), score=float(row["score"]),
                    strategy=row["strategy"]))
        return AcquisitionSequence(steps=tuple(steps),
                                   strategy=manifest["strategy"],
                                   seed=manifest["seed"],
                                   origin=manifest.get("origin", ""))


def _entropy_rows(log_rows: np.ndarray) -> np.ndarray:
    """Entropy along the last axis of normalized log-prob rows."""
    finite = np.isfinite(log_rows)
    contrib = np.zeros_like(log_rows)
    contrib[finite] = np.exp(log_rows[finite]) * log_rows[finite]
    return -contrib.sum(axis=-1)


def _mixture_rows(log_w: np.ndarray, lp: np.ndarray) -> np.ndarray:
    """Mixture log-prob rows from (S,) weights and (S, N, C) likelihoods."""
    return log_sum_exp_axis(log_w[:, None, None] + lp, axis=0)


def bald_scores(ensemble: PosteriorEnsemble, xs) -> np.ndarray:
    """H[Y|x] minus the weighted mean per-sample entropy, per input row."""
    lp = forward_log_probs(ensemble, xs)
    log_w = ensemble.normalized_log_weights()
    marginal = _entropy_rows(_mixture_rows(log_w, lp))        # (N,)
    per_sample = _entropy_rows(lp)                            # (S, N)
    conditional = np.exp(log_w) @ per_sample
    return marginal - conditional


def bald_score(ensemble: PosteriorEnsemble, x) -> float:
    return float(bald_scores(ensemble, np.atleast_2d(np.asarray(x, dtype=np.float64)))[0])


def _expected_conditional_entropies(ensemble: PosteriorEnsemble, lp) -> np.ndarray:
    """E_w[H[Y|x,w]] per pool point; lp is the (S, N, C) forward pass."""
    log_w = ensemble.normalized_log_weights()
    return np.exp(log_w) @ _entropy_rows(lp)


def _joint_entropy_from_per_sample(log_w: np.ndarray,
                                   per_sample: np.ndarray) -> float:
    """Entropy given per-sample assignment log-likelihoods (S, A)."""
    lq = log_sum_exp_axis(log_w[:, None] + per_sample, axis=0)
    finite = np.isfinite(lq)
    return float(-np.sum(np.exp(lq[finite]) * lq[finite]))


def batch_bald_gains(ensemble: PosteriorEnsemble, pool_xs,
                     batch_indices, allowed=None,
                     enumeration_limit: int = ENUMERATION_LIMIT) -> np.ndarray:
    """Greedy joint-information gain of adding each pool point to a batch.

    The batch objective is H_q[Y_batch] - sum_i E_w H[Y_i|x_i,w]; the gain
    of a candidate is the objective increase when it joins `batch_indices`.
    For an empty batch this reduces to BALD. Entries not in `allowed` are
    -inf so an argmax over the result skips them.
    """
    pool_xs = np.atleast_2d(np.asarray(pool_xs, dtype=np.float64))
    lp = forward_log_probs(ensemble, pool_xs)                 # (S, P, C)
    log_w = ensemble.normalized_log_weights()
    num_classes = ensemble.num_classes
    batch_indices = list(batch_indices)
    if num_classes ** (len(batch_indices) + 1) > enumeration_limit:
        raise ValueError("enumeration limit exceeded; use joint_entropy_mc")
    cond = _expected_conditional_entropies(ensemble, lp)      # (P,)
    # Per-sample log-likelihood of every assignment to the current batch.
    per_sample = np.zeros((ensemble.size, 1))
    for idx in batch_indices:
        per_sample = (per_sample[:, :, None] + lp[:, idx, None, :]).reshape(
            ensemble.size, -1)
    base_joint = _joint_entropy_from_per_sample(log_w, per_sample)
    gains = np.full(pool_xs.shape[0], -np.inf)
    candidates = range(pool_xs.shape[0]) if allowed is None else allowed
    for i in candidates:
        extended = (per_sample[:, :, None] + lp[:, i, None, :]).reshape(
            ensemble.size, -1)
        joint = _joint_entropy_from_per_sample(log_w, extended)
        gains[i] = joint - base_joint - cond[i]
    return gains


def batch_bald_greedy(ensemble: PosteriorEnsemble, pool, m: int,
                      allow_reselection: bool = False,
                      rng: RngStream | None = None,
                      enumeration_limit: int = ENUMERATION_LIMIT) -> CandidateBatch:
    """Greedy batch maximizing the joint mutual-information objective.

    Successive picks condition on the batch's joint predictive, so exact
    duplicates of an already-chosen point lose almost all their score and
    the batch spreads across distinct originals. rng is accepted for
    signature compatibility with sampled variants; the exact path ignores it.
    """
    pool_xs = pool.xs if isinstance(pool, Dataset) else np.asarray(pool)
    pool_size = np.atleast_2d(pool_xs).shape[0]
    if m < 1:
        raise ValueError("batch size must be positive")
    if not allow_reselection and m > pool_size:
        raise ValueError("batch larger than pool without reselection")
    chosen: list = []
    scores: list = []
    for _ in range(m):
        allowed = None if allow_reselection else \
            [i for i in range(pool_size) if i not in set(chosen)]
        gains = batch_bald_gains(ensemble, pool_xs, chosen, allowed=allowed,
                                 enumeration_limit=enumeration_limit)
        pick = int(np.argmax(gains))
        chosen.append(pick)
        scores.append(float(gains[pick]))
    return CandidateBatch(indices=tuple(chosen), scores=tuple(scores))


def epig_scores_singleton(ensemble: PosteriorEnsemble, pool_xs,
                          eval_xs) -> np.ndarray:
    """EPIG of each pool point against an evaluation input set.

    Uses the pairwise identity I[Y_eval; Y_c | x_eval, x_c] =
    H[Y_eval] + H[Y_c] - H[Y_eval, Y_c], averaged over eval inputs, with
    the pair entropy enumerated exactly.
    """
    pool_xs = np.atleast_2d(np.asarray(pool_xs, dtype=np.float64))
    eval_xs = np.atleast_2d(np.asarray(eval_xs, dtype=np.float64))
    lp_p = forward_log_probs(ensemble, pool_xs)               # (S, P, C)
    lp_e = forward_log_probs(ensemble, eval_xs)               # (S, N, C)
    log_w = ensemble.normalized_log_weights()
    h_pool = _entropy_rows(_mixture_rows(log_w, lp_p))        # (P,)
    h_eval = _entropy_rows(_mixture_rows(log_w, lp_e))        # (N,)
    num_eval = eval_xs.shape[0]
    scores = np.empty(pool_xs.shape[0])
    for c in range(pool_xs.shape[0]):
        # (S, N, C, C): candidate label on the last axis.
        pair = lp_e[:, :, :, None] + lp_p[:, c, None, None, :]
        lq = log_sum_exp_axis(log_w[:, None, None, None] + pair, axis=0)
        h_pair = _entropy_rows(lq.reshape(num_eval, -1))      # (N,)
        scores[c] = float(np.mean(h_eval + h_pool[c] - h_pair))
    return scores


def epig_score(ensemble: PosteriorEnsemble, candidate_xs, eval_xs,
               rng: RngStream | None = None,
               mc_draws: int = MC_ASSIGNMENT_DRAWS,
               enumeration_limit: int = ENUMERATION_LIMIT) -> float:
    """Mean information a candidate set's labels carry about eval labels.

    Computed as mean_x H[Y|x] + H[Y_cand] - H[Y, Y_cand | x, x_cand];
    joint entropies are enumerated when feasible, otherwise estimated by
    MC with a derived stream per term.
    """
    candidate_xs = np.atleast_2d(np.asarray(candidate_xs, dtype=np.float64))
    eval_xs = np.atleast_2d(np.asarray(eval_xs, dtype=np.float64))
    if candidate_xs.shape[0] == 0 or eval_xs.shape[0] == 0:
        raise ValueError("empty reduction")
    n_cand = candidate_xs.shape[0]
    c = ensemble.num_classes

    def entropy_of(xs, label):
        if c ** xs.shape[0] <= enumeration_limit:
            return joint_entropy_exact(ensemble, xs, enumeration_limit)
        if rng is None:
            raise ValueError("enumeration limit exceeded; use joint_entropy_mc")
        return joint_entropy_mc(ensemble, xs, mc_draws,
                                rng.derive("epig", label))[0]

    if c ** (n_cand + 1) <= enumeration_limit and n_cand == 1:
        return float(np.mean(epig_scores_singleton(ensemble, candidate_xs,
                                                   eval_xs)))
    h_cand = entropy_of(candidate_xs, -1)
    lp_e = forward_log_probs(ensemble, eval_xs)
    log_w = ensemble.normalized_log_weights()
    h_eval = _entropy_rows(_mixture_rows(log_w, lp_e))
    total = 0.0
    for i in range(eval_xs.shape[0]):
        joint = entropy_of(np.concatenate([eval_xs[i:i + 1], candidate_xs]), i)
        total += float(h_eval[i]) + h_cand - joint
    return total / eval_xs.shape[0]


def conditioned_eval_ce(ensemble: PosteriorEnsemble, candidates,
                        eval_set: Dataset) -> float:
    """Eval cross-entropy after reweighting on the candidates' labels.

    Returns +inf when the candidate labels are impossible under every
    sample (the score, its negation, is then -inf and gets flagged).
    """
    log_w = ensemble.normalized_log_weights().copy()
    candidates = tuple(candidates)
    if candidates:
        xs = np.stack([np.atleast_1d(np.asarray(ex.x, dtype=np.float64))
                       for ex in candidates])
        ys = np.array([int(ex.y) for ex in candidates], dtype=np.int64)
        lp = forward_log_probs(ensemble, xs)
        log_w = log_w + lp[:, np.arange(len(candidates)), ys].sum(axis=1)
        if not np.any(log_w > -np.inf):
            return float("inf")
        log_w = log_w - log_sum_exp_axis(log_w[None, :], axis=1)[0]
    rows = _mixture_rows(log_w, forward_log_probs(ensemble, eval_set.xs))
    picked = rows[np.arange(len(eval_set)), eval_set.ys]
    if np.any(np.isneginf(picked)):
        return float("inf")
    return float(-picked.mean())


def active_sampling_score(ensemble: PosteriorEnsemble, candidates,
                          eval_set: Dataset) -> float:
    """Negated conditioned eval CE; maximizing it minimizes the eval loss."""
    return -conditioned_eval_ce(ensemble, candidates, eval_set)


def active_sampling_scores(ensemble: PosteriorEnsemble, pool: Dataset,
                           eval_set: Dataset, conditioned_on=()) -> np.ndarray:
    """Active-sampling score for every pool point in one pass.

    Each candidate is scored as if its (x, y) were observed on top of
    `conditioned_on` (labels acquired since the last retrain). Collapsed
    candidates score -inf.
    """
    log_w = ensemble.normalized_log_weights().copy()
    conditioned_on = tuple(conditioned_on)
    if conditioned_on:
        xs = np.stack([np.atleast_1d(np.asarray(ex.x, dtype=np.float64))
                       for ex in conditioned_on])
        ys = np.array([int(ex.y) for ex in conditioned_on], dtype=np.int64)
        lp = forward_log_probs(ensemble, xs)
        log_w = log_w + lp[:, np.arange(len(conditioned_on)), ys].sum(axis=1)
        if not np.any(log_w > -np.inf):
            return np.full(len(pool), -np.inf)
    lp_pool = forward_log_probs(ensemble, pool.xs)            # (S, P, C)
    lp_eval = forward_log_probs(ensemble, eval_set.xs)        # (S, N, C)
    cand_w = log_w[:, None] + lp_pool[:, np.arange(len(pool)), pool.ys]
    scores = np.empty(len(pool))
    for c in range(len(pool)):
        w = cand_w[:, c]
        if not np.any(w > -np.inf):
            scores[c] = -np.inf
            continue
        w = w - log_sum_exp_axis(w[None, :], axis=1)[0]
        rows = _mixture_rows(w, lp_eval)
        picked = rows[np.arange(len(eval_set)), eval_set.ys]
        scores[c] = -np.inf if np.any(np.isneginf(picked)) else float(picked.mean())
    return scores


def score_pool(strategy: str, ensemble: PosteriorEnsemble, pool: Dataset,
               eval_set: Dataset | None, batch_indices=(),
               epig_eval_xs=None) -> np.ndarray:
    """Scores for every pool point under one strategy.

    `batch_indices` are picks since the last retrain: batch_bald
    conditions on their joint label distribution, active_sampling on
    their actual labels; bald and epig ignore them (their redundancy
    blindness is the point of the comparison).
    """
    if strategy == "bald":
        return bald_scores(ensemble, pool.xs)
    if strategy == "batch_bald":
        return batch_bald_gains(ensemble, pool.xs, batch_indices)
    if strategy == "epig":
        eval_xs = pool.xs if epig_eval_xs is None else epig_eval_xs
        return epig_scores_singleton(ensemble, pool.xs, eval_xs)
    if strategy == "active_sampling":
        if eval_set is None:
            raise ValueError("active_sampling requires an eval set")
        conditioned = [pool.example(i) for i in batch_indices]
        return active_sampling_scores(ensemble, pool, eval_set, conditioned)
    raise ValueError(f"unknown strategy: {strategy}")


def _masked_argmax(scores: np.ndarray, allowed_mask: np.ndarray) -> int:
    masked = np.where(allowed_mask, scores, -np.inf)
    if not np.any(masked > -np.inf):
        # All candidates collapsed or excluded; fall back to the lowest
        # allowed index so the run can continue under a flag.
        allowed = np.flatnonzero(allowed_mask)
        if allowed.size == 0:
            raise ValueError("pool exhausted")
        return int(allowed[0])
    return int(np.argmax(masked))


def run_acquisition(strategy: str, ensemble_factory, pool: Dataset,
                    eval_set: Dataset | None, num_steps: int,
                    retrain_every: int, rng: RngStream,
                    allow_reselection: bool = False,
                    epig_eval_xs=None, origin: str = "") -> AcquisitionSequence:
    """Sequential pool selection with periodic retraining.

    ensemble_factory(train_subset, stream) must deterministically build
    an ensemble from the acquired examples; it is invoked before the
    first step and after every `retrain_every` picks. The returned
    sequence fully determines the conditioning stream for downstream
    evaluation.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy: {strategy}")
    if num_steps < 1:
        raise ValueError("need at least one acquisition step")
    if retrain_every < 1:
        raise ValueError("retrain_every must be positive")
    if not allow_reselection and num_steps > len(pool):
        raise ValueError("pool exhausted")
    origins = pool.origin_indices if pool.origin_indices is not None \
        else np.arange(len(pool))
    # Random selection never consults the model, so skip its training.
    ensemble = None if strategy == "random" else \
        ensemble_factory(pool.subset([], "acquired"), rng.derive("retrain", 0))
    random_order = rng.derive("random_order").generator().permutation(len(pool))
    allowed = np.ones(len(pool), dtype=bool)
    acquired: list = []
    batch: list = []
    steps = []
    for step in range(num_steps):
        if strategy == "random":
            if allow_reselection:
                pick = int(rng.derive("random_pick", step).generator()
                           .integers(0, len(pool)))
            else:
                pick = int(random_order[step])
            score = 0.0
        else:
            scores = score_pool(strategy, ensemble, pool, eval_set,
                                batch_indices=batch, epig_eval_xs=epig_eval_xs)
            pick = _masked_argmax(scores, allowed)
            score = float(scores[pick])
            if not np.isfinite(score):
                score = 0.0
        steps.append(AcquisitionStep(step=step, pool_index=pick,
                                     original_index=int(origins[pick]),
                                     y=int(pool.ys[pick]), score=score,
                                     strategy=strategy))
        acquired.append(pick)
        batch.append(pick)
        if not allow_reselection:
            allowed[pick] = False
        if (step + 1) % retrain_every == 0 and step + 1 < num_steps:
            if strategy != "random":
                ensemble = ensemble_factory(pool.subset(acquired, "acquired"),
                                            rng.derive("retrain", step + 1))
            batch = []
    return AcquisitionSequence(steps=tuple(steps), strategy=strategy,
                               seed=rng.seed, origin=origin)
