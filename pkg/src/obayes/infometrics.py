"""Evaluation quantities: cross-entropies, online learning loss, total
correlation, and accuracy.

All information quantities are in nats. A prediction that assigns zero
probability to an observed label yields +inf cross-entropy and sets a
flag; it never raises, so one impossible prediction cannot abort a
sweep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .models import PosteriorEnsemble
from .numerics import RngStream
from .obi import PosteriorCollapseError, obi_init, obi_observe
from .predictive import (
    joint_entropy_exact,
    joint_entropy_mc,
    joint_log_prob,
    marginal_log_probs,
)


@dataclass(frozen=True)
class MetricRecord:
    """One emitted scalar with its coordinates in the experiment grid.

    `metric` is the quantity kind (cross_entropy, accuracy, ...), `name`
    labels the series (e.g. which acquisition sequence). Unused integer
    coordinates stay None and serialize as empty cells. `flag` marks
    values that are informative but not finite (e.g. a collapsed +inf
    cross-entropy).
    """

    metric: str
    name: str = ""
    value: float = 0.0
    trial: int | None = None
    sub_trial: int | None = None
    step: int | None = None
    n: int | None = None
    strategy: str = ""
    branch: str = ""
    flag: str = ""

    def __post_init__(self):
        if math.isnan(self.value):
            raise ValueError("metric value is NaN")
        if math.isinf(self.value) and not self.flag:
            raise ValueError("non-finite metric value requires a flag")
        for coord in (self.trial, self.sub_trial, self.step, self.n):
            if coord is not None and coord < 0:
                raise ValueError("coordinates must be non-negative")


def cross_entropy_from_rows(log_prob_rows: np.ndarray, ys) -> float:
    """Mean -log p(y) from precomputed (N, C) log-prob rows; may be +inf."""
    ys = np.asarray(ys, dtype=np.int64)
    picked = log_prob_rows[np.arange(len(ys)), ys]
    if np.any(np.isneginf(picked)):
        return float("inf")
    return float(-picked.mean())


def accuracy_from_rows(log_prob_rows: np.ndarray, ys) -> float:
    """Argmax match rate; ties resolve to the lowest class index."""
    ys = np.asarray(ys, dtype=np.int64)
    return float((np.argmax(log_prob_rows, axis=1) == ys).mean())


def marginal_cross_entropy(predict_fn, eval_set: Dataset) -> float:
    """Mean -ln predict_fn(x)[y] over the dataset; +inf if any label is
    assigned zero probability (the caller flags it, no exception)."""
    if len(eval_set) == 0:
        raise ValueError("empty reduction")
    rows = np.stack([np.asarray(predict_fn(x).log_probs)
                     for x in eval_set.xs])
    return cross_entropy_from_rows(rows, eval_set.ys)


def accuracy(predict_fn, eval_set: Dataset) -> float:
    if len(eval_set) == 0:
        raise ValueError("empty reduction")
    rows = np.stack([np.asarray(predict_fn(x).log_probs)
                     for x in eval_set.xs])
    return accuracy_from_rows(rows, eval_set.ys)


def ensemble_cross_entropy(ensemble: PosteriorEnsemble, eval_set: Dataset) -> float:
    """Marginal CE of the ensemble predictive, computed in one forward pass."""
    return cross_entropy_from_rows(marginal_log_probs(ensemble, eval_set.xs),
                                   eval_set.ys)


def ensemble_accuracy(ensemble: PosteriorEnsemble, eval_set: Dataset) -> float:
    return accuracy_from_rows(marginal_log_probs(ensemble, eval_set.xs),
                              eval_set.ys)


@dataclass(frozen=True)
class JointCeResult:
    """Chain-rule decomposition of a sequence's joint cross-entropy."""

    total: float
    per_step: tuple
    collapse_index: int | None = None

    @property
    def collapsed(self) -> bool:
        return self.collapse_index is not None


def joint_cross_entropy_sequence(ensemble: PosteriorEnsemble,
                                 sequence) -> JointCeResult:
    """Sum of sequentially conditioned log losses along the sequence.

    per_step[i] is -ln q(y_i | x_i, first i examples); the total equals
    -joint_log_prob of the whole sequence by the chain rule. A collapse
    at step i yields +inf there, finite entries before it, and the step
    index; later steps are not evaluated.
    """
    sequence = tuple(sequence)
    if not sequence:
        raise ValueError("empty reduction")
    state = obi_init(ensemble)
    per_step = []
    for i, ex in enumerate(sequence):
        rows = marginal_log_probs(state.as_ensemble(),
                                  np.atleast_2d(np.asarray(ex.x, dtype=np.float64)))
        lp = float(rows[0, int(ex.y)])
        if lp == -np.inf:
            per_step.append(float("inf"))
            return JointCeResult(total=float("inf"),
                                 per_step=tuple(per_step), collapse_index=i)
        per_step.append(-lp)
        try:
            state = obi_observe(state, ex)
        except PosteriorCollapseError:
            # The picked label had mass, so some sample survives; only a
            # defensive guard against inconsistent families lands here.
            return JointCeResult(total=float("inf"),
                                 per_step=tuple(per_step), collapse_index=i)
    return JointCeResult(total=float(sum(per_step)), per_step=tuple(per_step))


def _sequence_ce(ensemble: PosteriorEnsemble, xs, ys) -> float:
    lp = joint_log_prob(ensemble, xs, ys)
    return float("inf") if lp == -np.inf else -lp


def online_learning_loss(ensemble: PosteriorEnsemble, data: Dataset, n: int,
                         trials: int, rng: RngStream,
                         exhaustive: bool = False) -> tuple[float, float]:
    """Expected joint cross-entropy of n iid draws from the empirical set.

    Monte Carlo over `trials` sequences drawn with replacement, or exact
    enumeration of all len(data)^n sequences when `exhaustive` (trials is
    ignored there and the standard error is zero).
    """
    if n < 1:
        raise ValueError("n must be positive")
    if len(data) == 0:
        raise ValueError("empty reduction")
    if exhaustive:
        m = len(data)
        if m ** n > 10 ** 6:
            raise ValueError("enumeration limit exceeded")
        totals = []
        for ids in np.ndindex(*([m] * n)):
            idx = np.array(ids, dtype=np.int64)
            totals.append(_sequence_ce(ensemble, data.xs[idx], data.ys[idx]))
        return float(np.mean(totals)), 0.0
    if trials < 1:
        raise ValueError("trials must be positive")
    gen = rng.generator()
    draws = gen.integers(0, len(data), size=(trials, n))
    totals = np.array([_sequence_ce(ensemble, data.xs[row], data.ys[row])
                       for row in draws])
    est = float(totals.mean())
    se = 0.0 if trials == 1 else float(totals.std(ddof=1) / np.sqrt(trials))
    return est, se


def cross_entropy_rate_estimate(ensemble: PosteriorEnsemble, data: Dataset,
                                n_max: int, trials: int, rng: RngStream,
                                exhaustive: bool = False) -> list[tuple[int, float, float]]:
    """OLL(n)/n for n = 1..n_max, each with its standard error."""
    if n_max < 1:
        raise ValueError("n_max must be positive")
    curve = []
    for n in range(1, n_max + 1):
        value, se = online_learning_loss(ensemble, data, n, trials,
                                         rng.derive("oll", n),
                                         exhaustive=exhaustive)
        curve.append((n, value / n, se / n))
    return curve


def summed_marginal_entropies(ensemble: PosteriorEnsemble, xs) -> float:
    rows = marginal_log_probs(ensemble, np.atleast_2d(np.asarray(xs, dtype=np.float64)))
    finite = np.isfinite(rows)
    contrib = np.zeros_like(rows)
    contrib[finite] = np.exp(rows[finite]) * rows[finite]
    return float(-contrib.sum())


def total_correlation(ensemble: PosteriorEnsemble, xs) -> float:
    """Sum of marginal entropies minus the joint entropy, by enumeration."""
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    return summed_marginal_entropies(ensemble, xs) - joint_entropy_exact(ensemble, xs)


def total_correlation_mc(ensemble: PosteriorEnsemble, xs, num_draws: int,
                         rng: RngStream) -> tuple[float, float]:
    """MC variant for batches too large to enumerate; SE from the joint term."""
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    joint, se = joint_entropy_mc(ensemble, xs, num_draws, rng)
    return summed_marginal_entropies(ensemble, xs) - joint, se
