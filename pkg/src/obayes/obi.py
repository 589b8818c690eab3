"""Online Bayesian inference by importance reweighting.

Observing (x, y) multiplies each parameter sample's weight by its
likelihood p(y|x,w_j); predictions then mix the fixed samples under the
updated weights. No retraining happens here, and the base ensemble is
never mutated: states are immutable snapshots, so evaluation protocols
can branch (reweight vs retrain) from the same starting point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LabeledExample
from .models import PosteriorEnsemble, forward_log_probs
from .numerics import effective_sample_size, normalize_log_weights
from .predictive import CategoricalLogDist, marginal_log_probs


class PosteriorCollapseError(ValueError):
    """Every parameter sample assigns zero likelihood to the observations."""


@dataclass(frozen=True)
class ObiState:
    """Ensemble plus the log-likelihood of everything observed so far."""

    base: PosteriorEnsemble
    observed: tuple
    cumulative_log_weights: np.ndarray
    ess: float

    def __post_init__(self):
        w = np.asarray(self.cumulative_log_weights, dtype=np.float64)
        object.__setattr__(self, "cumulative_log_weights", w)
        object.__setattr__(self, "observed", tuple(self.observed))
        if w.shape != (self.base.size,):
            raise ValueError(
                "one cumulative log weight per parameter sample required")

    def as_ensemble(self) -> PosteriorEnsemble:
        """The base samples under the current normalized weights."""
        normalized, _ = normalize_log_weights(self.cumulative_log_weights)
        return self.base.reweighted(normalized)

    @property
    def num_observed(self) -> int:
        return len(self.observed)


def obi_init(ensemble: PosteriorEnsemble) -> ObiState:
    w = ensemble.normalized_log_weights()
    return ObiState(base=ensemble, observed=(),
                    cumulative_log_weights=w,
                    ess=effective_sample_size(w))


def _stack_examples(examples) -> tuple[np.ndarray, np.ndarray]:
    xs = np.stack([np.atleast_1d(np.asarray(ex.x, dtype=np.float64))
                   for ex in examples])
    ys = np.array([int(ex.y) for ex in examples], dtype=np.int64)
    return xs, ys


def obi_observe_many(state: ObiState, examples) -> ObiState:
    """Condition on several examples in one reweighting step."""
    examples = tuple(examples)
    if not examples:
        return state
    xs, ys = _stack_examples(examples)
    lp = forward_log_probs(state.base, xs)             # (S, n, C)
    delta = lp[:, np.arange(len(examples)), ys].sum(axis=1)
    new_weights = state.cumulative_log_weights + delta
    if not np.any(new_weights > -np.inf):
        raise PosteriorCollapseError(
            "posterior collapse: observation impossible under all samples")
    return ObiState(base=state.base,
                    observed=state.observed + examples,
                    cumulative_log_weights=new_weights,
                    ess=effective_sample_size(new_weights))


def obi_observe(state: ObiState, example: LabeledExample) -> ObiState:
    return obi_observe_many(state, (example,))


def obi_predict_batch(state: ObiState, xs) -> np.ndarray:
    """Log predictive rows under the current weights; shape (N, C)."""
    return marginal_log_probs(state.as_ensemble(), xs)


def obi_predict(state: ObiState, x) -> CategoricalLogDist:
    row = obi_predict_batch(state, np.atleast_2d(np.asarray(x, dtype=np.float64)))[0]
    return CategoricalLogDist(row)


def obi_bootstrap(state: ObiState, subset_size: int, rng) -> ObiState:
    """Rebuild the state on a without-replacement subsample of the base.

    Base weights renormalize over the subset and the observation stream is
    replayed, so the result is exactly the state that subset would have
    reached on its own.
    """
    size = state.base.size
    if not 1 <= subset_size <= size:
        raise ValueError("subset size must lie in [1, ensemble size]")
    gen = rng.generator()
    # Sorted so a full-size subset is the identity, not a permutation.
    indices = np.sort(gen.choice(size, size=subset_size, replace=False))
    subset = state.base.take(indices)
    return obi_observe_many(obi_init(subset), state.observed)
