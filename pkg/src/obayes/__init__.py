"""Online Bayesian inference over fixed posterior ensembles.

A trained ensemble (deep ensemble, consistent MC dropout, or an exact
finite grid) is treated as a weighted bag of parameter samples. New
observations update the bag by importance reweighting instead of
retraining, which makes conditional predictives, joint cross-entropies,
and information-based acquisition cheap to evaluate online.
"""

__version__ = "0.1.0"

from .numerics import (
    DegenerateWeightsError,
    RngStream,
    effective_sample_size,
    log_sum_exp,
    normalize_log_weights,
)

__all__ = [
    "DegenerateWeightsError",
    "RngStream",
    "effective_sample_size",
    "log_sum_exp",
    "normalize_log_weights",
    "__version__",
]
