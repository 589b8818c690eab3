"""Single-hidden-layer classifier with hand-written backprop.

Two ensemble constructions share this network: deep ensembles (K
independently trained members, evaluated clean) and consistent MC dropout
(one trained network, S fixed dropout masks attached as parameter
samples). Masks are sampled once and reused for every input evaluated
under that sample; resampling per input would break joint predictives.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..data import Dataset
from ..numerics import RngStream
from .ensemble import PosteriorEnsemble


@dataclass(frozen=True)
class MlpArchitecture:
    in_dim: int
    hidden: int
    num_classes: int
    dropout_rate: float = 0.5
    init_scale: float = 1.0

    def __post_init__(self):
        if self.hidden < 1 or self.in_dim < 1 or self.num_classes < 2:
            raise ValueError("layer widths must be positive, classes >= 2")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout rate must lie in [0, 1)")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 0.0
    early_stop_delta: float = 1e-5
    early_stop_patience: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch size must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")


@dataclass
class MlpParams:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def copy(self) -> "MlpParams":
        return MlpParams(self.w1.copy(), self.b1.copy(),
                         self.w2.copy(), self.b2.copy())

    def arrays(self):
        return [self.w1, self.b1, self.w2, self.b2]


def init_params(arch: MlpArchitecture, gen: np.random.Generator) -> MlpParams:
    # He-style fan-in scaling for the rectifier.
    s1 = arch.init_scale * np.sqrt(2.0 / arch.in_dim)
    s2 = arch.init_scale * np.sqrt(2.0 / arch.hidden)
    return MlpParams(
        w1=s1 * gen.standard_normal((arch.in_dim, arch.hidden)),
        b1=np.zeros(arch.hidden),
        w2=s2 * gen.standard_normal((arch.hidden, arch.num_classes)),
        b2=np.zeros(arch.num_classes),
    )


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    m = logits.max(axis=-1, keepdims=True)
    z = logits - m
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def _forward(params: MlpParams, xs: np.ndarray,
             mask_scale: np.ndarray | None = None):
    """Pre-activation, hidden, and logits; mask_scale rescales hidden units."""
    z1 = xs @ params.w1 + params.b1
    h = np.maximum(z1, 0.0)
    hd = h if mask_scale is None else h * mask_scale
    logits = hd @ params.w2 + params.b2
    return z1, hd, logits


def mlp_log_probs(params: MlpParams, xs: np.ndarray,
                  mask_scale: np.ndarray | None = None) -> np.ndarray:
    _, _, logits = _forward(params, xs, mask_scale)
    if not np.all(np.isfinite(logits)):
        raise ValueError("non-finite activations in forward pass")
    return _log_softmax(logits)


def mlp_forward_log_probs(params: MlpParams, xs) -> np.ndarray:
    """Clean (dropout-free) log-probabilities for a batch of inputs."""
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    return mlp_log_probs(params, xs)


def cross_entropy_loss(params: MlpParams, xs: np.ndarray, ys: np.ndarray,
                       mask_scale: np.ndarray | None = None) -> float:
    logp = mlp_log_probs(params, xs, mask_scale)
    return float(-logp[np.arange(len(ys)), ys].mean())


def mlp_gradient(params: MlpParams, xs, ys,
                 mask_scale: np.ndarray | None = None) -> MlpParams:
    """Exact gradient of the mean cross-entropy over the batch."""
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    ys = np.asarray(ys, dtype=np.int64)
    if xs.shape[0] == 0:
        raise ValueError("empty reduction")
    n = xs.shape[0]
    z1, hd, logits = _forward(params, xs, mask_scale)
    if not np.all(np.isfinite(logits)):
        raise ValueError("non-finite activations in forward pass")
    probs = np.exp(_log_softmax(logits))
    dlogits = probs
    dlogits[np.arange(n), ys] -= 1.0
    dlogits /= n
    dw2 = hd.T @ dlogits
    db2 = dlogits.sum(axis=0)
    dhd = dlogits @ params.w2.T
    dh = dhd if mask_scale is None else dhd * mask_scale
    dz1 = dh * (z1 > 0.0)
    dw1 = xs.T @ dz1
    db1 = dz1.sum(axis=0)
    return MlpParams(w1=dw1, b1=db1, w2=dw2, b2=db2)


@dataclass
class _AdamState:
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    t: int = 0


def _adam_step(params: MlpParams, grad: MlpParams, state: _AdamState,
               cfg: TrainConfig) -> None:
    arrays = params.arrays()
    grads = grad.arrays()
    if not state.m:
        state.m = [np.zeros_like(a) for a in arrays]
        state.v = [np.zeros_like(a) for a in arrays]
    state.t += 1
    t = state.t
    for a, g, m, v in zip(arrays, grads, state.m, state.v):
        if cfg.weight_decay > 0.0:
            g = g + cfg.weight_decay * a
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g * g
        m_hat = m / (1.0 - cfg.beta1 ** t)
        v_hat = v / (1.0 - cfg.beta2 ** t)
        a -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)


def _train_single(train: Dataset, arch: MlpArchitecture, cfg: TrainConfig,
                  stream: RngStream, member: str, use_dropout: bool) -> MlpParams:
    gen = stream.generator()
    params = init_params(arch, gen)
    xs, ys = train.xs, train.ys
    n = len(train)
    keep = 1.0 - arch.dropout_rate
    state = _AdamState()
    history = [cross_entropy_loss(params, xs, ys)]
    for epoch in range(cfg.epochs):
        perm = gen.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            mask_scale = None
            if use_dropout and arch.dropout_rate > 0.0:
                mask = gen.random(arch.hidden) < keep
                mask_scale = mask.astype(np.float64) / keep
            grad = mlp_gradient(params, xs[idx], ys[idx], mask_scale)
            _adam_step(params, grad, state, cfg)
        loss = cross_entropy_loss(params, xs, ys)
        if not np.isfinite(loss):
            raise ValueError(
                f"training diverged: member {member}, epoch {epoch + 1}")
        history.append(loss)
        p = cfg.early_stop_patience
        if len(history) > p and history[-1 - p] - history[-1] < cfg.early_stop_delta:
            break
    return params


class DeepEnsembleFamily:
    """Independently trained members, evaluated without dropout."""

    tag = "deep_ensemble"

    def __init__(self, arch: MlpArchitecture):
        self.arch = arch

    @property
    def num_classes(self) -> int:
        return self.arch.num_classes

    def log_probs(self, samples, xs) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
        return np.stack([mlp_log_probs(p, xs) for p in samples])


class McDropoutFamily:
    """One trained network; parameter samples are fixed dropout masks."""

    tag = "mc_dropout"

    def __init__(self, arch: MlpArchitecture, params: MlpParams):
        self.arch = arch
        self.params = params

    @property
    def num_classes(self) -> int:
        return self.arch.num_classes

    def log_probs(self, samples, xs) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
        keep = 1.0 - self.arch.dropout_rate
        z1 = xs @ self.params.w1 + self.params.b1
        h = np.maximum(z1, 0.0)
        masks = np.stack(samples)                       # (S, H) in {0, 1}
        hd = h[None, :, :] * (masks / keep)[:, None, :]
        logits = hd @ self.params.w2 + self.params.b2   # (S, N, C)
        if not np.all(np.isfinite(logits)):
            raise ValueError("non-finite activations in forward pass")
        return _log_softmax(logits)


def train_deep_ensemble(train: Dataset, arch: MlpArchitecture,
                        cfg: TrainConfig, num_members: int) -> PosteriorEnsemble:
    """K members differing only in derived seed (init and batch order)."""
    if num_members < 1:
        raise ValueError("need at least one ensemble member")
    if len(train) == 0:
        raise ValueError("empty training set")
    root = RngStream(seed=cfg.seed).derive("deep_ensemble")
    members = tuple(
        _train_single(train, arch, cfg, root.derive("member", k),
                      member=str(k), use_dropout=arch.dropout_rate > 0.0)
        for k in range(num_members)
    )
    return PosteriorEnsemble(samples=members,
                             log_weights=np.zeros(num_members),
                             family=DeepEnsembleFamily(arch))


def init_deep_ensemble(arch: MlpArchitecture, num_members: int,
                       rng: RngStream) -> PosteriorEnsemble:
    """Freshly initialized members, no training; see init_dropout_ensemble."""
    if num_members < 1:
        raise ValueError("need at least one ensemble member")
    members = tuple(init_params(arch, rng.derive("member", k).generator())
                    for k in range(num_members))
    return PosteriorEnsemble(samples=members,
                             log_weights=np.zeros(num_members),
                             family=DeepEnsembleFamily(arch))


def init_dropout_ensemble(arch: MlpArchitecture, num_samples: int,
                          rng: RngStream) -> PosteriorEnsemble:
    """Freshly initialized dropout ensemble, no training.

    Used as the scoring model before any data has been acquired; its
    predictions are arbitrary but deterministic in the stream.
    """
    if num_samples < 1:
        raise ValueError("need at least one dropout sample")
    if arch.dropout_rate == 0.0 and num_samples > 1:
        raise ValueError("degenerate dropout ensemble: dropout rate is zero")
    gen = rng.generator()
    params = init_params(arch, gen)
    keep = 1.0 - arch.dropout_rate
    if arch.dropout_rate == 0.0:
        masks = (np.ones((1, arch.hidden)),)
    else:
        masks = tuple((gen.random(arch.hidden) < keep).astype(np.float64)
                      for _ in range(num_samples))
    return PosteriorEnsemble(samples=masks,
                             log_weights=np.zeros(len(masks)),
                             family=McDropoutFamily(arch, params))


def train_mc_dropout(train: Dataset, arch: MlpArchitecture, cfg: TrainConfig,
                     num_samples: int, rng: RngStream) -> PosteriorEnsemble:
    """Train once with dropout, then freeze S masks as parameter samples."""
    if num_samples < 1:
        raise ValueError("need at least one dropout sample")
    if len(train) == 0:
        raise ValueError("empty training set")
    if arch.dropout_rate == 0.0 and num_samples > 1:
        raise ValueError("degenerate dropout ensemble: dropout rate is zero")
    params = _train_single(train, arch, cfg,
                           RngStream(seed=cfg.seed).derive("mc_dropout"),
                           member="shared", use_dropout=True)
    keep = 1.0 - arch.dropout_rate
    gen = rng.generator()
    if arch.dropout_rate == 0.0:
        masks = (np.ones((1, arch.hidden)),)
    else:
        masks = tuple((gen.random(arch.hidden) < keep).astype(np.float64)
                      for _ in range(num_samples))
    return PosteriorEnsemble(samples=masks,
                             log_weights=np.zeros(len(masks)),
                             family=McDropoutFamily(arch, params))
