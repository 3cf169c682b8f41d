"""Training machinery: class-weighted cross-entropy with analytic gradients,
Adam, plateau learning-rate decay, the training loop, and a finite-difference
gradient-check harness."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .augment import AugmentConfig, Sample, random_augment
from .metrics import jaccard
from .rasters import Mask
from .stats import ChannelStats
from .unet import UNetConfig, unet_backward, unet_forward, unet_init

PLATEAU_REL_IMPROVEMENT = 1e-4


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 8
    epochs: int = 30
    plateau_patience: int = 5
    plateau_factor: float = 0.5
    min_lr: float = 1e-6
    class_weights: tuple[float, float] = (1.0, 1.0)  # (w_bg, w_fg)
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not (0.0 < self.plateau_factor < 1.0):
            raise ValueError("plateau_factor must lie in (0, 1)")
        if min(self.class_weights) <= 0:
            raise ValueError("class weights must be > 0")
        if self.batch_size < 1 or self.epochs < 0 or self.plateau_patience < 1:
            raise ValueError("batch_size/epochs/plateau_patience out of range")


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n: int, dtype=np.float32) -> "AdamState":
        return cls(np.zeros(n, dtype=dtype), np.zeros(n, dtype=dtype), 0)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    loss: float
    val_jaccard: float
    lr: float


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["epoch,loss,val_jaccard,lr"]
        for r in self.records:
            lines.append(f"{r.epoch},{r.loss:.6g},{r.val_jaccard:.6g},{r.lr:.6g}")
        return "\n".join(lines) + "\n"


def class_weights_from_proportion(p_mole: float) -> tuple[float, float]:
    """Weights (w_bg, w_fg) that equalize the expected contribution of each
    class: p * w_fg = (1 - p) * w_bg = 0.5."""
    if not (0.0 < p_mole < 1.0):
        raise ValueError(f"foreground proportion must lie strictly in (0, 1), got {p_mole}")
    return 0.5 / (1.0 - p_mole), 0.5 / p_mole


def weighted_ce_loss(
    scores: np.ndarray, masks: np.ndarray, weights: tuple[float, float]
) -> tuple[float, np.ndarray]:
    """Class-weighted cross-entropy over a score batch.

    scores: (n, 2, h, w); masks: (n, h, w) with labels in {0, 1}. Each pixel
    with label y contributes w_y * (-log p_y), with p from a log-sum-exp
    stabilized softmax; the total is divided by the sum of applied weights.
    Returns (loss, dLoss/dScores) with the gradient in the scores' dtype.
    """
    if scores.ndim != 4 or scores.shape[1] != 2:
        raise ValueError(f"scores must have shape (n, 2, h, w), got {scores.shape}")
    if masks.shape != (scores.shape[0], scores.shape[2], scores.shape[3]):
        raise ValueError(f"masks shape {masks.shape} does not match scores {scores.shape}")
    if not np.isfinite(scores).all():
        raise ValueError("scores must be finite")

    w_bg, w_fg = weights
    s0, s1 = scores[:, 0], scores[:, 1]
    m = np.maximum(s0, s1)
    lse = m + np.log(np.exp(s0 - m) + np.exp(s1 - m))
    y = masks.astype(bool)
    w_pix = np.where(y, scores.dtype.type(w_fg), scores.dtype.type(w_bg))
    w_sum = w_pix.sum(dtype=np.float64)
    log_p_true = np.where(y, s1, s0) - lse
    loss = float(-(w_pix * log_p_true).sum(dtype=np.float64) / w_sum)

    p1 = np.exp(s1 - lse)
    d = np.empty_like(scores)
    scale = (w_pix / scores.dtype.type(w_sum)).astype(scores.dtype)
    d[:, 0] = scale * ((1.0 - p1) - (~y))
    d[:, 1] = scale * (p1 - y)
    return loss, d


def adam_step(
    params: np.ndarray,
    grads: np.ndarray,
    state: AdamState,
    cfg: TrainConfig,
    lr: float | None = None,
) -> tuple[np.ndarray, AdamState]:
    """One standard Adam update with bias correction; returns new arrays."""
    if params.shape != grads.shape:
        raise ValueError("params and grads must have equal length")
    if not np.isfinite(grads).all():
        raise ValueError("non-finite gradient")
    if lr is None:
        lr = cfg.learning_rate
    t = state.t + 1
    m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grads
    v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * (grads * grads)
    m_hat = m / (1.0 - cfg.beta1**t)
    v_hat = v / (1.0 - cfg.beta2**t)
    new_params = params - lr * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
    return new_params.astype(params.dtype, copy=False), AdamState(m, v, t)


def plateau_update(losses: Sequence[float], lr: float, cfg: TrainConfig) -> float:
    """Reduce lr when the best loss stalls.

    An epoch improves when its loss beats the best-so-far by a relative margin
    of PLATEAU_REL_IMPROVEMENT. Once the streak of non-improving epochs reaches
    a multiple of plateau_patience the rate is multiplied by plateau_factor
    (never below min_lr); the multiple rule is the stateless equivalent of
    resetting a patience counter after each reduction.
    """
    if lr <= 0:
        raise ValueError("lr must be > 0")
    if len(losses) == 0:
        return lr
    best = losses[0]
    last_improve = 0
    for t in range(1, len(losses)):
        if losses[t] < best * (1.0 - PLATEAU_REL_IMPROVEMENT):
            best = losses[t]
            last_improve = t
    streak = len(losses) - 1 - last_improve
    if streak > 0 and streak % cfg.plateau_patience == 0:
        return max(lr * cfg.plateau_factor, cfg.min_lr)
    return lr


def predict_scores(
    params: np.ndarray, ucfg: UNetConfig, images: np.ndarray, batch_size: int = 8
) -> np.ndarray:
    """Forward a stack of images (n, 3, h, w) in batches; returns (n, 2, h, w)."""
    outs = []
    for start in range(0, images.shape[0], batch_size):
        outs.append(unet_forward(params, ucfg, images[start : start + batch_size]))
    return np.concatenate(outs, axis=0)


def _validation_jaccard(params, ucfg, samples, val_idx, batch_size) -> float:
    images = np.stack([samples[i].image for i in val_idx])
    scores = predict_scores(params, ucfg, images, batch_size)
    js = []
    for row, i in enumerate(val_idx):
        pred = Mask((scores[row, 1] > scores[row, 0]).astype(np.uint8))
        js.append(jaccard(pred, samples[i].mask))
    return float(np.mean(js))


def train(
    samples: Sequence[Sample],
    val_frac: float,
    tcfg: TrainConfig,
    ucfg: UNetConfig,
    norm_stats: ChannelStats,
    aug_cfg: AugmentConfig = AugmentConfig(),
    on_epoch: Callable[[EpochRecord], None] | None = None,
):
    """Train the net on pre-normalized samples; deterministic per seed.

    Splits off a validation fraction, then per epoch shuffles, augments,
    and runs forward / weighted CE / backward / Adam per mini-batch. After
    each epoch the held-out Jaccard (naive score-difference rule, no
    post-processing) is recorded and the plateau schedule may reduce lr.

    Returns (Checkpoint, TrainHistory).
    """
    from .imgio import Checkpoint  # local import; imgio also serves other callers

    n = len(samples)
    n_val = int(round(val_frac * n))
    if not (1 <= n_val < n):
        raise ValueError(f"validation split of {n} samples at {val_frac} is empty or total")
    shape = samples[0].image.shape
    if any(s.image.shape != shape for s in samples):
        raise ValueError("all samples must share one image size")
    stride = 1 << ucfg.depth
    if shape[1] % stride or shape[2] % stride:
        raise ValueError(f"sample dims {shape[1:]} incompatible with depth {ucfg.depth}")

    rng = np.random.default_rng(tcfg.seed)
    perm = rng.permutation(n)
    val_idx, train_idx = perm[:n_val], perm[n_val:]

    params = unet_init(ucfg, tcfg.seed)
    state = AdamState.zeros(params.size)
    lr = tcfg.learning_rate
    history = TrainHistory()
    losses: list[float] = []

    for epoch in range(1, tcfg.epochs + 1):
        order = train_idx[rng.permutation(train_idx.size)]
        batch_losses = []
        for start in range(0, order.size, tcfg.batch_size):
            batch = order[start : start + tcfg.batch_size]
            augmented = [random_augment(samples[i], rng, aug_cfg) for i in batch]
            x = np.stack([a.image for a in augmented])
            m = np.stack([a.mask.data for a in augmented])
            scores, cache = unet_forward(params, ucfg, x, want_cache=True)
            loss, d_scores = weighted_ce_loss(scores, m, tcfg.class_weights)
            grads = unet_backward(cache, d_scores)
            params, state = adam_step(params, grads, state, tcfg, lr=lr)
            batch_losses.append(loss)
        mean_loss = float(np.mean(batch_losses))
        losses.append(mean_loss)
        val_j = _validation_jaccard(params, ucfg, samples, val_idx, tcfg.batch_size)
        record = EpochRecord(epoch, mean_loss, val_j, lr)
        history.records.append(record)
        if on_epoch is not None:
            on_epoch(record)
        lr = plateau_update(losses, lr, tcfg)

    checkpoint = Checkpoint(config=ucfg, params=params, normalization=norm_stats)
    return checkpoint, history


# ---------------------------------------------------------------------------
# Finite-difference gradient check
# ---------------------------------------------------------------------------

@dataclass
class GradCheckResult:
    analytic: np.ndarray
    numeric: np.ndarray
    max_rel_error: float


def relative_errors(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return np.abs(analytic - numeric) / denom


def gradient_check(
    ucfg: UNetConfig,
    seed: int,
    width: int = 8,
    height: int = 8,
    linear: bool = False,
) -> GradCheckResult:
    """Compare analytic gradients to central finite differences in float64.

    In linear mode ReLU is swapped for identity and the objective is a fixed
    positive linear functional of the scores, which makes the objective affine
    in each individual parameter so the central difference is exact up to
    float rounding. The full mode uses the training loss as the objective.
    """
    rng = np.random.default_rng(seed)
    params = unet_init(ucfg, seed).astype(np.float64)
    x = rng.uniform(0.0, 1.0, (1, ucfg.in_channels, height, width))
    activation = "identity" if linear else "relu"

    if linear:
        r = rng.uniform(0.5, 1.5, (1, ucfg.out_channels, height, width))

        def objective(p: np.ndarray) -> float:
            return float((unet_forward(p, ucfg, x, activation) * r).sum())

        scores, cache = unet_forward(params, ucfg, x, activation, want_cache=True)
        analytic = unet_backward(cache, r)
    else:
        masks = rng.integers(0, 2, (1, height, width)).astype(np.uint8)
        weights = (0.75, 1.5)

        def objective(p: np.ndarray) -> float:
            return weighted_ce_loss(unet_forward(p, ucfg, x, activation), masks, weights)[0]

        scores, cache = unet_forward(params, ucfg, x, activation, want_cache=True)
        _, d_scores = weighted_ce_loss(scores, masks, weights)
        analytic = unet_backward(cache, d_scores)

    numeric = np.zeros_like(params)
    for i in range(params.size):
        theta = params[i]
        h = 1e-3 * max(1.0, abs(theta))
        params[i] = theta + h
        f_plus = objective(params)
        params[i] = theta - h
        f_minus = objective(params)
        params[i] = theta
        # divide by the realized interval to cancel representation error in h
        numeric[i] = (f_plus - f_minus) / ((theta + h) - (theta - h))

    errs = relative_errors(analytic, numeric)
    return GradCheckResult(analytic, numeric, float(errs.max()))
