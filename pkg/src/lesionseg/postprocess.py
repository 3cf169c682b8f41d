"""Score post-processing: softmax probabilities, Gaussian smoothing of both
score planes, and automatic thresholding of the score difference with Otsu's
method."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rasters import Mask, ScoreMap


@dataclass
class ProbabilityMap:
    """Per-pixel class probabilities derived from a ScoreMap."""

    p0: np.ndarray
    p1: np.ndarray

    def __post_init__(self):
        p0 = np.ascontiguousarray(self.p0, dtype=np.float32)
        p1 = np.ascontiguousarray(self.p1, dtype=np.float32)
        if p0.shape != p1.shape or p0.ndim != 2:
            raise ValueError("probability planes must be 2-D and share a shape")
        if p0.min() < 0.0 or p0.max() > 1.0 or p1.min() < 0.0 or p1.max() > 1.0:
            raise ValueError("probabilities must lie in [0, 1]")
        if np.abs((p0.astype(np.float64) + p1) - 1.0).max() > 1e-6:
            raise ValueError("p0 + p1 must equal 1 within 1e-6")
        self.p0 = p0
        self.p1 = p1

    @property
    def width(self) -> int:
        return self.p0.shape[1]

    @property
    def height(self) -> int:
        return self.p0.shape[0]


@dataclass(frozen=True)
class PostprocessConfig:
    sigma: float = 5.0
    bins: int = 256
    mode: str = "otsu"

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.bins < 2:
            raise ValueError("bins must be >= 2")
        if self.mode not in ("naive", "otsu"):
            raise ValueError(f"mode must be 'naive' or 'otsu', got {self.mode!r}")


@dataclass(frozen=True)
class OtsuResult:
    threshold: float
    between_class_variance: float
    degenerate: bool = False


def softmax2(s: ScoreMap) -> ProbabilityMap:
    """Two-class softmax, stabilized by subtracting the per-pixel max score."""
    s0 = s.s0.astype(np.float64)
    s1 = s.s1.astype(np.float64)
    m = np.maximum(s0, s1)
    e0 = np.exp(s0 - m)
    e1 = np.exp(s1 - m)
    p1 = e1 / (e0 + e1)
    return ProbabilityMap(1.0 - p1, p1)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian truncated at radius ceil(3*sigma); [1] for sigma 0."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return np.array([1.0])
    r = math.ceil(3.0 * sigma)
    xs = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-(xs * xs) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_blur(plane: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian filter (horizontal then vertical), edge replication."""
    plane = np.asarray(plane, dtype=np.float64)
    if plane.ndim != 2:
        raise ValueError(f"expected a 2-D plane, got shape {plane.shape}")
    k = gaussian_kernel(sigma)
    r = k.size // 2
    if r == 0:
        return plane.copy()
    h, w = plane.shape
    padded = np.pad(plane, ((0, 0), (r, r)), mode="edge")
    mid = np.zeros_like(plane)
    for t in range(k.size):
        mid += k[t] * padded[:, t : t + w]
    padded = np.pad(mid, ((r, r), (0, 0)), mode="edge")
    out = np.zeros_like(plane)
    for t in range(k.size):
        out += k[t] * padded[t : t + h, :]
    return out


def score_diff(s: ScoreMap) -> np.ndarray:
    """Per-pixel foreground-minus-background score, s1 - s0."""
    return s.s1 - s.s0


def otsu_threshold(values, bins: int = 256) -> OtsuResult:
    """Histogram Otsu: the bin cut maximizing between-class variance.

    The histogram uses `bins` equal-width bins spanning [min, max]; every cut
    between consecutive bins is scored by w0*w1*(mu0-mu1)^2 and the threshold
    is the upper edge of the lower class's last bin. Ties go to the lowest
    threshold. An all-equal input (or a single occupied bin) is degenerate and
    reports threshold 0.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("otsu_threshold needs at least one value")
    if bins < 2:
        raise ValueError("bins must be >= 2")
    if not np.isfinite(v).all():
        raise ValueError("values must be finite")
    lo, hi = float(v.min()), float(v.max())
    if lo == hi:
        return OtsuResult(0.0, 0.0, degenerate=True)
    counts, edges = np.histogram(v, bins=bins, range=(lo, hi))
    if np.count_nonzero(counts) <= 1:
        return OtsuResult(0.0, 0.0, degenerate=True)
    centers = (edges[:-1] + edges[1:]) / 2.0
    p = counts / counts.sum()
    w0 = np.cumsum(p)[:-1]
    w1 = 1.0 - w0
    mu_cum = np.cumsum(p * centers)[:-1]
    mu_all = float(np.sum(p * centers))
    with np.errstate(invalid="ignore", divide="ignore"):
        mu0 = np.where(w0 > 0, mu_cum / w0, 0.0)
        mu1 = np.where(w1 > 0, (mu_all - mu_cum) / w1, 0.0)
    var = np.where((w0 > 0) & (w1 > 0), w0 * w1 * (mu0 - mu1) ** 2, 0.0)
    cut = int(np.argmax(var))  # first max: lowest threshold wins ties
    return OtsuResult(float(edges[cut + 1]), float(var[cut]), degenerate=False)


def extract_mask(delta: np.ndarray, threshold: float) -> Mask:
    """Foreground wherever the score difference strictly exceeds the threshold."""
    delta = np.asarray(delta)
    return Mask((delta > threshold).astype(np.uint8))


def postprocess_pipeline(s: ScoreMap, cfg: PostprocessConfig) -> tuple[Mask, OtsuResult]:
    """Full post-processing chain; the returned OtsuResult always carries the
    threshold that produced the mask.

    naive: no smoothing, threshold 0 (equivalent to the p1 > 0.5 rule).
    otsu: smooth both score planes with cfg.sigma, threshold the smoothed
    difference at the Otsu cut; a degenerate histogram falls back to 0.
    """
    if cfg.mode == "naive":
        return extract_mask(score_diff(s), 0.0), OtsuResult(0.0, 0.0, degenerate=False)
    delta = gaussian_blur(s.s1, cfg.sigma) - gaussian_blur(s.s0, cfg.sigma)
    result = otsu_threshold(delta, cfg.bins)
    return extract_mask(delta, result.threshold), result
