"""Dataset pre-processing statistics: per-channel mean/std, mole proportion,
and the spatial prior map (per-pixel foreground frequency across masks)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .rasters import Mask, RgbImage


@dataclass(frozen=True)
class ChannelStats:
    """Pooled per-channel mean and population standard deviation."""

    mean: tuple[float, float, float]
    std: tuple[float, float, float]

    def __post_init__(self):
        if len(self.mean) != 3 or len(self.std) != 3:
            raise ValueError("ChannelStats needs exactly 3 means and 3 stds")
        if any(not (0.0 <= m <= 1.0) for m in self.mean):
            raise ValueError("channel means must lie in [0, 1]")
        if any(s < 0.0 for s in self.std):
            raise ValueError("channel stds must be >= 0")


@dataclass
class PriorMap:
    """Per-pixel probability that the pixel belongs to a mole."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 2:
            raise ValueError(f"PriorMap data must be 2-D, got shape {arr.shape}")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("PriorMap values must lie in [0, 1]")
        self.data = arr

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


def mask_proportion(mask: Mask) -> float:
    """Fraction of foreground pixels in the mask."""
    return float(mask.data.sum(dtype=np.int64)) / mask.data.size


def dataset_stats(images: Sequence[RgbImage]) -> ChannelStats:
    """Pooled per-channel mean and population std over all pixels of all images.

    Every pixel counts once, so larger images weigh more. Accumulation runs in
    float64 in input order, which keeps the reduction deterministic.
    """
    if len(images) == 0:
        raise ValueError("dataset_stats needs at least one image")
    total = np.zeros(3, dtype=np.float64)
    total_sq = np.zeros(3, dtype=np.float64)
    n_pixels = 0
    for img in images:
        data = img.data.astype(np.float64)
        total += data.sum(axis=(1, 2))
        total_sq += np.square(data).sum(axis=(1, 2))
        n_pixels += img.width * img.height
    mean = total / n_pixels
    var = np.maximum(total_sq / n_pixels - mean * mean, 0.0)
    std = np.sqrt(var)
    return ChannelStats(mean=tuple(mean.tolist()), std=tuple(std.tolist()))


def _nearest_indices(dst: int, src: int) -> np.ndarray:
    # source index = floor((i + 0.5) * src / dst), clipped for float safety
    idx = np.floor((np.arange(dst) + 0.5) * (src / dst)).astype(np.intp)
    return np.clip(idx, 0, src - 1)


def resample_mask_nearest(mask: Mask, target_w: int, target_h: int) -> Mask:
    """Nearest-neighbor resample of a binary mask to the target size."""
    if target_w < 1 or target_h < 1:
        raise ValueError("target dimensions must be >= 1")
    ys = _nearest_indices(target_h, mask.height)
    xs = _nearest_indices(target_w, mask.width)
    return Mask(mask.data[np.ix_(ys, xs)])


def spatial_prior(masks: Sequence[Mask], target_w: int, target_h: int) -> PriorMap:
    """Per-pixel foreground frequency across masks, resampled to a common size."""
    if len(masks) == 0:
        raise ValueError("spatial_prior needs at least one mask")
    if target_w < 1 or target_h < 1:
        raise ValueError("target dimensions must be >= 1")
    acc = np.zeros((target_h, target_w), dtype=np.float64)
    for mask in masks:
        acc += resample_mask_nearest(mask, target_w, target_h).data
    return PriorMap((acc / len(masks)).astype(np.float32))


def normalize_image(img: RgbImage, stats: ChannelStats, center_only: bool = False) -> np.ndarray:
    """Re-center (and by default re-scale) an image with dataset statistics.

    Returns an unbounded float32 raster of shape (3, h, w); per channel c the
    output is (in - mean_c) / std_c, or just (in - mean_c) with center_only.
    """
    mean = np.asarray(stats.mean, dtype=np.float32).reshape(3, 1, 1)
    out = img.data - mean
    if not center_only:
        std = np.asarray(stats.std, dtype=np.float32).reshape(3, 1, 1)
        if np.any(std <= 0.0):
            raise ValueError("cannot divide by zero channel std; use center_only")
        out /= std
    return out
