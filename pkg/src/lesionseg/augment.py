"""Training-time augmentation: random flips and right-angle rotations,
always applied identically to image and mask."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rasters import Mask


@dataclass
class Sample:
    """One training pair: a (3, h, w) float raster plus its binary mask."""

    image: np.ndarray
    mask: Mask

    def __post_init__(self):
        img = np.ascontiguousarray(self.image, dtype=np.float32)
        if img.ndim != 3 or img.shape[0] != 3:
            raise ValueError(f"sample image must have shape (3, h, w), got {img.shape}")
        if img.shape[1:] != self.mask.data.shape:
            raise ValueError(
                f"image {img.shape[1:]} and mask {self.mask.data.shape} dimensions differ"
            )
        self.image = img


@dataclass(frozen=True)
class AugmentConfig:
    p_flip_h: float = 0.5
    p_flip_v: float = 0.5
    rot90: bool = True

    def __post_init__(self):
        if not (0.0 <= self.p_flip_h <= 1.0 and 0.0 <= self.p_flip_v <= 1.0):
            raise ValueError("flip probabilities must lie in [0, 1]")


def flip_h(s: Sample) -> Sample:
    """Mirror about the vertical axis (x -> w-1-x)."""
    return Sample(
        np.ascontiguousarray(s.image[:, :, ::-1]),
        Mask(np.ascontiguousarray(s.mask.data[:, ::-1])),
    )


def flip_v(s: Sample) -> Sample:
    """Mirror about the horizontal axis (y -> h-1-y)."""
    return Sample(
        np.ascontiguousarray(s.image[:, ::-1, :]),
        Mask(np.ascontiguousarray(s.mask.data[::-1, :])),
    )


def rot90(s: Sample, k: int) -> Sample:
    """Rotate counter-clockwise by 90*k degrees; dims swap when k is odd.

    In raster coordinates (y pointing down) pixel (x, y) maps to
    (y, w-1-x), which is exactly numpy's rot90 on the (h, w) axes.
    """
    if k not in (0, 1, 2, 3):
        raise ValueError(f"rotation count must be in {{0, 1, 2, 3}}, got {k}")
    if k == 0:
        return s
    return Sample(
        np.ascontiguousarray(np.rot90(s.image, k, axes=(1, 2))),
        Mask(np.ascontiguousarray(np.rot90(s.mask.data, k))),
    )


def random_augment(s: Sample, rng: np.random.Generator, cfg: AugmentConfig) -> Sample:
    """Draw (flip_h?, flip_v?, k) from rng in that fixed order and apply them.

    The draw order is fixed so that a seed fully determines the transform;
    the rotation count is drawn only when cfg.rot90 is enabled.
    """
    do_h = rng.random() < cfg.p_flip_h
    do_v = rng.random() < cfg.p_flip_v
    k = int(rng.integers(0, 4)) if cfg.rot90 else 0
    if do_h:
        s = flip_h(s)
    if do_v:
        s = flip_v(s)
    return rot90(s, k)
