"""Deterministic synthetic dataset: skin-toned squares, each with one darker
filled ellipse standing in for a mole, plus clipped Gaussian noise.

Every image is generated from its own rng seeded with (seed, index), so any
subset of a dataset can be regenerated independently and bit-identically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rasters import Mask, RgbImage

# channel means of typical dermoscopy skin; also the palette the generator
# builds its backgrounds around
SKIN_TONE = (0.708, 0.582, 0.536)
_MOLE_TILT = (1.0, 0.82, 0.70)  # moles trend brown: suppress green/blue extra


@dataclass(frozen=True)
class SynthConfig:
    n_images: int
    size: int = 64
    seed: int = 0
    noise_std: float = 0.05
    axis_range: tuple[float, float] = (0.1, 0.4)  # ellipse semi-axes, fractions of size

    def __post_init__(self):
        if self.n_images < 1:
            raise ValueError("n_images must be >= 1")
        if self.size < 4:
            raise ValueError("size must be >= 4")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        lo, hi = self.axis_range
        if not (0 < lo <= hi):
            raise ValueError("axis_range must satisfy 0 < lo <= hi")


@dataclass(frozen=True)
class EllipseParams:
    cx: float
    cy: float
    ax: float
    ay: float
    angle: float
    darken: float


def _image_rng(cfg: SynthConfig, index: int) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, index])


def _draw_params(rng: np.random.Generator, cfg: SynthConfig) -> EllipseParams:
    size = cfg.size
    # center biased toward the middle: clipped Gaussian keeps the draw count fixed
    cx = float(np.clip(size / 2 + rng.normal(0.0, size / 8), 0.25 * size, 0.75 * size))
    cy = float(np.clip(size / 2 + rng.normal(0.0, size / 8), 0.25 * size, 0.75 * size))
    lo, hi = cfg.axis_range
    ax = float(rng.uniform(lo, hi) * size)
    ay = float(rng.uniform(lo, hi) * size)
    angle = float(rng.uniform(0.0, np.pi))
    darken = float(rng.uniform(0.35, 0.6))
    return EllipseParams(cx, cy, ax, ay, angle, darken)


def ellipse_params(cfg: SynthConfig, index: int) -> EllipseParams:
    """The ellipse drawn for image `index`, re-derivable without the image."""
    return _draw_params(_image_rng(cfg, index), cfg)


def ellipse_interior(size: int, p: EllipseParams) -> Mask:
    """Exact per-pixel interior predicate of the (rotated) ellipse."""
    ys, xs = np.mgrid[0:size, 0:size]
    dx = xs - p.cx
    dy = ys - p.cy
    c, s = np.cos(p.angle), np.sin(p.angle)
    u = (dx * c + dy * s) / p.ax
    v = (-dx * s + dy * c) / p.ay
    return Mask((u * u + v * v <= 1.0).astype(np.uint8))


def synth_image(cfg: SynthConfig, index: int) -> tuple[RgbImage, Mask]:
    """One deterministic image/mask pair."""
    rng = _image_rng(cfg, index)
    p = _draw_params(rng, cfg)
    base = np.clip(np.asarray(SKIN_TONE) + rng.normal(0.0, 0.02, 3), 0.0, 1.0)
    mask = ellipse_interior(cfg.size, p)
    mole = base * p.darken * np.asarray(_MOLE_TILT)
    img = np.where(mask.data[None].astype(bool), mole[:, None, None], base[:, None, None])
    img = img + rng.normal(0.0, cfg.noise_std, (3, cfg.size, cfg.size))
    return RgbImage(np.clip(img, 0.0, 1.0).astype(np.float32)), mask


def synth_dataset(cfg: SynthConfig) -> tuple[list[RgbImage], list[Mask]]:
    images = []
    masks = []
    for i in range(cfg.n_images):
        img, mask = synth_image(cfg, i)
        images.append(img)
        masks.append(mask)
    return images, masks
