"""Core raster types shared by every stage of the pipeline.

All pixel data is stored in C-contiguous numpy arrays, plane-major then
row-major, so ``arr.reshape(-1)`` is the canonical flat layout: the value of
pixel (x, y) in plane p sits at index ``p*w*h + y*w + x``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _as_plane(data, dtype) -> np.ndarray:
    arr = np.ascontiguousarray(data, dtype=dtype)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D plane, got shape {arr.shape}")
    return arr


@dataclass
class RgbImage:
    """RGB raster with intensities in [0, 1], shape (3, height, width)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 3 or arr.shape[0] != 3:
            raise ValueError(f"RgbImage data must have shape (3, h, w), got {arr.shape}")
        if arr.shape[1] < 1 or arr.shape[2] < 1:
            raise ValueError("RgbImage dimensions must be >= 1")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("RgbImage values must lie in [0, 1]")
        self.data = arr

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def height(self) -> int:
        return self.data.shape[1]


@dataclass
class GrayImage:
    """Single-channel raster with intensities in [0, 1], shape (height, width)."""

    data: np.ndarray

    def __post_init__(self):
        arr = _as_plane(self.data, np.float32)
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("GrayImage dimensions must be >= 1")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("GrayImage values must lie in [0, 1]")
        self.data = arr

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass
class Mask:
    """Binary raster: 0 = background skin, 1 = mole. Shape (height, width)."""

    data: np.ndarray

    def __post_init__(self):
        arr = _as_plane(self.data, np.uint8)
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("Mask dimensions must be >= 1")
        if arr.max(initial=0) > 1:
            raise ValueError("Mask values must be 0 or 1")
        self.data = arr

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass
class ScoreMap:
    """Raw per-pixel class scores: s0 = background, s1 = foreground."""

    s0: np.ndarray
    s1: np.ndarray

    def __post_init__(self):
        s0 = _as_plane(self.s0, np.float32)
        s1 = _as_plane(self.s1, np.float32)
        if s0.shape != s1.shape:
            raise ValueError(f"score planes disagree on shape: {s0.shape} vs {s1.shape}")
        if not (np.isfinite(s0).all() and np.isfinite(s1).all()):
            raise ValueError("score values must be finite")
        self.s0 = s0
        self.s1 = s1

    @property
    def width(self) -> int:
        return self.s0.shape[1]

    @property
    def height(self) -> int:
        return self.s0.shape[0]

    def planes(self) -> np.ndarray:
        """Both score planes stacked as a (2, h, w) array."""
        return np.stack([self.s0, self.s1])
