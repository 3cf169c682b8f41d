"""Jaccard index, the challenge's thresholded variant, and dataset reports."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .rasters import Mask

DEFAULT_CUTOFF = 0.65


def jaccard(a: Mask, b: Mask) -> float:
    """|a & b| / |a | b|; two empty masks count as a perfect 1.0."""
    if a.data.shape != b.data.shape:
        raise ValueError(f"mask dimensions differ: {a.data.shape} vs {b.data.shape}")
    aa = a.data.astype(bool)
    bb = b.data.astype(bool)
    union = int(np.logical_or(aa, bb).sum())
    if union == 0:
        return 1.0
    return int(np.logical_and(aa, bb).sum()) / union


def thresholded_jaccard(j: float, cutoff: float = DEFAULT_CUTOFF) -> float:
    """Challenge scoring rule: values strictly below the cutoff become 0."""
    if not (0.0 <= j <= 1.0):
        raise ValueError(f"jaccard value must lie in [0, 1], got {j}")
    return j if j >= cutoff else 0.0


@dataclass(frozen=True)
class ImageScore:
    id: str
    raw: float
    thresholded: float


@dataclass
class EvalReport:
    per_image: list[ImageScore]
    mean_raw: float
    mean_thresholded: float
    cutoff: float

    def to_csv(self) -> str:
        lines = ["id,raw,thresholded"]
        for row in self.per_image:
            lines.append(f"{row.id},{row.raw:.6g},{row.thresholded:.6g}")
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        return {
            "mean_raw": self.mean_raw,
            "mean_thresholded": self.mean_thresholded,
            "cutoff": self.cutoff,
            "n_images": len(self.per_image),
        }


def evaluate_dataset(
    pairs: Sequence[tuple[Mask, Mask, str]], cutoff: float = DEFAULT_CUTOFF
) -> EvalReport:
    """Score (prediction, ground truth, id) pairs; rows are ordered by id."""
    if len(pairs) == 0:
        raise ValueError("evaluate_dataset needs at least one pair")
    rows = []
    for pred, truth, image_id in pairs:
        if pred.data.shape != truth.data.shape:
            raise ValueError(
                f"{image_id}: prediction {pred.data.shape} vs truth {truth.data.shape}"
            )
        j = jaccard(pred, truth)
        rows.append(ImageScore(str(image_id), j, thresholded_jaccard(j, cutoff)))
    rows.sort(key=lambda r: r.id)
    return EvalReport(
        per_image=rows,
        mean_raw=float(np.mean([r.raw for r in rows])),
        mean_thresholded=float(np.mean([r.thresholded for r in rows])),
        cutoff=cutoff,
    )
