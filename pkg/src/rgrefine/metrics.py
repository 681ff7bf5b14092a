"""Mask quality measures: IoU, contour F-measure and a threshold sweep.

Empty-set conventions keep every function total: IoU of two empty masks
is 1, precision of an empty prediction is 1, recall against an empty
ground truth is 1.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import List, Sequence, Union

import numpy as np
from scipy import ndimage

from .model import SegMask

MaskLike = Union[SegMask, np.ndarray]


def _labels(mask: MaskLike) -> np.ndarray:
    return mask.labels if isinstance(mask, SegMask) else np.asarray(mask, dtype=bool)


def _check_shapes(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"mask shapes differ: {a.shape} vs {b.shape}")


def iou(a: MaskLike, b: MaskLike) -> float:
    la, lb = _labels(a), _labels(b)
    _check_shapes(la, lb)
    union = np.count_nonzero(la | lb)
    if union == 0:
        return 1.0
    return np.count_nonzero(la & lb) / union


def boundary_pixels(mask: MaskLike) -> np.ndarray:
    """Foreground pixels with a 4-neighbour in the background or on the image border."""
    fg = _labels(mask)
    padded = np.pad(fg, 1, constant_values=False)
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    return fg & ~interior


@dataclass(frozen=True)
class BoundaryScore:
    precision: float
    recall: float
    f: float


def default_boundary_tolerance(width: int, height: int) -> int:
    """0.8% of the image diagonal, rounded up."""
    return int(math.ceil(0.008 * math.hypot(width, height)))


def _matched_fraction(source: np.ndarray, target: np.ndarray, tol: float) -> float:
    n = np.count_nonzero(source)
    if n == 0:
        return 1.0
    if not target.any():
        return 0.0
    dist = ndimage.distance_transform_edt(~target)
    return np.count_nonzero(dist[source] <= tol) / n


def boundary_f(pred: MaskLike, gt: MaskLike, tol: float) -> BoundaryScore:
    if tol < 0:
        raise ValueError("tolerance must be non-negative")
    bp, bg = boundary_pixels(pred), boundary_pixels(gt)
    _check_shapes(bp, bg)
    if not bp.any() and not bg.any():
        return BoundaryScore(1.0, 1.0, 1.0)
    precision = _matched_fraction(bp, bg, tol)
    recall = _matched_fraction(bg, bp, tol)
    if not bp.any() or not bg.any():
        return BoundaryScore(precision, recall, 0.0)
    total = precision + recall
    f = 0.0 if total == 0 else 2.0 * precision * recall / total
    return BoundaryScore(precision, recall, f)


@dataclass(frozen=True)
class SweepPoint:
    threshold: float
    precision: float
    recall: float
    iou: float

    def to_dict(self) -> dict:
        return asdict(self)


def pr_sweep(scores: np.ndarray, gt: MaskLike, thresholds: Sequence[float]) -> List[SweepPoint]:
    """Pixel precision/recall/IoU of ``scores > t`` for each threshold."""
    ts = list(thresholds)
    if any(b < a for a, b in zip(ts, ts[1:])):
        raise ValueError("thresholds must be sorted ascending")
    scores = np.asarray(scores, dtype=np.float64)
    truth = _labels(gt)
    _check_shapes(scores, truth)
    n_true = np.count_nonzero(truth)
    out = []
    for t in ts:
        pred = scores > t
        n_pred = np.count_nonzero(pred)
        tp = np.count_nonzero(pred & truth)
        precision = 1.0 if n_pred == 0 else tp / n_pred
        recall = 1.0 if n_true == 0 else tp / n_true
        out.append(SweepPoint(float(t), precision, recall, iou(pred, truth)))
    return out
