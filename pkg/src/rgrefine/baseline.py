"""Superpixel majority-voting comparator (plain SNIC on a regular seed grid)."""

from __future__ import annotations

import math
from typing import List, Optional

import numpy as np

from .color import rgb_to_lab
from .model import ConfidenceMap, ImageSize, LabImage, RefineConfig, Region, RgbImage, Seed, SegMask
from .refine import grow_cluster_array


def grid_seeds(size: ImageSize, k: int, lab: LabImage) -> List[Seed]:
    """Place at most ``k`` seeds at the centres of a regular grid of step ``sqrt(area / k)``."""
    if not 1 <= k <= size.area:
        raise ValueError(f"superpixel count must be in [1, {size.area}], got {k}")
    step = math.sqrt(size.area / k)
    # floor keeps nx * ny <= k; the epsilon absorbs sqrt rounding on exact grids.
    nx = max(1, int(math.floor(size.width / step + 1e-9)))
    ny = max(1, int(math.floor(size.height / step + 1e-9)))
    # The max(1, .) clamp on a thin image can overshoot k.
    while nx * ny > k:
        if nx >= ny:
            nx -= 1
        else:
            ny -= 1
    seeds = []
    for j in range(ny):
        y = min(size.height - 1, int(math.floor((j + 0.5) * size.height / ny)))
        for i in range(nx):
            x = min(size.width - 1, int(math.floor((i + 0.5) * size.width / nx)))
            color = tuple(float(c) for c in lab.pixels[y, x])
            seeds.append(Seed(x=x, y=y, centroid_color=color, label=Region.BACKGROUND))
    return seeds


def default_superpixel_count(size: ImageSize, cfg: RefineConfig) -> int:
    """Superpixel count whose mean area matches the refinement seed spacing."""
    return int(min(size.area, max(1, round(size.area / cfg.seed_spacing**2))))


def superpixels(img: RgbImage, k: int, cfg: RefineConfig = RefineConfig()) -> np.ndarray:
    """Uncapped SNIC label map over the whole image."""
    lab = rgb_to_lab(img)
    seeds = grid_seeds(img.size, k, lab)
    xs = np.array([s.x for s in seeds], dtype=np.int64)
    ys = np.array([s.y for s in seeds], dtype=np.int64)
    roi = np.ones(img.size.shape, dtype=bool)
    assignment, _ = grow_cluster_array(
        lab.pixels, roi, xs, ys, cfg.theta_s, cfg.theta_m, math.inf, cfg.connectivity
    )
    return assignment


def sppx_refine(
    img: RgbImage,
    m: ConfidenceMap,
    k: Optional[int] = None,
    tau0: float = 0.4,
    cfg: RefineConfig = RefineConfig(),
) -> SegMask:
    """Label each superpixel foreground iff more than half its pixels score above ``tau0``.

    ``cfg`` supplies the distance normalisers and connectivity; ``k``
    defaults to :func:`default_superpixel_count`.
    """
    if img.size != m.size:
        raise ValueError("image and confidence map sizes differ")
    if k is None:
        k = default_superpixel_count(img.size, cfg)
    labels = superpixels(img, k, cfg)
    flat = labels.ravel()
    positive = np.bincount(flat, weights=(m.scores.ravel() > tau0).astype(np.float64))
    counts = np.bincount(flat).astype(np.float64)
    ratio = positive / counts
    return SegMask.from_votes(ratio[flat].reshape(labels.shape))
