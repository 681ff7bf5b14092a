"""Tri-region thresholding of a confidence map and RoI construction."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .model import ConfidenceMap, RefineConfig, Region, RegionPartition


def threshold_regions(m: ConfidenceMap, cfg: RefineConfig) -> RegionPartition:
    """Split scores into Foreground (>= tauF), Background (<= tauB) and Uncertain.

    Ties at either threshold go to the confident class so that every pixel
    is labelled.
    """
    s = m.scores
    labels = np.full(s.shape, Region.UNCERTAIN, dtype=np.int8)
    labels[s >= cfg.tauF] = Region.FOREGROUND
    labels[s <= cfg.tauB] = Region.BACKGROUND
    return RegionPartition(labels)


def thicken_uncertain(p: RegionPartition, radius: int) -> RegionPartition:
    """Relabel Background within Chebyshev distance ``radius`` of non-Background as Uncertain."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    background = p.labels == Region.BACKGROUND
    if radius == 0 or background.all() or not background.any():
        return p
    dist = ndimage.distance_transform_cdt(background, metric="chessboard")
    labels = p.labels.copy()
    labels[background & (dist <= radius)] = Region.UNCERTAIN
    return RegionPartition(labels)


def compute_roi(p: RegionPartition, margin: float) -> RegionPartition:
    """Carve NearBackground out of Background: pixels within Euclidean ``margin`` of Uncertain.

    Whatever Background remains is far background and is excluded from
    region growing.
    """
    if margin < 0:
        raise ValueError("margin must be non-negative")
    uncertain = p.labels == Region.UNCERTAIN
    background = p.labels == Region.BACKGROUND
    if not uncertain.any() or not background.any():
        return p
    dist = ndimage.distance_transform_edt(~uncertain)
    labels = p.labels.copy()
    labels[background & (dist <= margin)] = Region.NEAR_BACKGROUND
    return RegionPartition(labels)
