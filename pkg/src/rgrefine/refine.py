"""Monte Carlo seeded region growing refinement of a confidence map.

One pass samples seeds from the high-confidence pixels inside the RoI,
grows them with a SNIC-style priority queue under a distance cap, and
scores every cluster by the fraction of its members whose original score
exceeds ``tau0``. Passes are averaged and thresholded at 0.5.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numba
import numpy as np

from .color import rgb_to_lab
from .model import (
    ORPHAN,
    ClusterMap,
    ConfidenceMap,
    LabImage,
    RefineConfig,
    Region,
    RegionPartition,
    RgbImage,
    Seed,
    SegMask,
)
from .partition import compute_roi, thicken_uncertain, threshold_regions

# (dx, dy); the first four are the 4-neighbourhood.
NEIGHBOR_OFFSETS: Tuple[Tuple[int, int], ...] = (
    (-1, 0),
    (1, 0),
    (0, -1),
    (0, 1),
    (-1, -1),
    (1, -1),
    (-1, 1),
    (1, 1),
)
_DX = np.array([d[0] for d in NEIGHBOR_OFFSETS], dtype=np.int64)
_DY = np.array([d[1] for d in NEIGHBOR_OFFSETS], dtype=np.int64)


class NoHighConfidenceRegion(ValueError):
    """Raised when there is no pixel to draw seeds from."""


def seed_count(region_area: int, spacing: float) -> int:
    if region_area < 1 or spacing < 1:
        raise ValueError("region_area and spacing must both be >= 1")
    return max(1, int(round(region_area / (spacing * spacing))))


def seed_pool(p: RegionPartition) -> np.ndarray:
    """Flat indices of the pixels seeds may be drawn from (Foreground and NearBackground)."""
    return np.flatnonzero(p.mask(Region.FOREGROUND, Region.NEAR_BACKGROUND))


def sample_seeds(
    p: RegionPartition, lab: LabImage, k: int, rng: np.random.Generator
) -> List[Seed]:
    """Draw ``min(k, |pool|)`` distinct seeds uniformly from the seed pool."""
    if k < 1:
        raise ValueError("k must be >= 1")
    pool = seed_pool(p)
    if pool.size == 0:
        raise NoHighConfidenceRegion("no Foreground or NearBackground pixel to seed from")
    picks = pool[rng.choice(pool.size, size=min(k, pool.size), replace=False)]
    width = p.size.width
    labels = p.labels.ravel()
    colors = lab.pixels.reshape(-1, 3)
    seeds = []
    for idx in picks.tolist():
        label = Region.FOREGROUND if labels[idx] == Region.FOREGROUND else Region.BACKGROUND
        seeds.append(
            Seed(
                x=idx % width,
                y=idx // width,
                centroid_color=tuple(float(c) for c in colors[idx]),
                label=label,
            )
        )
    return seeds


def snic_distance(px, centroid, theta_s: float, theta_m: float) -> float:
    """Joint spatial/colour distance between ``(x, y, l, a, b)`` tuples."""
    x, y, l, a, b = px
    cx, cy, cl, ca, cb = centroid
    spatial = (x - cx) ** 2 + (y - cy) ** 2
    color = (l - cl) ** 2 + (a - ca) ** 2 + (b - cb) ** 2
    return math.sqrt(spatial / theta_s + color / theta_m)


@numba.njit(cache=True, nogil=True)
def _less(hd, hc, i, j):
    return hd[i] < hd[j] or (hd[i] == hd[j] and hc[i] < hc[j])


@numba.njit(cache=True, nogil=True)
def _swap(hd, hc, hp, hk, i, j):
    hd[i], hd[j] = hd[j], hd[i]
    hc[i], hc[j] = hc[j], hc[i]
    hp[i], hp[j] = hp[j], hp[i]
    hk[i], hk[j] = hk[j], hk[i]


@numba.njit(cache=True, nogil=True)
def _grow_kernel(lab, roi, seed_x, seed_y, theta_s, theta_m, d_max, connectivity, dxs, dys):
    height, width = roi.shape
    n_seeds = seed_x.shape[0]
    assignment = np.full((height, width), -1, dtype=np.int32)
    sums = np.zeros((n_seeds, 5), dtype=np.float64)
    counts = np.zeros(n_seeds, dtype=np.int64)

    # Each annexation pushes at most `connectivity` nodes.
    cap = n_seeds + height * width * connectivity
    hd = np.empty(cap, dtype=np.float64)
    hc = np.empty(cap, dtype=np.int64)
    hp = np.empty(cap, dtype=np.int64)
    hk = np.empty(cap, dtype=np.int32)
    size = 0
    counter = 0

    for k in range(n_seeds):
        # Seeds share distance 0 and enter in order, so a plain append keeps the heap valid.
        hd[size] = 0.0
        hc[size] = counter
        hp[size] = seed_y[k] * width + seed_x[k]
        hk[size] = k
        size += 1
        counter += 1

    while size > 0:
        d = hd[0]
        pix = hp[0]
        k = hk[0]
        size -= 1
        if size > 0:
            hd[0] = hd[size]
            hc[0] = hc[size]
            hp[0] = hp[size]
            hk[0] = hk[size]
            i = 0
            while True:
                left = 2 * i + 1
                if left >= size:
                    break
                best = left
                right = left + 1
                if right < size and _less(hd, hc, right, left):
                    best = right
                if _less(hd, hc, best, i):
                    _swap(hd, hc, hp, hk, best, i)
                    i = best
                else:
                    break

        y = pix // width
        x = pix - y * width
        if assignment[y, x] >= 0:
            continue
        assignment[y, x] = k
        sums[k, 0] += x
        sums[k, 1] += y
        sums[k, 2] += lab[y, x, 0]
        sums[k, 3] += lab[y, x, 1]
        sums[k, 4] += lab[y, x, 2]
        counts[k] += 1
        n = counts[k]
        cx = sums[k, 0] / n
        cy = sums[k, 1] / n
        cl = sums[k, 2] / n
        ca = sums[k, 3] / n
        cb = sums[k, 4] / n

        for t in range(connectivity):
            xx = x + dxs[t]
            yy = y + dys[t]
            if xx < 0 or yy < 0 or xx >= width or yy >= height:
                continue
            if not roi[yy, xx] or assignment[yy, xx] >= 0:
                continue
            ds = (xx - cx) ** 2 + (yy - cy) ** 2
            dc = (lab[yy, xx, 0] - cl) ** 2 + (lab[yy, xx, 1] - ca) ** 2 + (lab[yy, xx, 2] - cb) ** 2
            dist = math.sqrt(ds / theta_s + dc / theta_m)
            if not dist < d_max:
                continue
            j = size
            hd[j] = dist
            hc[j] = counter
            hp[j] = yy * width + xx
            hk[j] = k
            size += 1
            counter += 1
            while j > 0:
                parent = (j - 1) // 2
                if _less(hd, hc, j, parent):
                    _swap(hd, hc, hp, hk, j, parent)
                    j = parent
                else:
                    break
    return assignment, counts


def grow_cluster_array(
    lab: np.ndarray,
    roi: np.ndarray,
    seed_x: np.ndarray,
    seed_y: np.ndarray,
    theta_s: float,
    theta_m: float,
    d_max: float,
    connectivity: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """Array-level growing; returns ``(assignment, pixel_counts)``."""
    return _grow_kernel(
        np.ascontiguousarray(lab, dtype=np.float64),
        np.ascontiguousarray(roi, dtype=np.bool_),
        np.ascontiguousarray(seed_x, dtype=np.int64),
        np.ascontiguousarray(seed_y, dtype=np.int64),
        float(theta_s),
        float(theta_m),
        float(d_max),
        int(connectivity),
        _DX,
        _DY,
    )


def grow_regions(
    lab: LabImage,
    p: RegionPartition,
    seeds: Sequence[Seed],
    cfg: RefineConfig,
    roi: Optional[np.ndarray] = None,
) -> ClusterMap:
    """Grow one cluster per seed over the RoI of ``p``.

    Pixels are annexed in order of increasing distance to the centroid of
    the cluster that queued them, ties broken first-in first-out. A node is
    only queued when its distance is strictly below ``cfg.d_max``;
    unreached pixels stay ``ORPHAN``. ``roi`` overrides the partition's RoI.
    """
    if not seeds:
        raise ValueError("at least one seed is required")
    if lab.size != p.size:
        raise ValueError("Lab image and partition sizes differ")
    roi = p.roi if roi is None else np.asarray(roi, dtype=bool)
    xs = np.array([s.x for s in seeds], dtype=np.int64)
    ys = np.array([s.y for s in seeds], dtype=np.int64)
    if not roi[ys, xs].all():
        raise ValueError("every seed must lie inside the RoI")
    if np.unique(ys * p.size.width + xs).size != xs.size:
        raise ValueError("seeds must be distinct pixels")
    assignment, counts = grow_cluster_array(
        lab.pixels, roi, xs, ys, cfg.theta_s, cfg.theta_m, cfg.d_max, cfg.connectivity
    )
    return ClusterMap(
        assignment=assignment,
        seed_labels=np.array([int(s.label) for s in seeds], dtype=np.int8),
        pixel_counts=counts,
    )


def cluster_vote(clusters: ClusterMap, m: ConfidenceMap, tau0: float) -> np.ndarray:
    """Per-pixel fraction of the pixel's cluster scoring above ``tau0``; orphans get 0."""
    if clusters.size != m.size:
        raise ValueError("cluster map and confidence map sizes differ")
    assignment = clusters.assignment.ravel()
    member = assignment != ORPHAN
    positive = np.bincount(
        assignment[member],
        weights=(m.scores.ravel()[member] > tau0).astype(np.float64),
        minlength=clusters.n_clusters,
    )
    counts = clusters.pixel_counts.astype(np.float64)
    ratio = np.divide(positive, counts, out=np.zeros_like(positive), where=counts > 0)
    votes = np.zeros(assignment.shape, dtype=np.float64)
    votes[member] = ratio[assignment[member]]
    return votes.reshape(m.scores.shape)


def pass_rng(rng_seed: int, pass_index: int) -> np.random.Generator:
    """Independent generator for one Monte Carlo pass, a pure function of its inputs."""
    seq = np.random.SeedSequence(entropy=int(rng_seed) % 2**64, spawn_key=(int(pass_index),))
    return np.random.Generator(np.random.PCG64(seq))


def prepare_partition(m: ConfidenceMap, cfg: RefineConfig) -> RegionPartition:
    """Threshold, thicken and carve the RoI: the partition every pass grows over."""
    p = threshold_regions(m, cfg)
    p = thicken_uncertain(p, cfg.thicken_radius)
    return compute_roi(p, cfg.roi_margin)


def _run_pass(
    i: int, lab: LabImage, p: RegionPartition, m: ConfidenceMap, cfg: RefineConfig, k: int
) -> np.ndarray:
    seeds = sample_seeds(p, lab, k, pass_rng(cfg.rng_seed, i))
    clusters = grow_regions(lab, p, seeds, cfg)
    return cluster_vote(clusters, m, cfg.tau0)


def rgr_refine(
    img: RgbImage, m: ConfidenceMap, cfg: RefineConfig = RefineConfig(), workers: int = 1
) -> SegMask:
    """Refine a confidence map into a binary mask.

    ``workers`` only sets how many passes run concurrently; the result is
    identical for any value.
    """
    if img.size != m.size:
        raise ValueError(
            f"image is {img.size.width}x{img.size.height} but confidence map is "
            f"{m.size.width}x{m.size.height}"
        )
    p = prepare_partition(m, cfg)
    if p.count(Region.FOREGROUND) == 0:
        # Foreground needs foreground evidence.
        return SegMask.from_votes(np.zeros(m.scores.shape))
    lab = rgb_to_lab(img)
    k = seed_count(seed_pool(p).size, cfg.seed_spacing)

    if workers <= 1 or cfg.n_s == 1:
        maps = [_run_pass(i, lab, p, m, cfg, k) for i in range(cfg.n_s)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            maps = list(pool.map(lambda i: _run_pass(i, lab, p, m, cfg, k), range(cfg.n_s)))

    total = np.zeros(m.scores.shape, dtype=np.float64)
    for vote_map in maps:
        total += vote_map
    return SegMask.from_votes(total / cfg.n_s)
