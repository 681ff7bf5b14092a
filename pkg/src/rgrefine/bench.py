"""Synthetic scenes, coarse detector-like score maps and a method comparison.

Every random draw flows from one master seed through ``numpy`` seed
sequences, so reports are reproducible apart from wall-clock timings.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy import ndimage
from skimage.draw import polygon2mask

from .baseline import sppx_refine
from .color import rgb_array_to_lab
from .metrics import boundary_f, default_boundary_tolerance, iou
from .model import ConfidenceMap, ImageSize, RefineConfig, RgbImage, SegMask
from .refine import rgr_refine

STYLES = ("ellipse", "polygon", "multi-blob")
METHODS = ("threshold", "sppx", "rgr")

MIN_POOL_SEPARATION = 25.0
COLOR_NOISE_SIGMA = 4.0


@dataclass(frozen=True)
class Ellipse:
    cx: float
    cy: float
    a: float
    b: float
    angle: float

    def contains(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        dx, dy = xs - self.cx, ys - self.cy
        c, s = math.cos(self.angle), math.sin(self.angle)
        u = (dx * c + dy * s) / self.a
        v = (-dx * s + dy * c) / self.b
        return u * u + v * v <= 1.0


@dataclass(frozen=True)
class Polygon:
    vertices: Tuple[Tuple[float, float], ...]  # (x, y)


@dataclass(frozen=True)
class Scene:
    image: RgbImage
    gt: SegMask
    shapes: Tuple[object, ...]
    fg_colors: np.ndarray
    bg_colors: np.ndarray


def _pool_separation(fg: np.ndarray, bg: np.ndarray) -> float:
    """Smallest Lab distance between a foreground colour and the background blend segment."""
    t = np.linspace(0.0, 1.0, 11)[:, None]
    blend = bg[0] * (1 - t) + bg[1] * t
    fg_lab = rgb_array_to_lab(fg)
    bg_lab = rgb_array_to_lab(blend)
    return float(np.min(np.linalg.norm(fg_lab[:, None] - bg_lab[None], axis=2)))


def _color_pools(rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    while True:
        bg_base = rng.uniform(30, 225, size=3)
        bg = np.clip(bg_base + rng.uniform(-20, 20, size=(2, 3)), 20, 235)
        fg_base = rng.uniform(30, 225, size=3)
        fg = np.clip(fg_base + rng.uniform(-10, 10, size=(2, 3)), 20, 235)
        if _pool_separation(fg, bg) >= MIN_POOL_SEPARATION:
            return fg, bg


def _random_ellipse(rng: np.random.Generator, size: ImageSize, scale: float) -> Ellipse:
    short = min(size.width, size.height)
    a = rng.uniform(0.45, 1.0) * scale * short
    b = rng.uniform(0.45, 1.0) * scale * short
    reach = max(a, b) + 4
    cx = rng.uniform(reach, size.width - reach)
    cy = rng.uniform(reach, size.height - reach)
    return Ellipse(cx, cy, a, b, rng.uniform(0, math.pi))


def _random_polygon(rng: np.random.Generator, size: ImageSize) -> Polygon:
    short = min(size.width, size.height)
    radius = 0.32 * short
    cx = rng.uniform(radius + 4, size.width - radius - 4)
    cy = rng.uniform(radius + 4, size.height - radius - 4)
    n = int(rng.integers(5, 10))
    angles = np.sort(rng.uniform(0, 2 * math.pi, size=n))
    radii = rng.uniform(0.45, 1.0, size=n) * radius
    verts = tuple(
        (float(cx + r * math.cos(t)), float(cy + r * math.sin(t))) for t, r in zip(angles, radii)
    )
    return Polygon(verts)


def _shape_mask(shape, size: ImageSize) -> np.ndarray:
    if isinstance(shape, Ellipse):
        ys, xs = np.mgrid[0 : size.height, 0 : size.width]
        return shape.contains(xs.astype(np.float64), ys.astype(np.float64))
    rc = np.array([(y, x) for x, y in shape.vertices])
    mask = polygon2mask(size.shape, rc)
    # Sharp vertices can rasterise into diagonal-only fragments; keep the main 4-connected body.
    components, n = ndimage.label(mask)
    if n > 1:
        sizes = np.bincount(components.ravel())[1:]
        mask = components == (1 + int(np.argmax(sizes)))
    return mask


def _blobs(rng: np.random.Generator, size: ImageSize, count: int) -> List[Ellipse]:
    while True:
        blobs, union = [], np.zeros(size.shape, dtype=bool)
        for _ in range(count):
            blob = _random_ellipse(rng, size, scale=0.18)
            mask = _shape_mask(blob, size)
            if (ndimage.binary_dilation(mask, iterations=3) & union).any():
                break
            blobs.append(blob)
            union |= mask
        if len(blobs) == count:
            return blobs


def gen_scene(size: ImageSize, seed: int, style: str = "ellipse") -> Scene:
    """Render foreground shapes over a smoothly textured background.

    Foreground and background colour pools are at least ``MIN_POOL_SEPARATION``
    apart in Lab; per-pixel Gaussian colour noise of ``COLOR_NOISE_SIGMA`` is
    added after rendering.
    """
    if size.width < 32 or size.height < 32:
        raise ValueError("scenes must be at least 32x32")
    if style not in STYLES:
        raise ValueError(f"unknown style {style!r}; expected one of {STYLES}")
    rng = np.random.default_rng(seed)
    fg_colors, bg_colors = _color_pools(rng)

    texture = ndimage.gaussian_filter(rng.normal(size=size.shape), sigma=min(size.shape) / 8)
    span = texture.max() - texture.min()
    t = (texture - texture.min()) / span if span > 0 else np.zeros(size.shape)
    canvas = bg_colors[0] * (1 - t[..., None]) + bg_colors[1] * t[..., None]

    if style == "ellipse":
        shapes = [_random_ellipse(rng, size, scale=0.32)]
    elif style == "polygon":
        shapes = [_random_polygon(rng, size)]
    else:
        shapes = _blobs(rng, size, 3)

    gt = np.zeros(size.shape, dtype=bool)
    for i, shape in enumerate(shapes):
        mask = _shape_mask(shape, size)
        canvas[mask] = fg_colors[i % len(fg_colors)]
        gt |= mask

    canvas = canvas + rng.normal(0.0, COLOR_NOISE_SIGMA, size=canvas.shape)
    pixels = np.clip(np.round(canvas), 0, 255).astype(np.uint8)
    return Scene(RgbImage(pixels), SegMask.from_labels(gt), tuple(shapes), fg_colors, bg_colors)


def degrade(
    gt: SegMask,
    blur_sigma: float,
    shift: Tuple[int, int] = (0, 0),
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> ConfidenceMap:
    """Shift (edge-clamped), Gaussian-blur and add noise to a mask indicator."""
    if blur_sigma < 0 or noise_sigma < 0:
        raise ValueError("blur and noise sigmas must be non-negative")
    dx, dy = (int(v) for v in shift)
    ind = gt.labels.astype(np.float64)
    h, w = ind.shape
    rows = np.clip(np.arange(h) - dy, 0, h - 1)
    cols = np.clip(np.arange(w) - dx, 0, w - 1)
    scores = ind[rows][:, cols]
    if blur_sigma > 0:
        scores = ndimage.gaussian_filter(scores, blur_sigma, mode="nearest", truncate=3.0)
    if noise_sigma > 0:
        scores = scores + np.random.default_rng(seed).normal(0.0, noise_sigma, size=scores.shape)
    return ConfidenceMap(np.clip(scores, 0.0, 1.0))


@dataclass(frozen=True)
class Degradation:
    blur_sigma: float = 8.0
    max_shift: int = 4
    noise_sigma: float = 0.05


@dataclass
class BenchmarkReport:
    rows: List[dict]
    params: dict = field(default_factory=dict)

    def summary(self) -> Dict[str, Dict[str, float]]:
        out = {}
        for method in METHODS:
            sel = [r for r in self.rows if r["method"] == method]
            if sel:
                out[method] = {
                    "mean_iou": float(np.mean([r["iou"] for r in sel])),
                    "mean_boundary_f": float(np.mean([r["boundary_f"] for r in sel])),
                    "mean_runtime_ms": float(np.mean([r["runtime_ms"] for r in sel])),
                    "n_scenes": len(sel),
                }
        return out

    def scores(self) -> List[dict]:
        """Rows without timings: the bit-reproducible part of the report."""
        return [{k: v for k, v in r.items() if k != "runtime_ms"} for r in self.rows]

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.rows, indent=2) + "\n")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(
                fh, fieldnames=["method", "scene_id", "iou", "boundary_f", "runtime_ms"]
            )
            writer.writeheader()
            for row in self.rows:
                writer.writerow({k: row[k] for k in writer.fieldnames})


def _scene_plan(seed: int, n_scenes: int, degradation: Degradation):
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(n_scenes)):
        scene_seed, noise_seed, rgr_seed, shift_seed = (int(v) for v in child.generate_state(4, np.uint64))
        shift_rng = np.random.default_rng(shift_seed)
        shift = tuple(int(v) for v in shift_rng.integers(-degradation.max_shift, degradation.max_shift + 1, size=2))
        yield i, STYLES[i % len(STYLES)], scene_seed, noise_seed, rgr_seed, shift


def run_benchmark(
    n_scenes: int,
    cfg: RefineConfig = RefineConfig(),
    degradation: Degradation = Degradation(),
    seed: int = 0,
    size: ImageSize = ImageSize(320, 240),
    workers: int = 1,
    methods: Sequence[str] = METHODS,
) -> BenchmarkReport:
    """Compare raw thresholding, superpixel voting and region-growing refinement.

    ``cfg.rng_seed`` is replaced per scene by a value derived from ``seed``.
    """
    if n_scenes < 1:
        raise ValueError("n_scenes must be >= 1")
    rows = []
    tol = default_boundary_tolerance(size.width, size.height)
    for i, style, scene_seed, noise_seed, rgr_seed, shift in _scene_plan(seed, n_scenes, degradation):
        scene = gen_scene(size, scene_seed, style)
        m = degrade(scene.gt, degradation.blur_sigma, shift, degradation.noise_sigma, noise_seed)
        for method in methods:
            start = time.perf_counter()
            if method == "threshold":
                pred = SegMask.from_labels(m.scores > cfg.tau0)
            elif method == "sppx":
                pred = sppx_refine(scene.image, m, tau0=cfg.tau0, cfg=cfg)
            elif method == "rgr":
                pred = rgr_refine(scene.image, m, cfg.replace(rng_seed=rgr_seed), workers=workers)
            else:
                raise ValueError(f"unknown method {method!r}")
            elapsed = (time.perf_counter() - start) * 1000.0
            rows.append(
                {
                    "method": method,
                    "scene_id": i,
                    "style": style,
                    "shift": list(shift),
                    "iou": iou(pred, scene.gt),
                    "boundary_f": boundary_f(pred, scene.gt, tol).f,
                    "runtime_ms": elapsed,
                }
            )
    params = {
        "n_scenes": n_scenes,
        "seed": seed,
        "size": [size.width, size.height],
        "degradation": asdict(degradation),
        "config": cfg.to_dict(),
        "boundary_tolerance": tol,
    }
    return BenchmarkReport(rows, params)
