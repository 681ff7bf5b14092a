"""Core data types shared across the package.

All arrays are stored row-major as ``(height, width[, channels])`` numpy
arrays, with ``x`` the column and ``y`` the row (increasing downward).
Instances are frozen and their arrays are made read-only on construction.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, fields, replace
from typing import Optional, Tuple

import numpy as np

ORPHAN = -1


class Region(enum.IntEnum):
    BACKGROUND = 0
    NEAR_BACKGROUND = 1
    UNCERTAIN = 2
    FOREGROUND = 3


def _frozen(arr, dtype) -> np.ndarray:
    out = np.array(arr, dtype=dtype, copy=True, order="C")
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class ImageSize:
    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image size must be at least 1x1, got {self.width}x{self.height}")

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.height, self.width)

    @property
    def area(self) -> int:
        return self.width * self.height

    @classmethod
    def of(cls, arr: np.ndarray) -> "ImageSize":
        return cls(width=int(arr.shape[1]), height=int(arr.shape[0]))


def pixel_index(x: int, y: int, size: ImageSize) -> int:
    """Row-major linear index of pixel ``(x, y)``."""
    if not (0 <= x < size.width and 0 <= y < size.height):
        raise IndexError(f"pixel ({x}, {y}) outside {size.width}x{size.height} image")
    return y * size.width + x


@dataclass(frozen=True)
class ConfidenceMap:
    """Per-pixel detection scores in ``[0, 1]`` for a single detection.

    ``n_clamped`` records how many raw values a loader had to clamp into
    range before construction; it is informational only.
    """

    scores: np.ndarray
    n_clamped: int = 0

    def __post_init__(self):
        s = _frozen(self.scores, np.float64)
        if s.ndim != 2 or s.size == 0:
            raise ValueError(f"confidence scores must be a non-empty 2-D array, got shape {s.shape}")
        if not np.all((s >= 0.0) & (s <= 1.0)):
            raise ValueError("confidence scores must lie in [0, 1]")
        object.__setattr__(self, "scores", s)

    @property
    def size(self) -> ImageSize:
        return ImageSize.of(self.scores)


@dataclass(frozen=True)
class RgbImage:
    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels)
        if p.ndim != 3 or p.shape[2] != 3 or p.shape[0] == 0 or p.shape[1] == 0:
            raise ValueError(f"RGB image must have shape (H, W, 3), got {p.shape}")
        object.__setattr__(self, "pixels", _frozen(p, np.uint8))

    @property
    def size(self) -> ImageSize:
        return ImageSize.of(self.pixels)


@dataclass(frozen=True)
class LabImage:
    pixels: np.ndarray

    def __post_init__(self):
        p = _frozen(self.pixels, np.float64)
        if p.ndim != 3 or p.shape[2] != 3:
            raise ValueError(f"Lab image must have shape (H, W, 3), got {p.shape}")
        lightness = p[..., 0]
        if not np.all((lightness >= 0.0) & (lightness <= 100.0)):
            raise ValueError("Lab lightness must lie in [0, 100]")
        object.__setattr__(self, "pixels", p)

    @property
    def size(self) -> ImageSize:
        return ImageSize.of(self.pixels)


@dataclass(frozen=True)
class RegionPartition:
    labels: np.ndarray

    def __post_init__(self):
        lab = _frozen(self.labels, np.int8)
        if lab.ndim != 2:
            raise ValueError("partition labels must be 2-D")
        if lab.size and (lab.min() < Region.BACKGROUND or lab.max() > Region.FOREGROUND):
            raise ValueError("partition labels must be Region values")
        object.__setattr__(self, "labels", lab)

    @property
    def size(self) -> ImageSize:
        return ImageSize.of(self.labels)

    def mask(self, *regions: Region) -> np.ndarray:
        return np.isin(self.labels, [int(r) for r in regions])

    def count(self, region: Region) -> int:
        return int(np.count_nonzero(self.labels == region))

    @property
    def roi(self) -> np.ndarray:
        return self.labels != Region.BACKGROUND


@dataclass(frozen=True)
class Seed:
    x: int
    y: int
    centroid_color: Tuple[float, float, float]
    label: Region = Region.FOREGROUND


@dataclass(frozen=True)
class ClusterMap:
    """Result of one region-growing pass.

    ``assignment`` holds a cluster id per pixel or ``ORPHAN``; ``seed_labels``
    and ``pixel_counts`` are indexed by cluster id.
    """

    assignment: np.ndarray
    seed_labels: np.ndarray
    pixel_counts: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "assignment", _frozen(self.assignment, np.int32))
        object.__setattr__(self, "seed_labels", _frozen(self.seed_labels, np.int8))
        object.__setattr__(self, "pixel_counts", _frozen(self.pixel_counts, np.int64))

    @property
    def size(self) -> ImageSize:
        return ImageSize.of(self.assignment)

    @property
    def n_clusters(self) -> int:
        return int(self.pixel_counts.shape[0])


@dataclass(frozen=True)
class SegMask:
    labels: np.ndarray
    avg_votes: np.ndarray

    def __post_init__(self):
        votes = _frozen(self.avg_votes, np.float64)
        labels = _frozen(self.labels, bool)
        if votes.shape != labels.shape or votes.ndim != 2:
            raise ValueError("mask labels and votes must share a 2-D shape")
        if not np.array_equal(labels, votes > 0.5):
            raise ValueError("mask labels must equal avg_votes > 0.5")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "avg_votes", votes)

    @classmethod
    def from_votes(cls, votes: np.ndarray) -> "SegMask":
        votes = np.asarray(votes, dtype=np.float64)
        return cls(labels=votes > 0.5, avg_votes=votes)

    @classmethod
    def from_labels(cls, labels: np.ndarray) -> "SegMask":
        """Binary mask whose vote map is the 0/1 indicator."""
        return cls.from_votes(np.asarray(labels, dtype=bool).astype(np.float64))

    @property
    def size(self) -> ImageSize:
        return ImageSize.of(self.labels)


@dataclass(frozen=True)
class RefineConfig:
    """Knobs for the region-growing refinement.

    ``theta_s`` and ``theta_m`` are the squared spatial and colour
    normalisers of the growing distance; use :meth:`from_knobs` to derive
    them from a seed spacing and a compactness value.
    """

    tau0: float = 0.4
    tauF: float = 0.6
    tauB: float = 0.0
    n_s: int = 10
    seed_spacing: float = 8.0
    theta_s: float = 64.0
    theta_m: float = 100.0
    d_max: float = 2.0
    connectivity: int = 4
    thicken_radius: int = 5
    roi_margin: float = 16.0
    rng_seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.tauB < self.tau0 < self.tauF <= 1.0):
            raise ValueError(
                f"thresholds must satisfy 0 <= tauB < tau0 < tauF <= 1, "
                f"got tauB={self.tauB} tau0={self.tau0} tauF={self.tauF}"
            )
        if self.n_s < 1:
            raise ValueError("n_s must be >= 1")
        if self.seed_spacing < 1:
            raise ValueError("seed_spacing must be >= 1")
        if self.theta_s <= 0 or self.theta_m <= 0:
            raise ValueError("theta_s and theta_m must be positive")
        if not self.d_max > 0:
            raise ValueError("d_max must be positive")
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")
        if self.thicken_radius < 0 or self.roi_margin < 0:
            raise ValueError("thicken_radius and roi_margin must be non-negative")
        if not (-(2**63) <= self.rng_seed < 2**64):
            raise ValueError("rng_seed must fit in 64 bits")

    @classmethod
    def from_knobs(
        cls,
        seed_spacing: float = 8.0,
        compactness: float = 10.0,
        theta_s: Optional[float] = None,
        theta_m: Optional[float] = None,
        roi_margin: Optional[float] = None,
        **kwargs,
    ) -> "RefineConfig":
        """Build a config, deriving normalisers and RoI margin where unset.

        ``theta_s = seed_spacing**2``, ``theta_m = compactness**2`` and
        ``roi_margin = 2 * seed_spacing`` unless given explicitly.
        """
        return cls(
            seed_spacing=seed_spacing,
            theta_s=float(seed_spacing) ** 2 if theta_s is None else theta_s,
            theta_m=float(compactness) ** 2 if theta_m is None else theta_m,
            roi_margin=2.0 * seed_spacing if roi_margin is None else roi_margin,
            **kwargs,
        )

    def replace(self, **changes) -> "RefineConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}
