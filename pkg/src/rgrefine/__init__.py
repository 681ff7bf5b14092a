"""Boundary refinement of segmentation confidence maps by Monte Carlo seeded region growing."""

from .baseline import grid_seeds, sppx_refine
from .bench import degrade, gen_scene, run_benchmark
from .color import rgb_to_lab
from .metrics import boundary_f, iou, pr_sweep
from .model import (
    ORPHAN,
    ClusterMap,
    ConfidenceMap,
    ImageSize,
    LabImage,
    RefineConfig,
    Region,
    RegionPartition,
    RgbImage,
    Seed,
    SegMask,
    pixel_index,
)
from .partition import compute_roi, thicken_uncertain, threshold_regions
from .refine import (
    NoHighConfidenceRegion,
    cluster_vote,
    grow_regions,
    rgr_refine,
    sample_seeds,
    seed_count,
    snic_distance,
)

__version__ = "0.1.0"
