import numpy as np
import pytest
from scipy import ndimage

from oracles import brute_gaussian_blur
from rgrefine.bench import (
    MIN_POOL_SEPARATION,
    Degradation,
    Ellipse,
    _pool_separation,
    degrade,
    gen_scene,
    run_benchmark,
)
from rgrefine.color import rgb_array_to_lab
from rgrefine.model import ImageSize, SegMask

SIZE = ImageSize(96, 72)


def test_scene_is_deterministic():
    a, b = gen_scene(SIZE, 42, "polygon"), gen_scene(SIZE, 42, "polygon")
    assert np.array_equal(a.image.pixels, b.image.pixels)
    assert np.array_equal(a.gt.labels, b.gt.labels)
    c = gen_scene(SIZE, 43, "polygon")
    assert not np.array_equal(a.image.pixels, c.image.pixels)


def test_ellipse_gt_matches_implicit_equation():
    scene = gen_scene(SIZE, 7, "ellipse")
    (e,) = scene.shapes
    assert isinstance(e, Ellipse)
    for y in range(SIZE.height):
        for x in range(SIZE.width):
            dx, dy = x - e.cx, y - e.cy
            u = (dx * np.cos(e.angle) + dy * np.sin(e.angle)) / e.a
            v = (-dx * np.sin(e.angle) + dy * np.cos(e.angle)) / e.b
            assert scene.gt.labels[y, x] == (u * u + v * v <= 1.0)


def test_multi_blob_has_three_components():
    for seed in range(5):
        scene = gen_scene(ImageSize(160, 120), seed, "multi-blob")
        _, n = ndimage.label(scene.gt.labels)
        assert n == 3


@pytest.mark.parametrize("style", ["ellipse", "polygon", "multi-blob"])
def test_color_pools_are_separated(style):
    for seed in range(4):
        scene = gen_scene(SIZE, seed, style)
        assert _pool_separation(scene.fg_colors, scene.bg_colors) >= MIN_POOL_SEPARATION
        # Mean rendered colours differ by well over the noise level.
        lab = rgb_array_to_lab(scene.image.pixels)
        gap = np.linalg.norm(lab[scene.gt.labels].mean(0) - lab[~scene.gt.labels].mean(0))
        assert gap > 10


def test_scene_rejects_small_size_and_bad_style():
    with pytest.raises(ValueError):
        gen_scene(ImageSize(31, 40), 0)
    with pytest.raises(ValueError):
        gen_scene(SIZE, 0, "spiral")


def test_degrade_identity():
    gt = gen_scene(SIZE, 1).gt
    m = degrade(gt, 0.0, (0, 0), 0.0)
    assert np.array_equal(m.scores, gt.labels.astype(float))


def test_degrade_blur_spreads_mass():
    labels = np.zeros((40, 40), bool)
    labels[18:22, 18:22] = True
    m = degrade(SegMask.from_labels(labels), 6.0)
    assert m.scores.max() < 1.0


def test_degrade_blur_matches_direct_convolution():
    labels = np.zeros((20, 24), bool)
    labels[5:12, 6:15] = True
    m = degrade(SegMask.from_labels(labels), 1.5, (0, 0), 0.0)
    assert np.allclose(m.scores, brute_gaussian_blur(labels.astype(float), 1.5), atol=1e-12)


def test_degrade_shift_moves_centroid():
    labels = np.zeros((48, 48), bool)
    labels[16:30, 12:24] = True
    gt = SegMask.from_labels(labels)
    m = degrade(gt, 2.0, (4, 0), 0.0)
    oracle = brute_gaussian_blur(np.roll(labels, 4, axis=1).astype(float), 2.0)
    assert np.allclose(m.scores, oracle, atol=1e-12)
    cols = np.arange(48)
    gt_cx = (labels.sum(0) * cols).sum() / labels.sum()
    score_cx = (m.scores.sum(0) * cols).sum() / m.scores.sum()
    assert score_cx - gt_cx == pytest.approx(4.0, abs=1e-9)


def test_degrade_edge_clamping():
    labels = np.zeros((5, 6), bool)
    labels[:, 0] = True
    m = degrade(SegMask.from_labels(labels), 0.0, (2, 0))
    assert m.scores[:, :3].tolist() == [[1.0, 1.0, 1.0]] * 5
    assert not m.scores[:, 3:].any()


def test_degrade_noise_is_seeded_and_clamped():
    gt = gen_scene(SIZE, 2).gt
    a = degrade(gt, 3.0, (1, 1), 0.2, seed=9)
    b = degrade(gt, 3.0, (1, 1), 0.2, seed=9)
    assert np.array_equal(a.scores, b.scores)
    assert a.scores.min() >= 0 and a.scores.max() <= 1


def test_benchmark_rows_and_reproducibility(tmp_path):
    kw = dict(n_scenes=2, seed=5, size=SIZE)
    a, b = run_benchmark(**kw), run_benchmark(**kw)
    assert a.scores() == b.scores()
    assert len(a.rows) == 6
    for method in ("threshold", "sppx", "rgr"):
        assert sum(r["method"] == method for r in a.rows) == 2
    a.write_csv(tmp_path / "b.csv")
    a.write_json(tmp_path / "b.json")
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0] == "method,scene_id,iou,boundary_f,runtime_ms"
    assert len(lines) == 7


def test_benchmark_identity_degradation():
    report = run_benchmark(3, degradation=Degradation(0.0, 0, 0.0), seed=11, size=ImageSize(128, 96))
    for row in report.rows:
        if row["method"] in ("threshold", "rgr"):
            assert row["iou"] == 1.0
        else:
            assert row["iou"] >= 0.98


def test_polygon_gt_is_one_4_connected_region():
    for seed in range(6):
        scene = gen_scene(SIZE, seed, "polygon")
        _, n = ndimage.label(scene.gt.labels)
        assert n == 1
