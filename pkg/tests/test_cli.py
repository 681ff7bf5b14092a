import csv
import json

import numpy as np
import pytest

from rgrefine import io
from rgrefine.bench import degrade, gen_scene
from rgrefine.cli import EXIT_DECODE, EXIT_OK, EXIT_USAGE, EXIT_WRITE, main
from rgrefine.model import ConfidenceMap, ImageSize


@pytest.fixture
def scene_files(tmp_path):
    scene = gen_scene(ImageSize(64, 48), 8, "ellipse")
    m = degrade(scene.gt, 4.0, (2, 1), 0.05, seed=3)
    io.save_image(scene.image, tmp_path / "img.png")
    io.save_scores(m.scores, tmp_path / "conf.pfm")
    io.save_mask(scene.gt, tmp_path / "gt.png")
    return tmp_path


def test_refine_writes_mask(scene_files):
    d = scene_files
    rc = main(["refine", str(d / "img.png"), str(d / "conf.pfm"), str(d / "out.png"),
               "--emit-scores", str(d / "votes.pfm"), "--report", str(d / "r.json"), "--gt", str(d / "gt.png")])
    assert rc == EXIT_OK
    mask = io.load_mask(d / "out.png")
    assert (mask.size.width, mask.size.height) == (64, 48)
    votes = io.load_confidence(d / "votes.pfm")
    assert np.array_equal(votes.scores > 0.5, mask.labels)
    report = json.loads((d / "r.json").read_text())
    assert report["config"]["tau0"] == 0.4 and report["config"]["n_s"] == 10
    assert 0.9 < report["iou"] <= 1.0
    assert report["timing_ms"] > 0


def test_refine_dimension_mismatch(scene_files, capsys):
    d = scene_files
    io.save_scores(np.zeros((10, 10)), d / "small.pfm")
    assert main(["refine", str(d / "img.png"), str(d / "small.pfm"), str(d / "o.png")]) == EXIT_USAGE
    assert "dimension mismatch" in capsys.readouterr().err


def test_decode_and_write_failures(scene_files):
    d = scene_files
    (d / "junk.png").write_bytes(b"not an image")
    assert main(["refine", str(d / "junk.png"), str(d / "conf.pfm"), str(d / "o.png")]) == EXIT_DECODE
    assert main(["refine", str(d / "missing.png"), str(d / "conf.pfm"), str(d / "o.png")]) == EXIT_DECODE
    out = d / "no_such_dir" / "o.png"
    assert main(["refine", str(d / "img.png"), str(d / "conf.pfm"), str(out)]) == EXIT_WRITE


def test_usage_errors(scene_files):
    d = scene_files
    args = [str(d / "img.png"), str(d / "conf.pfm"), str(d / "o.png")]
    assert main(["refine", *args, "--tau0", "0.9"]) == EXIT_USAGE
    assert main(["refine", *args, "--connectivity", "6"]) == EXIT_USAGE
    assert main(["refine", *args, "--threads", "0"]) == EXIT_USAGE
    assert main(["frobnicate"]) == EXIT_USAGE


def test_refine_is_byte_identical(scene_files):
    d = scene_files
    outputs = []
    for run in range(2):
        assert main(["refine", str(d / "img.png"), str(d / "conf.pfm"), str(d / f"m{run}.png"),
                     "--n-s", "1", "--rng-seed", "7", "--emit-scores", str(d / f"s{run}.pfm")]) == EXIT_OK
        outputs.append(((d / f"m{run}.png").read_bytes(), (d / f"s{run}.pfm").read_bytes()))
    assert outputs[0] == outputs[1]


def test_config_file_and_flag_precedence(scene_files):
    d = scene_files
    (d / "cfg.txt").write_text("# knobs\ntau-f = 0.7\nn_s=2\nrng_seed = 3\nd-max=3.5\ncompactness=12\n")
    rc = main(["refine", str(d / "img.png"), str(d / "conf.pfm"), str(d / "o.png"),
               "--config", str(d / "cfg.txt"), "--n-s", "3", "--report", str(d / "r.json")])
    assert rc == EXIT_OK
    cfg = json.loads((d / "r.json").read_text())["config"]
    assert cfg["tauF"] == 0.7 and cfg["n_s"] == 3 and cfg["rng_seed"] == 3
    assert cfg["d_max"] == 3.5 and cfg["theta_m"] == 144.0


def test_every_knob_settable(scene_files):
    d = scene_files
    flags = ["--tau0", "0.3", "--tau-f", "0.8", "--tau-b", "0.05", "--n-s", "2", "--seed-spacing", "6",
             "--theta-s", "30", "--theta-m", "90", "--d-max", "2.5", "--connectivity", "8",
             "--thicken-radius", "2", "--roi-margin", "9", "--rng-seed", "11", "--threads", "2"]
    assert main(["refine", str(d / "img.png"), str(d / "conf.pfm"), str(d / "o.png"), *flags,
                 "--report", str(d / "r.json")]) == EXIT_OK
    cfg = json.loads((d / "r.json").read_text())["config"]
    assert cfg == {"tau0": 0.3, "tauF": 0.8, "tauB": 0.05, "n_s": 2, "seed_spacing": 6.0, "theta_s": 30.0,
                   "theta_m": 90.0, "d_max": 2.5, "connectivity": 8, "thicken_radius": 2,
                   "roi_margin": 9.0, "rng_seed": 11}
    lines = "\n".join(f"{k} = {v}" for k, v in cfg.items())
    (d / "all.cfg").write_text(lines + "\n")
    assert main(["refine", str(d / "img.png"), str(d / "conf.pfm"), str(d / "o.png"),
                 "--config", str(d / "all.cfg"), "--report", str(d / "r2.json")]) == EXIT_OK
    assert json.loads((d / "r2.json").read_text())["config"] == cfg


def test_bad_config_file(scene_files):
    d = scene_files
    (d / "bad.cfg").write_text("mystery = 1\n")
    assert main(["refine", str(d / "img.png"), str(d / "conf.pfm"), str(d / "o.png"),
                 "--config", str(d / "bad.cfg")]) == EXIT_USAGE


def test_eval_identical_masks(scene_files, capsys):
    d = scene_files
    assert main(["eval", str(d / "gt.png"), str(d / "gt.png")]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["iou"] == 1.0 and report["boundary_f"] == 1.0
    assert main(["eval", str(d / "gt.png"), str(d / "gt.png"), "--report", str(d / "e.json")]) == EXIT_OK
    assert json.loads((d / "e.json").read_text())["iou"] == 1.0


def test_baseline_all_zero_confidence(scene_files):
    d = scene_files
    io.save_scores(np.zeros((48, 64)), d / "zero.pfm")
    assert main(["baseline", str(d / "img.png"), str(d / "zero.pfm"), str(d / "b.png")]) == EXIT_OK
    assert not io.load_mask(d / "b.png").labels.any()


def test_baseline_with_report(scene_files):
    d = scene_files
    rc = main(["baseline", str(d / "img.png"), str(d / "conf.pfm"), str(d / "b.png"), "--superpixels", "30",
               "--report", str(d / "b.json"), "--gt", str(d / "gt.png")])
    assert rc == EXIT_OK
    report = json.loads((d / "b.json").read_text())
    assert report["config"]["superpixels"] == 30 and report["iou"] > 0.5


def test_bench_csv(tmp_path, capsys):
    rc = main(["bench", "--n-scenes", "2", "--width", "64", "--height", "48", "--csv", str(tmp_path / "b.csv"),
               "--json", str(tmp_path / "b.json")])
    assert rc == EXIT_OK
    rows = list(csv.DictReader(open(tmp_path / "b.csv")))
    assert len(rows) == 6
    for scene_id in ("0", "1"):
        assert sorted(r["method"] for r in rows if r["scene_id"] == scene_id) == ["rgr", "sppx", "threshold"]
    assert len(json.loads((tmp_path / "b.json").read_text())) == 6
    assert "rgr" in capsys.readouterr().out


def test_confidence_png_input(scene_files):
    d = scene_files
    m = io.load_confidence(d / "conf.pfm")
    io.save_confidence_png(ConfidenceMap(m.scores), d / "conf16.png")
    assert main(["refine", str(d / "img.png"), str(d / "conf16.png"), str(d / "o16.png")]) == EXIT_OK
