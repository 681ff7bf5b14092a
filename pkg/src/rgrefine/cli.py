"""Command-line front end: ``rgrefine {refine,baseline,eval,bench}``.

Exit codes: 0 ok, 2 usage or dimension mismatch, 3 input decode failure,
4 output write failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional

from . import io
from .baseline import default_superpixel_count, sppx_refine
from .bench import Degradation, run_benchmark
from .metrics import default_boundary_tolerance
from .model import ImageSize, RefineConfig
from .refine import rgr_refine

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DECODE = 3
EXIT_WRITE = 4

log = logging.getLogger("rgrefine")


class UsageError(Exception):
    pass


# key -> (RefineConfig.from_knobs argument, parser)
_KNOBS = {
    "tau0": ("tau0", float),
    "tau_f": ("tauF", float),
    "tau_b": ("tauB", float),
    "n_s": ("n_s", int),
    "seed_spacing": ("seed_spacing", float),
    "compactness": ("compactness", float),
    "theta_s": ("theta_s", float),
    "theta_m": ("theta_m", float),
    "d_max": ("d_max", float),
    "connectivity": ("connectivity", int),
    "thicken_radius": ("thicken_radius", int),
    "roi_margin": ("roi_margin", float),
    "rng_seed": ("rng_seed", int),
}
_ALIASES = {"tauf": "tau_f", "taub": "tau_b", "ns": "n_s"}


def _knob_key(raw: str) -> str:
    key = raw.strip().lower().replace("-", "_")
    return _ALIASES.get(key, key)


def read_config_file(path: str) -> Dict[str, object]:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are ignored."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"{path}: cannot read config file: {exc.strerror}") from exc
    knobs: Dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = _knob_key(key)
        if key not in _KNOBS:
            raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
        name, parse = _KNOBS[key]
        try:
            knobs[name] = parse(value)
        except ValueError:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return knobs


def resolve_config(args: argparse.Namespace) -> RefineConfig:
    """Defaults, then the config file, then explicit flags."""
    if getattr(args, "threads", 1) < 1:
        raise UsageError("--threads must be >= 1")
    knobs: Dict[str, object] = {}
    if args.config:
        knobs.update(read_config_file(args.config))
    for key, (name, _) in _KNOBS.items():
        value = getattr(args, key, None)
        if value is not None:
            knobs[name] = value
    try:
        return RefineConfig.from_knobs(**knobs)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from exc


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("refinement configuration")
    g.add_argument("--tau0", type=float, help="detector threshold for voting (default 0.4)")
    g.add_argument("--tau-f", dest="tau_f", type=float, help="foreground threshold (default 0.6)")
    g.add_argument("--tau-b", dest="tau_b", type=float, help="background threshold (default 0.0)")
    g.add_argument("--n-s", dest="n_s", type=int, help="Monte Carlo passes (default 10)")
    g.add_argument("--seed-spacing", dest="seed_spacing", type=float, help="mean seed spacing in px (default 8)")
    g.add_argument("--compactness", type=float, help="colour normaliser scale (default 10)")
    g.add_argument("--theta-s", dest="theta_s", type=float, help="spatial normaliser (default seed-spacing^2)")
    g.add_argument("--theta-m", dest="theta_m", type=float, help="colour normaliser (default compactness^2)")
    g.add_argument("--d-max", dest="d_max", type=float, help="growth distance cap (default 2.0)")
    g.add_argument("--connectivity", type=int, choices=(4, 8), help="neighbourhood (default 4)")
    g.add_argument("--thicken-radius", dest="thicken_radius", type=int, help="px (default 5)")
    g.add_argument("--roi-margin", dest="roi_margin", type=float, help="px (default 2*seed-spacing)")
    g.add_argument("--rng-seed", dest="rng_seed", type=int, help="Monte Carlo seed (default 0)")
    g.add_argument("--config", help="key=value config file; flags override it")
    g.add_argument("--threads", type=int, default=1, help="worker threads; output does not depend on it")


def _add_output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--emit-scores", metavar="PFM", help="also write the averaged vote map")
    p.add_argument("--report", metavar="JSON", help="write a JSON report")
    p.add_argument("--gt", metavar="MASK", help="ground-truth mask PNG to score against in the report")
    p.add_argument("--tol", type=float, help="boundary tolerance in px (default 0.8%% of the diagonal)")


def _load_pair(args):
    img = io.load_image(args.image)
    m = io.load_confidence(args.confidence)
    if img.size != m.size:
        raise UsageError(
            f"dimension mismatch: image is {img.size.width}x{img.size.height}, "
            f"confidence map is {m.size.width}x{m.size.height}"
        )
    return img, m


def _write_outputs(args, mask, config_echo: dict, elapsed_ms: float) -> None:
    io.save_mask(mask, args.output)
    if args.emit_scores:
        io.save_scores(mask.avg_votes, args.emit_scores)
    if args.report:
        gt = io.load_mask(args.gt) if args.gt else None
        if gt is not None and gt.size != mask.size:
            raise UsageError("ground-truth mask size does not match the input")
        report = io.build_report(mask, gt, args.tol, config_echo, elapsed_ms)
        io.save_report(report, args.report)


def cmd_refine(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    img, m = _load_pair(args)
    start = time.perf_counter()
    mask = rgr_refine(img, m, cfg, workers=args.threads)
    elapsed = (time.perf_counter() - start) * 1000.0
    _write_outputs(args, mask, cfg.to_dict(), elapsed)
    return EXIT_OK


def cmd_baseline(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    img, m = _load_pair(args)
    k = args.superpixels or default_superpixel_count(img.size, cfg)
    if not 1 <= k <= img.size.area:
        raise UsageError(f"--superpixels must be in [1, {img.size.area}]")
    start = time.perf_counter()
    mask = sppx_refine(img, m, k=k, tau0=cfg.tau0, cfg=cfg)
    elapsed = (time.perf_counter() - start) * 1000.0
    echo = cfg.to_dict()
    echo["superpixels"] = k
    _write_outputs(args, mask, echo, elapsed)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    pred = io.load_mask(args.pred)
    gt = io.load_mask(args.gt)
    if pred.size != gt.size:
        raise UsageError("prediction and ground-truth masks differ in size")
    tol = args.tol if args.tol is not None else default_boundary_tolerance(gt.size.width, gt.size.height)
    report = io.build_report(pred, gt, tol, {"boundary_tolerance": tol}, None)
    if args.report:
        io.save_report(report, args.report)
    else:
        json.dump(report, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    if args.n_scenes < 1:
        raise UsageError("--n-scenes must be >= 1")
    try:
        size = ImageSize(args.width, args.height)
        degradation = Degradation(args.blur_sigma, args.max_shift, args.noise_sigma)
        report = run_benchmark(args.n_scenes, cfg, degradation, args.seed, size, workers=args.threads)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    try:
        if args.json:
            report.write_json(args.json)
        if args.csv:
            report.write_csv(args.csv)
    except OSError as exc:
        raise io.WriteError(exc.filename or "?", exc.strerror or str(exc)) from exc
    for method, stats in report.summary().items():
        print(
            f"{method:10s} mean IoU {stats['mean_iou']:.4f}  mean boundary F "
            f"{stats['mean_boundary_f']:.4f}  mean runtime {stats['mean_runtime_ms']:.1f} ms"
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rgrefine", description="Refine segmentation confidence maps by seeded region growing."
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("refine", help="region-growing refinement of one confidence map")
    p.add_argument("image", help="PNG or PPM image")
    p.add_argument("confidence", help="PFM or 16-bit PNG score map")
    p.add_argument("output", help="output mask PNG")
    _add_config_flags(p)
    _add_output_flags(p)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("baseline", help="superpixel majority-voting refinement")
    p.add_argument("image")
    p.add_argument("confidence")
    p.add_argument("output")
    p.add_argument("--superpixels", type=int, help="superpixel count (default area / seed-spacing^2)")
    _add_config_flags(p)
    _add_output_flags(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("eval", help="score a predicted mask against ground truth")
    p.add_argument("pred")
    p.add_argument("gt")
    p.add_argument("--tol", type=float, help="boundary tolerance in px")
    p.add_argument("--report", metavar="JSON", help="write here instead of stdout")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="synthetic benchmark of threshold vs sppx vs rgr")
    p.add_argument("--n-scenes", dest="n_scenes", type=int, default=10)
    p.add_argument("--seed", type=int, default=0, help="master benchmark seed")
    p.add_argument("--width", type=int, default=320)
    p.add_argument("--height", type=int, default=240)
    p.add_argument("--blur-sigma", dest="blur_sigma", type=float, default=8.0)
    p.add_argument("--max-shift", dest="max_shift", type=int, default=4)
    p.add_argument("--noise-sigma", dest="noise_sigma", type=float, default=0.05)
    p.add_argument("--json", metavar="PATH", help="per-scene rows as a JSON array")
    p.add_argument("--csv", metavar="PATH", help="per-scene rows as CSV")
    _add_config_flags(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"rgrefine: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except io.WriteError as exc:
        print(f"rgrefine: {exc}", file=sys.stderr)
        return EXIT_WRITE
    except io.ImageIOError as exc:
        print(f"rgrefine: {exc}", file=sys.stderr)
        return EXIT_DECODE


if __name__ == "__main__":
    sys.exit(main())
