"""Reading and writing images, confidence maps, masks and JSON reports.

Supported formats: PNG (8-bit RGB/RGBA/grey, 16-bit grey for confidence
maps), binary PPM (P6) and greyscale PFM (``Pf``).
"""

from __future__ import annotations

import json
import logging
import os
import re
from io import BytesIO
from pathlib import Path
from typing import Any, Mapping, Optional, Union

import numpy as np
import png

from .model import ConfidenceMap, RgbImage, SegMask

log = logging.getLogger(__name__)

PathLike = Union[str, os.PathLike]


class ImageIOError(Exception):
    """Base class for load/save failures; always carries the offending path."""

    def __init__(self, path: PathLike, message: str):
        super().__init__(f"{path}: {message}")
        self.path = str(path)


class MissingFileError(ImageIOError):
    pass


class DecodeError(ImageIOError):
    pass


class UnsupportedDepth(DecodeError):
    pass


class UnsupportedFormat(DecodeError):
    pass


class WriteError(ImageIOError):
    pass


def _read_bytes(path: PathLike) -> bytes:
    try:
        return Path(path).read_bytes()
    except FileNotFoundError:
        raise MissingFileError(path, "file not found") from None
    except OSError as exc:
        raise ImageIOError(path, f"cannot read: {exc.strerror}") from exc


def _write_bytes(path: PathLike, data: bytes) -> None:
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise WriteError(path, f"cannot write: {exc.strerror or exc}") from exc


# --- PNG -------------------------------------------------------------------


def _decode_png(path: PathLike, data: bytes):
    """Return ``(array[H, W, planes], bitdepth)`` with palettes expanded."""
    try:
        width, height, rows, info = png.Reader(bytes=data).asDirect()
        arr = np.array([np.asarray(row) for row in rows])
    except (png.Error, ValueError, EOFError) as exc:
        raise DecodeError(path, f"invalid PNG: {exc}") from exc
    planes = info["planes"]
    if width == 0 or height == 0:
        raise DecodeError(path, "zero-sized image")
    arr = arr.reshape(height, width, planes)
    return arr, info["bitdepth"]


def _png_bytes(arr: np.ndarray, bitdepth: int, greyscale: bool) -> bytes:
    height, width = arr.shape[:2]
    writer = png.Writer(width, height, greyscale=greyscale, bitdepth=bitdepth)
    buf = BytesIO()
    writer.write(buf, arr.reshape(height, -1).tolist())
    return buf.getvalue()


# --- PPM -------------------------------------------------------------------

_PNM_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n?)*([^\s#]+)")


def _decode_ppm(path: PathLike, data: bytes) -> np.ndarray:
    pos = 0
    tokens = []
    for _ in range(4):
        match = _PNM_TOKEN.match(data, pos)
        if match is None:
            raise DecodeError(path, "truncated PPM header")
        tokens.append(match.group(1))
        pos = match.end()
    if tokens[0] != b"P6":
        raise UnsupportedFormat(path, f"unsupported PNM magic {tokens[0]!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise DecodeError(path, "malformed PPM header") from None
    if width <= 0 or height <= 0:
        raise DecodeError(path, "zero-sized image")
    if maxval > 255:
        raise UnsupportedDepth(path, f"PPM maxval {maxval} exceeds 8 bits")
    if maxval <= 0:
        raise DecodeError(path, "PPM maxval must be positive")
    pos += 1  # single whitespace byte after maxval
    need = width * height * 3
    body = data[pos : pos + need]
    if len(body) < need:
        raise DecodeError(path, f"truncated PPM data: {len(body)} of {need} bytes")
    pixels = np.frombuffer(body, dtype=np.uint8).reshape(height, width, 3)
    if maxval != 255:
        pixels = np.round(pixels.astype(np.float64) * 255.0 / maxval).astype(np.uint8)
    return pixels


def save_ppm(img: RgbImage, path: PathLike) -> None:
    h, w = img.pixels.shape[:2]
    _write_bytes(path, f"P6\n{w} {h}\n255\n".encode("ascii") + img.pixels.tobytes())


# --- PFM -------------------------------------------------------------------


def _decode_pfm(path: PathLike, data: bytes) -> np.ndarray:
    lines = []
    pos = 0
    while len(lines) < 3:
        end = data.find(b"\n", pos)
        if end < 0:
            raise DecodeError(path, "truncated PFM header")
        line = data[pos:end].strip()
        pos = end + 1
        if line:
            lines.append(line)
    magic, dims, scale_line = lines
    if magic == b"PF":
        raise UnsupportedFormat(path, "colour PFM given where a greyscale map is required")
    if magic != b"Pf":
        raise DecodeError(path, f"not a PFM file (magic {magic[:8]!r})")
    try:
        width, height = (int(t) for t in dims.split())
        scale = float(scale_line)
    except ValueError:
        raise DecodeError(path, "malformed PFM header") from None
    if width <= 0 or height <= 0:
        raise DecodeError(path, "zero-sized confidence map")
    if scale == 0:
        raise DecodeError(path, "PFM scale must be non-zero")
    dtype = np.dtype("<f4") if scale < 0 else np.dtype(">f4")
    need = width * height * 4
    body = data[pos : pos + need]
    if len(body) < need:
        raise DecodeError(path, f"truncated PFM data: {len(body)} of {need} bytes")
    values = np.frombuffer(body, dtype=dtype).reshape(height, width)
    # PFM rows run bottom to top.
    return values[::-1].astype(np.float64) * abs(scale)


def _pfm_bytes(values: np.ndarray) -> bytes:
    h, w = values.shape
    header = f"Pf\n{w} {h}\n-1.0\n".encode("ascii")
    return header + np.ascontiguousarray(values[::-1], dtype="<f4").tobytes()


# --- public API -------------------------------------------------------------


def load_image(path: PathLike) -> RgbImage:
    """Load an 8-bit RGB image from PNG or binary PPM; alpha is dropped and grey replicated."""
    data = _read_bytes(path)
    if data.startswith(png.signature):
        arr, depth = _decode_png(path, data)
        if depth > 8:
            raise UnsupportedDepth(path, f"{depth}-bit PNG images are not supported")
        if depth < 8:
            arr = arr * (255 // (2**depth - 1))
        planes = arr.shape[2]
        if planes in (1, 2):
            arr = np.repeat(arr[..., :1], 3, axis=2)
        else:
            arr = arr[..., :3]
        return RgbImage(arr.astype(np.uint8))
    if data[:2] == b"P6":
        return RgbImage(_decode_ppm(path, data))
    if data[:1] == b"P" and data[1:2] in b"12345":
        raise UnsupportedFormat(path, "only binary colour PPM (P6) is supported")
    raise DecodeError(path, "unrecognised image format")


def _clamped_map(path: PathLike, values: np.ndarray) -> ConfidenceMap:
    bad = ~((values >= 0.0) & (values <= 1.0))
    n_bad = int(np.count_nonzero(bad))
    if n_bad:
        log.warning("%s: clamped %d confidence value(s) into [0, 1]", path, n_bad)
        values = np.clip(np.nan_to_num(values, nan=0.0), 0.0, 1.0)
    return ConfidenceMap(values, n_clamped=n_bad)


def load_confidence(path: PathLike) -> ConfidenceMap:
    """Load a score map from greyscale PFM or 16-bit greyscale PNG (``v / 65535``)."""
    data = _read_bytes(path)
    if data.startswith(png.signature):
        arr, depth = _decode_png(path, data)
        if arr.shape[2] != 1:
            raise UnsupportedFormat(path, "confidence PNG must be greyscale without alpha")
        if depth != 16:
            raise UnsupportedDepth(path, f"confidence PNG must be 16-bit, got {depth}-bit")
        return ConfidenceMap(arr[..., 0].astype(np.float64) / 65535.0)
    if data[:2] in (b"Pf", b"PF"):
        return _clamped_map(path, _decode_pfm(path, data))
    raise DecodeError(path, "unrecognised confidence map format")


def load_mask(path: PathLike) -> SegMask:
    """Load a binary mask from a greyscale (or RGB) PNG; any non-zero value is foreground."""
    data = _read_bytes(path)
    if not data.startswith(png.signature):
        raise DecodeError(path, "masks must be PNG files")
    arr, _ = _decode_png(path, data)
    planes = arr.shape[2]
    colour = arr[..., : (1 if planes <= 2 else 3)]
    return SegMask.from_labels(colour.any(axis=2))


def save_mask(mask: SegMask, path: PathLike) -> None:
    arr = np.where(mask.labels, 255, 0).astype(np.uint8)
    _write_bytes(path, _png_bytes(arr, bitdepth=8, greyscale=True))


def save_scores(scores: Union[np.ndarray, ConfidenceMap], path: PathLike) -> None:
    values = scores.scores if isinstance(scores, ConfidenceMap) else np.asarray(scores)
    if values.ndim != 2:
        raise ValueError("score map must be 2-D")
    _write_bytes(path, _pfm_bytes(values))


def save_confidence_png(m: ConfidenceMap, path: PathLike) -> None:
    arr = np.round(m.scores * 65535.0).astype(np.uint16)
    _write_bytes(path, _png_bytes(arr, bitdepth=16, greyscale=True))


def save_image(img: RgbImage, path: PathLike) -> None:
    _write_bytes(path, _png_bytes(img.pixels, bitdepth=8, greyscale=False))


def build_report(
    pred: Optional[SegMask] = None,
    gt: Optional[SegMask] = None,
    tol: Optional[float] = None,
    config: Optional[Mapping[str, Any]] = None,
    timing_ms: Optional[float] = None,
) -> dict:
    """Assemble the metrics report; metric keys are null when no ground truth is given."""
    from .metrics import boundary_f, default_boundary_tolerance, iou

    report: dict = {
        "iou": None,
        "boundary_precision": None,
        "boundary_recall": None,
        "boundary_f": None,
        "config": dict(config or {}),
        "timing_ms": timing_ms,
    }
    if pred is not None and gt is not None:
        if tol is None:
            tol = default_boundary_tolerance(gt.size.width, gt.size.height)
        score = boundary_f(pred, gt, tol)
        report.update(
            iou=iou(pred, gt),
            boundary_precision=score.precision,
            boundary_recall=score.recall,
            boundary_f=score.f,
            boundary_tolerance=tol,
        )
    return report


def save_report(metrics: Mapping[str, Any], path: PathLike) -> None:
    _write_bytes(path, (json.dumps(dict(metrics), indent=2, sort_keys=True) + "\n").encode("utf-8"))
