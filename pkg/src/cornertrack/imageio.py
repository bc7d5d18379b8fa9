"""PFM and 16-bit PGM image files, plus the JSON manifest for frame sets.

PFM stores 32-bit floats, so only images that are already float32-representable
round-trip bit-exactly.  ``write_pfm(..., exact=True)`` refuses anything else;
use :func:`write_pfm64` ("Pd" variant, float64 payload) for lossless simulator
output.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np

_HEADER = re.compile(rb"^(P[fFd])\s+(\d+)\s+(\d+)\s+([-+0-9.eE]+)\s", re.S)


class ImageFormatError(ValueError):
    pass


def _write_float(path, image, tag: bytes, dtype):
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError("only single-channel images are supported")
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(tag + b"\n%d %d\n-1.0\n" % (w, h))
        # PFM rows run bottom to top
        f.write(np.ascontiguousarray(np.flipud(img), dtype=np.dtype(dtype).newbyteorder("<")).tobytes())


def write_pfm(path, image, exact: bool = False) -> None:
    img = np.asarray(image, dtype=np.float64)
    if exact and not np.array_equal(img.astype(np.float32).astype(np.float64), img, equal_nan=True):
        raise ValueError("image is not float32-representable; use write_pfm64 for a lossless copy")
    _write_float(path, img, b"Pf", np.float32)


def write_pfm64(path, image) -> None:
    _write_float(path, image, b"Pd", np.float64)


def read_pfm(path) -> np.ndarray:
    """Read a grayscale PFM (``Pf``, or the float64 ``Pd`` variant) as float64."""
    data = Path(path).read_bytes()
    m = _HEADER.match(data)
    if not m:
        raise ImageFormatError(f"{path}: not a PFM file")
    tag, w, h, scale = m.group(1), int(m.group(2)), int(m.group(3)), float(m.group(4))
    if tag == b"PF":
        raise ImageFormatError(f"{path}: color PFM not supported")
    base = np.float32 if tag == b"Pf" else np.float64
    dt = np.dtype(base).newbyteorder("<" if scale < 0 else ">")
    body = data[m.end():]
    if len(body) != w * h * dt.itemsize:
        raise ImageFormatError(f"{path}: expected {w * h} pixels")
    img = np.frombuffer(body, dtype=dt).reshape(h, w)
    return np.flipud(img).astype(np.float64)


def write_pgm16(path, image, scale: float | None = None) -> float:
    """Write a 16-bit PGM preview; returns the intensity per count used.

    Negative values clip to 0.  The scale is also written as a ``# scale``
    comment so :func:`read_pgm16` can undo it.
    """
    img = np.asarray(image, dtype=np.float64)
    if scale is None:
        peak = float(np.max(img)) if img.size else 0.0
        scale = peak / 65535.0 if peak > 0 else 1.0
    counts = np.clip(np.rint(img / scale), 0, 65535).astype(">u2")
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(b"P5\n# scale %r\n%d %d\n65535\n" % (scale, w, h))
        f.write(counts.tobytes())
    return scale


def read_pgm16(path) -> tuple:
    """Returns ``(image_in_intensity_units, scale)``."""
    data = Path(path).read_bytes()
    tokens, scale, pos = [], 1.0, 0
    while len(tokens) < 4:
        line_end = data.index(b"\n", pos)
        line = data[pos:line_end]
        pos = line_end + 1
        if line.startswith(b"#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == b"scale":
                scale = float(parts[1])
            continue
        tokens += line.split()
    if tokens[0] != b"P5" or int(tokens[3]) != 65535:
        raise ImageFormatError(f"{path}: not a 16-bit binary PGM")
    w, h = int(tokens[1]), int(tokens[2])
    counts = np.frombuffer(data[pos:pos + 2 * w * h], dtype=">u2").reshape(h, w)
    return counts.astype(np.float64) * scale, scale


def save_frames(directory, frames, background=None, extra: dict | None = None) -> Path:
    """Store a frame set as lossless PFMs plus ``manifest.json``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    files = {}
    for key in ("i00", "i10", "i01", "i11"):
        write_pfm64(d / f"{key}.pfm", getattr(frames, key))
        files[key] = f"{key}.pfm"
    if background is not None:
        write_pfm64(d / "background.pfm", background)
        files["background"] = "background.pfm"
    manifest = {"files": files, "noise": frames.meta, **(extra or {})}
    path = d / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def load_frames(directory):
    from .measure import FrameSet

    d = Path(directory)
    manifest = json.loads((d / "manifest.json").read_text())
    files = manifest["files"]
    frames = FrameSet(*(read_pfm(d / files[k]) for k in ("i00", "i10", "i01", "i11")),
                      meta=manifest.get("noise", {}))
    background = read_pfm(d / files["background"]) if "background" in files else None
    return frames, background, manifest
