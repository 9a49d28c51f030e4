"""Float grid files: portable float maps (PFM) and CSV grids.

PFM layout used here: an ASCII header of three lines -- magic, "W H", and
a scale whose sign encodes endianness (negative = little-endian) -- then
binary float32 samples, row-major from the top row down, channels
interleaved. Magic is "Pf" for 1 channel, "PF" for 3, and "PF<n>" for any
other channel count (e.g. "PF2" for a two-channel flow field).

CSV layout: a "width,height,channels" header line, then channels blocks of
height rows each, every row holding width comma-separated values.
"""

from __future__ import annotations

import numpy as np

from .errors import FileFormatError


def _magic_for(channels: int) -> bytes:
    if channels == 1:
        return b"Pf"
    if channels == 3:
        return b"PF"
    return b"PF%d" % channels


def _channels_for(magic: bytes) -> int:
    if magic == b"Pf":
        return 1
    if magic == b"PF":
        return 3
    if magic.startswith(b"PF") and magic[2:].isdigit():
        return int(magic[2:])
    raise FileFormatError(f"not a PFM header: {magic!r}")


def write_pfm(path, data: np.ndarray) -> None:
    """Write an (H, W) or (H, W, C) float grid as PFM."""
    arr = np.asarray(data, dtype=np.float32)
    if arr.ndim == 2:
        arr = arr[..., None]
    if arr.ndim != 3:
        raise ValueError(f"expected (H, W[, C]) data, got shape {arr.shape}")
    h, w, c = arr.shape
    with open(path, "wb") as f:
        f.write(_magic_for(c) + b"\n")
        f.write(b"%d %d\n" % (w, h))
        f.write(b"-1.0\n")
        f.write(arr.astype("<f4").tobytes(order="C"))


def read_pfm(path) -> np.ndarray:
    """Read a PFM written by write_pfm. Returns (H, W) or (H, W, C)."""
    with open(path, "rb") as f:
        raw = f.read()
    try:
        magic, dims, scale, rest = raw.split(b"\n", 3)
        c = _channels_for(magic.strip())
        w, h = (int(t) for t in dims.split())
        scale_val = float(scale)
    except (ValueError, FileFormatError) as e:
        raise FileFormatError(f"{path}: bad PFM header ({e})") from None
    if w <= 0 or h <= 0:
        raise FileFormatError(f"{path}: bad PFM dimensions {w}x{h}")
    dtype = "<f4" if scale_val < 0 else ">f4"
    expected = w * h * c * 4
    if len(rest) < expected:
        raise FileFormatError(
            f"{path}: truncated PFM payload ({len(rest)} < {expected} bytes)"
        )
    arr = np.frombuffer(rest[:expected], dtype=dtype).reshape(h, w, c).astype(float)
    return arr[..., 0] if c == 1 else arr


def write_csv_grid(path, data: np.ndarray) -> None:
    """Write an (H, W) or (H, W, C) float grid as a headered CSV."""
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 2:
        arr = arr[..., None]
    h, w, c = arr.shape
    with open(path, "w") as f:
        f.write(f"{w},{h},{c}\n")
        for ch in range(c):
            for row in arr[..., ch]:
                f.write(",".join(repr(float(v)) for v in row) + "\n")


def read_csv_grid(path) -> np.ndarray:
    """Read a CSV grid written by write_csv_grid."""
    with open(path) as f:
        lines = [ln.strip() for ln in f if ln.strip()]
    if not lines:
        raise FileFormatError(f"{path}: empty CSV grid")
    try:
        w, h, c = (int(t) for t in lines[0].split(","))
    except ValueError:
        raise FileFormatError(f"{path}: bad CSV header {lines[0]!r}") from None
    if len(lines) - 1 != h * c:
        raise FileFormatError(
            f"{path}: expected {h * c} data rows, found {len(lines) - 1}"
        )
    try:
        rows = [[float(t) for t in ln.split(",")] for ln in lines[1:]]
    except ValueError:
        raise FileFormatError(f"{path}: non-numeric CSV value") from None
    if any(len(r) != w for r in rows):
        raise FileFormatError(f"{path}: row width does not match header ({w})")
    arr = np.array(rows, dtype=float).reshape(c, h, w).transpose(1, 2, 0)
    return arr[..., 0] if c == 1 else arr


def read_float_grid(path) -> np.ndarray:
    """Dispatch on extension: .pfm or .csv."""
    p = str(path)
    if p.lower().endswith(".pfm"):
        return read_pfm(p)
    if p.lower().endswith(".csv"):
        return read_csv_grid(p)
    raise FileFormatError(f"{path}: unsupported float-grid extension")
