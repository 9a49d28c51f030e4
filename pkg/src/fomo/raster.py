"""Float image grids, bilinear back-warping, pyramids, and PNG I/O.

Arrays are (H, W, C) float64, indexed [row, col, channel]. The canvas is
[-1, 1]^2 with half-pixel centers (see geometry module); samples that land
outside the canvas contribute zero (zero padding, not clamping), so
disocclusions show up as zeros.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import DimensionMismatchError, PyramidSpecError
from .geometry import Point2

# Default pyramid resolutions for the multi-scale metric.
DEFAULT_PYRAMID_SIZES = (256, 128, 64, 32)


def pixel_centers(n: int) -> np.ndarray:
    """Normalized coordinates of the n pixel centers along one axis."""
    return -1.0 + (2.0 * np.arange(n) + 1.0) / n


def coordinate_grid(width: int, height: int) -> np.ndarray:
    """(H, W, 2) array of normalized (x, y) pixel-center coordinates."""
    xs = pixel_centers(width)
    ys = pixel_centers(height)
    grid = np.empty((height, width, 2), dtype=float)
    grid[..., 0] = xs[None, :]
    grid[..., 1] = ys[:, None]
    return grid


@dataclass(frozen=True)
class FeatureMap:
    """A multi-channel float grid with no range restriction."""

    data: np.ndarray  # (H, W, C)

    def __post_init__(self):
        arr = np.array(self.data, dtype=float, order="C")  # own copy
        if arr.ndim == 2:
            arr = arr[..., None]
        if arr.ndim != 3:
            raise ValueError(f"expected (H, W, C) data, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("non-finite values in grid")
        self._validate(arr)
        object.__setattr__(self, "data", arr)

    def _validate(self, arr: np.ndarray) -> None:
        pass

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class RasterImage(FeatureMap):
    """A decoded image: intensities in [0, 1], 1 to 4 channels."""

    def _validate(self, arr: np.ndarray) -> None:
        if not 1 <= arr.shape[2] <= 4:
            raise ValueError(f"expected 1..4 channels, got {arr.shape[2]}")
        lo, hi = arr.min(), arr.max()
        if lo < -1e-9 or hi > 1.0 + 1e-9:
            raise ValueError(f"intensities outside [0,1]: min={lo}, max={hi}")
        # Forgive sub-1e-9 float noise from warping arithmetic.
        np.clip(arr, 0.0, 1.0, out=arr)


def _snap_to_centers(u: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Snap index-space coordinates within tol of a pixel center onto it.

    Normalized coordinates of centers round when constructed, so identity
    flows land a few ulp off integer indices; snapping keeps identity
    warps bit-exact at every raster size.
    """
    nearest = np.rint(u)
    return np.where(np.abs(u - nearest) < tol, nearest, u)


def sample_bilinear(data: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Bilinearly sample an (H, W, C) grid at normalized (..., 2) points.

    Each sample is the convex blend of its 4 nearest pixel centers;
    neighbors outside the raster contribute zero.
    """
    h, w = data.shape[:2]
    u = _snap_to_centers((coords[..., 0] + 1.0) * (w / 2.0) - 0.5)
    v = _snap_to_centers((coords[..., 1] + 1.0) * (h / 2.0) - 0.5)
    i0 = np.floor(u).astype(np.int64)
    j0 = np.floor(v).astype(np.int64)
    fu = u - i0
    fv = v - j0

    out = np.zeros(coords.shape[:-1] + (data.shape[2],), dtype=float)
    for dj, di, wgt in (
        (0, 0, (1.0 - fu) * (1.0 - fv)),
        (0, 1, fu * (1.0 - fv)),
        (1, 0, (1.0 - fu) * fv),
        (1, 1, fu * fv),
    ):
        jj = j0 + dj
        ii = i0 + di
        inside = (jj >= 0) & (jj < h) & (ii >= 0) & (ii < w)
        vals = data[jj.clip(0, h - 1), ii.clip(0, w - 1)]
        out += np.where(inside[..., None], wgt[..., None] * vals, 0.0)
    return out


def bilinear_sample(features: FeatureMap, at: Point2) -> np.ndarray:
    """Per-channel bilinear sample of one point, shape (C,)."""
    return sample_bilinear(features.data, at.as_array())


def backwarp(features: FeatureMap, flow, occlusion) -> FeatureMap:
    """Occlusion-weighted backward warp: out(z) = occ(z) * sample(f, flow(z)).

    flow carries, for each output pixel, the normalized source coordinate
    to gather from; occlusion is a per-pixel [0,1] weight. Both must match
    the feature grid size (resample beforehand if they do not).
    """
    flow_arr = flow.data if hasattr(flow, "data") else np.asarray(flow, dtype=float)
    occ_arr = occlusion.data if hasattr(occlusion, "data") else np.asarray(occlusion, dtype=float)
    h, w = features.height, features.width
    if flow_arr.shape != (h, w, 2):
        raise DimensionMismatchError(
            f"flow shape {flow_arr.shape} does not match features {(h, w, 2)}"
        )
    if occ_arr.shape != (h, w):
        raise DimensionMismatchError(
            f"occlusion shape {occ_arr.shape} does not match features {(h, w)}"
        )
    warped = sample_bilinear(features.data, flow_arr)
    return type(features)(occ_arr[..., None] * warped)


def resample_bilinear(data: np.ndarray, width: int, height: int) -> np.ndarray:
    """Resize an (H, W[, C]) grid to (height, width) bilinearly.

    Border cells extrapolate linearly instead of clamping, so fields that
    are affine in the coordinates (identity flow, global affine flow) are
    reproduced exactly at the new pixel centers.
    """
    squeeze = data.ndim == 2
    if squeeze:
        data = data[..., None]
    h, w = data.shape[:2]
    xs = (pixel_centers(width) + 1.0) * (w / 2.0) - 0.5
    ys = (pixel_centers(height) + 1.0) * (h / 2.0) - 0.5
    # Clamp the cell index, not the coordinate: fractions outside [0, 1]
    # linearly extrapolate from the edge cell.
    i0 = np.clip(np.floor(xs).astype(np.int64), 0, max(w - 2, 0))
    j0 = np.clip(np.floor(ys).astype(np.int64), 0, max(h - 2, 0))
    i1 = np.minimum(i0 + 1, w - 1)
    j1 = np.minimum(j0 + 1, h - 1)
    fu = (xs - i0)[None, :, None]
    fv = (ys - j0)[:, None, None]
    top = (1.0 - fu) * data[j0][:, i0] + fu * data[j0][:, i1]
    bot = (1.0 - fu) * data[j1][:, i0] + fu * data[j1][:, i1]
    out = (1.0 - fv) * top + fv * bot
    return out[..., 0] if squeeze else out


def _normalize_levels(levels) -> list[tuple[int, int]]:
    out = []
    for lv in levels:
        if isinstance(lv, (tuple, list)):
            out.append((int(lv[0]), int(lv[1])))
        else:
            out.append((int(lv), int(lv)))
    return out


def pyramid(image: RasterImage, levels=DEFAULT_PYRAMID_SIZES) -> list[RasterImage]:
    """Down-sampling pyramid: each level is the 2x2 box average of the one
    above. Level sizes must start at the image size and halve each step."""
    sizes = _normalize_levels(levels)
    if not sizes:
        raise PyramidSpecError("no pyramid levels requested")
    if sizes[0] != (image.width, image.height):
        raise PyramidSpecError(
            f"first level {sizes[0]} does not match image "
            f"{(image.width, image.height)}"
        )
    for (pw, ph), (cw, ch) in zip(sizes, sizes[1:]):
        if (cw * 2, ch * 2) != (pw, ph):
            raise PyramidSpecError(f"level {(cw, ch)} is not half of {(pw, ph)}")

    out = [image]
    for _ in sizes[1:]:
        d = out[-1].data
        h, w, c = d.shape
        d2 = d.reshape(h // 2, 2, w // 2, 2, c).mean(axis=(1, 3))
        out.append(RasterImage(d2))
    return out


def pyramid_l1(a: RasterImage, b: RasterImage, levels=DEFAULT_PYRAMID_SIZES):
    """Mean absolute pixel difference at every pyramid level.

    Returns (per_level, total) where per_level[i] is the mean |a - b| over
    all pixels and channels of level i and total is their sum.
    """
    if a.data.shape != b.data.shape:
        raise DimensionMismatchError(
            f"image shapes differ: {a.data.shape} vs {b.data.shape}"
        )
    pa = pyramid(a, levels)
    pb = pyramid(b, levels)
    per_level = [float(np.mean(np.abs(la.data - lb.data))) for la, lb in zip(pa, pb)]
    return per_level, float(sum(per_level))


def load_png(path) -> RasterImage:
    """Decode an 8-bit PNG to float [0, 1]. Grayscale stays 1-channel."""
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB", "RGBA", "LA"):
            im = im.convert("RGB")
        arr = np.asarray(im, dtype=np.float64) / 255.0
    return RasterImage(arr)


def save_png(image: RasterImage, path) -> None:
    """Encode to 8-bit PNG with round-half-up quantization."""
    q = np.floor(np.clip(image.data, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    if q.shape[2] == 1:
        Image.fromarray(q[..., 0], mode="L").save(path, format="PNG")
    elif q.shape[2] == 2:
        Image.fromarray(q, mode="LA").save(path, format="PNG")
    elif q.shape[2] == 3:
        Image.fromarray(q, mode="RGB").save(path, format="PNG")
    else:
        Image.fromarray(q, mode="RGBA").save(path, format="PNG")
