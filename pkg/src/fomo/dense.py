"""Combine K local affine motions into one dense backward flow.

Per keypoint a difference-of-Gaussians heatmap localizes the motion, a
K+1-channel mask stack (channel 0 = static background) blends the K local
flows with the identity, and the blended field is the dense source
coordinate for every driving pixel. The mask stack normally comes from a
deterministic proximity softmax but can also be loaded from file, so an
externally estimated stack can be injected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, ValueRangeError
from .floatmap import read_float_grid
from .motion import PairwiseLocalMotion, approx_flow_grid
from .raster import RasterImage, coordinate_grid, resample_bilinear, sample_bilinear

DEFAULT_SIGMA = 0.01  # heatmap spread
DEFAULT_FLOW_RESOLUTION = 64  # flow grid side; upsampled to image size for warping

MASK_SUM_TOLERANCE = 1e-6


@dataclass(frozen=True)
class MaskPolicyConfig:
    """Deterministic stand-in for a learned mask estimator.

    Per pixel, keypoint k scores -(distance to its driving anchor)^2 / tau
    and the background scores -bg_radius^2 / tau; masks are the softmax of
    the K+1 scores. Small tau sharpens toward a hard nearest/background
    partition with bg_radius as the cutoff distance.
    """

    tau: float = 0.01
    bg_radius: float = 0.25

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not self.bg_radius > 0:
            raise ValueError(f"bg_radius must be positive, got {self.bg_radius}")


@dataclass(frozen=True)
class HeatmapStack:
    """K difference-of-Gaussians channels, each (H, W), values in [-1, 1]."""

    data: np.ndarray  # (K, H, W)

    def __post_init__(self):
        arr = np.array(self.data, dtype=float, order="C")
        if arr.ndim != 3:
            raise ValueError(f"expected (K, H, W), got shape {arr.shape}")
        if arr.min() < -1.0 or arr.max() > 1.0:
            raise ValueRangeError("heatmap values outside [-1, 1]")
        object.__setattr__(self, "data", arr)

    @property
    def k(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class MaskStack:
    """K+1 blend weights per pixel (channel 0 = background).

    Every channel lies in [0, 1] and the channels sum to 1 at each pixel.
    """

    data: np.ndarray  # (K+1, H, W)

    def __post_init__(self):
        arr = np.array(self.data, dtype=float, order="C")
        if arr.ndim != 3 or arr.shape[0] < 2:
            raise ValueError(f"expected (K+1, H, W) with K >= 1, got {arr.shape}")
        if arr.min() < -MASK_SUM_TOLERANCE or arr.max() > 1.0 + MASK_SUM_TOLERANCE:
            raise ValueRangeError("mask values outside [0, 1]")
        sums = arr.sum(axis=0)
        if np.abs(sums - 1.0).max() > MASK_SUM_TOLERANCE:
            raise ValueRangeError("mask channels do not sum to 1 per pixel")
        object.__setattr__(self, "data", arr)

    @property
    def k(self) -> int:
        return self.data.shape[0] - 1


@dataclass(frozen=True)
class DenseFlow:
    """Backward flow: data[j, i] is the normalized source (x, y) coordinate
    for the driving pixel at (row j, col i)."""

    data: np.ndarray  # (H, W, 2)

    def __post_init__(self):
        arr = np.array(self.data, dtype=float, order="C")
        if arr.ndim != 3 or arr.shape[2] != 2:
            raise ValueError(f"expected (H, W, 2), got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("non-finite flow values")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @staticmethod
    def identity(width: int, height: int) -> "DenseFlow":
        return DenseFlow(coordinate_grid(width, height))

    def displacement(self) -> np.ndarray:
        """flow(z) - z at every pixel, shape (H, W, 2)."""
        return self.data - coordinate_grid(self.width, self.height)

    def resampled(self, width: int, height: int) -> "DenseFlow":
        """Bilinear resize to another raster (exact for affine fields)."""
        if (width, height) == (self.width, self.height):
            return self
        return DenseFlow(resample_bilinear(self.data, width, height))


@dataclass(frozen=True)
class OcclusionMap:
    """Per-pixel visibility weight in [0, 1]; 1 = fully recoverable by
    warping, 0 = must be inpainted downstream."""

    data: np.ndarray  # (H, W)

    def __post_init__(self):
        arr = np.array(self.data, dtype=float, order="C")
        if arr.ndim != 2:
            raise ValueError(f"expected (H, W), got shape {arr.shape}")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueRangeError("occlusion values outside [0, 1]")
        object.__setattr__(self, "data", arr)

    @staticmethod
    def ones(width: int, height: int) -> "OcclusionMap":
        return OcclusionMap(np.ones((height, width)))

    def resampled(self, width: int, height: int) -> "OcclusionMap":
        if (width, height) == (self.data.shape[1], self.data.shape[0]):
            return self
        out = resample_bilinear(self.data, width, height)
        return OcclusionMap(np.clip(out, 0.0, 1.0))


def heatmaps(
    motion: PairwiseLocalMotion,
    width: int,
    height: int,
    sigma: float = DEFAULT_SIGMA,
) -> HeatmapStack:
    """Difference of Gaussians per keypoint, evaluated at pixel centers:

        H_k(z) = exp(-|drv_k - z|^2 / sigma) - exp(-|src_k - z|^2 / sigma)

    Zero wherever a keypoint did not move; antisymmetric under swapping
    the source and driving anchors.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    grid = coordinate_grid(width, height)  # (H, W, 2)
    drv = motion.drv_anchors[:, None, None, :]  # (K, 1, 1, 2)
    src = motion.src_anchors[:, None, None, :]
    d2_drv = np.sum((drv - grid[None]) ** 2, axis=-1)
    d2_src = np.sum((src - grid[None]) ** 2, axis=-1)
    return HeatmapStack(np.exp(-d2_drv / sigma) - np.exp(-d2_src / sigma))


def soft_masks(
    motion: PairwiseLocalMotion,
    width: int,
    height: int,
    cfg: MaskPolicyConfig = MaskPolicyConfig(),
) -> MaskStack:
    """Proximity softmax over K keypoints plus a constant background score.

    scores: s_k(z) = -|z - drv_anchor_k|^2 / tau,  s_0 = -bg_radius^2 / tau
    """
    grid = coordinate_grid(width, height)
    d2 = np.sum((motion.drv_anchors[:, None, None, :] - grid[None]) ** 2, axis=-1)
    scores = np.concatenate(
        [np.full((1, height, width), cfg.bg_radius**2), d2], axis=0
    ) / (-cfg.tau)
    # Shifted softmax: exact for huge magnitudes at tiny tau.
    scores -= scores.max(axis=0, keepdims=True)
    e = np.exp(scores)
    return MaskStack(e / e.sum(axis=0, keepdims=True))


def dense_flow(
    motion: PairwiseLocalMotion,
    masks: MaskStack,
    width: int,
    height: int,
) -> DenseFlow:
    """Mask-blended dense backward flow at every pixel center:

        flow(z) = M_0(z) * z + sum_k M_k(z) * (src_k + J_k (z - drv_k))

    The background term keeps non-moving pixels in place; with convex
    masks the result is a per-pixel convex combination of the identity and
    the K local flows.
    """
    if masks.data.shape != (motion.k + 1, height, width):
        raise DimensionMismatchError(
            f"mask shape {masks.data.shape} does not match "
            f"(K+1, H, W) = {(motion.k + 1, height, width)}"
        )
    grid = coordinate_grid(width, height)
    out = masks.data[0][..., None] * grid
    for k in range(motion.k):
        out += masks.data[k + 1][..., None] * approx_flow_grid(motion, k, grid)
    return DenseFlow(out)


def warp_source_by_keypoint(
    image: RasterImage, motion: PairwiseLocalMotion, k: int
) -> RasterImage:
    """Back-warp the source by the k-th local affine; k = 0 returns the
    source itself (the background candidate)."""
    if not 0 <= k <= motion.k:
        raise IndexError(f"keypoint index {k} out of range [0, {motion.k}]")
    if k == 0:
        return RasterImage(image.data)
    grid = coordinate_grid(image.width, image.height)
    coords = approx_flow_grid(motion, k - 1, grid)
    return RasterImage(sample_bilinear(image.data, coords))


def occlusion_from_file_or_default(path, width: int, height: int) -> OcclusionMap:
    """Load a single-channel occlusion grid, or all-ones when path is None.

    The file must parse to exactly (height, width) values inside [0, 1];
    out-of-range values are an error, not clamped.
    """
    if path is None:
        return OcclusionMap.ones(width, height)
    arr = read_float_grid(path)
    if arr.ndim != 2:
        raise DimensionMismatchError(
            f"{path}: expected a single-channel grid, got shape {arr.shape}"
        )
    if arr.shape != (height, width):
        raise DimensionMismatchError(
            f"{path}: grid is {arr.shape[1]}x{arr.shape[0]}, "
            f"expected {width}x{height}"
        )
    return OcclusionMap(arr)


def masks_from_file(path, k: int, width: int, height: int) -> MaskStack:
    """Load a (K+1)-channel mask stack; validates the partition of unity."""
    arr = read_float_grid(path)
    if arr.ndim != 3 or arr.shape != (height, width, k + 1):
        got = arr.shape if arr.ndim == 3 else (arr.shape + (1,))
        raise DimensionMismatchError(
            f"{path}: mask grid is {got}, expected {(height, width, k + 1)}"
        )
    return MaskStack(np.moveaxis(arr, -1, 0))
