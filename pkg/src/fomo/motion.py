"""Per-keypoint first-order motion between a source and a driving frame.

The source-from-driving map is approximated around each keypoint k by

    flow_k(z) = src_anchor_k + J_k @ (z - drv_anchor_k)

where J_k combines the two per-frame jacobians (source times inverse
driving). Forcing J_k to the identity gives the zeroth-order model used
as the comparison baseline.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import KeypointMismatchError, SingularMatrixError
from .geometry import FrameDescriptor, Mat2, Point2, mat2_div

Order = Literal["zeroth", "first"]


@dataclass(frozen=True)
class PairwiseLocalMotion:
    """K local affine approximations of the source-from-driving map.

    src_anchors, drv_anchors: (K, 2) float arrays; jacobians: (K, 2, 2).
    In zeroth-order mode every jacobian is the exact identity.
    """

    src_anchors: np.ndarray
    drv_anchors: np.ndarray
    jacobians: np.ndarray

    def __post_init__(self):
        src = np.ascontiguousarray(self.src_anchors, dtype=float)
        drv = np.ascontiguousarray(self.drv_anchors, dtype=float)
        jac = np.ascontiguousarray(self.jacobians, dtype=float)
        k = src.shape[0]
        if src.shape != (k, 2) or drv.shape != (k, 2) or jac.shape != (k, 2, 2):
            raise ValueError(
                f"inconsistent shapes {src.shape} {drv.shape} {jac.shape}"
            )
        if not (np.isfinite(src).all() and np.isfinite(drv).all() and np.isfinite(jac).all()):
            raise ValueError("non-finite motion entries")
        object.__setattr__(self, "src_anchors", src)
        object.__setattr__(self, "drv_anchors", drv)
        object.__setattr__(self, "jacobians", jac)

    @property
    def k(self) -> int:
        return self.src_anchors.shape[0]


def _check_same_k(*frames: FrameDescriptor) -> int:
    ks = {f.k for f in frames}
    if len(ks) != 1:
        raise KeypointMismatchError(f"keypoint counts differ: {sorted(ks)}")
    return ks.pop()


def _combine_jacobian(numerator: Mat2, denominator: Mat2, k: int) -> np.ndarray:
    try:
        return mat2_div(numerator, denominator).as_array()
    except SingularMatrixError as e:
        raise SingularMatrixError(f"keypoint {k}: {e}") from None


def pairwise_motion(
    source: FrameDescriptor,
    driving: FrameDescriptor,
    order: Order = "first",
) -> PairwiseLocalMotion:
    """Build the local motion of source-from-driving at every keypoint.

    First order: J_k = source_jac_k @ inv(driving_jac_k). Zeroth order
    keeps the anchors but pins every J_k to the identity.
    """
    k = _check_same_k(source, driving)
    if order not in ("zeroth", "first"):
        raise ValueError(f"unknown order {order!r}")
    src = source.positions()
    drv = driving.positions()
    if order == "zeroth":
        jac = np.broadcast_to(np.eye(2), (k, 2, 2)).copy()
    else:
        jac = np.stack(
            [
                _combine_jacobian(source.keypoints[i].jacobian,
                                  driving.keypoints[i].jacobian, i)
                for i in range(k)
            ]
        )
    return PairwiseLocalMotion(src, drv, jac)


def relative_transfer(
    source_first: FrameDescriptor,
    driving_first: FrameDescriptor,
    driving_t: FrameDescriptor,
) -> PairwiseLocalMotion:
    """Replay the driving video's motion deltas around the source keypoints.

    Instead of copying absolute driving coordinates, the anchor of each
    local affine is shifted by the source-vs-first-driving keypoint offset:

        drv_anchor_k = src1_k - drv1_k + drvt_k
        J_k          = drv1_jac_k @ inv(drvt_jac_k)

    The source frame's jacobians cancel and never enter the result, so the
    output is bit-invariant to them. With driving_t == driving_first this
    is the identity motion.
    """
    _check_same_k(source_first, driving_first, driving_t)
    s1 = source_first.positions()
    d1 = driving_first.positions()
    dt = driving_t.positions()
    jac = np.stack(
        [
            _combine_jacobian(driving_first.keypoints[i].jacobian,
                              driving_t.keypoints[i].jacobian, i)
            for i in range(source_first.k)
        ]
    )
    return PairwiseLocalMotion(s1, s1 - d1 + dt, jac)


def approx_flow_at(motion: PairwiseLocalMotion, k: int, z: Point2) -> Point2:
    """Evaluate the k-th local affine at one driving-frame point."""
    if not 0 <= k < motion.k:
        raise IndexError(f"keypoint index {k} out of range [0, {motion.k})")
    d = z.as_array() - motion.drv_anchors[k]
    out = motion.src_anchors[k] + motion.jacobians[k] @ d
    return Point2.from_array(out)


def approx_flow_grid(motion: PairwiseLocalMotion, k: int, coords: np.ndarray) -> np.ndarray:
    """Vectorized approx_flow_at: coords (..., 2) -> (..., 2)."""
    if not 0 <= k < motion.k:
        raise IndexError(f"keypoint index {k} out of range [0, {motion.k})")
    d = coords - motion.drv_anchors[k]
    return motion.src_anchors[k] + d @ motion.jacobians[k].T
