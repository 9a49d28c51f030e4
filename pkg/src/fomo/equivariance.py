"""Consistency checks for descriptor pairs under a known deformation.

Given descriptors of an image X and of its deformed copy Y (deformation
f = X-from-Y, an affine or thin plate spline), an ideal detector satisfies

    position:  x_k = f(y_k)
    jacobian:  Jx_k = df(y_k) @ Jy_k

Residuals are reported per keypoint: L1 position error, and the entrywise
L1 of (identity - inv(Jx_k) @ df(y_k) @ Jy_k) for the jacobians. The
identity-referenced form is used instead of the raw jacobian difference
because a raw L1 would reward shrinking all jacobians toward zero.

These are diagnostics, not a training loss; the conventional equal
per-term weights are carried in the report metadata for downstream
consumers but never applied here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import KeypointMismatchError, SingularMatrixError
from .geometry import FrameDescriptor, KeypointDescriptor, mat2_invert
from .tps import TpsTransform, tps_eval, tps_jacobian


def _check_same_k(x: FrameDescriptor, y: FrameDescriptor) -> int:
    if x.k != y.k:
        raise KeypointMismatchError(f"keypoint counts differ: {x.k} vs {y.k}")
    return x.k


def equivariance_position(
    x: FrameDescriptor, y: FrameDescriptor, t: TpsTransform
) -> np.ndarray:
    """Per-keypoint |x_k - f(y_k)| in L1, shape (K,)."""
    _check_same_k(x, y)
    mapped = np.stack(
        [tps_eval(t, kp.position).as_array() for kp in y.keypoints]
    )
    return np.abs(x.positions() - mapped).sum(axis=1)


def equivariance_jacobian(
    x: FrameDescriptor, y: FrameDescriptor, t: TpsTransform
) -> np.ndarray:
    """Per-keypoint entrywise L1 of (1 - inv(Jx) df(y_k) Jy), shape (K,)."""
    k = _check_same_k(x, y)
    out = np.empty(k)
    for i in range(k):
        try:
            inv_jx = mat2_invert(x.keypoints[i].jacobian)
        except SingularMatrixError as e:
            raise SingularMatrixError(f"keypoint {i}: {e}") from None
        jt = tps_jacobian(t, y.keypoints[i].position)
        prod = inv_jx.matmul(jt).matmul(y.keypoints[i].jacobian)
        out[i] = np.abs(np.eye(2) - prod.as_array()).sum()
    return out


@dataclass(frozen=True)
class EquivarianceReport:
    """Per-keypoint residuals of both constraints plus their means."""

    position_residuals: np.ndarray
    jacobian_residuals: np.ndarray
    loss_weights: dict = field(
        default_factory=lambda: {"position": 1.0, "jacobian": 1.0}
    )

    @property
    def position_mean(self) -> float:
        return float(np.mean(self.position_residuals))

    @property
    def jacobian_mean(self) -> float:
        return float(np.mean(self.jacobian_residuals))

    def passes(self, tol: float) -> bool:
        return self.position_mean < tol and self.jacobian_mean < tol

    def to_json_dict(self) -> dict:
        return {
            "position_residuals": [float(v) for v in self.position_residuals],
            "jacobian_residuals": [float(v) for v in self.jacobian_residuals],
            "position_mean": self.position_mean,
            "jacobian_mean": self.jacobian_mean,
            "loss_weights": dict(self.loss_weights),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)


def evaluate_equivariance(
    x: FrameDescriptor, y: FrameDescriptor, t: TpsTransform
) -> EquivarianceReport:
    return EquivarianceReport(
        equivariance_position(x, y, t),
        equivariance_jacobian(x, y, t),
    )


def ideal_equivariant_frame(y: FrameDescriptor, t: TpsTransform) -> FrameDescriptor:
    """The X-frame descriptor an ideal detector would report for y under f:
    positions mapped through f, jacobians left-multiplied by df."""
    kps = []
    for kp in y.keypoints:
        pos = tps_eval(t, kp.position)
        jac = tps_jacobian(t, kp.position).matmul(kp.jacobian)
        kps.append(KeypointDescriptor(pos, jac))
    return FrameDescriptor(tuple(kps))
