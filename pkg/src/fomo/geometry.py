"""2D value types and exact affine algebra used by every other module.

Coordinate system: the image canvas is the normalized square [-1, 1]^2.
x grows to the right (columns), y grows downward (rows). The center of
pixel (column i, row j) on a W x H raster sits at

    x_i = -1 + (2*i + 1) / W,    y_j = -1 + (2*j + 1) / H,

which makes keypoint descriptors independent of raster resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SingularMatrixError

# Jacobians with |det| at or below this are treated as singular.  This is a
# double-precision conditioning floor, far below any meaningful deformation.
SINGULAR_DET_THRESHOLD = 1e-12

# Number of keypoints used by default when this library picks the layout.
DEFAULT_KEYPOINT_COUNT = 10


@dataclass(frozen=True)
class Point2:
    """A 2D position in normalized canvas coordinates."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite point ({self.x}, {self.y})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    @staticmethod
    def from_array(a) -> "Point2":
        return Point2(float(a[0]), float(a[1]))


@dataclass(frozen=True)
class Mat2:
    """A 2x2 real matrix [[a11, a12], [a21, a22]]."""

    a11: float
    a12: float
    a21: float
    a22: float

    def __post_init__(self):
        for v in (self.a11, self.a12, self.a21, self.a22):
            if not math.isfinite(v):
                raise ValueError("non-finite matrix entry")

    @staticmethod
    def identity() -> "Mat2":
        return Mat2(1.0, 0.0, 0.0, 1.0)

    @staticmethod
    def rotation(theta: float) -> "Mat2":
        c, s = math.cos(theta), math.sin(theta)
        return Mat2(c, -s, s, c)

    @staticmethod
    def from_array(a) -> "Mat2":
        return Mat2(float(a[0][0]), float(a[0][1]), float(a[1][0]), float(a[1][1]))

    def as_array(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a21, self.a22]], dtype=float)

    def det(self) -> float:
        return self.a11 * self.a22 - self.a12 * self.a21

    def matmul(self, other: "Mat2") -> "Mat2":
        return Mat2(
            self.a11 * other.a11 + self.a12 * other.a21,
            self.a11 * other.a12 + self.a12 * other.a22,
            self.a21 * other.a11 + self.a22 * other.a21,
            self.a21 * other.a12 + self.a22 * other.a22,
        )

    def apply(self, p: Point2) -> Point2:
        return Point2(
            self.a11 * p.x + self.a12 * p.y,
            self.a21 * p.x + self.a22 * p.y,
        )

    def is_identity(self) -> bool:
        return self == Mat2.identity()


def mat2_invert(m: Mat2) -> Mat2:
    """Invert a 2x2 matrix by the cofactor formula.

    Raises SingularMatrixError when |det| <= 1e-12.
    """
    d = m.det()
    if abs(d) <= SINGULAR_DET_THRESHOLD:
        raise SingularMatrixError(f"matrix is singular (det={d:.3e})")
    return Mat2(m.a22 / d, -m.a12 / d, -m.a21 / d, m.a11 / d)


def mat2_div(a: Mat2, b: Mat2) -> Mat2:
    """Compute a @ inv(b).

    Bitwise-equal factors short-circuit to the exact identity: A @ inv(A)
    is the identity mathematically, and several contracts downstream rely
    on getting it without rounding noise.
    """
    if a == b:
        if abs(b.det()) <= SINGULAR_DET_THRESHOLD:
            raise SingularMatrixError(f"matrix is singular (det={b.det():.3e})")
        return Mat2.identity()
    return a.matmul(mat2_invert(b))


@dataclass(frozen=True)
class LocalAffine:
    """First-order expansion of a 2D map around one point.

    Evaluates to anchor_out + jac @ (z - anchor_in); at z = anchor_in the
    value is anchor_out exactly.
    """

    anchor_in: Point2
    anchor_out: Point2
    jac: Mat2

    @staticmethod
    def identity() -> "LocalAffine":
        zero = Point2(0.0, 0.0)
        return LocalAffine(zero, zero, Mat2.identity())


def local_affine_eval(t: LocalAffine, z: Point2) -> Point2:
    dx = z.x - t.anchor_in.x
    dy = z.y - t.anchor_in.y
    return Point2(
        t.anchor_out.x + t.jac.a11 * dx + t.jac.a12 * dy,
        t.anchor_out.y + t.jac.a21 * dx + t.jac.a22 * dy,
    )


def local_affine_compose(outer: LocalAffine, inner: LocalAffine) -> LocalAffine:
    """Compose two local affines: result(z) = outer(inner(z)).

    Both operands are exact affine maps, so the composition is exact as
    well: the jacobian is the product outer.jac @ inner.jac and the output
    anchor picks up outer's correction term when the anchors are not
    chained (anchors chained means outer.anchor_in == inner.anchor_out,
    in which case the correction vanishes).
    """
    mid = local_affine_eval(outer, inner.anchor_out)
    return LocalAffine(
        anchor_in=inner.anchor_in,
        anchor_out=mid,
        jac=outer.jac.matmul(inner.jac),
    )


def local_affine_invert(t: LocalAffine) -> LocalAffine:
    """Inverse map: anchors swapped, jacobian inverted."""
    return LocalAffine(t.anchor_out, t.anchor_in, mat2_invert(t.jac))


@dataclass(frozen=True)
class KeypointDescriptor:
    """One keypoint of a frame: where it sits and how the local frame is
    deformed (value and Jacobian of the reference-to-frame map there)."""

    position: Point2
    jacobian: Mat2


@dataclass(frozen=True)
class FrameDescriptor:
    """Ordered keypoint descriptors of one frame. K >= 1."""

    keypoints: tuple[KeypointDescriptor, ...]

    def __post_init__(self):
        if len(self.keypoints) < 1:
            raise ValueError("a frame descriptor needs at least one keypoint")
        object.__setattr__(self, "keypoints", tuple(self.keypoints))

    @property
    def k(self) -> int:
        return len(self.keypoints)

    def positions(self) -> np.ndarray:
        """All keypoint positions as a (K, 2) array."""
        return np.array([[kp.position.x, kp.position.y] for kp in self.keypoints])

    def jacobians(self) -> np.ndarray:
        """All keypoint jacobians as a (K, 2, 2) array."""
        return np.array([kp.jacobian.as_array() for kp in self.keypoints])


def frame_from_arrays(positions, jacobians) -> FrameDescriptor:
    """Build a FrameDescriptor from (K, 2) positions and (K, 2, 2) jacobians."""
    positions = np.asarray(positions, dtype=float)
    jacobians = np.asarray(jacobians, dtype=float)
    if positions.shape[0] != jacobians.shape[0]:
        raise ValueError("positions and jacobians disagree on K")
    return FrameDescriptor(
        tuple(
            KeypointDescriptor(Point2.from_array(p), Mat2.from_array(j))
            for p, j in zip(positions, jacobians)
        )
    )
