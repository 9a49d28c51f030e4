"""Thin plate spline deformations with analytic Jacobians.

A transform is an affine part plus radial-basis terms at N control points:

    f(p) = A p + b + sum_i w_i * U(|p - c_i|),    U(r) = r^2 log(r^2)

with U(0) = 0. The kernel is the classical thin-plate basis up to a factor
of 2 absorbed into the weights. The closed-form derivative

    df/dp = A + sum_i w_i (x) (2 log|p - c_i|^2 + 2) (p - c_i)

is continuous everywhere, with the kernel gradient taken as 0 at p = c_i
(its limit).

Sampling draws every parameter from zero-mean normals (std = sqrt of the
configured variance) using numpy's seeded PCG64 generator; the stream is
the affine perturbation (2x3, C order) followed by the weights (Nx2, C
order), so a seed pins the transform bit-for-bit across platforms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .geometry import Mat2, Point2
from .raster import RasterImage, coordinate_grid, sample_bilinear

DEFAULT_DEFORM_VARIANCE = 0.005
DEFAULT_AFFINE_VARIANCE = 0.05
DEFAULT_GRID_SIZE = 5


@dataclass(frozen=True)
class TpsTransform:
    """affine: (2, 3) matrix; control_points: (N, 2); weights: (N, 2)."""

    affine: np.ndarray
    control_points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        a = np.array(self.affine, dtype=float)
        c = np.array(self.control_points, dtype=float)
        w = np.array(self.weights, dtype=float)
        if a.shape != (2, 3):
            raise ValueError(f"affine must be (2, 3), got {a.shape}")
        if c.ndim != 2 or c.shape[1] != 2 or c.shape != w.shape:
            raise ValueError(
                f"control_points {c.shape} and weights {w.shape} must both be (N, 2)"
            )
        if len(c) > 1:
            d2 = np.sum((c[:, None, :] - c[None, :, :]) ** 2, axis=-1)
            np.fill_diagonal(d2, np.inf)
            if d2.min() <= 0.0:
                raise ValueError("control points must be distinct")
        object.__setattr__(self, "affine", a)
        object.__setattr__(self, "control_points", c)
        object.__setattr__(self, "weights", w)

    @staticmethod
    def identity(grid_size: int = DEFAULT_GRID_SIZE) -> "TpsTransform":
        n = grid_size * grid_size
        return TpsTransform(
            np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]),
            control_point_grid(grid_size),
            np.zeros((n, 2)),
        )

    @staticmethod
    def from_affine(linear, offset, grid_size: int = DEFAULT_GRID_SIZE) -> "TpsTransform":
        """Zero-weight TPS wrapping a plain affine map."""
        a = np.column_stack([np.asarray(linear, dtype=float),
                             np.asarray(offset, dtype=float)])
        n = grid_size * grid_size
        return TpsTransform(a, control_point_grid(grid_size), np.zeros((n, 2)))

    def to_json_dict(self) -> dict:
        return {
            "affine": self.affine.tolist(),
            "control_points": self.control_points.tolist(),
            "weights": self.weights.tolist(),
        }

    @staticmethod
    def from_json_dict(d: dict) -> "TpsTransform":
        return TpsTransform(
            np.asarray(d["affine"], dtype=float),
            np.asarray(d["control_points"], dtype=float),
            np.asarray(d["weights"], dtype=float),
        )

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json_dict(), f, indent=2)

    @staticmethod
    def load(path) -> "TpsTransform":
        with open(path) as f:
            return TpsTransform.from_json_dict(json.load(f))


@dataclass(frozen=True)
class TpsSampleConfig:
    deform_variance: float = DEFAULT_DEFORM_VARIANCE
    affine_variance: float = DEFAULT_AFFINE_VARIANCE
    grid_size: int = DEFAULT_GRID_SIZE
    seed: int = 0

    def __post_init__(self):
        if self.deform_variance < 0 or self.affine_variance < 0:
            raise ValueError("variances must be >= 0")
        if self.grid_size < 2:
            raise ValueError("control grid needs at least 2x2 points")


def control_point_grid(n: int) -> np.ndarray:
    """Uniform n x n control grid spanning the canvas, rows (y) outer."""
    ticks = np.linspace(-1.0, 1.0, n)
    xx, yy = np.meshgrid(ticks, ticks)
    return np.column_stack([xx.ravel(), yy.ravel()])


def tps_sample(cfg: TpsSampleConfig = TpsSampleConfig()) -> TpsTransform:
    """Draw a random transform near the identity (see module docstring
    for the exact RNG stream)."""
    rng = np.random.default_rng(cfg.seed)
    affine = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    affine = affine + rng.normal(0.0, np.sqrt(cfg.affine_variance), (2, 3))
    n = cfg.grid_size * cfg.grid_size
    weights = rng.normal(0.0, np.sqrt(cfg.deform_variance), (n, 2))
    return TpsTransform(affine, control_point_grid(cfg.grid_size), weights)


def _kernel_terms(t: TpsTransform, points: np.ndarray) -> np.ndarray:
    """U(|p - c_i|) for every point/control pair, shape (..., N)."""
    diff = points[..., None, :] - t.control_points  # (..., N, 2)
    s = np.sum(diff * diff, axis=-1)
    safe = np.where(s > 0.0, s, 1.0)
    return np.where(s > 0.0, s * np.log(safe), 0.0)


def tps_eval_grid(t: TpsTransform, points: np.ndarray) -> np.ndarray:
    """Evaluate the transform at (..., 2) points."""
    points = np.asarray(points, dtype=float)
    u = _kernel_terms(t, points)
    affine_part = points @ t.affine[:, :2].T + t.affine[:, 2]
    return affine_part + u @ t.weights


def tps_eval(t: TpsTransform, p: Point2) -> Point2:
    return Point2.from_array(tps_eval_grid(t, p.as_array()))


def tps_jacobian_grid(t: TpsTransform, points: np.ndarray) -> np.ndarray:
    """Analytic Jacobians at (..., 2) points, shape (..., 2, 2)."""
    points = np.asarray(points, dtype=float)
    diff = points[..., None, :] - t.control_points  # (..., N, 2)
    s = np.sum(diff * diff, axis=-1)
    safe = np.where(s > 0.0, s, 1.0)
    # grad U = (2 log s + 2) (p - c); 0 at a control point (the limit).
    coef = np.where(s > 0.0, 2.0 * np.log(safe) + 2.0, 0.0)
    grads = coef[..., None] * diff  # (..., N, 2)
    jac = np.einsum("im,...in->...mn", t.weights, grads)
    return jac + t.affine[:, :2]


def tps_jacobian(t: TpsTransform, p: Point2) -> Mat2:
    return Mat2.from_array(tps_jacobian_grid(t, p.as_array()))


def tps_warp_image(image: RasterImage, t: TpsTransform) -> RasterImage:
    """Backward warp: output pixel z samples the input at f(z)."""
    coords = tps_eval_grid(t, coordinate_grid(image.width, image.height))
    return RasterImage(sample_bilinear(image.data, coords))
