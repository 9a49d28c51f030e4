"""Synthetic scenes with analytic ground truth.

A scene is a known global transform (affine, rotation, or a sampled thin
plate spline), a keypoint layout, and a test pattern. The transform maps
reference coordinates to driving-frame coordinates; the reference frame is
pinned to the source frame (any gauge works since the reference cancels
out, and this one makes ground truth simplest), so ideal descriptors are

    source  = (p_k, identity),    driving = (T(p_k), dT(p_k)).

Error profiles probe rings around each keypoint: for q on a ring of
radius r around p_k and z = T(q), the exact backward flow at z is q, so
no transform inversion is ever needed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import FileFormatError
from .geometry import FrameDescriptor, frame_from_arrays
from .motion import Order, approx_flow_grid, pairwise_motion
from .raster import RasterImage, coordinate_grid
from .tps import TpsSampleConfig, TpsTransform, tps_eval_grid, tps_jacobian_grid, tps_sample

PROFILE_SAMPLES_PER_RING = 360


@dataclass(frozen=True)
class AffineMap:
    """Global affine transform: p -> linear @ p + offset."""

    linear: np.ndarray  # (2, 2)
    offset: np.ndarray  # (2,)

    def __post_init__(self):
        object.__setattr__(self, "linear", np.array(self.linear, dtype=float).reshape(2, 2))
        object.__setattr__(self, "offset", np.array(self.offset, dtype=float).reshape(2))

    def eval_grid(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.linear.T + self.offset

    def jacobian_grid(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return np.broadcast_to(self.linear, points.shape[:-1] + (2, 2)).copy()

    def inverse(self) -> "AffineMap":
        inv = np.linalg.inv(self.linear)
        return AffineMap(inv, -inv @ self.offset)

    def to_tps(self) -> TpsTransform:
        return TpsTransform.from_affine(self.linear, self.offset)


def rotation_map(theta: float, center=(0.0, 0.0)) -> AffineMap:
    """Rotation by theta radians about a center point."""
    c, s = math.cos(theta), math.sin(theta)
    lin = np.array([[c, -s], [s, c]])
    ctr = np.asarray(center, dtype=float)
    return AffineMap(lin, ctr - lin @ ctr)


@dataclass(frozen=True)
class TpsMap:
    """Scene transform backed by a sampled thin plate spline."""

    tps: TpsTransform

    def eval_grid(self, points: np.ndarray) -> np.ndarray:
        return tps_eval_grid(self.tps, points)

    def jacobian_grid(self, points: np.ndarray) -> np.ndarray:
        return tps_jacobian_grid(self.tps, points)

    def to_tps(self) -> TpsTransform:
        return self.tps


SceneTransform = Union[AffineMap, TpsMap]


def keypoint_grid(nx: int, ny: int, span: float = 0.5) -> np.ndarray:
    """nx * ny keypoints on a centered uniform grid, rows (y) outer."""
    xs = np.array([0.0]) if nx == 1 else np.linspace(-span, span, nx)
    ys = np.array([0.0]) if ny == 1 else np.linspace(-span, span, ny)
    xx, yy = np.meshgrid(xs, ys)
    return np.column_stack([xx.ravel(), yy.ravel()])


@dataclass(frozen=True)
class SceneSpec:
    """A verifiable scene: transform + keypoints + rendered pattern."""

    transform: SceneTransform
    keypoints: np.ndarray  # (K, 2), inside [-1, 1]^2
    pattern: str = "checkerboard"  # checkerboard | ramp | blobs
    pattern_param: float = 8.0  # cells for checkerboard, sigma for blobs
    width: int = 64
    height: int = 64

    def __post_init__(self):
        kp = np.array(self.keypoints, dtype=float).reshape(-1, 2)
        if kp.shape[0] < 1:
            raise ValueError("scene needs at least one keypoint")
        if np.abs(kp).max() > 1.0:
            raise ValueError("scene keypoints must lie inside [-1, 1]^2")
        if self.pattern not in ("checkerboard", "ramp", "blobs"):
            raise ValueError(f"unknown pattern {self.pattern!r}")
        object.__setattr__(self, "keypoints", kp)


def scene_from_json_dict(d: dict) -> SceneSpec:
    try:
        t = d["transform"]
        kind = t["kind"]
        if kind == "affine":
            transform: SceneTransform = AffineMap(t["linear"], t["offset"])
        elif kind == "rotation":
            transform = rotation_map(float(t["theta"]), t.get("center", (0.0, 0.0)))
        elif kind == "tps":
            cfg = TpsSampleConfig(
                deform_variance=float(t.get("deform_variance", TpsSampleConfig.deform_variance)),
                affine_variance=float(t.get("affine_variance", TpsSampleConfig.affine_variance)),
                grid_size=int(t.get("grid_size", TpsSampleConfig.grid_size)),
                seed=int(t["seed"]),
            )
            transform = TpsMap(tps_sample(cfg))
        else:
            raise FileFormatError(f"unknown transform kind {kind!r}")

        kp = d["keypoints"]
        if "points" in kp:
            keypoints = np.asarray(kp["points"], dtype=float)
        elif "grid" in kp:
            nx, ny = (int(v) for v in kp["grid"])
            keypoints = keypoint_grid(nx, ny, float(kp.get("span", 0.5)))
        else:
            raise FileFormatError("keypoints need 'points' or 'grid'")

        pat = d.get("pattern", {"kind": "checkerboard"})
        pattern = pat["kind"]
        pattern_param = float(pat.get("cells", pat.get("sigma", 8.0 if pattern == "checkerboard" else 0.05)))
        w, h = (int(v) for v in d.get("resolution", (64, 64)))
        return SceneSpec(transform, keypoints, pattern, pattern_param, w, h)
    except (KeyError, TypeError, ValueError) as e:
        raise FileFormatError(f"bad scene spec: {e}") from None


def load_scene(path) -> SceneSpec:
    with open(path) as f:
        try:
            d = json.load(f)
        except json.JSONDecodeError as e:
            raise FileFormatError(f"{path}: {e}") from None
    return scene_from_json_dict(d)


def ideal_descriptors(spec: SceneSpec) -> tuple[FrameDescriptor, FrameDescriptor]:
    """Analytic ground-truth descriptors for the scene (see module doc)."""
    k = spec.keypoints.shape[0]
    eye = np.broadcast_to(np.eye(2), (k, 2, 2))
    source = frame_from_arrays(spec.keypoints, eye)
    driving = frame_from_arrays(
        spec.transform.eval_grid(spec.keypoints),
        spec.transform.jacobian_grid(spec.keypoints),
    )
    return source, driving


@dataclass(frozen=True)
class ProfileRow:
    radius: float
    mean_error: float
    max_error: float


def flow_error_profile(
    spec: SceneSpec,
    order: Order,
    radii,
    samples_per_ring: int = PROFILE_SAMPLES_PER_RING,
) -> list[ProfileRow]:
    """Mean/max flow error on rings of given radii around each keypoint.

    Probe points q sit on the ring in reference space; the flow is
    evaluated at z = T(q) using the ring's own keypoint and compared to
    the exact answer q.
    """
    source, driving = ideal_descriptors(spec)
    motion = pairwise_motion(source, driving, order)
    phis = 2.0 * np.pi * np.arange(samples_per_ring) / samples_per_ring
    ring = np.column_stack([np.cos(phis), np.sin(phis)])  # (S, 2)
    rows = []
    for r in radii:
        errs = []
        for k in range(motion.k):
            q = spec.keypoints[k] + r * ring
            z = spec.transform.eval_grid(q)
            approx = approx_flow_grid(motion, k, z)
            errs.append(np.linalg.norm(approx - q, axis=1))
        err = np.concatenate(errs)
        rows.append(ProfileRow(float(r), float(err.mean()), float(err.max())))
    return rows


def profile_to_csv(rows: list[ProfileRow]) -> str:
    lines = ["radius,mean_error,max_error"]
    lines += [f"{r.radius!r},{r.mean_error!r},{r.max_error!r}" for r in rows]
    return "\n".join(lines) + "\n"


def render_pattern(spec: SceneSpec) -> RasterImage:
    """Deterministic single-channel test pattern at the scene resolution."""
    w, h = spec.width, spec.height
    if w < 8 or h < 8:
        raise ValueError(f"pattern resolution {w}x{h} below 8x8")
    if spec.pattern == "checkerboard":
        cells = int(spec.pattern_param)
        i = np.arange(w)
        j = np.arange(h)
        ci = (i * cells) // w
        cj = (j * cells) // h
        data = ((ci[None, :] + cj[:, None]) % 2).astype(float)
    elif spec.pattern == "ramp":
        data = np.broadcast_to(np.arange(w) / (w - 1.0), (h, w)).copy()
    else:  # blobs
        sigma = float(spec.pattern_param)
        grid = coordinate_grid(w, h)  # (H, W, 2)
        d2 = np.sum(
            (grid[None] - spec.keypoints[:, None, None, :]) ** 2, axis=-1
        )  # (K, H, W)
        data = np.exp(-d2 / (2.0 * sigma**2)).max(axis=0)
    return RasterImage(data)
