"""HSV rendering of dense flow fields for quick visual inspection.

Displacement direction maps to hue, magnitude to value (clipped at 1.0),
saturation is fixed at 1. Zero displacement renders black.
"""

from __future__ import annotations

import numpy as np

from .dense import DenseFlow
from .raster import RasterImage


def hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    """Vectorized HSV -> RGB, all components in [0, 1], shape (..., 3)."""
    h = (hsv[..., 0] % 1.0) * 6.0
    s = hsv[..., 1]
    v = hsv[..., 2]
    i = np.floor(h).astype(int) % 6
    f = h - np.floor(h)
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    conds = [i == n for n in range(6)]
    r = np.select(conds, [v, q, p, p, t, v])
    g = np.select(conds, [t, v, v, q, p, p])
    b = np.select(conds, [p, p, t, v, v, q])
    return np.stack([r, g, b], axis=-1)


def flow_to_image(flow: DenseFlow) -> RasterImage:
    """Render displacement (flow(z) - z) as an RGB image."""
    d = flow.displacement()
    mag = np.hypot(d[..., 0], d[..., 1])
    ang = np.arctan2(d[..., 1], d[..., 0])
    hsv = np.stack(
        [
            (ang + np.pi) / (2.0 * np.pi),
            np.ones_like(mag),
            np.clip(mag, 0.0, 1.0),
        ],
        axis=-1,
    )
    return RasterImage(hsv_to_rgb(hsv))
