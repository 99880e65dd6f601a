"""Rasterizing reflective ghosts as aperture-shaped spots."""

from __future__ import annotations

import math

import numpy as np

from .errors import InvalidArgument

SQRT3 = math.sqrt(3.0)


def _edge_distance(dx: np.ndarray, dy: np.ndarray, radius: float, shape: str) -> np.ndarray:
    """Signed distance (px, negative inside) to the spot outline."""
    if shape == "circle":
        return np.hypot(dx, dy) - radius
    if shape == "hexagon":
        # pointy along x, like the aperture mask; both edge families sit at the inradius
        inradius = radius * SQRT3 / 2.0
        ax, ay = np.abs(dx), np.abs(dy)
        return np.maximum(ay, (SQRT3 * ax + ay) / 2.0) - inradius
    raise InvalidArgument(f"unknown ghost shape {shape!r}")


def render_ghost_layer(
    center,
    radius_px: float,
    rgb,
    canvas: tuple[int, int],
    shape: str = "hexagon",
    out: np.ndarray | None = None,
) -> np.ndarray:
    """Add a uniform ghost with ``rgb`` per-pixel linear value to a layer.

    Edges are antialiased by a one-pixel coverage ramp.  ``canvas`` is
    ``(width, height)``; pass ``out`` to accumulate several ghosts in place.
    """
    width, height = canvas
    if out is None:
        out = np.zeros((height, width, 3))
    if radius_px <= 0:
        return out
    cx, cy = float(center[0]), float(center[1])
    if not (math.isfinite(cx) and math.isfinite(cy)):
        raise InvalidArgument("ghost center must be finite")
    reach = radius_px + 1.0
    x0, x1 = max(int(math.floor(cx - reach)), 0), min(int(math.ceil(cx + reach)) + 1, width)
    y0, y1 = max(int(math.floor(cy - reach)), 0), min(int(math.ceil(cy + reach)) + 1, height)
    if x0 >= x1 or y0 >= y1:
        return out
    ys, xs = np.mgrid[y0:y1, x0:x1].astype(np.float64)
    coverage = np.clip(0.5 - _edge_distance(xs - cx, ys - cy, radius_px, shape), 0.0, 1.0)
    out[y0:y1, x0:x1] += coverage[..., None] * np.asarray(rgb, dtype=np.float64)
    return out
