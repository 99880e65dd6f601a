"""Light-source trajectories driven by optical flow.

The source is advanced frame to frame by the flow sampled under it; the
scattering flare rides along at a fixed per-sequence offset, and reflective
ghosts are placed on the line through the source and the image center.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import InvalidArgument
from .flowio import sample_bilinear

MAX_SCATTER_OFFSET = 15.0
CLAMP_FLAG_FRACTION = 0.25


class SourcePosition(NamedTuple):
    x: float
    y: float


class ImageCenter(NamedTuple):
    cx: float
    cy: float

    @classmethod
    def of(cls, width: int, height: int) -> "ImageCenter":
        return cls(width / 2.0, height / 2.0)


@dataclass
class SourceTrajectory:
    positions: list[SourcePosition]
    scatter_anchor: list[SourcePosition]
    offset: tuple[float, float]
    clamped: list[bool] = field(default_factory=list)

    def __len__(self):
        return len(self.positions)

    @property
    def clamp_fraction(self) -> float:
        return sum(self.clamped) / len(self.clamped) if self.clamped else 0.0

    @property
    def flagged(self) -> bool:
        """True when the source sat on the frame border too often to trust."""
        return self.clamp_fraction > CLAMP_FLAG_FRACTION


def _clamp(x: float, y: float, width: int, height: int) -> SourcePosition:
    return SourcePosition(min(max(x, 0.0), width - 1.0), min(max(y, 0.0), height - 1.0))


def init_source(width: int, height: int, rng: np.random.Generator) -> SourcePosition:
    """Uniform start position inside the central two-thirds of the frame."""
    if width < 3 or height < 3:
        raise InvalidArgument(f"frame must be at least 3x3, got {width}x{height}")
    x = rng.uniform(width / 6.0, 5.0 * width / 6.0)
    y = rng.uniform(height / 6.0, 5.0 * height / 6.0)
    return SourcePosition(float(x), float(y))


def sample_scatter_offset(rng: np.random.Generator, high: float = MAX_SCATTER_OFFSET) -> tuple[float, float]:
    dx, dy = rng.uniform(0.0, high, size=2)
    return float(dx), float(dy)


def _advance(pos: SourcePosition, flow: np.ndarray) -> tuple[SourcePosition, bool]:
    h, w = flow.shape[:2]
    u, v = sample_bilinear(flow, pos)
    x, y = pos.x + u, pos.y + v
    out = _clamp(x, y, w, h)
    return out, (out.x != x or out.y != y)


def advance_source(pos: SourcePosition, flow: np.ndarray) -> SourcePosition:
    """One step of ``P_t = P_{t-1} + O(P_{t-1})``, clamped into the frame."""
    return _advance(SourcePosition(*pos), flow)[0]


def scatter_anchor(
    pos: SourcePosition,
    offset: Sequence[float],
    bounds: Optional[tuple[int, int]] = None,
) -> SourcePosition:
    """Scattering-flare center: the source plus a small fixed offset.

    ``bounds`` is ``(width, height)``; when given the anchor is clamped into
    the frame.
    """
    dx, dy = offset
    if not (0.0 <= dx < MAX_SCATTER_OFFSET and 0.0 <= dy < MAX_SCATTER_OFFSET):
        raise InvalidArgument(f"scatter offset components must lie in [0, 15), got {offset}")
    x, y = pos[0] + dx, pos[1] + dy
    if bounds is None:
        return SourcePosition(x, y)
    return _clamp(x, y, *bounds)


def reflective_position(center: ImageCenter, source: SourcePosition, rho: float) -> SourcePosition:
    """Ghost center ``center + rho * (source - center)``."""
    if not math.isfinite(rho):
        raise InvalidArgument(f"rho must be finite, got {rho}")
    cx, cy = center
    return SourcePosition(cx + rho * (source[0] - cx), cy + rho * (source[1] - cy))


def collinearity_residual(center, source, ghost, eps: float = 1e-12) -> float:
    """|sin| of the angle at ``ghost`` between the directions to center and source."""
    ax, ay = center[0] - ghost[0], center[1] - ghost[1]
    bx, by = source[0] - ghost[0], source[1] - ghost[1]
    cross = ax * by - ay * bx
    return abs(cross) / (math.hypot(ax, ay) * math.hypot(bx, by) + eps)


def build_trajectory(
    flows: Sequence[np.ndarray],
    init: SourcePosition,
    offset: Sequence[float],
    frames: int,
    bounds: Optional[tuple[int, int]] = None,
) -> SourceTrajectory:
    """Iterate the flow update from ``init`` over ``frames`` frames.

    ``flows[t]`` carries frame ``t`` to ``t + 1``.  Anchors are clamped to
    ``bounds = (width, height)``, which defaults to the flow grid size.
    """
    if frames < 1:
        raise InvalidArgument("a trajectory needs at least one frame")
    if len(flows) != frames - 1:
        raise InvalidArgument(f"expected {frames - 1} flow fields for {frames} frames, got {len(flows)}")
    offset = (float(offset[0]), float(offset[1]))
    positions = [SourcePosition(float(init[0]), float(init[1]))]
    clamped = [False]
    for flow in flows:
        nxt, hit = _advance(positions[-1], flow)
        positions.append(nxt)
        clamped.append(hit)
    if bounds is None and flows:
        h, w = flows[0].shape[:2]
        bounds = (w, h)
    anchors = [scatter_anchor(p, offset, bounds) for p in positions]
    return SourceTrajectory(positions=positions, scatter_anchor=anchors, offset=offset, clamped=clamped)
