"""Scattering flare: Fraunhofer PSFs of scratched/dusty apertures and their splats.

The pupil lives in a normalized unit square (x right, y down, both in [0, 1])
that is centered in the N x N simulation grid and spans ``pupil_fraction * N``
samples; 0.5 keeps the intensity PSF free of aliasing.  The PSF is
``|fftshift(fft2(mask))|**2`` with numpy's unnormalized forward transform, so
before normalization its sum equals ``N**2 * sum(mask**2)`` (Parseval).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateInput, InvalidArgument
from .imaging import area_weights

APERTURE_SHAPES = ("circle", "hexagon")
OCCLUDER_KINDS = ("line", "speck")
PSF_MAGIC = b"PSF1"
DEFAULT_MAX_OPACITY = 0.6


@dataclass(frozen=True)
class Occluder:
    """A scratch (``line``) or a dust ``speck`` on the pupil.

    Coordinates and sizes are in pupil units.  ``angle`` is the direction of a
    line measured from +x towards +y; ``length`` and ``width`` are full
    extents; ``radius`` applies to specks.
    """

    kind: str
    center: tuple[float, float]
    angle: float = 0.0
    width: float = 0.01
    length: float = 1.0
    radius: float = 0.02
    opacity: float = 1.0

    def __post_init__(self):
        if self.kind not in OCCLUDER_KINDS:
            raise InvalidArgument(f"occluder kind must be one of {OCCLUDER_KINDS}, got {self.kind!r}")
        cx, cy = self.center
        if not (0.0 <= cx <= 1.0 and 0.0 <= cy <= 1.0):
            raise InvalidArgument(f"occluder center must lie in the unit square, got {self.center}")
        if not 0.0 <= self.opacity <= 1.0:
            raise InvalidArgument(f"opacity must be in [0, 1], got {self.opacity}")
        if not (self.width > 0 and self.length > 0 and self.radius > 0):
            raise InvalidArgument("occluder sizes must be positive")
        if max(self.length, 2 * self.radius) > math.sqrt(2.0) + 1e-12:
            raise InvalidArgument("occluder extends beyond the unit square diagonal")

    def rotated(self, phi: float, about=(0.5, 0.5)) -> "Occluder":
        c, s = math.cos(phi), math.sin(phi)
        dx, dy = self.center[0] - about[0], self.center[1] - about[1]
        center = (about[0] + c * dx - s * dy, about[1] + s * dx + c * dy)
        return Occluder(self.kind, center, self.angle + phi, self.width, self.length, self.radius, self.opacity)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "center": list(self.center), "angle": self.angle, "width": self.width,
                "length": self.length, "radius": self.radius, "opacity": self.opacity}

    @classmethod
    def from_dict(cls, d: dict) -> "Occluder":
        return cls(d["kind"], tuple(d["center"]), d.get("angle", 0.0), d.get("width", 0.01),
                   d.get("length", 1.0), d.get("radius", 0.02), d.get("opacity", 1.0))


@dataclass(frozen=True)
class ApertureSpec:
    shape: str = "circle"
    resolution: int = 512
    occluders: tuple[Occluder, ...] = ()
    pupil_fraction: float = 0.5
    supersample: int = 2

    def __post_init__(self):
        object.__setattr__(self, "occluders", tuple(self.occluders))
        if self.shape not in APERTURE_SHAPES:
            raise InvalidArgument(f"aperture shape must be one of {APERTURE_SHAPES}")
        n = self.resolution
        if n < 64 or n & (n - 1):
            raise InvalidArgument(f"resolution must be a power of two >= 64, got {n}")
        if not 0.0 < self.pupil_fraction <= 1.0:
            raise InvalidArgument("pupil_fraction must be in (0, 1]")
        if self.supersample < 1:
            raise InvalidArgument("supersample must be >= 1")

    def to_dict(self) -> dict:
        return {"shape": self.shape, "resolution": self.resolution, "pupil_fraction": self.pupil_fraction,
                "supersample": self.supersample, "occluders": [o.to_dict() for o in self.occluders]}

    @classmethod
    def from_dict(cls, d: dict) -> "ApertureSpec":
        return cls(shape=d["shape"], resolution=d["resolution"], pupil_fraction=d.get("pupil_fraction", 0.5),
                   supersample=d.get("supersample", 2),
                   occluders=tuple(Occluder.from_dict(o) for o in d.get("occluders", ())))


@dataclass(frozen=True)
class PSF:
    kernel: np.ndarray
    peak_index: tuple[int, int]
    energy: float = field(default=1.0, compare=False)

    @property
    def size(self) -> int:
        return self.kernel.shape[0]


def _pupil_coords(spec: ApertureSpec):
    n, ss = spec.resolution, spec.supersample
    offsets = (np.arange(ss) + 0.5) / ss
    pix = (np.arange(n)[:, None] + offsets[None, :]).ravel()
    u = (pix - n / 2.0) / (spec.pupil_fraction * n) + 0.5
    return np.meshgrid(u, u)


def _base_shape(shape: str, x, y):
    dx, dy = x - 0.5, y - 0.5
    if shape == "circle":
        return (dx * dx + dy * dy <= 0.25).astype(np.float64)
    r = 0.5
    sq3 = math.sqrt(3.0)
    inside = (np.abs(dy) <= sq3 / 2 * r) & (sq3 * np.abs(dx) + np.abs(dy) <= sq3 * r)
    return inside.astype(np.float64)


def _footprint(occ: Occluder, x, y):
    dx, dy = x - occ.center[0], y - occ.center[1]
    if occ.kind == "speck":
        return dx * dx + dy * dy <= occ.radius ** 2
    c, s = math.cos(occ.angle), math.sin(occ.angle)
    along = dx * c + dy * s
    across = -dx * s + dy * c
    return (np.abs(along) <= occ.length / 2) & (np.abs(across) <= occ.width / 2)


def aperture_mask(spec: ApertureSpec) -> np.ndarray:
    """Transmission of the pupil on the N x N grid, antialiased by supersampling."""
    x, y = _pupil_coords(spec)
    t = _base_shape(spec.shape, x, y)
    for occ in spec.occluders:
        t = np.where(_footprint(occ, x, y), t * (1.0 - occ.opacity), t)
    n, ss = spec.resolution, spec.supersample
    return t.reshape(n, ss, n, ss).mean(axis=(1, 3))


def diffraction_psf(mask: np.ndarray) -> PSF:
    mask = np.asarray(mask, dtype=np.float64)
    if mask.ndim != 2 or mask.shape[0] != mask.shape[1]:
        raise InvalidArgument(f"mask must be square, got shape {mask.shape}")
    if not np.any(mask):
        raise DegenerateInput("aperture mask is fully opaque")
    field_ = np.fft.fftshift(np.fft.fft2(mask))
    intensity = field_.real ** 2 + field_.imag ** 2
    energy = float(intensity.sum())
    kernel = intensity / energy
    peak = np.unravel_index(int(np.argmax(kernel)), kernel.shape)
    return PSF(kernel=kernel, peak_index=(int(peak[0]), int(peak[1])), energy=energy)


def psf_center(n: int) -> float:
    """Pixel coordinate of the zero-frequency sample in an N-sample PSF."""
    return float(n // 2)


def resample_psf(psf: PSF, size: int) -> tuple[np.ndarray, float]:
    """Area-average the kernel down to ``size`` and renormalize.

    Returns the kernel and the (fractional) coordinate of its optical center.
    """
    n = psf.size
    if size == n:
        return psf.kernel, psf_center(n)
    w = area_weights(n, size)
    k = w @ psf.kernel @ w.T
    k /= k.sum()
    center = (psf_center(n) + 0.5) * size / n - 0.5
    return k, center


def render_scatter_layer(
    psf: PSF,
    anchor,
    intensity: float,
    tint: Sequence[float],
    canvas: tuple[int, int],
    size: int | None = None,
) -> np.ndarray:
    """Splat the PSF, centered at ``anchor = (x, y)``, into a linear RGB layer.

    ``canvas`` is ``(width, height)``.  The splat is bilinear at sub-pixel
    offsets, so a splat that lies fully inside the frame adds exactly
    ``intensity * sum(tint)``.
    """
    width, height = canvas
    if intensity < 0:
        raise InvalidArgument("intensity must be >= 0")
    tint = np.asarray(tint, dtype=np.float64)
    if tint.shape != (3,) or np.any(tint < 0):
        raise InvalidArgument("tint must be three non-negative gains")
    layer = np.zeros((height, width, 3))
    if intensity == 0 or not np.any(tint):
        return layer

    kernel, center = resample_psf(psf, size or psf.size)
    ox, oy = anchor[0] - center, anchor[1] - center
    x0, y0 = math.floor(ox), math.floor(oy)
    fx, fy = ox - x0, oy - y0
    k = kernel.shape[0]
    spread = np.zeros((k + 1, k + 1))
    spread[:k, :k] += (1 - fx) * (1 - fy) * kernel
    spread[:k, 1:] += fx * (1 - fy) * kernel
    spread[1:, :k] += (1 - fx) * fy * kernel
    spread[1:, 1:] += fx * fy * kernel

    cy0, cx0 = max(y0, 0), max(x0, 0)
    cy1, cx1 = min(y0 + k + 1, height), min(x0 + k + 1, width)
    if cy0 >= cy1 or cx0 >= cx1:
        return layer
    patch = spread[cy0 - y0:cy1 - y0, cx0 - x0:cx1 - x0]
    layer[cy0:cy1, cx0:cx1] = patch[..., None] * (intensity * tint)
    return layer


def principal_axis_angle(kernel: np.ndarray, window_fraction: float = 0.5) -> float:
    """Orientation (rad, in (-pi/2, pi/2]) of the kernel's major second-moment axis.

    Moments are taken about the zero-frequency sample over a disk whose
    diameter is ``window_fraction`` of the grid.  The diffraction tails decay
    slowly enough that unwindowed moments are dominated by the square grid's
    corners, which biases the angle towards the axes.
    """
    k = np.asarray(kernel, dtype=np.float64)
    n = k.shape[0]
    c = psf_center(n)
    ys, xs = np.indices(k.shape, dtype=np.float64)
    dx, dy = xs - c, ys - c
    k = np.where(dx * dx + dy * dy <= (window_fraction * n / 2.0) ** 2, k, 0.0)
    total = k.sum()
    if total <= 0:
        raise DegenerateInput("kernel has no energy inside the moment window")
    sxx = (k * dx * dx).sum() / total
    syy = (k * dy * dy).sum() / total
    sxy = (k * dx * dy).sum() / total
    return 0.5 * math.atan2(2.0 * sxy, sxx - syy)


def random_aperture(
    rng: np.random.Generator,
    shape: str = "circle",
    resolution: int = 512,
    n_lines: tuple[int, int] = (2, 6),
    n_specks: tuple[int, int] = (3, 12),
    max_opacity: float = DEFAULT_MAX_OPACITY,
) -> ApertureSpec:
    """Random scratches sharing one dominant direction plus scattered dust."""
    base = rng.uniform(0.0, math.pi)
    occluders = []
    for _ in range(int(rng.integers(n_lines[0], n_lines[1] + 1))):
        occluders.append(Occluder(
            "line",
            center=(float(rng.uniform(0.2, 0.8)), float(rng.uniform(0.2, 0.8))),
            angle=float(base + rng.normal(0.0, 0.05)),
            width=float(rng.uniform(0.004, 0.015)),
            length=float(rng.uniform(0.3, 1.2)),
            opacity=float(rng.uniform(0.2, max_opacity)),
        ))
    for _ in range(int(rng.integers(n_specks[0], n_specks[1] + 1))):
        occluders.append(Occluder(
            "speck",
            center=(float(rng.uniform(0.1, 0.9)), float(rng.uniform(0.1, 0.9))),
            radius=float(rng.uniform(0.008, 0.04)),
            opacity=float(rng.uniform(0.2, max_opacity)),
        ))
    return ApertureSpec(shape=shape, resolution=resolution, occluders=tuple(occluders))


def write_psf(psf: PSF) -> bytes:
    n = psf.size
    return PSF_MAGIC + struct.pack("<I", n) + np.ascontiguousarray(psf.kernel, dtype="<f4").tobytes()


def read_psf(data: bytes) -> PSF:
    if len(data) < 8 or data[:4] != PSF_MAGIC:
        raise InvalidArgument("not a PSF1 kernel file")
    (n,) = struct.unpack_from("<I", data, 4)
    if len(data) != 8 + 4 * n * n:
        raise InvalidArgument(f"PSF1 payload size mismatch for N={n}")
    kernel = np.frombuffer(data, dtype="<f4", offset=8).reshape(n, n).astype(np.float64)
    peak = np.unravel_index(int(np.argmax(kernel)), kernel.shape)
    return PSF(kernel=kernel, peak_index=(int(peak[0]), int(peak[1])), energy=float(kernel.sum()))
