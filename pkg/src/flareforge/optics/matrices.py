"""Paraxial ray transfer (ABCD) matrices in the meridional plane.

A ray is the column vector ``(r, theta)``: height above the optical axis in mm
and paraxial angle in radians.  Matrices are kept as plain Python floats so
that compositions of a few hundred factors stay exactly reproducible and
cheap; :meth:`RayTransferMatrix.as_array` hands out a numpy view when needed.

Flat surfaces are written as ``R=None`` (``math.inf`` is accepted too) so the
curvature term is exactly zero instead of a tiny number from a huge radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional

import numpy as np

from ..errors import InvalidArgument, NumericDegenerate


class RayState(NamedTuple):
    r: float
    theta: float


@dataclass(frozen=True)
class RayTransferMatrix:
    """Row-major 2x2 matrix ``[[a, b], [c, d]]``."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.a, self.b, self.c, self.d)):
            raise InvalidArgument(f"non-finite matrix entry in {self!r}")

    @classmethod
    def identity(cls) -> "RayTransferMatrix":
        return cls(1.0, 0.0, 0.0, 1.0)

    @classmethod
    def from_array(cls, arr) -> "RayTransferMatrix":
        arr = np.asarray(arr, dtype=np.float64)
        if arr.shape != (2, 2):
            raise InvalidArgument(f"expected a 2x2 array, got shape {arr.shape}")
        return cls(float(arr[0, 0]), float(arr[0, 1]), float(arr[1, 0]), float(arr[1, 1]))

    def __matmul__(self, other):
        if isinstance(other, RayTransferMatrix):
            return RayTransferMatrix(
                self.a * other.a + self.b * other.c,
                self.a * other.b + self.b * other.d,
                self.c * other.a + self.d * other.c,
                self.c * other.b + self.d * other.d,
            )
        if isinstance(other, RayState):
            return trace_ray(self, other)
        return NotImplemented

    @property
    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    def inverse(self) -> "RayTransferMatrix":
        det = self.det
        if det == 0.0:
            raise NumericDegenerate("singular ray transfer matrix")
        return RayTransferMatrix(self.d / det, -self.b / det, -self.c / det, self.a / det)

    def as_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=np.float64)

    def allclose(self, other: "RayTransferMatrix", atol: float = 1e-12) -> bool:
        return all(
            abs(x - y) <= atol
            for x, y in zip((self.a, self.b, self.c, self.d), (other.a, other.b, other.c, other.d))
        )


def is_flat(R: Optional[float]) -> bool:
    return R is None or math.isinf(R)


def translation_matrix(d: float) -> RayTransferMatrix:
    """Free propagation over an axial distance ``d`` (mm)."""
    if not math.isfinite(d):
        raise InvalidArgument(f"translation distance must be finite, got {d}")
    return RayTransferMatrix(1.0, float(d), 0.0, 1.0)


def refraction_matrix(n1: float, n2: float, R: Optional[float]) -> RayTransferMatrix:
    """Refraction from index ``n1`` into ``n2`` at a spherical surface of radius ``R``.

    ``R=None`` denotes a flat surface, for which only the angle is rescaled.
    """
    if not (n1 > 0 and n2 > 0):
        raise InvalidArgument(f"refractive indices must be positive, got n1={n1}, n2={n2}")
    if is_flat(R):
        power = 0.0
    elif R == 0:
        raise InvalidArgument("radius of curvature must be non-zero (use None for flat)")
    else:
        power = (n1 - n2) / (n2 * R)
    return RayTransferMatrix(1.0, 0.0, power, n1 / n2)


def reflection_matrix(R: Optional[float]) -> RayTransferMatrix:
    """Reflection at a spherical surface of radius ``R``; flat is the identity."""
    if is_flat(R):
        return RayTransferMatrix.identity()
    if R == 0:
        raise InvalidArgument("radius of curvature must be non-zero (use None for flat)")
    return RayTransferMatrix(1.0, 0.0, 2.0 / R, 1.0)


def compose(ms: Iterable[RayTransferMatrix]) -> RayTransferMatrix:
    """Multiply matrices in written order: ``compose([A, B, C]) == A @ B @ C``.

    The rightmost factor is the first one the ray meets, so a path collected in
    propagation order should be passed reversed.
    """
    ms = list(ms)
    if not ms:
        raise InvalidArgument("cannot compose an empty list of matrices")
    out = ms[-1]
    for m in reversed(ms[:-1]):
        out = m @ out
    return out


def trace_ray(m: RayTransferMatrix, ray: RayState) -> RayState:
    r, theta = ray
    return RayState(m.a * r + m.b * theta, m.c * r + m.d * theta)
