"""Second-order ghost reflections through a lens prescription.

A ghost ``(i, j)`` with ``i < j`` is light that reflects first at the later
interface ``j``, travels back, reflects at ``i`` and then continues to the
sensor.  Paths are built as labelled factor lists in propagation order, so the
same list serves matrix composition, clipping checks and debugging.

Sign convention: on the backward leg the ray is described in its own travel
direction (distances stay positive).  Crossing interface ``k`` backwards is a
refraction from ``n_k`` into ``n_{k-1}`` at radius ``-R_k``, and the second
reflection sees the surface as ``-R_i`` (i.e. ``L_i^-1``).  The result is the
global-frame height and angle at the sensor, directly comparable with the
direct image.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Sequence

from ..errors import InvalidArgument, NumericDegenerate
from .lens import LensPrescription
from .matrices import (
    RayState,
    RayTransferMatrix,
    compose,
    reflection_matrix,
    refraction_matrix,
    trace_ray,
    translation_matrix,
)

DEFAULT_WAVELENGTHS_NM = (610.0, 550.0, 465.0)
DEFAULT_PARAXIAL_CAP = 0.35
MIN_COATING_INDEX = 1.38


@dataclass(frozen=True)
class PathFactor:
    """One matrix on an optical path.

    ``surface`` is the interface whose aperture the ray meets at this factor,
    or ``None`` for translations.
    """

    label: str
    matrix: RayTransferMatrix
    surface: Optional[int] = None


@dataclass(frozen=True)
class GhostDescriptor:
    pair: tuple[int, int]
    rho: float
    radius_px: float
    intensity_rgb: tuple[float, float, float]
    clipped: bool

    @property
    def brightness(self) -> float:
        return sum(self.intensity_rgb) / 3.0


def _check_pair(lens: LensPrescription, pair) -> tuple[int, int]:
    i, j = pair
    n = len(lens.interfaces)
    if not (0 <= i < j < n):
        raise InvalidArgument(f"ghost pair must satisfy 0 <= i < j < {n}, got {pair}")
    if lens.interfaces[i].f or lens.interfaces[j].f:
        raise InvalidArgument(f"ghost pair {pair} uses a flat-flagged interface")
    return i, j


def _forward(lens: LensPrescription, k: int) -> list[PathFactor]:
    s = lens.interfaces[k]
    return [
        PathFactor(f"R{k + 1}", refraction_matrix(lens.index_before(k), s.n, s.r), k),
        PathFactor(f"T{k + 1}", translation_matrix(s.d)),
    ]


def _flip(r):
    return None if r is None else -r


def direct_path(lens: LensPrescription) -> list[PathFactor]:
    path = []
    for k in range(len(lens.interfaces)):
        path += _forward(lens, k)
    path.append(PathFactor("Ts", translation_matrix(lens.sensor_distance)))
    return path


def ghost_path(lens: LensPrescription, pair) -> list[PathFactor]:
    """Factors of ghost ``pair`` in the order the ray meets them."""
    i, j = _check_pair(lens, pair)
    surfaces = lens.interfaces
    path = []
    for k in range(j):
        path += _forward(lens, k)
    path.append(PathFactor(f"L{j + 1}", reflection_matrix(surfaces[j].r), j))
    for k in range(j - 1, i, -1):
        path.append(PathFactor(f"T{k + 1}", translation_matrix(surfaces[k].d)))
        path.append(PathFactor(
            f"Rb{k + 1}",
            refraction_matrix(surfaces[k].n, lens.index_before(k), _flip(surfaces[k].r)),
            k,
        ))
    path.append(PathFactor(f"T{i + 1}", translation_matrix(surfaces[i].d)))
    path.append(PathFactor(f"L{i + 1}^-1", reflection_matrix(_flip(surfaces[i].r)), i))
    path.append(PathFactor(f"T{i + 1}", translation_matrix(surfaces[i].d)))
    for k in range(i + 1, len(surfaces)):
        path += _forward(lens, k)
    path.append(PathFactor("Ts", translation_matrix(lens.sensor_distance)))
    return path


def path_matrix(path: Sequence[PathFactor]) -> RayTransferMatrix:
    return compose([f.matrix for f in reversed(path)])


def direct_system_matrix(lens: LensPrescription) -> RayTransferMatrix:
    return path_matrix(direct_path(lens))


def ghost_system_matrix(lens: LensPrescription, pair) -> RayTransferMatrix:
    m = path_matrix(ghost_path(lens, pair))
    if m.det == 0.0:
        raise NumericDegenerate(f"ghost {pair} has a singular system matrix")
    return m


def enumerate_ghosts(lens: LensPrescription) -> list[tuple[int, int]]:
    """All reflecting pairs over non-flat interfaces, ``k*(k-1)/2`` of them."""
    return list(combinations(lens.reflective_indices(), 2))


def interface_reflectance(
    n1: float,
    n2: float,
    coating_nm: float,
    wavelength_nm: float,
    coating_index: Optional[float] = None,
) -> float:
    """Normal-incidence reflectance of a single-layer coated interface.

    The layer index defaults to ``max(sqrt(n1*n2), 1.38)``, the ideal
    quarter-wave match clamped to the lowest practical coating material.  A
    zero thickness reduces to the bare Fresnel term ``((n1-n2)/(n1+n2))**2``.
    """
    if not (n1 > 0 and n2 > 0):
        raise InvalidArgument("refractive indices must be positive")
    if not wavelength_nm > 0:
        raise InvalidArgument("wavelength must be positive")
    if coating_nm <= 0:
        r = (n1 - n2) / (n1 + n2)
        return min(max(r * r, 0.0), 1.0)
    nc = coating_index if coating_index is not None else max(math.sqrt(n1 * n2), MIN_COATING_INDEX)
    r12 = (n1 - nc) / (n1 + nc)
    r23 = (nc - n2) / (nc + n2)
    phase = cmath.exp(1j * 4.0 * math.pi * nc * coating_nm / wavelength_nm)
    r = (r12 + r23 * phase) / (1.0 + r12 * r23 * phase)
    return min(max(abs(r) ** 2, 0.0), 1.0)


def entrance_pupil_radius(lens: LensPrescription) -> float:
    """Entrance height of an axial ray that grazes the aperture-stop rim.

    Falls back to the first interface's semi-aperture when the stop is not
    reachable paraxially, and never exceeds it.
    """
    stop = lens.aperture_index
    front = lens.interfaces[0].h
    if stop == 0:
        return min(lens.interfaces[0].h, front)
    path = []
    for k in range(stop):
        path += _forward(lens, k)
    gain = abs(path_matrix(path).a)
    if gain == 0.0:
        return front
    return min(lens.interfaces[stop].h / gain, front)


def _exceeds_aperture(lens, path, ray: RayState, skip_stop: bool) -> bool:
    for factor in path:
        k = factor.surface
        if k is not None and not (skip_stop and k == lens.aperture_index):
            if abs(ray.r) > lens.interfaces[k].h:
                return True
        ray = trace_ray(factor.matrix, ray)
    return False


def ghost_geometry(
    lens: LensPrescription,
    pair,
    theta_in: float,
    focal_scale: float,
    *,
    entrance_height: Optional[float] = None,
    wavelengths_nm: Sequence[float] = DEFAULT_WAVELENGTHS_NM,
    paraxial_cap: float = DEFAULT_PARAXIAL_CAP,
) -> GhostDescriptor:
    """Position ratio, size, brightness and clipping of one ghost.

    Args:
        lens: the prescription.
        pair: ghost interfaces ``(i, j)``.
        theta_in: field angle of the source (rad).
        focal_scale: sensor sampling in px per mm.
        entrance_height: marginal-ray height at the first interface; defaults
            to :func:`entrance_pupil_radius`.
        wavelengths_nm: one design wavelength per RGB channel.
        paraxial_cap: largest accepted ``|theta_in|``.

    ``rho`` is the ghost chief-ray sensor height over the direct one.  The
    marginal rays at ``+-entrance_height`` give the radius, scaled by the mean
    ``w`` of the two reflecting interfaces.  Intensity per channel is the
    product of both reflectances over the ghost area in px^2 (area floored at a
    1 px radius).  ``clipped`` is set when a chief ray leaves any semi-aperture
    or a marginal ray leaves any aperture other than the stop, which defines
    the marginal bundle in the first place.
    """
    if not math.isfinite(theta_in) or abs(theta_in) > paraxial_cap:
        raise InvalidArgument(f"|theta_in| must be <= {paraxial_cap} rad, got {theta_in}")
    if not focal_scale > 0:
        raise InvalidArgument("focal_scale must be positive")
    i, j = _check_pair(lens, pair)

    gpath = ghost_path(lens, pair)
    dpath = direct_path(lens)
    g = path_matrix(gpath)
    d = path_matrix(dpath)
    if d.b == 0.0:
        raise NumericDegenerate("direct path maps every field angle to the axis (zero theta column)")

    chief = RayState(0.0, theta_in)
    if theta_in == 0.0:
        rho = g.b / d.b
    else:
        rho = trace_ray(g, chief).r / trace_ray(d, chief).r

    h = entrance_pupil_radius(lens) if entrance_height is None else float(entrance_height)
    if h < 0:
        raise InvalidArgument("entrance_height must be >= 0")
    upper = trace_ray(g, RayState(h, theta_in))
    lower = trace_ray(g, RayState(-h, theta_in))
    w = 0.5 * (lens.interfaces[i].w + lens.interfaces[j].w)
    radius_px = 0.5 * abs(upper.r - lower.r) * focal_scale * w

    si, sj = lens.interfaces[i], lens.interfaces[j]
    area = math.pi * max(radius_px, 1.0) ** 2
    intensity = tuple(
        interface_reflectance(lens.index_before(i), si.n, si.c, lam)
        * interface_reflectance(lens.index_before(j), sj.n, sj.c, lam)
        / area
        for lam in wavelengths_nm
    )

    clipped = (
        _exceeds_aperture(lens, dpath, chief, skip_stop=False)
        or _exceeds_aperture(lens, gpath, chief, skip_stop=False)
        or _exceeds_aperture(lens, gpath, RayState(h, theta_in), skip_stop=True)
        or _exceeds_aperture(lens, gpath, RayState(-h, theta_in), skip_stop=True)
    )
    return GhostDescriptor(pair=(i, j), rho=rho, radius_px=radius_px,
                           intensity_rgb=intensity, clipped=clipped)


def all_ghosts(lens: LensPrescription, theta_in: float, focal_scale: float, **kwargs) -> list[GhostDescriptor]:
    return [ghost_geometry(lens, p, theta_in, focal_scale, **kwargs) for p in enumerate_ghosts(lens)]


def focal_scale_for_fov(lens: LensPrescription, width_px: int, fov_deg: float) -> float:
    """px/mm such that a source at the frame edge sits at half the horizontal FOV.

    Uses the paraxial relation ``height_mm = B * theta`` of the direct path.
    """
    if not 0 < fov_deg < 180:
        raise InvalidArgument("fov_deg must be in (0, 180)")
    focal_px = (width_px / 2.0) / math.tan(math.radians(fov_deg) / 2.0)
    b = direct_system_matrix(lens).b
    if b == 0.0:
        raise NumericDegenerate("direct path has a zero theta column")
    return focal_px / abs(b)
