"""Lens prescriptions: ordered optical interfaces and their text file format.

File format (one interface per line, whitespace separated)::

    # r        d      n        f  w    h     c
    72.747     2.300  1.60300  0  1.0  29.0  96.0
    flat       2.600  1.00000  1  1.0  10.0  0.0

``r`` may be the literal token ``flat``.  ``f`` accepts 0/1 or true/false.
Everything after ``#`` is a comment, except header directives of the form
``#@ key value`` which set prescription-level fields::

    #@ aperture_index 14
    #@ aperture_shape hexagon
    #@ sensor_distance 54.779

``aperture_index`` is zero-based.  When it is absent the first flat interface
is taken as the aperture stop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from ..errors import InvalidArgument

APERTURE_SHAPES = ("circle", "hexagon")
DEFAULT_LENS_RESOURCE = "nikon_28_75_representative.lens"


@dataclass(frozen=True)
class LensInterface:
    """One refracting surface.

    Attributes:
        r: radius of curvature in mm, ``None`` for a flat surface.
        d: axial distance to the next interface (mm).
        n: refractive index of the medium after this interface.
        f: flatness flag; flagged interfaces (aperture plane, sensor plane)
            never take part in ghost reflections.
        w: rendering scale applied to ghost radii.
        h: semi-aperture (mm).
        c: anti-reflection coating thickness (nm), 0 for uncoated.
    """

    r: Optional[float]
    d: float
    n: float
    f: bool = False
    w: float = 1.0
    h: float = 10.0
    c: float = 0.0

    def __post_init__(self):
        if self.r is not None and (self.r == 0 or not math.isfinite(self.r)):
            raise InvalidArgument(f"radius must be non-zero and finite or None (flat), got {self.r}")
        if not (math.isfinite(self.d) and self.d >= 0):
            raise InvalidArgument(f"interface distance must be >= 0, got {self.d}")
        if not self.n > 0:
            raise InvalidArgument(f"refractive index must be > 0, got {self.n}")
        if not self.w > 0:
            raise InvalidArgument(f"thickness scale w must be > 0, got {self.w}")
        if not self.h > 0:
            raise InvalidArgument(f"semi-aperture must be > 0, got {self.h}")
        if not self.c >= 0:
            raise InvalidArgument(f"coating thickness must be >= 0, got {self.c}")


@dataclass(frozen=True)
class LensPrescription:
    interfaces: tuple[LensInterface, ...]
    aperture_index: int
    aperture_shape: str = "circle"
    sensor_distance: float = 0.0
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "interfaces", tuple(self.interfaces))
        if not self.interfaces:
            raise InvalidArgument("a prescription needs at least one interface")
        if not 0 <= self.aperture_index < len(self.interfaces):
            raise InvalidArgument(
                f"aperture_index {self.aperture_index} out of range for {len(self.interfaces)} interfaces"
            )
        if not self.interfaces[self.aperture_index].f:
            raise InvalidArgument("the aperture plane must be a flat (f=1) interface")
        if self.aperture_shape not in APERTURE_SHAPES:
            raise InvalidArgument(f"aperture_shape must be one of {APERTURE_SHAPES}")
        if not (math.isfinite(self.sensor_distance) and self.sensor_distance >= 0):
            raise InvalidArgument(f"sensor_distance must be >= 0, got {self.sensor_distance}")

    def __len__(self):
        return len(self.interfaces)

    def index_before(self, k: int) -> float:
        """Refractive index of the medium in front of interface ``k``."""
        return 1.0 if k == 0 else self.interfaces[k - 1].n

    def reflective_indices(self) -> list[int]:
        return [k for k, s in enumerate(self.interfaces) if not s.f]

    def with_interface(self, k: int, **changes) -> "LensPrescription":
        surfaces = list(self.interfaces)
        surfaces[k] = replace(surfaces[k], **changes)
        return replace(self, interfaces=tuple(surfaces))


def _parse_bool(token: str, lineno: int) -> bool:
    t = token.lower()
    if t in ("1", "true", "t", "yes"):
        return True
    if t in ("0", "false", "f", "no"):
        return False
    raise InvalidArgument(f"line {lineno}: cannot read flatness flag {token!r}")


def parse_prescription(text: str, name: str = "") -> LensPrescription:
    surfaces = []
    directives = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if stripped.startswith("#@"):
            parts = stripped[2:].split()
            if len(parts) != 2:
                raise InvalidArgument(f"line {lineno}: directive needs exactly 'key value'")
            directives[parts[0]] = parts[1]
            continue
        body = raw.split("#", 1)[0].split()
        if not body:
            continue
        if len(body) != 7:
            raise InvalidArgument(f"line {lineno}: expected 7 columns (r d n f w h c), got {len(body)}")
        r_tok, d, n, f, w, h, c = body
        try:
            r = None if r_tok.lower() == "flat" else float(r_tok)
            surfaces.append(
                LensInterface(r=r, d=float(d), n=float(n), f=_parse_bool(f, lineno),
                              w=float(w), h=float(h), c=float(c))
            )
        except ValueError as exc:
            raise InvalidArgument(f"line {lineno}: {exc}") from exc

    unknown = set(directives) - {"aperture_index", "aperture_shape", "sensor_distance"}
    if unknown:
        raise InvalidArgument(f"unknown prescription directives: {sorted(unknown)}")
    if "aperture_index" in directives:
        aperture_index = int(directives["aperture_index"])
    else:
        flats = [k for k, s in enumerate(surfaces) if s.f]
        if not flats:
            raise InvalidArgument("no aperture_index directive and no flat interface to use as the stop")
        aperture_index = flats[0]
    return LensPrescription(
        interfaces=tuple(surfaces),
        aperture_index=aperture_index,
        aperture_shape=directives.get("aperture_shape", "circle"),
        sensor_distance=float(directives.get("sensor_distance", 0.0)),
        name=name,
    )


def load_prescription(path) -> LensPrescription:
    path = Path(path)
    return parse_prescription(path.read_text(), name=path.stem)


def default_prescription() -> LensPrescription:
    """The bundled 29-interface zoom lens (representative values)."""
    text = resources.files("flareforge.data").joinpath(DEFAULT_LENS_RESOURCE).read_text()
    return parse_prescription(text, name="nikon_28_75_representative")


def format_prescription(lens: LensPrescription) -> str:
    lines = [
        f"#@ aperture_index {lens.aperture_index}",
        f"#@ aperture_shape {lens.aperture_shape}",
        f"#@ sensor_distance {lens.sensor_distance!r}",
        "# r d n f w h c",
    ]
    for s in lens.interfaces:
        r = "flat" if s.r is None else repr(s.r)
        lines.append(f"{r} {s.d!r} {s.n!r} {int(s.f)} {s.w!r} {s.h!r} {s.c!r}")
    return "\n".join(lines) + "\n"


def simple_prescription(
    radii: Sequence[Optional[float]],
    distances: Sequence[float],
    indices: Sequence[float],
    *,
    semi_aperture: float = 10.0,
    sensor_distance: float = 0.0,
    stop_after: Optional[int] = None,
    aperture_shape: str = "circle",
) -> LensPrescription:
    """Build a prescription from bare columns, inserting a flat stop plane.

    The stop is placed after interface ``stop_after`` (default: after the last
    interface) with zero thickness, so it never changes the optics.
    """
    if not (len(radii) == len(distances) == len(indices)):
        raise InvalidArgument("radii, distances and indices must have equal length")
    surfaces = [
        LensInterface(r=r, d=d, n=n, h=semi_aperture)
        for r, d, n in zip(radii, distances, indices)
    ]
    pos = len(surfaces) if stop_after is None else stop_after + 1
    medium = surfaces[pos - 1].n if pos > 0 else 1.0
    # zero-thickness stop at the far end of the previous gap
    surfaces.insert(pos, LensInterface(r=None, d=0.0, n=medium, f=True, h=semi_aperture))
    return LensPrescription(tuple(surfaces), aperture_index=pos,
                            aperture_shape=aperture_shape, sensor_distance=sensor_distance)
