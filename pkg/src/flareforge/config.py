"""Generator configuration, loaded from YAML and echoed into manifests."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import yaml

from .errors import InvalidArgument

MAX_SEED = 2 ** 64 - 1


@dataclass
class ScatterConfig:
    shape: str = "circle"
    resolution: int = 512
    splat_size: int = 160
    intensity_range: tuple[float, float] = (500.0, 4000.0)
    tint: tuple[float, float, float] = (1.0, 0.95, 0.85)
    tint_jitter: float = 0.1
    lines: tuple[int, int] = (2, 6)
    specks: tuple[int, int] = (3, 12)
    max_opacity: float = 0.6


@dataclass
class BlobConfig:
    sigma: float = 2.5
    peak: float = 3.0
    enabled: bool = True


@dataclass
class FlowConfig:
    levels: int = 4
    window: int = 15
    iterations: int = 3


@dataclass
class SequenceConfig:
    seed: int = 0
    frame_stride: int = 8
    max_frames: Optional[int] = 30
    target_size: tuple[int, int] = (320, 240)
    gamma: float = 2.2
    lens_file: Optional[str] = None
    fov_deg: float = 30.0
    ghost_count_range: tuple[int, int] = (5, 12)
    ghost_rho_max: float = 3.0
    ghost_radius_range: tuple[float, float] = (4.0, 160.0)
    ghost_power_range: tuple[float, float] = (2.0e4, 2.0e5)
    include_reflective: bool = True
    reflective_fraction: float = 0.5
    mask_threshold: float = 1e-3
    scatter: ScatterConfig = field(default_factory=ScatterConfig)
    source_blob: BlobConfig = field(default_factory=BlobConfig)
    flow: FlowConfig = field(default_factory=FlowConfig)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not 0 <= int(self.seed) <= MAX_SEED:
            raise InvalidArgument("seed must be a 64-bit unsigned integer")
        if self.frame_stride < 1:
            raise InvalidArgument("frame_stride must be >= 1")
        if self.max_frames is not None and self.max_frames < 1:
            raise InvalidArgument("max_frames must be >= 1")
        w, h = self.target_size
        if w < 16 or h < 16:
            raise InvalidArgument("target_size must be at least 16x16")
        if not self.gamma > 0:
            raise InvalidArgument("gamma must be positive")
        _range(self.ghost_count_range, "ghost_count_range", lo=0)
        _range(self.ghost_radius_range, "ghost_radius_range", lo=0)
        _range(self.ghost_power_range, "ghost_power_range", lo=0)
        _range(self.scatter.intensity_range, "scatter.intensity_range", lo=0)
        _range(self.scatter.lines, "scatter.lines", lo=0)
        _range(self.scatter.specks, "scatter.specks", lo=0)
        if min(self.scatter.tint) < 0 or self.scatter.tint_jitter < 0:
            raise InvalidArgument("scatter tint gains must be >= 0")
        if not 0 <= self.scatter.max_opacity <= 1:
            raise InvalidArgument("scatter.max_opacity must be in [0, 1]")
        if not 0 <= self.reflective_fraction <= 1:
            raise InvalidArgument("reflective_fraction must be in [0, 1]")
        if self.source_blob.sigma <= 0 or self.source_blob.peak < 0:
            raise InvalidArgument("source_blob needs sigma > 0 and peak >= 0")
        if not self.mask_threshold > 0:
            raise InvalidArgument("mask_threshold must be positive")
        if not 0 < self.fov_deg < 180:
            raise InvalidArgument("fov_deg must be in (0, 180)")

    def to_dict(self) -> dict:
        return _plain(asdict(self))

    @classmethod
    def from_dict(cls, data: Optional[dict]) -> "SequenceConfig":
        data = dict(data or {})
        nested = {"scatter": ScatterConfig, "source_blob": BlobConfig, "flow": FlowConfig}
        kwargs = _checked(cls, data)
        for key, sub in nested.items():
            if key in kwargs:
                kwargs[key] = sub(**_checked(sub, kwargs[key] or {}))
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "SequenceConfig":
        text = Path(path).read_text()
        data = yaml.safe_load(text)
        if data is not None and not isinstance(data, dict):
            raise InvalidArgument(f"{path}: config must be a mapping")
        return cls.from_dict(data)

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


def _range(pair, name, lo=None):
    a, b = pair
    if a > b:
        raise InvalidArgument(f"{name}: min exceeds max ({a} > {b})")
    if lo is not None and a < lo:
        raise InvalidArgument(f"{name}: values must be >= {lo}")


def _checked(cls, data: dict) -> dict:
    names = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(names)
    if unknown:
        raise InvalidArgument(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    out = {}
    for k, v in data.items():
        out[k] = tuple(v) if isinstance(v, list) else v
    return out


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj
