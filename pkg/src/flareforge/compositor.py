"""Gamma-linear compositing of flare layers onto clean frames."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidArgument
from .imaging import LUMA

DEFAULT_GAMMA = 2.2
DEFAULT_MASK_THRESHOLD = 1e-3


@dataclass
class FramePair:
    degraded: np.ndarray
    clean: np.ndarray
    mask: np.ndarray
    frame_index: int = 0


def _check_gamma(gamma: float) -> float:
    if not gamma > 0:
        raise InvalidArgument(f"gamma must be positive, got {gamma}")
    return float(gamma)


def inverse_gamma(img, gamma: float = DEFAULT_GAMMA) -> np.ndarray:
    gamma = _check_gamma(gamma)
    return np.power(np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0), gamma)


def apply_gamma(img, gamma: float = DEFAULT_GAMMA) -> np.ndarray:
    gamma = _check_gamma(gamma)
    return np.power(np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0), 1.0 / gamma)


def sum_layers(layers: Sequence[np.ndarray], shape) -> np.ndarray:
    total = np.zeros(shape)
    for layer in layers:
        layer = np.asarray(layer, dtype=np.float64)
        if layer.shape != tuple(shape):
            raise InvalidArgument(f"layer shape {layer.shape} does not match frame {tuple(shape)}")
        total += layer
    return total


def flare_mask(layers: Sequence[np.ndarray], threshold: float = DEFAULT_MASK_THRESHOLD, shape=None) -> np.ndarray:
    """Binary (uint8 0/1) mask where summed layer luminance exceeds ``threshold``.

    ``shape`` is the ``(H, W, 3)`` frame shape, needed when ``layers`` is empty.
    """
    if not threshold > 0:
        raise InvalidArgument("mask threshold must be positive")
    if shape is None:
        if not layers:
            raise InvalidArgument("shape is required for an empty layer list")
        shape = np.shape(layers[0])
    lum = sum_layers(layers, shape) @ LUMA
    return (lum > threshold).astype(np.uint8)


def mask_tolerance(threshold: float = DEFAULT_MASK_THRESHOLD, gamma: float = DEFAULT_GAMMA) -> float:
    """Largest gamma-domain change a pixel outside the mask can show.

    Outside the mask every channel of the summed layer is below
    ``threshold / 0.0722`` (blue has the smallest luminance weight), and
    ``x**(1/gamma)`` moves by at most ``delta**(1/gamma)`` for an added
    ``delta`` when ``gamma >= 1``.
    """
    gamma = _check_gamma(gamma)
    return (threshold / LUMA.min()) ** (1.0 / gamma)


def composite(
    scene: np.ndarray,
    layers: Sequence[np.ndarray],
    gamma: float = DEFAULT_GAMMA,
    mask_threshold: float = DEFAULT_MASK_THRESHOLD,
    frame_index: int = 0,
) -> FramePair:
    """Add linear-light flare ``layers`` to the gamma-encoded ``scene``."""
    scene = np.asarray(scene)
    if scene.ndim != 3 or scene.shape[2] != 3:
        raise InvalidArgument(f"scene must be (H, W, 3), got {scene.shape}")
    flare = sum_layers(layers, scene.shape)
    if np.any(flare < 0) or not np.all(np.isfinite(flare)):
        raise InvalidArgument("flare layers must be finite and non-negative")
    linear = inverse_gamma(scene, gamma) + flare
    degraded = apply_gamma(np.clip(linear, 0.0, 1.0), gamma)
    mask = (flare @ LUMA > mask_threshold).astype(np.uint8)
    return FramePair(degraded=degraded, clean=scene, mask=mask, frame_index=frame_index)


def source_blob(center, sigma: float, peak: float, canvas: tuple[int, int], tint=(1.0, 1.0, 1.0)) -> np.ndarray:
    """Isotropic Gaussian light-source layer; ``canvas`` is ``(width, height)``."""
    width, height = canvas
    if sigma <= 0 or peak < 0:
        raise InvalidArgument("source blob needs sigma > 0 and peak >= 0")
    layer = np.zeros((height, width, 3))
    if peak == 0:
        return layer
    # beyond 5 sigma the Gaussian is below 4e-6 of the peak
    r = int(np.ceil(5.0 * sigma))
    cx, cy = float(center[0]), float(center[1])
    x0, x1 = max(int(np.floor(cx)) - r, 0), min(int(np.ceil(cx)) + r + 1, width)
    y0, y1 = max(int(np.floor(cy)) - r, 0), min(int(np.ceil(cy)) + r + 1, height)
    if x0 >= x1 or y0 >= y1:
        return layer
    ys, xs = np.mgrid[y0:y1, x0:x1]
    g = peak * np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2.0 * sigma * sigma))
    layer[y0:y1, x0:x1] = g[..., None] * np.asarray(tint, dtype=np.float64)
    return layer
