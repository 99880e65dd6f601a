"""Small image helpers shared by the renderers and the pipeline."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .errors import InvalidArgument

LUMA = np.array([0.2126, 0.7152, 0.0722])


def area_weights(n_in: int, n_out: int) -> np.ndarray:
    """``(n_out, n_in)`` matrix averaging input samples by overlap area.

    Rows sum to one; for an integer ratio this is plain block averaging.
    """
    if n_out > n_in:
        raise InvalidArgument(f"cannot upsample with area averaging ({n_in} -> {n_out})")
    scale = n_in / n_out
    edges = np.arange(n_out + 1) * scale
    lo, hi = edges[:-1, None], edges[1:, None]
    cells = np.arange(n_in)[None, :]
    overlap = np.clip(np.minimum(hi, cells + 1) - np.maximum(lo, cells), 0.0, None)
    return overlap / scale


def area_resize(img: np.ndarray, width: int, height: int) -> np.ndarray:
    """Area-average ``img`` (H, W[, C]) down to ``(height, width)``."""
    h, w = img.shape[:2]
    if (w, h) == (width, height):
        return np.array(img, dtype=np.float64)
    wy = area_weights(h, height)
    wx = area_weights(w, width)
    img = np.asarray(img, dtype=np.float64)
    rows = np.tensordot(wy, img, axes=(1, 0))
    return np.moveaxis(np.tensordot(wx, rows, axes=(1, 1)), 0, 1)


def luminance(img: np.ndarray) -> np.ndarray:
    return np.asarray(img, dtype=np.float64)[..., :3] @ LUMA


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def read_png(path) -> np.ndarray:
    """Read an image as float64 in [0, 1]; RGB images come back (H, W, 3)."""
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB")
        arr = np.asarray(im)
    return arr.astype(np.float64) / 255.0


def write_png(path, img: np.ndarray) -> None:
    """Write a [0, 1] float image (or uint8) as an 8-bit PNG."""
    arr = img if img.dtype == np.uint8 else to_uint8(img)
    Image.fromarray(arr).save(Path(path), format="PNG", optimize=False, compress_level=6)


def list_frames(directory, pattern: str = "*.png") -> list[Path]:
    return sorted(Path(directory).glob(pattern))
