"""Optical flow I/O, sampling and a classical pyramidal estimator.

Flow fields are ``(H, W, 2)`` float arrays holding ``(u, v)`` in pixels per
frame step, with the convention ``I_t(x + u, y + v) ~= I_{t-1}(x, y)``.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import FlowFormatError, InvalidArgument
from .imaging import LUMA, area_resize

FLO_MAGIC = 202021.25
FLO_HEADER = struct.Struct("<fii")


def write_flo(flow: np.ndarray) -> bytes:
    flow = np.asarray(flow)
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise InvalidArgument(f"flow must have shape (H, W, 2), got {flow.shape}")
    h, w = flow.shape[:2]
    payload = np.ascontiguousarray(flow, dtype="<f4").tobytes()
    return FLO_HEADER.pack(FLO_MAGIC, w, h) + payload


def read_flo(data: bytes) -> np.ndarray:
    if len(data) < FLO_HEADER.size:
        raise FlowFormatError("truncated .flo header", len(data))
    magic, w, h = FLO_HEADER.unpack_from(data, 0)
    if magic != FLO_MAGIC:
        raise FlowFormatError(f"bad .flo magic {magic!r}", 0)
    if w < 0 or h < 0:
        raise FlowFormatError(f"negative .flo dimensions {w}x{h}", 4)
    expected = FLO_HEADER.size + w * h * 2 * 4
    if len(data) < expected:
        raise FlowFormatError(f"truncated .flo payload, expected {expected} bytes", len(data))
    if len(data) > expected:
        raise FlowFormatError("trailing bytes after .flo payload", expected)
    flow = np.frombuffer(data, dtype="<f4", count=w * h * 2, offset=FLO_HEADER.size)
    return flow.reshape(h, w, 2).astype(np.float32)


def save_flo(path, flow: np.ndarray) -> None:
    Path(path).write_bytes(write_flo(flow))


def load_flo(path) -> np.ndarray:
    return read_flo(Path(path).read_bytes())


def sample_bilinear(flow: np.ndarray, pos) -> tuple[float, float]:
    """Bilinear ``(u, v)`` at continuous pixel position ``pos = (x, y)``.

    Positions outside the grid are clamped onto it first.
    """
    h, w = flow.shape[:2]
    x = min(max(float(pos[0]), 0.0), w - 1.0)
    y = min(max(float(pos[1]), 0.0), h - 1.0)
    x0, y0 = int(np.floor(x)), int(np.floor(y))
    x1, y1 = min(x0 + 1, w - 1), min(y0 + 1, h - 1)
    fx, fy = x - x0, y - y0
    if fx == 0.0 and fy == 0.0:
        u, v = flow[y0, x0]
        return float(u), float(v)
    top = (1.0 - fx) * flow[y0, x0].astype(np.float64) + fx * flow[y0, x1]
    bottom = (1.0 - fx) * flow[y1, x0].astype(np.float64) + fx * flow[y1, x1]
    u, v = (1.0 - fy) * top + fy * bottom
    return float(u), float(v)


def to_gray(frame: np.ndarray) -> np.ndarray:
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim == 2:
        return frame
    return frame[..., :3] @ LUMA


def _pyramid(img: np.ndarray, levels: int, min_size: int) -> list[np.ndarray]:
    pyr = [img]
    for _ in range(levels - 1):
        prev = pyr[-1]
        if min(prev.shape) // 2 < min_size:
            break
        blurred = ndimage.gaussian_filter(prev, 1.0, mode="nearest")
        pyr.append(blurred[::2, ::2])
    return pyr


def _warp(img: np.ndarray, u: np.ndarray, v: np.ndarray):
    """Sample ``img`` at ``(x + u, y + v)``; also returns the in-frame mask."""
    h, w = img.shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    ys, xs = yy + v, xx + u
    inside = (xs >= 0) & (xs <= w - 1) & (ys >= 0) & (ys <= h - 1)
    return ndimage.map_coordinates(img, [ys, xs], order=1, mode="nearest"), inside


def _resize_flow(u: np.ndarray, shape) -> np.ndarray:
    zoom = (shape[0] / u.shape[0], shape[1] / u.shape[1])
    out = ndimage.zoom(u, zoom, order=1, mode="nearest", grid_mode=True)
    # zoom can be off by one pixel on odd sizes
    out = out[: shape[0], : shape[1]]
    if out.shape != tuple(shape):
        out = np.pad(out, [(0, shape[0] - out.shape[0]), (0, shape[1] - out.shape[1])], mode="edge")
    return out


def estimate_flow_pyramidal(
    a: np.ndarray,
    b: np.ndarray,
    levels: int = 4,
    window: int = 15,
    iterations: int = 3,
    min_eigenvalue: float = 1e-6,
    median_size: int = 5,
) -> np.ndarray:
    """Coarse-to-fine Lucas-Kanade flow from gray frame ``a`` to ``b``.

    Levels stop early once a level would be narrower than two windows.  Each
    level refines the upsampled coarser estimate by ``iterations``
    warped least-squares solves over a ``window`` x ``window`` box.  Pixels
    whose structure tensor has smallest eigenvalue below ``min_eigenvalue``
    (per unit window area) receive no update, so textureless regions stay at
    zero flow.  A ``median_size`` median filter after every solve keeps the
    dense per-pixel warp from drifting apart between neighbours.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim == 3:
        a = to_gray(a)
    if b.ndim == 3:
        b = to_gray(b)
    if a.shape != b.shape:
        raise InvalidArgument(f"frame shapes differ: {a.shape} vs {b.shape}")
    if levels < 1 or window < 1 or iterations < 1:
        raise InvalidArgument("levels, window and iterations must be >= 1")

    pa, pb = _pyramid(a, levels, 2 * window), _pyramid(b, levels, 2 * window)
    u = np.zeros(pa[-1].shape)
    v = np.zeros(pa[-1].shape)
    for lvl in range(len(pa) - 1, -1, -1):
        ia, ib = pa[lvl], pb[lvl]
        if u.shape != ia.shape:
            u = 2.0 * _resize_flow(u, ia.shape)
            v = 2.0 * _resize_flow(v, ia.shape)
        iy, ix = np.gradient(ia)
        sxx = ndimage.uniform_filter(ix * ix, window, mode="nearest")
        syy = ndimage.uniform_filter(iy * iy, window, mode="nearest")
        sxy = ndimage.uniform_filter(ix * iy, window, mode="nearest")
        trace = sxx + syy
        det = sxx * syy - sxy * sxy
        lam_min = 0.5 * (trace - np.sqrt(np.maximum(trace * trace - 4.0 * det, 0.0)))
        ok = lam_min > min_eigenvalue
        safe_det = np.where(ok, det, 1.0)
        for _ in range(iterations):
            warped, inside = _warp(ib, u, v)
            it = np.where(inside, warped - ia, 0.0)
            bx = -ndimage.uniform_filter(ix * it, window, mode="nearest")
            by = -ndimage.uniform_filter(iy * it, window, mode="nearest")
            du = (syy * bx - sxy * by) / safe_det
            dv = (sxx * by - sxy * bx) / safe_det
            u = ndimage.median_filter(u + np.where(ok, du, 0.0), size=median_size, mode="nearest")
            v = ndimage.median_filter(v + np.where(ok, dv, 0.0), size=median_size, mode="nearest")
    return np.stack([u, v], axis=-1).astype(np.float32)


def rescale_flow(flow: np.ndarray, width: int, height: int) -> np.ndarray:
    """Resample a flow field to ``width`` x ``height`` and rescale its vectors."""
    flow = np.asarray(flow, dtype=np.float64)
    h, w = flow.shape[:2]
    if (w, h) == (width, height):
        return flow.astype(np.float32)
    if width <= w and height <= h:
        out = area_resize(flow, width, height)
    else:
        out = np.stack([_resize_flow(flow[..., c], (height, width)) for c in range(2)], axis=-1)
    out[..., 0] *= width / w
    out[..., 1] *= height / h
    return out.astype(np.float32)
