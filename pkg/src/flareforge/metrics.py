"""Image and video scores for flare removal.

All images are float arrays in [0, 1] with a peak value of 1.  Exact matches
report ``math.inf`` for the PSNR family; JSON reports spell it ``"inf"``.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DegenerateInput, InvalidArgument
from .imaging import list_frames, read_png

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
CHARBONNIER_EPS = 1e-3


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidArgument(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def _psnr_from_mse(mse: float) -> float:
    return math.inf if mse == 0.0 else 10.0 * math.log10(1.0 / mse)


def psnr(a, b) -> float:
    a, b = _pair(a, b)
    return _psnr_from_mse(float(np.mean((a - b) ** 2)))


def psnr_masked(a, b, mask) -> float:
    """PSNR over the pixels where ``mask`` is set (all channels of those pixels)."""
    a, b = _pair(a, b)
    mask = np.asarray(mask).astype(bool)
    if mask.shape != a.shape[:2]:
        raise InvalidArgument(f"mask shape {mask.shape} does not match image {a.shape[:2]}")
    if not mask.any():
        raise DegenerateInput("mask selects no pixels")
    diff = (a - b)[mask]
    return _psnr_from_mse(float(np.mean(diff ** 2)))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    w = np.outer(g, g)
    return w / w.sum()


def _filter_valid(img: np.ndarray, win: np.ndarray) -> np.ndarray:
    views = sliding_window_view(img, win.shape)
    return np.einsum("ijkl,kl->ij", views, win)


def _ssim_channel(x: np.ndarray, y: np.ndarray, win: np.ndarray) -> float:
    c1 = (SSIM_K1 * 1.0) ** 2
    c2 = (SSIM_K2 * 1.0) ** 2
    mx, my = _filter_valid(x, win), _filter_valid(y, win)
    sxx = _filter_valid(x * x, win) - mx * mx
    syy = _filter_valid(y * y, win) - my * my
    sxy = _filter_valid(x * y, win) - mx * my
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


def ssim(a, b) -> float:
    """Mean SSIM over valid 11x11 Gaussian windows, averaged over channels."""
    a, b = _pair(a, b)
    if a.ndim == 2:
        a, b = a[..., None], b[..., None]
    if min(a.shape[:2]) < SSIM_WINDOW:
        raise InvalidArgument(f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {a.shape[:2]}")
    win = gaussian_window()
    return float(np.mean([_ssim_channel(a[..., c], b[..., c], win) for c in range(a.shape[2])]))


def _diffs(seq) -> np.ndarray:
    arr = np.asarray([np.asarray(f, dtype=np.float64) for f in seq])
    return arr[1:] - arr[:-1]


def tpsnr(seq_a: Sequence, seq_b: Sequence) -> float:
    """PSNR between the frame-difference sequences (peak 1, pooled MSE)."""
    if len(seq_a) != len(seq_b):
        raise InvalidArgument("sequences differ in length")
    if len(seq_a) < 2:
        raise InvalidArgument("tPSNR needs at least two frames")
    da, db = _pair(_diffs(seq_a), _diffs(seq_b))
    return _psnr_from_mse(float(np.mean((da - db) ** 2)))


def charbonnier(a, b, epsilon: float = CHARBONNIER_EPS, per_tensor: bool = False) -> float:
    """Charbonnier distance.

    The default averages ``sqrt(r**2 + eps**2)`` over elements.  With
    ``per_tensor`` it is ``sqrt(sum(r**2) + eps**2)`` over the whole residual.
    """
    if not epsilon > 0:
        raise InvalidArgument("epsilon must be positive")
    a, b = _pair(a, b)
    r2 = (a - b) ** 2
    if per_tensor:
        return float(math.sqrt(float(r2.sum()) + epsilon * epsilon))
    return float(np.mean(np.sqrt(r2 + epsilon * epsilon)))


@dataclass
class FrameScores:
    psnr: float
    psnr_m: Optional[float]
    ssim: float
    charbonnier: float
    tpsnr: Optional[float] = None


@dataclass
class MetricsReport:
    psnr: float
    psnr_m: Optional[float]
    ssim: float
    tpsnr: Optional[float]
    charbonnier: float
    per_frame: list[FrameScores] = field(default_factory=list)

    def to_dict(self) -> dict:
        return _encode(asdict(self))

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def _encode(obj):
    if isinstance(obj, float) and math.isinf(obj):
        return "inf" if obj > 0 else "-inf"
    if isinstance(obj, dict):
        return {k: _encode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_encode(v) for v in obj]
    return obj


def _mean(values) -> Optional[float]:
    values = [v for v in values if v is not None]
    if not values:
        return None
    if any(math.isinf(v) for v in values):
        finite = [v for v in values if not math.isinf(v)]
        return math.inf if not finite else float(np.mean(finite))
    return float(np.mean(values))


def score_sequence(pred: Sequence, gt: Sequence, masks: Optional[Sequence] = None) -> MetricsReport:
    """Per-frame scores plus sequence aggregates.

    PSNR, PSNR-M, SSIM and Charbonnier are per-frame means; frames with an
    empty mask have no PSNR-M and are left out of its mean.  A frame that
    matches exactly (infinite PSNR) is left out of the mean as long as some
    finite frame exists.  tPSNR pools every difference frame; the per-frame
    value of frame ``t >= 1`` scores the step from ``t - 1``.
    """
    if len(pred) != len(gt) or not pred:
        raise InvalidArgument("prediction and ground truth need the same non-zero frame count")
    if masks is not None and len(masks) != len(pred):
        raise InvalidArgument("one mask per frame is required")
    frames = []
    for t, (p, g) in enumerate(zip(pred, gt)):
        pm = None
        if masks is not None and np.any(masks[t]):
            pm = psnr_masked(p, g, masks[t])
        step = tpsnr([pred[t - 1], p], [gt[t - 1], g]) if t > 0 else None
        frames.append(FrameScores(psnr=psnr(p, g), psnr_m=pm, ssim=ssim(p, g),
                                  charbonnier=charbonnier(p, g), tpsnr=step))
    return MetricsReport(
        psnr=_mean(f.psnr for f in frames),
        psnr_m=_mean(f.psnr_m for f in frames),
        ssim=float(np.mean([f.ssim for f in frames])),
        tpsnr=tpsnr(pred, gt) if len(pred) >= 2 else None,
        charbonnier=float(np.mean([f.charbonnier for f in frames])),
        per_frame=frames,
    )


_INDEX = re.compile(r"(\d+)(?=\.png$)")


def _index_of(path: Path) -> int:
    m = _INDEX.search(path.name)
    if not m:
        raise InvalidArgument(f"cannot find a frame index in {path.name}")
    return int(m.group(1))


def score_directories(pred_dir, gt_dir, mask_dir=None) -> MetricsReport:
    """Score PNG frames matched by the trailing number in their file names."""
    pred = {_index_of(p): p for p in list_frames(pred_dir)}
    gt = {_index_of(p): p for p in list_frames(gt_dir)}
    if not pred or set(pred) != set(gt):
        raise InvalidArgument("prediction and ground-truth directories hold different frame indices")
    order = sorted(pred)
    masks = None
    if mask_dir is not None:
        found = {_index_of(p): p for p in list_frames(mask_dir)}
        missing = set(order) - set(found)
        if missing:
            raise InvalidArgument(f"missing masks for frames {sorted(missing)}")
        masks = [read_png(found[i]) > 0.5 for i in order]
    return score_sequence([read_png(pred[i]) for i in order], [read_png(gt[i]) for i in order], masks)
