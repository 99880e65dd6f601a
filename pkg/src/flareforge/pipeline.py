"""Dataset generation: clean sequences in, flare-degraded pairs and manifests out.

Generation runs in two phases per sequence.  Planning draws every random
choice and traces the source; rendering is a pure function of the plan and
the input frames.  The plan is what ``manifest.json`` stores, so replaying a
manifest goes straight to the rendering phase.
"""

from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .compositor import apply_gamma, composite, inverse_gamma, source_blob
from .config import SequenceConfig
from .errors import FlareForgeError, InvalidArgument
from .flowio import estimate_flow_pyramidal, load_flo, rescale_flow, save_flo, to_gray
from .imaging import area_resize, list_frames, read_png, to_uint8, write_png
from .optics import (
    GhostDescriptor,
    LensPrescription,
    all_ghosts,
    default_prescription,
    focal_scale_for_fov,
    ghost_geometry,
    load_prescription,
)
from .optics.ghosts import DEFAULT_PARAXIAL_CAP
from .reflective import render_ghost_layer
from .scatter import ApertureSpec, diffraction_psf, aperture_mask, random_aperture, render_scatter_layer
from .trajectory import ImageCenter, build_trajectory, init_source, reflective_position, sample_scatter_offset

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
DATASET_NAME = "dataset.json"
PAIR_SCATTER = "scatter"
PAIR_BOTH = "scatter+reflective"
SPLIT_KEY = 1
SEQUENCE_KEY = 0


class SequenceError(FlareForgeError):
    """A sequence failed; the message names the sequence and frame."""


# --- frame preparation -------------------------------------------------------


def subsample_frames(frames: Sequence, stride: int) -> list:
    if stride < 1:
        raise InvalidArgument(f"stride must be >= 1, got {stride}")
    if len(frames) == 0:
        raise InvalidArgument("no frames to subsample")
    return list(frames[::stride])


def downsample(frame: np.ndarray, target: tuple[int, int], gamma: float = 2.2) -> np.ndarray:
    """Area-average ``frame`` to ``target = (W, H)`` in linear light."""
    h, w = frame.shape[:2]
    tw, th = target
    if tw > w or th > h:
        raise InvalidArgument(f"cannot upscale {w}x{h} to {tw}x{th}")
    if (tw, th) == (w, h):
        return frame.copy()
    return apply_gamma(area_resize(inverse_gamma(frame, gamma), tw, th), gamma)


def _rgb(img: np.ndarray) -> np.ndarray:
    if img.ndim == 2:
        return np.repeat(img[..., None], 3, axis=2)
    return img[..., :3]


def load_frames(paths: Sequence[Path], config: SequenceConfig) -> list[np.ndarray]:
    """Read, downsample and 8-bit quantize frames, so the clean PNG equals the scene."""
    out = []
    for p in paths:
        frame = downsample(_rgb(read_png(p)), tuple(config.target_size), config.gamma)
        out.append(to_uint8(frame).astype(np.float64) / 255.0)
    return out


def load_flows(frames: list[np.ndarray], config: SequenceConfig, flow_dir: Optional[Path]) -> list[np.ndarray]:
    """Flow from output frame ``t`` to ``t + 1``, from files when available."""
    w, h = config.target_size
    flows = []
    for t in range(len(frames) - 1):
        path = flow_dir / f"flow_{t:05d}.flo" if flow_dir is not None else None
        if path is not None and path.exists():
            flows.append(rescale_flow(load_flo(path), w, h))
        else:
            if path is not None:
                log.warning("missing %s, estimating flow instead", path)
            flows.append(estimate_flow_pyramidal(
                to_gray(frames[t]), to_gray(frames[t + 1]),
                levels=config.flow.levels, window=config.flow.window, iterations=config.flow.iterations,
            ))
    return flows


# --- random choices ----------------------------------------------------------


def split_dataset(sequences: Sequence, ratio: float = 0.8, seed: int = 0) -> tuple[list, list]:
    """Seeded shuffle, then the first ``round(ratio * N)`` items train."""
    if not 0 < ratio < 1:
        raise InvalidArgument(f"split ratio must be in (0, 1), got {ratio}")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(SPLIT_KEY,)))
    order = rng.permutation(len(sequences))
    n_train = int(math.floor(ratio * len(sequences) + 0.5))
    shuffled = [sequences[i] for i in order]
    return shuffled[:n_train], shuffled[n_train:]


def ghost_candidates(descriptors: Sequence[GhostDescriptor], rho_max: float,
                     radius_range: tuple[float, float]) -> list[GhostDescriptor]:
    """Ghosts that land near the frame at a renderable size."""
    lo, hi = radius_range
    return [d for d in descriptors if abs(d.rho) <= rho_max and lo <= d.radius_px <= hi]


def select_ghosts(descriptors: Sequence[GhostDescriptor], count_range: tuple[int, int],
                  rng: np.random.Generator) -> list[tuple[GhostDescriptor, float]]:
    """Draw ``k`` uniformly in the range, then keep the ``k`` brightest after jitter.

    Each descriptor's brightness is scaled by a log-uniform factor in
    [0.5, 2].  Returns ``(descriptor, jitter)`` pairs, brightest first.
    """
    lo, hi = count_range
    if lo < 0 or lo > hi:
        raise InvalidArgument(f"invalid ghost count range {count_range}")
    k = int(rng.integers(lo, hi + 1))
    jitter = np.exp(rng.uniform(math.log(0.5), math.log(2.0), size=len(descriptors)))
    order = sorted(range(len(descriptors)),
                   key=lambda n: (-descriptors[n].brightness * jitter[n], descriptors[n].pair))
    return [(descriptors[n], float(jitter[n])) for n in order[:k]]


def _loguniform(rng, lo: float, hi: float) -> float:
    if lo <= 0:
        return float(rng.uniform(lo, hi))
    return float(math.exp(rng.uniform(math.log(lo), math.log(hi))))


# --- plan ---------------------------------------------------------------------


@dataclass
class SequencePlan:
    name: str
    index: int
    split: str
    pair_type: str
    source_dir: str
    frame_files: list[str]
    flow_dir: Optional[str]
    init: tuple[float, float]
    offset: tuple[float, float]
    positions: list[tuple[float, float]]
    anchors: list[tuple[float, float]]
    clamped: list[bool]
    clamp_flag: bool
    aperture: dict
    scatter_intensity: float
    scatter_tint: tuple[float, float, float]
    ghost_power: float
    ghost_shape: str
    ghosts: list[dict] = field(default_factory=list)
    frames: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {k: _jsonable(v) for k, v in self.__dict__.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "SequencePlan":
        d = dict(d)
        for key in ("init", "offset", "scatter_tint"):
            d[key] = tuple(d[key])
        d["positions"] = [tuple(p) for p in d["positions"]]
        d["anchors"] = [tuple(p) for p in d["anchors"]]
        return cls(**d)


def _jsonable(v):
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, np.generic):
        return v.item()
    return v


def _lens(config: SequenceConfig) -> LensPrescription:
    return load_prescription(config.lens_file) if config.lens_file else default_prescription()


def field_angle(source, center, focal_px: float) -> float:
    """Paraxial field angle of a source at pixel distance r from the center."""
    r = math.hypot(source[0] - center[0], source[1] - center[1])
    return min(math.atan(r / focal_px), DEFAULT_PARAXIAL_CAP)


def plan_sequence(
    config: SequenceConfig,
    name: str,
    index: int,
    split: str,
    source_dir: Path,
    frame_files: Sequence[str],
    flows: Sequence[np.ndarray],
    flow_dir: Optional[Path] = None,
) -> SequencePlan:
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(SEQUENCE_KEY, index)))
    w, h = config.target_size
    n_frames = len(frame_files)

    if split == "test":
        reflective = config.include_reflective and bool(rng.random() < config.reflective_fraction)
    else:
        reflective = config.include_reflective
    init = init_source(w, h, rng)
    offset = sample_scatter_offset(rng)
    traj = build_trajectory(list(flows), init, offset, n_frames, bounds=(w, h))

    sc = config.scatter
    aperture = random_aperture(rng, shape=sc.shape, resolution=sc.resolution,
                               n_lines=sc.lines, n_specks=sc.specks, max_opacity=sc.max_opacity)
    intensity = _loguniform(rng, *sc.intensity_range)
    tint = tuple(float(t * (1.0 + rng.uniform(-sc.tint_jitter, sc.tint_jitter))) for t in sc.tint)
    tint = tuple(max(t, 0.0) for t in tint)

    lens = _lens(config)
    fscale = focal_scale_for_fov(lens, w, config.fov_deg)
    focal_px = (w / 2.0) / math.tan(math.radians(config.fov_deg) / 2.0)
    center = ImageCenter.of(w, h)
    power = _loguniform(rng, *config.ghost_power_range)
    chosen = []
    if reflective:
        cands = ghost_candidates(all_ghosts(lens, 0.0, fscale), config.ghost_rho_max, config.ghost_radius_range)
        chosen = select_ghosts(cands, tuple(config.ghost_count_range), rng)
    ghosts = [{"pair": list(d.pair), "jitter": j, "rho": d.rho, "radius_px": d.radius_px,
               "intensity_rgb": list(d.intensity_rgb)} for d, j in chosen]

    frames = []
    for t, pos in enumerate(traj.positions):
        theta = field_angle(pos, center, focal_px)
        entries = []
        for d, _ in chosen:
            g = ghost_geometry(lens, d.pair, theta, fscale)
            gc = reflective_position(center, pos, g.rho)
            entries.append({"pair": list(g.pair), "center": [gc.x, gc.y], "rho": g.rho,
                            "radius_px": g.radius_px,
                            "rgb": [power * c for c in g.intensity_rgb], "clipped": g.clipped})
        frames.append({"theta": theta, "ghosts": entries})

    return SequencePlan(
        name=name, index=index, split=split, pair_type=PAIR_BOTH if reflective else PAIR_SCATTER,
        source_dir=str(source_dir), frame_files=list(frame_files),
        flow_dir=str(flow_dir) if flow_dir is not None else None,
        init=(init.x, init.y), offset=offset,
        positions=[(p.x, p.y) for p in traj.positions],
        anchors=[(p.x, p.y) for p in traj.scatter_anchor],
        clamped=list(traj.clamped), clamp_flag=traj.flagged,
        aperture=aperture.to_dict(), scatter_intensity=intensity, scatter_tint=tint,
        ghost_power=power, ghost_shape=lens.aperture_shape, ghosts=ghosts, frames=frames,
    )


# --- render -------------------------------------------------------------------


def frame_layers(plan: SequencePlan, t: int, config: SequenceConfig, psf) -> list[np.ndarray]:
    w, h = config.target_size
    layers = []
    if plan.scatter_intensity > 0:
        layers.append(render_scatter_layer(psf, plan.anchors[t], plan.scatter_intensity, plan.scatter_tint,
                                           (w, h), size=config.scatter.splat_size))
    if plan.frames[t]["ghosts"]:
        ghost = np.zeros((h, w, 3))
        for g in plan.frames[t]["ghosts"]:
            render_ghost_layer(g["center"], g["radius_px"], g["rgb"], (w, h), plan.ghost_shape, out=ghost)
        layers.append(ghost)
    blob = config.source_blob
    if blob.enabled and blob.peak > 0:
        layers.append(source_blob(plan.positions[t], blob.sigma, blob.peak, (w, h)))
    return layers


def render_sequence(plan: SequencePlan, config: SequenceConfig, frames: Sequence[np.ndarray],
                    flows: Sequence[np.ndarray], out_dir: Path) -> None:
    out_dir = Path(out_dir)
    for sub in ("degraded", "clean", "mask", "flow"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)
    psf = diffraction_psf(aperture_mask(ApertureSpec.from_dict(plan.aperture)))
    for t, scene in enumerate(frames):
        try:
            pair = composite(scene, frame_layers(plan, t, config, psf), config.gamma,
                             config.mask_threshold, frame_index=t)
        except FlareForgeError as exc:
            raise SequenceError(f"sequence {plan.name!r}, frame {t}: {exc}") from exc
        write_png(out_dir / "degraded" / f"frame_{t:05d}.png", pair.degraded)
        write_png(out_dir / "clean" / f"frame_{t:05d}.png", pair.clean)
        write_png(out_dir / "mask" / f"mask_{t:05d}.png", (pair.mask * 255).astype(np.uint8))
    for t, flow in enumerate(flows):
        save_flo(out_dir / "flow" / f"flow_{t:05d}.flo", flow)
    manifest = {"version": __version__, "config": config.to_dict(), "sequence": plan.to_dict()}
    (out_dir / MANIFEST_NAME).write_text(json.dumps(manifest, indent=1, sort_keys=True))


# --- dataset ------------------------------------------------------------------


def discover_sequences(input_dir) -> list[tuple[str, Path]]:
    """Subdirectories holding PNG frames, or the directory itself if it holds frames."""
    root = Path(input_dir)
    if not root.is_dir():
        raise InvalidArgument(f"input directory {root} does not exist")
    seqs = [(p.name, p) for p in sorted(root.iterdir()) if p.is_dir() and list_frames(p)]
    if not seqs and list_frames(root):
        seqs = [(root.name, root)]
    if not seqs:
        raise InvalidArgument(f"no PNG frame sequences under {root}")
    return seqs


def _seq_flow_dir(flow_dir, name: str) -> Optional[Path]:
    if flow_dir is None:
        return None
    p = Path(flow_dir) / name
    return p if p.is_dir() else None


def _select_files(config: SequenceConfig, seq_dir: Path) -> list[str]:
    names = [p.name for p in list_frames(seq_dir)]
    names = subsample_frames(names, config.frame_stride)
    if config.max_frames is not None:
        names = names[: config.max_frames]
    return names


def _generate_one(task: dict) -> dict:
    config = SequenceConfig.from_dict(task["config"])
    seq_dir = Path(task["source_dir"])
    flow_dir = Path(task["flow_dir"]) if task["flow_dir"] else None
    files = _select_files(config, seq_dir)
    frames = load_frames([seq_dir / f for f in files], config)
    flows = load_flows(frames, config, flow_dir)
    plan = plan_sequence(config, task["name"], task["index"], task["split"], seq_dir, files, flows, flow_dir)
    render_sequence(plan, config, frames, flows, Path(task["out_dir"]))
    return {"name": plan.name, "split": plan.split, "pair_type": plan.pair_type,
            "frames": len(files), "clamp_flag": plan.clamp_flag}


def _replay_one(task: dict) -> dict:
    manifest = json.loads(Path(task["manifest"]).read_text())
    config = SequenceConfig.from_dict(manifest["config"])
    plan = SequencePlan.from_dict(manifest["sequence"])
    seq_dir = Path(plan.source_dir)
    frames = load_frames([seq_dir / f for f in plan.frame_files], config)
    flows = load_flows(frames, config, Path(plan.flow_dir) if plan.flow_dir else None)
    render_sequence(plan, config, frames, flows, Path(task["out_dir"]))
    return {"name": plan.name, "split": plan.split, "pair_type": plan.pair_type,
            "frames": len(plan.frame_files), "clamp_flag": plan.clamp_flag}


def _run(fn, tasks: list[dict], jobs: int) -> list[dict]:
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return list(pool.map(fn, tasks))


def generate_dataset(
    input_dir,
    output_dir,
    config: SequenceConfig,
    flow_dir=None,
    sequences: Optional[int] = None,
    split_ratio: float = 0.8,
    jobs: int = 1,
) -> dict:
    """Generate every sequence and write ``dataset.json``; returns its content.

    Sequence seeds derive from the config seed and the sequence's position in
    the sorted input listing, so neither ``jobs`` nor ``sequences`` changes
    what any one sequence looks like.
    """
    found = discover_sequences(input_dir)
    indexed = list(enumerate(found))
    if sequences is not None:
        if sequences < 1:
            raise InvalidArgument("sequences must be >= 1")
        indexed = indexed[:sequences]
    names = [name for _, (name, _) in indexed]
    if len(names) == 1:
        train, test = list(names), []
    else:
        train, test = split_dataset(names, split_ratio, config.seed)
    split_of = {n: "train" for n in train} | {n: "test" for n in test}
    out = Path(output_dir)
    tasks = [{
        "config": config.to_dict(), "name": name, "index": idx, "split": split_of[name],
        "source_dir": str(path.resolve()),
        "flow_dir": str(_seq_flow_dir(flow_dir, name).resolve()) if _seq_flow_dir(flow_dir, name) else None,
        "out_dir": str(out / split_of[name] / name),
    } for idx, (name, path) in indexed]
    results = _run(_generate_one, tasks, jobs)
    dataset = _dataset_record(config, split_ratio, train, test, results)
    out.mkdir(parents=True, exist_ok=True)
    (out / DATASET_NAME).write_text(json.dumps(dataset, indent=1, sort_keys=True))
    return dataset


def _dataset_record(config, split_ratio, train, test, results) -> dict:
    return {
        "version": __version__,
        "seed": config.seed,
        "split_ratio": split_ratio,
        "train": list(train),
        "test": list(test),
        "sequences": [dict(r, manifest=f"{r['split']}/{r['name']}/{MANIFEST_NAME}") for r in results],
    }


def replay_dataset(dataset_dir, output_dir, jobs: int = 1) -> dict:
    """Re-render a dataset from its manifests alone."""
    src = Path(dataset_dir)
    dataset = json.loads((src / DATASET_NAME).read_text())
    out = Path(output_dir)
    tasks = [{"manifest": str(src / s["manifest"]), "out_dir": str(out / s["split"] / s["name"])}
             for s in dataset["sequences"]]
    _run(_replay_one, tasks, jobs)
    out.mkdir(parents=True, exist_ok=True)
    (out / DATASET_NAME).write_text(json.dumps(dataset, indent=1, sort_keys=True))
    return dataset


def preview_frame(config: SequenceConfig, frame_path, out_path) -> SequencePlan:
    """Composite a single frame with scatter and (if enabled) ghosts."""
    frame_path = Path(frame_path)
    frames = load_frames([frame_path], config)
    plan = plan_sequence(config, frame_path.stem, 0, "train", frame_path.parent, [frame_path.name], [])
    psf = diffraction_psf(aperture_mask(ApertureSpec.from_dict(plan.aperture)))
    pair = composite(frames[0], frame_layers(plan, 0, config, psf), config.gamma, config.mask_threshold)
    write_png(out_path, pair.degraded)
    return plan


def default_jobs() -> int:
    return max(1, (os.cpu_count() or 1))
