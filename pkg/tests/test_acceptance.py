"""One test per acceptance criterion, each printing a PASS/FAIL line at its stated tolerance."""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from flareforge.cli import main
from flareforge.compositor import composite
from flareforge.config import SequenceConfig
from flareforge.metrics import charbonnier, psnr, psnr_masked, ssim, tpsnr
from flareforge.optics import (
    RayState,
    compose,
    default_prescription,
    enumerate_ghosts,
    focal_scale_for_fov,
    ghost_geometry,
    reflection_matrix,
    refraction_matrix,
    trace_ray,
    translation_matrix,
)
from flareforge.pipeline import generate_dataset, replay_dataset, split_dataset
from flareforge.scatter import ApertureSpec, Occluder, aperture_mask, diffraction_psf, principal_axis_angle
from flareforge.trajectory import SourcePosition, build_trajectory, collinearity_residual
from oracles import angle_diff, naive_charbonnier, naive_psnr, naive_ssim, naive_tpsnr, second_moment_axis
from synth import write_sequences
from test_ghosts import lens_with
from test_pipeline import tree_bytes


def test_criterion_01_ghost_count_law(criterion):
    start = time.perf_counter()
    counts = {k: len(enumerate_ghosts(lens_with(k))) for k in (4, 10, 29)}
    elapsed = time.perf_counter() - start
    expected = {4: 6, 10: 45, 29: 406}
    ok = counts == expected and all(n == k * (k - 1) // 2 for k, n in counts.items())
    # 2n^2 - n for k = 2n interfaces
    ok = ok and all(counts[2 * n] == 2 * n * n - n for n in (2, 5))
    ok = criterion(1, "ghost-count law k(k-1)/2", ok and elapsed < 1.0, f"{counts}, {elapsed:.3f} s")
    assert ok


def _random_element(rng):
    kind = rng.integers(3)
    radius = None if rng.random() < 0.1 else float(rng.choice([-1, 1]) * rng.uniform(5, 500))
    if kind == 0:
        return translation_matrix(float(rng.uniform(0, 100)))
    if kind == 1:
        return refraction_matrix(float(rng.uniform(1, 2)), float(rng.uniform(1, 2)), radius)
    return reflection_matrix(radius)


def test_criterion_02_matrix_optics_oracle(criterion):
    rng = np.random.default_rng(2)
    start = time.perf_counter()
    worst_trace = 0.0
    for _ in range(1000):
        a, b = _random_element(rng), _random_element(rng)
        x = RayState(float(rng.uniform(-50, 50)), float(rng.uniform(-0.3, 0.3)))
        left = trace_ray(compose([a, b]), x)
        right = trace_ray(a, trace_ray(b, x))
        worst_trace = max(worst_trace, abs(left.r - right.r), abs(left.theta - right.theta))
    worst_det = 0.0
    for _ in range(1000):
        d, n1, n2 = rng.uniform(0, 100), rng.uniform(1, 2), rng.uniform(1, 2)
        r = float(rng.choice([-1, 1]) * rng.uniform(5, 500))
        worst_det = max(worst_det,
                        abs(translation_matrix(d).det - 1.0),
                        abs(refraction_matrix(n1, n2, r).det - n1 / n2),
                        abs(reflection_matrix(r).det - 1.0))
    elapsed = time.perf_counter() - start
    ok = worst_trace <= 1e-10 and worst_det <= 1e-12 and elapsed < 5.0
    ok = criterion(2, "compose/trace oracle and determinants", ok,
                   f"trace err {worst_trace:.1e}, det err {worst_det:.1e}, {elapsed:.2f} s")
    assert ok


def test_criterion_03_collinearity_in_generated_sequence(criterion, tmp_path):
    src = write_sequences(tmp_path / "in", 1, 30, size=(320, 240), seed=31)
    config = SequenceConfig(seed=3, frame_stride=1, max_frames=30)
    start = time.perf_counter()
    generate_dataset(src, tmp_path / "out", config)
    elapsed = time.perf_counter() - start
    manifest = json.loads((tmp_path / "out" / "train" / "scene_000" / "manifest.json").read_text())
    seq = manifest["sequence"]
    w, h = config.target_size
    center = (w / 2, h / 2)
    residuals = [collinearity_residual(center, pos, g["center"])
                 for pos, frame in zip(seq["positions"], seq["frames"]) for g in frame["ghosts"]]
    n_ghosts = len(seq["ghosts"])
    worst = max(residuals) if residuals else math.inf
    ok = len(seq["frames"]) == 30 and n_ghosts >= 5 and worst < 1e-9 and elapsed < 30.0
    ok = criterion(3, "ghost/source/center collinearity", ok,
                   f"{n_ghosts} ghosts, {len(residuals)} triples, max residual {worst:.1e}, {elapsed:.1f} s")
    assert ok


def test_criterion_04_paraxial_linearity(criterion):
    lens = default_prescription()
    fs = focal_scale_for_fov(lens, 320, 30.0)
    pairs = enumerate_ghosts(lens)
    worst = max(abs(ghost_geometry(lens, p, 0.01, fs).rho - ghost_geometry(lens, p, 0.1, fs).rho) for p in pairs)
    ok = criterion(4, "rho field-independent", worst <= 1e-9, f"{len(pairs)} pairs, max diff {worst:.1e}")
    assert ok


def test_criterion_05_trajectory_exactness(criterion):
    flow = np.zeros((240, 320, 2), np.float32)
    flow[..., 0], flow[..., 1] = 2.0, -1.0
    init = SourcePosition(100.0, 150.0)
    traj = build_trajectory([flow] * 10, init, (0.0, 0.0), 11)
    final = traj.positions[-1]
    ok = final == (init.x + 20.0, init.y - 10.0) and not any(traj.clamped)
    ok = criterion(5, "constant-flow trajectory exact", ok, f"final {tuple(final)}")
    assert ok


def test_criterion_06_scatter_physics(criterion):
    scratch = Occluder("line", (0.5, 0.5), angle=math.pi / 2, width=0.02, length=1.2, opacity=1.0)
    second = Occluder("line", (0.35, 0.4), angle=math.pi / 2 + 0.02, width=0.01, length=0.8, opacity=0.6)

    def psf(shape, occluders):
        return diffraction_psf(aperture_mask(ApertureSpec(shape, 256, tuple(occluders))))

    axis_err = []
    sums = []
    for shape in ("circle", "hexagon"):
        p = psf(shape, [scratch])
        sums.append(abs(p.kernel.sum() - 1.0))
        axis_err.append(abs(math.degrees(principal_axis_angle(p.kernel))))
        axis_err.append(abs(math.degrees(angle_diff(second_moment_axis(p.kernel), 0.0))))
    base = psf("circle", [scratch, second])
    turned = psf("circle", [o.rotated(math.radians(30)) for o in (scratch, second)])
    sums += [abs(base.kernel.sum() - 1.0), abs(turned.kernel.sum() - 1.0)]
    rot = [math.degrees(angle_diff(principal_axis_angle(turned.kernel), principal_axis_angle(base.kernel))),
           math.degrees(angle_diff(second_moment_axis(turned.kernel), second_moment_axis(base.kernel)))]
    ok = max(axis_err) < 2.0 and all(abs(r - 30.0) < 2.0 for r in rot) and max(sums) < 1e-6
    ok = criterion(6, "scatter streak axis, rotation and normalization", ok,
                   f"axis err {max(axis_err):.2f} deg, rotation {rot[0]:.2f}/{rot[1]:.2f} deg, "
                   f"sum err {max(sums):.1e}")
    assert ok


def test_criterion_07_compositor_identity(criterion):
    scene = np.random.default_rng(7).random((240, 320, 3))
    identity_err = float(np.abs(composite(scene, [], 2.2).degraded - scene).max())
    got = composite(np.full((2, 2, 3), 0.25), [np.full((2, 2, 3), 0.1)], 2.2).degraded
    expected = (0.25 ** 2.2 + 0.1) ** (1 / 2.2)
    formula_err = float(np.abs(got - expected).max())
    ok = identity_err <= 1e-6 and formula_err <= 1e-9
    ok = criterion(7, "zero-flare identity and scalar composite", ok,
                   f"identity err {identity_err:.1e}, formula err {formula_err:.1e}")
    assert ok


def test_criterion_08_metrics_oracle(criterion):
    rng = np.random.default_rng(8)
    worst = 0.0
    frames_a, frames_b = [], []
    for _ in range(50):
        a = rng.random((16, 16, 3))
        b = np.clip(a + rng.normal(0, rng.uniform(0.01, 0.3), a.shape), 0, 1)
        mask = rng.random((16, 16)) > 0.5
        worst = max(worst,
                    abs(psnr(a, b) - naive_psnr(a, b)),
                    abs(psnr_masked(a, b, mask) - naive_psnr(a, b, mask)),
                    abs(ssim(a, b) - naive_ssim(a, b)),
                    abs(charbonnier(a, b) - naive_charbonnier(a, b)))
        frames_a.append(a)
        frames_b.append(b)
    worst = max(worst, abs(tpsnr(frames_a, frames_b) - naive_tpsnr(frames_a, frames_b)))
    zero = np.zeros((4, 4, 3))
    fixed_psnr = round(psnr(zero, zero + 0.5), 4)
    fixed_charb = charbonnier(zero, zero)
    ok = worst <= 1e-9 and fixed_psnr == 6.0206 and round(fixed_charb, 15) == 1e-3
    ok = criterion(8, "metrics match naive references", ok,
                   f"max diff {worst:.1e}, psnr(0, 0.5) {fixed_psnr}, charbonnier(0) {fixed_charb}")
    assert ok


@pytest.mark.slow
def test_criterion_09_manifest_replay_determinism(criterion, tmp_path):
    src = write_sequences(tmp_path / "in", 3, 8, size=(320, 240), seed=91)
    config = SequenceConfig(seed=9, frame_stride=1, max_frames=8)
    generate_dataset(src, tmp_path / "jobs1", config, jobs=1)
    generate_dataset(src, tmp_path / "jobs2", config, jobs=2)
    replay_dataset(tmp_path / "jobs1", tmp_path / "replay1", jobs=1)
    replay_dataset(tmp_path / "jobs1", tmp_path / "replay2", jobs=2)
    ref = tree_bytes(tmp_path / "jobs1")
    payload = [k for k in ref if k.endswith((".png", ".flo"))]
    same = [tree_bytes(tmp_path / d) == ref for d in ("jobs2", "replay1", "replay2")]
    ok = all(same) and len(payload) == 3 * (8 * 3 + 7)
    ok = criterion(9, "bit-identical regeneration and replay across --jobs", ok,
                   f"{len(payload)} PNG/.flo files, jobs2/replay1/replay2 identical: {same}")
    assert ok


@pytest.mark.slow
def test_criterion_10_desk_scale_generate(criterion, tmp_path):
    src = write_sequences(tmp_path / "in", 10, 30, size=(320, 240), seed=101)
    cfg = tmp_path / "desk.yaml"
    cfg.write_text("frame_stride: 1\nmax_frames: 30\ntarget_size: [320, 240]\n")
    out = tmp_path / "out"
    start = time.perf_counter()
    code = main(["generate", "--input-dir", str(src), "--output-dir", str(out), "--config", str(cfg),
                 "--seed", "10"])
    elapsed = time.perf_counter() - start
    dataset = json.loads((out / "dataset.json").read_text())
    complete = len(dataset["sequences"]) == 10
    for s in dataset["sequences"]:
        seq = out / s["split"] / s["name"]
        complete &= (seq / "manifest.json").is_file()
        for sub, pattern in (("degraded", "frame_*.png"), ("clean", "frame_*.png"), ("mask", "mask_*.png")):
            complete &= len(list((seq / sub).glob(pattern))) == 30
    ok = code == 0 and complete and elapsed < 300.0
    ok = criterion(10, "10 x 30 frame 320x240 dataset under 5 min", ok, f"{elapsed:.1f} s")
    assert ok


def test_criterion_11_dataset_split(criterion):
    train, test = split_dataset([f"stub_{n}" for n in range(1500)], 0.8, seed=0)
    ok = criterion(11, "1500 stubs split 1200/300", (len(train), len(test)) == (1200, 300),
                   f"{len(train)}/{len(test)}")
    assert ok
