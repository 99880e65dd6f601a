"""Command-line entry point: ``flareforge {generate,replay,score,preview,ghosts}``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import SequenceConfig
from .errors import FlareForgeError

SEED_ENV = "FLAREFORGE_SEED"


def _config(path, seed=None) -> SequenceConfig:
    config = SequenceConfig.load(path) if path else SequenceConfig()
    env = os.environ.get(SEED_ENV)
    if env is not None:
        seed = int(env)
    if seed is not None:
        config.seed = seed
        config.validate()
    return config


def cmd_generate(args) -> int:
    from .pipeline import generate_dataset

    config = _config(args.config, args.seed)
    dataset = generate_dataset(args.input_dir, args.output_dir, config, flow_dir=args.flow_dir,
                               sequences=args.sequences, split_ratio=args.split_ratio, jobs=args.jobs)
    flagged = sum(s["clamp_flag"] for s in dataset["sequences"])
    print(f"wrote {len(dataset['train'])} train / {len(dataset['test'])} test sequences "
          f"to {args.output_dir} ({flagged} flagged for border clamping)")
    return 0


def cmd_replay(args) -> int:
    from .pipeline import replay_dataset

    dataset = replay_dataset(args.dataset, args.output_dir, jobs=args.jobs)
    print(f"replayed {len(dataset['sequences'])} sequences into {args.output_dir}")
    return 0


def cmd_score(args) -> int:
    from .metrics import score_directories

    report = score_directories(args.pred_dir, args.gt_dir, args.mask_dir)
    text = report.to_json()
    if args.report:
        Path(args.report).write_text(text + "\n")
    print(text)
    return 0


def cmd_preview(args) -> int:
    from .pipeline import preview_frame

    plan = preview_frame(_config(args.config, args.seed), args.frame, args.out)
    print(f"source at ({plan.positions[0][0]:.1f}, {plan.positions[0][1]:.1f}), "
          f"{len(plan.ghosts)} ghosts, wrote {args.out}")
    return 0


def cmd_ghosts(args) -> int:
    from .optics import all_ghosts, default_prescription, focal_scale_for_fov, load_prescription

    lens = load_prescription(args.lens) if args.lens else default_prescription()
    fscale = focal_scale_for_fov(lens, args.width, args.fov)
    ghosts = all_ghosts(lens, args.theta, fscale)
    if args.sort == "brightness":
        ghosts.sort(key=lambda g: -g.brightness)
    print(f"# {lens.name}: {len(ghosts)} ghosts at theta={args.theta} rad, {fscale:.4f} px/mm")
    print(f"{'i':>3} {'j':>3} {'rho':>12} {'radius_px':>12} {'R':>11} {'G':>11} {'B':>11} clipped")
    for g in ghosts[: args.limit] if args.limit else ghosts:
        r, gr, b = g.intensity_rgb
        print(f"{g.pair[0] + 1:>3} {g.pair[1] + 1:>3} {g.rho:>12.6f} {g.radius_px:>12.3f} "
              f"{r:>11.4e} {gr:>11.4e} {b:>11.4e} {'yes' if g.clipped else 'no'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flareforge", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="render a paired flare dataset")
    g.add_argument("--input-dir", required=True, help="directory of clean frame sequences")
    g.add_argument("--flow-dir", help="per-sequence flow_%%05d.flo files (estimated when absent)")
    g.add_argument("--output-dir", required=True)
    g.add_argument("--config", help="YAML config file")
    g.add_argument("--seed", type=int, help=f"overrides the config seed; ${SEED_ENV} overrides this")
    g.add_argument("--sequences", type=int, help="use only the first N sequences")
    g.add_argument("--split-ratio", type=float, default=0.8)
    g.add_argument("--jobs", type=int, default=1)
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("replay", help="re-render a dataset from its manifests")
    r.add_argument("--dataset", required=True, help="directory holding dataset.json")
    r.add_argument("--output-dir", required=True)
    r.add_argument("--jobs", type=int, default=1)
    r.set_defaults(func=cmd_replay)

    s = sub.add_parser("score", help="score restored frames against ground truth")
    s.add_argument("--pred-dir", required=True)
    s.add_argument("--gt-dir", required=True)
    s.add_argument("--mask-dir")
    s.add_argument("--report", help="write the JSON report here")
    s.set_defaults(func=cmd_score)

    p = sub.add_parser("preview", help="composite one frame for inspection")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--frame", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_preview)

    t = sub.add_parser("ghosts", help="print the ghost table of a lens")
    t.add_argument("--lens", help="prescription file (default: bundled representative zoom)")
    t.add_argument("--theta", type=float, default=0.0, help="field angle in radians")
    t.add_argument("--width", type=int, default=320, help="frame width in px")
    t.add_argument("--fov", type=float, default=30.0, help="horizontal field of view in degrees")
    t.add_argument("--sort", choices=("pair", "brightness"), default="pair")
    t.add_argument("--limit", type=int, default=0)
    t.set_defaults(func=cmd_ghosts)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FlareForgeError as exc:
        print(f"flareforge: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
