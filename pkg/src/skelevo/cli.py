"""Command-line interface.

Subcommands: ``analyze`` (full pipeline over a frame sequence), ``compare``
(DTW between two finished runs), ``synth`` (generate a synthetic sequence),
``render`` (overlay image for one step of a finished run).

Exit codes: 0 success, 1 input error, 2 internal stage failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import pipeline, render as render_mod, synth
from .creation import SMOOTH_AT_EXPORT, SMOOTH_CHAINED, SMOOTH_OFF, read_creation_csv
from .errors import InputError, SkelevoError
from .graph import build_graph
from .indicators import VIVACITY_PIXEL, VIVACITY_SEGMENT
from .persistence import read_diagram_csv, read_growth_csv
from .skeletonize import PixelSet, read_coords_file


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skelevo",
        description="Track and score the temporal evolution of 2D pixel skeletons.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    an = sub.add_parser("analyze", help="run the full pipeline on a frame sequence")
    an.add_argument("--config", type=Path, help="JSON config file; flags override it")
    an.add_argument("--input", help="frame directory, manifest JSON, or single file")
    an.add_argument("--format", choices=["auto", "png", "pgm", "coords"], default=None)
    an.add_argument("--threshold", type=int, default=None,
                    help="binarization threshold 0-255 (default 128)")
    an.add_argument("--polarity", choices=["above", "below"], default=None,
                    help="which side of the threshold is foreground")
    an.add_argument("--no-smooth", action="store_true",
                    help="disable the creation-time coherence pass")
    an.add_argument("--smooth-at-export", action="store_true",
                    help="propagate raw times, smooth only the exported fields")
    an.add_argument("--no-filter", action="store_true",
                    help="skip persistence filtering (filtered output = input)")
    an.add_argument("--bi-threshold", type=float, default=None,
                    help="remove segments with branch inconsistency >= this (default 5)")
    an.add_argument("--age-threshold", type=float, default=None,
                    help="combined filter keeps segments with age persistence > this (default 5)")
    an.add_argument("--t-g", type=float, default=None,
                    help="growth persistence bound for vivacity (default 10)")
    an.add_argument("--vivacity-mode", choices=[VIVACITY_SEGMENT, VIVACITY_PIXEL],
                    default=None)
    an.add_argument("--out", help="output directory for the artifact tree")
    an.add_argument("--jobs", type=int, default=None, help="parallelism degree")
    an.add_argument("--render", choices=list(render_mod.RENDER_MODES), default=None,
                    help="also write per-step overlay PNGs")
    an.add_argument("--export-matches", action="store_true")
    an.add_argument("--export-graph", action="store_true")
    an.add_argument("--export-presmooth", action="store_true")

    cp = sub.add_parser("compare", help="DTW-compare the curves of two runs")
    cp.add_argument("run_a", type=Path)
    cp.add_argument("run_b", type=Path)
    cp.add_argument("--out", type=Path, help="also write the report JSON here")

    sy = sub.add_parser("synth", help="generate a synthetic skeleton sequence")
    sy.add_argument("--script", type=Path,
                    help="growth script JSON (omit for the built-in demo script)")
    sy.add_argument("--out", type=Path, required=True)

    rd = sub.add_parser("render", help="overlay PNG for one step of a finished run")
    rd.add_argument("--run", type=Path, required=True, help="analyze output directory")
    rd.add_argument("--step", type=int, required=True)
    rd.add_argument("--mode", choices=list(render_mod.RENDER_MODES), required=True)
    rd.add_argument("--out", type=Path, help="output PNG (default inside the run)")
    return parser


def _analyze(args) -> int:
    overrides = {
        "input": args.input,
        "out": args.out,
        "format": args.format,
        "threshold": args.threshold,
        "polarity": args.polarity,
        "bi_threshold": args.bi_threshold,
        "age_threshold": args.age_threshold,
        "t_g": args.t_g,
        "vivacity_mode": args.vivacity_mode,
        "jobs": args.jobs,
        "render": args.render,
    }
    if args.no_smooth and args.smooth_at_export:
        raise InputError("--no-smooth and --smooth-at-export are mutually exclusive")
    if args.no_smooth:
        overrides["smoothing"] = SMOOTH_OFF
    elif args.smooth_at_export:
        overrides["smoothing"] = SMOOTH_AT_EXPORT
    if args.no_filter:
        overrides["filtering"] = False
    for flag in ("export_matches", "export_graph", "export_presmooth"):
        if getattr(args, flag):
            overrides[flag] = True

    if args.config is not None:
        config = pipeline.config_from_json(args.config, overrides)
    else:
        if not args.input or not args.out:
            raise InputError("analyze needs --input and --out (or a --config file)")
        defaults = {"smoothing": SMOOTH_CHAINED}
        defaults.update({k: v for k, v in overrides.items() if v is not None})
        config = pipeline.PipelineConfig(**defaults)
    return pipeline.run(config)


def _compare(args) -> int:
    report = pipeline.compare(args.run_a, args.run_b)
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if args.out:
        args.out.write_text(text + "\n")
    return 0


def _synth(args) -> int:
    script = synth.load_script(args.script) if args.script else synth.demo_script()
    frames, truth = synth.generate(script)
    synth.write_synth_output(args.out, frames, truth, script)
    print(f"wrote {len(frames)} frames to {args.out}")
    return 0


def _render(args) -> int:
    step_dir = args.run / "steps" / f"step_{args.step:04d}"
    skeleton_path = step_dir / "skeleton.txt"
    if not skeleton_path.is_file():
        raise InputError(f"no step artifacts at {step_dir}")
    width, height, pix = read_coords_file(skeleton_path)
    pixels = PixelSet(width, height, pix, args.step)
    if args.mode == render_mod.MODE_CREATION_TIME:
        field = read_creation_csv(step_dir / "creation_times.csv")
        values = {p: float(t) for p, t in field.times.items()}
    elif args.mode == render_mod.MODE_CLASS:
        classes_path = step_dir / "classes.csv"
        if not classes_path.is_file():
            raise InputError(
                f"{classes_path} missing; re-run analyze with --export-matches"
            )
        values = _read_class_values(classes_path)
    elif args.mode == render_mod.MODE_GROWTH:
        graph = build_graph(pixels)
        growth = read_growth_csv(step_dir / "growth.csv")
        field = read_creation_csv(step_dir / "creation_times.csv")
        values = render_mod.growth_values(
            graph, growth, field._replace if False else field
        )
    else:
        graph = build_graph(pixels)
        diagram = read_diagram_csv(step_dir / "diagram_branch_inconsistency.csv")
        values = render_mod.inconsistency_values(graph, diagram)
    out = args.out or (step_dir / f"overlay_{args.mode}.png")
    render_mod.render_overlay(pixels, values, out)
    print(f"wrote {out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    handlers = {
        "analyze": _analyze,
        "compare": _compare,
        "synth": _synth,
        "render": _render,
    }
    try:
        return handlers[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SkelevoError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
