"""End-to-end orchestration: extract, track, score, filter, summarize.

``run`` drives every stage over a frame sequence and writes a per-step and
per-dataset artifact tree. All artifact files are deterministic for a fixed
config and input, at any parallelism degree; wall-clock stage timings
therefore live in a separate ``timings.json`` next to the manifest instead
of inside it.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import render as render_mod
from .creation import (
    SMOOTH_CHAINED,
    SMOOTH_MODES,
    export_creation_csv,
    propagate,
)
from .errors import InputError, SkelevoError
from .graph import build_graph, export_graph_csv
from .indicators import (
    CURVE_LABELS,
    VIVACITY_PIXEL,
    VIVACITY_SEGMENT,
    curve_suite,
    dtw_distance,
    export_curve_csv,
    export_curves_json,
    read_curves_json,
)
from .matching import PixelClass, export_classes_csv, export_matches_csv, match_all
from .persistence import (
    age_persistence_diagram,
    branch_inconsistency_diagram,
    export_diagram_csv,
    export_growth_csv,
    filter_combined,
    growth_persistence,
)
from .skeletonize import LoadConfig, load_sequence, write_coords_file

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_STAGE_FAILURE = 2

# Paper-default thresholds are pinned here and in the CLI.
DEFAULT_BI_THRESHOLD = 5.0
DEFAULT_AGE_THRESHOLD = 5.0
DEFAULT_T_G = 10.0


@dataclass
class PipelineConfig:
    input: str
    out: str
    format: str = "auto"
    threshold: int = 128
    polarity: str = "above"
    smoothing: str = SMOOTH_CHAINED
    filtering: bool = True
    bi_threshold: float = DEFAULT_BI_THRESHOLD
    age_threshold: float = DEFAULT_AGE_THRESHOLD
    t_g: float = DEFAULT_T_G
    vivacity_mode: str = VIVACITY_SEGMENT
    jobs: int = 1
    render: str | None = None
    export_matches: bool = False
    export_graph: bool = False
    export_presmooth: bool = False

    def validate(self) -> None:
        if self.smoothing not in SMOOTH_MODES:
            raise InputError(f"unknown smoothing mode {self.smoothing!r}")
        if self.vivacity_mode not in (VIVACITY_SEGMENT, VIVACITY_PIXEL):
            raise InputError(f"unknown vivacity mode {self.vivacity_mode!r}")
        if min(self.bi_threshold, self.age_threshold, self.t_g) < 0:
            raise InputError("thresholds must be non-negative")
        if not 0 <= self.threshold <= 255:
            raise InputError("binarization threshold must be in [0, 255]")
        if self.polarity not in ("above", "below"):
            raise InputError(f"unknown polarity {self.polarity!r}")
        if self.jobs < 1:
            raise InputError("jobs must be >= 1")
        if self.render is not None and self.render not in render_mod.RENDER_MODES:
            raise InputError(f"unknown render mode {self.render!r}")


def config_from_json(path: Path, overrides: dict | None = None) -> PipelineConfig:
    """Build a config from a JSON file; overrides win over file values."""
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise InputError(f"{path}: config must be a JSON object")
    known = set(PipelineConfig.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise InputError(f"{path}: unknown config keys {sorted(unknown)}")
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})
    missing = {"input", "out"} - set(data)
    if missing:
        raise InputError(f"config missing required keys {sorted(missing)}")
    return PipelineConfig(**data)


_DECISIONS = {
    "match_tie_break": "smallest (y, x) among equidistant candidates",
    "mode_tie_break": "smallest creation time",
    "distance": "exact squared integer Euclidean",
    "classification_order": "known, growth, decay, irregular (first match wins)",
    "timings": "wall-clock stage timings live in timings.json, outside the manifest",
}


def _pmap(fn, items, jobs: int):
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def run(config: PipelineConfig) -> int:
    """Execute the full pipeline; returns the process exit code.

    Failures keep whatever artifacts were already written and mark the
    manifest with FAILED plus the failing stage.
    """
    out = Path(config.out)
    timings: dict[str, float] = {}
    manifest: dict = {
        "artifact_version": 1,
        "config": asdict(config),
        "decisions": dict(_DECISIONS, smoothing=config.smoothing),
        "status": "ok",
        "failed_stage": None,
        "error": None,
        "timings_file": "timings.json",
    }
    stage = "setup"
    try:
        config.validate()
        out.mkdir(parents=True, exist_ok=True)

        stage = "extract"
        t0 = time.perf_counter()
        sequence = load_sequence(
            config.input,
            LoadConfig(config.threshold, config.polarity, config.format),
        )
        timings[stage] = time.perf_counter() - t0

        stage = "graphs"
        t0 = time.perf_counter()
        graphs = _pmap(build_graph, sequence, config.jobs)
        timings[stage] = time.perf_counter() - t0

        stage = "match"
        t0 = time.perf_counter()
        matches = match_all(sequence, jobs=config.jobs) if len(sequence) > 1 else []
        timings[stage] = time.perf_counter() - t0

        stage = "propagate"
        t0 = time.perf_counter()
        fields, presmooth = propagate(
            sequence, matches, graphs=graphs,
            smoothing=config.smoothing, return_presmooth=True,
        )
        timings[stage] = time.perf_counter() - t0

        stage = "persistence"
        t0 = time.perf_counter()
        bi_diagrams = _pmap(
            lambda gf: branch_inconsistency_diagram(*gf), list(zip(graphs, fields)),
            config.jobs,
        )
        age_diagrams = _pmap(
            lambda gf: age_persistence_diagram(*gf), list(zip(graphs, fields)),
            config.jobs,
        )
        growth_fields = [
            growth_persistence(g, f, g.index) for g, f in zip(graphs, fields)
        ]
        timings[stage] = time.perf_counter() - t0

        stage = "filter"
        t0 = time.perf_counter()
        if config.filtering:
            filtered = [
                filter_combined(g, bi, age, config.bi_threshold, config.age_threshold)
                for g, bi, age in zip(graphs, bi_diagrams, age_diagrams)
            ]
        else:
            filtered = graphs
        timings[stage] = time.perf_counter() - t0

        stage = "indicators"
        t0 = time.perf_counter()
        curves = curve_suite(
            sequence, graphs, matches, fields,
            t_g=config.t_g, vivacity_mode=config.vivacity_mode,
            bi_diagrams=bi_diagrams, age_diagrams=age_diagrams,
            growth_fields=growth_fields,
        )
        classified = [c for ms in matches for c in ms.classification.values()]
        irregular = sum(1 for c in classified if c == PixelClass.IRREGULAR)
        manifest["steps"] = len(sequence)
        manifest["pixels_per_step"] = [len(ps) for ps in sequence]
        manifest["irregular_fraction"] = (
            irregular / len(classified) if classified else 0.0
        )
        timings[stage] = time.perf_counter() - t0

        stage = "write"
        t0 = time.perf_counter()
        for i, ps in enumerate(sequence):
            step_dir = out / "steps" / f"step_{i:04d}"
            step_dir.mkdir(parents=True, exist_ok=True)
            write_coords_file(step_dir / "skeleton.txt", ps)
            export_creation_csv(fields[i], step_dir / "creation_times.csv")
            if config.export_presmooth:
                export_creation_csv(
                    presmooth[i], step_dir / "creation_times_presmooth.csv"
                )
            export_diagram_csv(bi_diagrams[i],
                               step_dir / "diagram_branch_inconsistency.csv")
            export_diagram_csv(age_diagrams[i],
                               step_dir / "diagram_age_persistence.csv")
            export_growth_csv(growth_fields[i], step_dir / "growth.csv")
            write_coords_file(step_dir / "filtered_skeleton.txt", filtered[i].pixels)
            if config.export_graph:
                export_graph_csv(graphs[i], step_dir / "graph.csv")
            if config.export_matches and i > 0:
                export_matches_csv(matches[i - 1], step_dir / "matches.csv")
                export_classes_csv(matches[i - 1], step_dir / "classes.csv")
        curve_dir = out / "curves"
        curve_dir.mkdir(parents=True, exist_ok=True)
        for curve in curves:
            export_curve_csv(curve, curve_dir / f"{curve.label}.csv")
        export_curves_json(curves, curve_dir / "curves.json")
        timings[stage] = time.perf_counter() - t0

        if config.render is not None:
            stage = "render"
            t0 = time.perf_counter()
            for i in range(len(sequence)):
                values = _render_values(
                    config.render, i, graphs, matches, fields,
                    bi_diagrams, growth_fields,
                )
                render_mod.render_overlay(
                    sequence[i], values,
                    out / "steps" / f"step_{i:04d}" / f"overlay_{config.render}.png",
                )
            timings[stage] = time.perf_counter() - t0

    except Exception as exc:
        manifest["status"] = "FAILED"
        manifest["failed_stage"] = stage
        manifest["error"] = str(exc)
        _write_manifest(out, manifest, timings)
        if isinstance(exc, InputError):
            logger.error("input error in stage %s: %s", stage, exc)
            return EXIT_INPUT_ERROR
        if isinstance(exc, SkelevoError):
            logger.error("stage %s failed: %s", stage, exc)
            return EXIT_STAGE_FAILURE
        logger.exception("stage %s failed", stage)
        return EXIT_STAGE_FAILURE

    _write_manifest(out, manifest, timings)
    return EXIT_OK


def _render_values(mode, i, graphs, matches, fields, bi_diagrams, growth_fields):
    if mode == render_mod.MODE_CREATION_TIME:
        return render_mod.creation_values(fields[i])
    if mode == render_mod.MODE_CLASS:
        return render_mod.class_values(matches[i - 1]) if i > 0 else {}
    if mode == render_mod.MODE_GROWTH:
        return render_mod.growth_values(graphs[i], growth_fields[i], fields[i])
    return render_mod.inconsistency_values(graphs[i], bi_diagrams[i])


def _write_manifest(out: Path, manifest: dict, timings: dict[str, float]) -> None:
    try:
        out.mkdir(parents=True, exist_ok=True)
        files = sorted(
            str(p.relative_to(out))
            for p in out.rglob("*")
            if p.is_file() and p.name not in ("manifest.json", "timings.json")
        )
        manifest["files"] = files
        (out / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n"
        )
        (out / "timings.json").write_text(
            json.dumps({"stage_seconds": timings}, indent=2, sort_keys=True) + "\n"
        )
    except OSError as exc:
        logger.error("cannot write manifest under %s: %s", out, exc)


def compare(run_a: str | Path, run_b: str | Path) -> dict:
    """DTW distances between the activity curves of two finished runs."""
    reports = []
    curves_a = read_curves_json(Path(run_a) / "curves" / "curves.json")
    curves_b = read_curves_json(Path(run_b) / "curves" / "curves.json")
    for label in CURVE_LABELS:
        if label not in curves_a or label not in curves_b:
            raise InputError(f"curve {label!r} missing from one of the runs")
        reports.append({
            "curve": label,
            "a": str(run_a),
            "b": str(run_b),
            "distance": dtw_distance(curves_a[label], curves_b[label]),
        })
    return {"reports": reports}
