"""Scalar activity indicators over a run, and curve comparison via DTW.

Total persistence condenses a diagram into one number per step, vivacity
measures the fraction of pixels in actively growing material, and dynamic
time warping compares the resulting curves even when runs differ in length
or sampling rate.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .creation import CreationTimeField
from .errors import InputError
from .graph import SkeletonGraph
from .matching import MatchSet, PixelClass
from .persistence import (
    GrowthField,
    PersistenceDiagram,
    age_persistence_diagram,
    branch_inconsistency_diagram,
    growth_persistence,
)
from .skeletonize import PixelSet

LABEL_BRANCH_INCONSISTENCY = "branch_inconsistency_total_persistence"
LABEL_AGE_PERSISTENCE = "age_persistence_total_persistence"
LABEL_VIVACITY = "vivacity"
CURVE_LABELS = (LABEL_BRANCH_INCONSISTENCY, LABEL_AGE_PERSISTENCE, LABEL_VIVACITY)

VIVACITY_SEGMENT = "segment"
VIVACITY_PIXEL = "pixel"


@dataclass(frozen=True)
class ActivityCurve:
    """A labeled time series of non-negative samples, gaps simply absent."""

    label: str
    samples: tuple[tuple[int, float], ...]

    def __post_init__(self):
        steps = [s for s, _ in self.samples]
        if any(b <= a for a, b in zip(steps, steps[1:])):
            raise ValueError(f"curve {self.label!r}: steps must strictly increase")
        if any(not math.isfinite(v) or v < 0 for _, v in self.samples):
            raise ValueError(f"curve {self.label!r}: values must be finite and >= 0")

    def values(self) -> list[float]:
        return [v for _, v in self.samples]


def persistence_power_sum(diagram: PersistenceDiagram, order: float = 2.0) -> float:
    """The raw sum of |death - birth|^order over the diagram."""
    if order <= 0:
        raise ValueError(f"order must be positive, got {order}")
    return float(sum(float(pt.persistence) ** order for pt in diagram.points))


def total_persistence(diagram: PersistenceDiagram, order: float = 2.0) -> float:
    """(sum of |death - birth|^order)^(1/order); 0 for an empty diagram."""
    s = persistence_power_sum(diagram, order)
    return s ** (1.0 / order)


def _pixel_growth_values(
    graph: SkeletonGraph, growth: GrowthField, field: CreationTimeField
):
    """Growth persistence seen by a single pixel in segment mode.

    Interior pixels read their segment; anchors take the minimum over the
    segments they touch (growing anywhere counts); pixels in no segment at
    all fall back to step minus their own creation time.
    """
    def value(pixel):
        sids = graph.segments_at(pixel)
        if sids:
            return min(growth.values[sid] for sid in sids)
        return growth.step - field.times[pixel]

    return value


def vivacity(
    pixels: PixelSet,
    matches: MatchSet,
    growth: GrowthField,
    graph: SkeletonGraph,
    field: CreationTimeField,
    t_g: float = 10.0,
    mode: str = VIVACITY_SEGMENT,
) -> float | None:
    """Fraction of the step's pixels that are growth pixels in material
    whose growth persistence is at most ``t_g``.

    Segment mode (default) tests each growth pixel against its segment's
    value; pixel mode tests the pixel's own age. An empty step has no
    defined ratio and yields None (a gap sample), never a fabricated 0.
    """
    if len(pixels) == 0:
        return None
    if mode not in (VIVACITY_SEGMENT, VIVACITY_PIXEL):
        raise ValueError(f"unknown vivacity mode {mode!r}")
    if mode == VIVACITY_SEGMENT:
        pixel_value = _pixel_growth_values(graph, growth, field)
    else:
        def pixel_value(pixel):
            return growth.step - field.times[pixel]
    qualifying = sum(
        1
        for q, cls in matches.classification.items()
        if cls == PixelClass.GROWTH and pixel_value(q) <= t_g
    )
    return qualifying / len(pixels)


def dtw_distance(a: ActivityCurve, b: ActivityCurve) -> float:
    """Classical dynamic time warping with absolute-difference cost.

    Unconstrained warping window, endpoints matched to endpoints, and the
    standard match/insert/delete recurrence. Not a metric: symmetry and
    dtw(a, a) = 0 hold, the triangle inequality does not.
    """
    va, vb = a.values(), b.values()
    if not va or not vb:
        raise InputError("DTW requires non-empty curves")
    n, m = len(va), len(vb)
    inf = math.inf
    prev = [inf] * (m + 1)
    prev[0] = 0.0
    for i in range(1, n + 1):
        row = [inf] * (m + 1)
        ai = va[i - 1]
        for j in range(1, m + 1):
            cost = abs(ai - vb[j - 1])
            row[j] = cost + min(prev[j], row[j - 1], prev[j - 1])
        prev = row
    return prev[m]


def curve_suite(
    sequence: list[PixelSet],
    graphs: list[SkeletonGraph],
    matches: list[MatchSet],
    fields: list[CreationTimeField],
    *,
    t_g: float = 10.0,
    order: float = 2.0,
    vivacity_mode: str = VIVACITY_SEGMENT,
    bi_diagrams: list[PersistenceDiagram] | None = None,
    age_diagrams: list[PersistenceDiagram] | None = None,
    growth_fields: list[GrowthField] | None = None,
) -> list[ActivityCurve]:
    """The three standard curves of a run: total branch-inconsistency
    persistence, total age persistence, and vivacity per step.

    Diagram and growth inputs are recomputed when not supplied. Vivacity
    starts at step 1 (it needs an incoming match classification) and skips
    empty steps.
    """
    if bi_diagrams is None:
        bi_diagrams = [branch_inconsistency_diagram(g, f) for g, f in zip(graphs, fields)]
    if age_diagrams is None:
        age_diagrams = [age_persistence_diagram(g, f) for g, f in zip(graphs, fields)]
    if growth_fields is None:
        growth_fields = [
            growth_persistence(g, f, g.index) for g, f in zip(graphs, fields)
        ]
    bi_curve = ActivityCurve(
        LABEL_BRANCH_INCONSISTENCY,
        tuple((seq.index, total_persistence(d, order))
              for seq, d in zip(sequence, bi_diagrams)),
    )
    age_curve = ActivityCurve(
        LABEL_AGE_PERSISTENCE,
        tuple((seq.index, total_persistence(d, order))
              for seq, d in zip(sequence, age_diagrams)),
    )
    viv_samples = []
    for i, ms in enumerate(matches):
        step = i + 1
        v = vivacity(
            sequence[step], ms, growth_fields[step], graphs[step], fields[step],
            t_g=t_g, mode=vivacity_mode,
        )
        if v is not None:
            viv_samples.append((sequence[step].index, v))
    viv_curve = ActivityCurve(LABEL_VIVACITY, tuple(viv_samples))
    return [bi_curve, age_curve, viv_curve]


def export_curve_csv(curve: ActivityCurve, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "value"])
        for step, value in curve.samples:
            writer.writerow([step, repr(value)])


def export_curves_json(curves: list[ActivityCurve], path: Path) -> None:
    payload = {
        "curves": [
            {"label": c.label, "samples": [[s, v] for s, v in c.samples]}
            for c in curves
        ]
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_curves_json(path: Path) -> dict[str, ActivityCurve]:
    try:
        payload = json.loads(path.read_text())
        curves = {}
        for entry in payload["curves"]:
            curves[entry["label"]] = ActivityCurve(
                entry["label"],
                tuple((int(s), float(v)) for s, v in entry["samples"]),
            )
        return curves
    except (OSError, KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read curves from {path}: {exc}") from exc
