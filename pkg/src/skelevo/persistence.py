"""Diagrams and per-segment scores built from creation times, and the
segment filters driven by them.

Two diagram kinds share the same branch--segment incidence structure: the
branch inconsistency diagram pairs a branch point's creation time with the
time of the first segment pixel next to it, and the age persistence diagram
pairs it with the newest time along the segment. Growth persistence is a
plain per-segment score (current step minus newest pixel time) with no
diagram. Points may fall below the diagonal; that encodes an inconsistency
rather than an error, so they are kept as-is.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .creation import CreationTimeField
from .errors import InputError
from .graph import DegreeClass, Segment, SkeletonGraph, build_graph
from .skeletonize import PixelSet

Coord = tuple[int, int]

KIND_BRANCH_INCONSISTENCY = "branch-inconsistency"
KIND_AGE_PERSISTENCE = "age-persistence"


@dataclass(frozen=True)
class DiagramPoint:
    birth: int
    death: int
    segment_id: int
    branch: Coord

    @property
    def persistence(self) -> int:
        return abs(self.death - self.birth)


@dataclass(frozen=True)
class PersistenceDiagram:
    kind: str
    step: int
    points: tuple[DiagramPoint, ...]


@dataclass(frozen=True)
class GrowthField:
    """Growth persistence per segment id; 0 means growing right now."""

    step: int
    values: dict[int, int]


def _check_same_step(graph: SkeletonGraph, field: CreationTimeField) -> None:
    if graph.index != field.index:
        raise InputError(
            f"graph is step {graph.index} but field is step {field.index}"
        )


def branch_incidences(graph: SkeletonGraph):
    """Yield (segment, branch pixel, first pixel along the segment) triples.

    One triple per attachment of a segment end to a branch point; a segment
    looping back to the same branch point contributes two. For an empty
    interior the opposite anchor stands in as the first pixel.
    """
    for seg in graph.segments:
        if not seg.anchors:
            continue
        first = seg.interior[0] if seg.interior else seg.anchors[1]
        last = seg.interior[-1] if seg.interior else seg.anchors[0]
        for anchor, adjacent in ((seg.anchors[0], first), (seg.anchors[1], last)):
            if graph.degree_class[anchor] == DegreeClass.BRANCH:
                yield seg, anchor, adjacent


def branch_inconsistency_diagram(
    graph: SkeletonGraph, field: CreationTimeField
) -> PersistenceDiagram:
    _check_same_step(graph, field)
    points = tuple(
        DiagramPoint(field.times[anchor], field.times[adjacent], seg.id, anchor)
        for seg, anchor, adjacent in branch_incidences(graph)
    )
    return PersistenceDiagram(KIND_BRANCH_INCONSISTENCY, field.index, points)


def age_persistence_diagram(
    graph: SkeletonGraph, field: CreationTimeField
) -> PersistenceDiagram:
    _check_same_step(graph, field)
    points = []
    for seg, anchor, _ in branch_incidences(graph):
        if seg.interior:
            death = max(field.times[p] for p in seg.interior)
        else:
            death = max(field.times[a] for a in seg.anchors)
        points.append(DiagramPoint(field.times[anchor], death, seg.id, anchor))
    return PersistenceDiagram(KIND_AGE_PERSISTENCE, field.index, tuple(points))


def growth_persistence(
    graph: SkeletonGraph, field: CreationTimeField, step: int
) -> GrowthField:
    """Per segment: step minus the newest creation time among its pixels
    (interior plus anchors)."""
    _check_same_step(graph, field)
    if step != graph.index:
        raise InputError(f"step {step} does not match graph step {graph.index}")
    values: dict[int, int] = {}
    for seg in graph.segments:
        members = set(seg.interior) | set(seg.anchors)
        values[seg.id] = step - max(field.times[p] for p in members)
    return GrowthField(step, values)


def _remove_segments(graph: SkeletonGraph, doomed: set[int]) -> SkeletonGraph:
    """Drop the given segments and rebuild the graph on the survivors.

    Interiors of doomed segments are removed; an anchor pixel goes with
    them only when every segment it anchors is doomed.
    """
    if not doomed:
        return graph
    removed: set[Coord] = set()
    for seg in graph.segments:
        if seg.id in doomed:
            removed.update(seg.interior)
    for anchor, seg_ids in graph.anchor_segments.items():
        if all(sid in doomed for sid in seg_ids):
            removed.add(anchor)
    keep = graph.pixels.pixels - removed
    pruned = PixelSet(graph.pixels.width, graph.pixels.height,
                      frozenset(keep), graph.pixels.index)
    return build_graph(pruned)


def filter_by_inconsistency(
    graph: SkeletonGraph, diagram: PersistenceDiagram, threshold: float
) -> SkeletonGraph:
    """Remove every segment with an incident inconsistency >= threshold."""
    if diagram.step != graph.index:
        raise InputError("diagram and graph belong to different steps")
    doomed = {pt.segment_id for pt in diagram.points if pt.persistence >= threshold}
    return _remove_segments(graph, doomed)


def filter_combined(
    graph: SkeletonGraph,
    bi_diagram: PersistenceDiagram,
    age_diagram: PersistenceDiagram,
    bi_threshold: float,
    age_threshold: float,
) -> SkeletonGraph:
    """Keep a segment while its age persistence is high or its branch
    inconsistency is low; a segment falls at any incidence failing both.

    Age persistence is the signed death - birth, inconsistency the absolute
    gap. With an infinite age threshold this reduces to the plain
    inconsistency filter.
    """
    if bi_diagram.step != graph.index or age_diagram.step != graph.index:
        raise InputError("diagrams and graph belong to different steps")
    if len(bi_diagram.points) != len(age_diagram.points):
        raise InputError("diagrams disagree on branch incidences")
    doomed: set[int] = set()
    for bp, ap in zip(bi_diagram.points, age_diagram.points):
        if bp.segment_id != ap.segment_id or bp.branch != ap.branch:
            raise InputError("diagrams disagree on branch incidences")
        age = ap.death - ap.birth
        if not (age > age_threshold or bp.persistence < bi_threshold):
            doomed.add(bp.segment_id)
    return _remove_segments(graph, doomed)


def export_diagram_csv(diagram: PersistenceDiagram, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "step", "birth", "death", "branch_x", "branch_y", "segment_id"])
        for pt in diagram.points:
            writer.writerow([diagram.kind, diagram.step, pt.birth, pt.death,
                             pt.branch[0], pt.branch[1], pt.segment_id])


def read_diagram_csv(path: Path) -> PersistenceDiagram:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise InputError(f"cannot read diagram from {path}: {exc}") from exc
    if not rows:
        return PersistenceDiagram(KIND_BRANCH_INCONSISTENCY, 0, ())
    try:
        points = tuple(
            DiagramPoint(int(r["birth"]), int(r["death"]), int(r["segment_id"]),
                         (int(r["branch_x"]), int(r["branch_y"])))
            for r in rows
        )
        return PersistenceDiagram(rows[0]["kind"], int(rows[0]["step"]), points)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed diagram file {path}: {exc}") from exc


def export_growth_csv(growth: GrowthField, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "segment_id", "pers_g"])
        for sid in sorted(growth.values):
            writer.writerow([growth.step, sid, growth.values[sid]])


def read_growth_csv(path: Path) -> GrowthField:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        values = {int(r["segment_id"]): int(r["pers_g"]) for r in rows}
        step = int(rows[0]["step"]) if rows else 0
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise InputError(f"cannot read growth field from {path}: {exc}") from exc
    return GrowthField(step, values)
