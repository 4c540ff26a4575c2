"""8-connectivity graphs over skeleton pixel sets: degrees and segments.

A pixel's degree is the number of skeleton pixels among its 8 neighbors.
Segments are maximal runs of degree-2 (regular) pixels, anchored at the
non-regular pixels they attach to. Closed loops of regular pixels form
anchorless cycle segments, and two directly adjacent branch points are
linked by an empty-interior segment so the incidence stays representable.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .skeletonize import PixelSet

Coord = tuple[int, int]

_NEIGHBOR_OFFSETS = (
    (-1, -1), (0, -1), (1, -1),
    (-1, 0), (1, 0),
    (-1, 1), (0, 1), (1, 1),
)


class DegreeClass(str, Enum):
    ISOLATED = "isolated"
    ENDPOINT = "endpoint"
    REGULAR = "regular"
    BRANCH = "branch"


def classify_degree(degree: int) -> DegreeClass:
    if degree == 0:
        return DegreeClass.ISOLATED
    if degree == 1:
        return DegreeClass.ENDPOINT
    if degree == 2:
        return DegreeClass.REGULAR
    return DegreeClass.BRANCH


@dataclass(frozen=True)
class Segment:
    """A run of regular pixels and the non-regular pixels it attaches to.

    ``anchors`` holds one entry per attachment end: ``anchors[0]`` adjoins
    ``interior[0]`` and ``anchors[1]`` adjoins ``interior[-1]``. A loop that
    leaves and re-enters the same branch point therefore lists it twice;
    pure cycles have no anchors at all. Empty-interior segments link two
    directly adjacent branch points.
    """

    id: int
    interior: tuple[Coord, ...]
    anchors: tuple[Coord, ...]


@dataclass(frozen=True)
class SkeletonGraph:
    pixels: PixelSet
    adjacency: dict[Coord, tuple[Coord, ...]]
    degree_class: dict[Coord, DegreeClass]
    segments: tuple[Segment, ...]
    interior_segment: dict[Coord, int]
    anchor_segments: dict[Coord, tuple[int, ...]]

    @property
    def index(self) -> int:
        return self.pixels.index

    def degree(self, pixel: Coord) -> int:
        return len(self.adjacency[pixel])

    def segments_at(self, pixel: Coord) -> tuple[int, ...]:
        """Ids of segments containing the pixel, as interior or as anchor."""
        sid = self.interior_segment.get(pixel)
        if sid is not None:
            return (sid,)
        return self.anchor_segments.get(pixel, ())


def _raster(p: Coord) -> tuple[int, int]:
    return (p[1], p[0])


def build_graph(pixels: PixelSet) -> SkeletonGraph:
    """Build adjacency, degree classes, and the segment decomposition."""
    pix = pixels.pixels
    adjacency: dict[Coord, tuple[Coord, ...]] = {}
    for p in pixels.sorted_pixels():
        x, y = p
        nbrs = [
            (x + dx, y + dy)
            for dx, dy in _NEIGHBOR_OFFSETS
            if (x + dx, y + dy) in pix
        ]
        adjacency[p] = tuple(sorted(nbrs, key=_raster))
    degree_class = {p: classify_degree(len(ns)) for p, ns in adjacency.items()}

    segments: list[Segment] = []
    visited: set[Coord] = set()

    def add_chain(interior: list[Coord], first_anchor: Coord, last_anchor: Coord) -> None:
        anchors = (first_anchor, last_anchor)
        if anchors[1] < anchors[0]:
            interior = interior[::-1]
            anchors = (anchors[1], anchors[0])
        elif anchors[0] == anchors[1] and interior and interior[-1] < interior[0]:
            interior = interior[::-1]
        segments.append(Segment(len(segments), tuple(interior), anchors))

    non_regular = [p for p in adjacency if degree_class[p] != DegreeClass.REGULAR]
    for a in sorted(non_regular, key=_raster):
        for r in adjacency[a]:
            if degree_class[r] != DegreeClass.REGULAR or r in visited:
                continue
            interior = [r]
            visited.add(r)
            prev, cur = a, r
            while True:
                nxt = next(n for n in adjacency[cur] if n != prev)
                if degree_class[nxt] != DegreeClass.REGULAR:
                    add_chain(interior, a, nxt)
                    break
                interior.append(nxt)
                visited.add(nxt)
                prev, cur = cur, nxt

    # Leftover regular pixels form pure cycles; start each at its smallest
    # pixel and walk toward the smaller neighbor.
    remaining = sorted(
        p for p in adjacency
        if degree_class[p] == DegreeClass.REGULAR and p not in visited
    )
    for start in remaining:
        if start in visited:
            continue
        interior = [start]
        visited.add(start)
        prev, cur = start, min(adjacency[start])
        while cur != start:
            interior.append(cur)
            visited.add(cur)
            prev, cur = cur, next(n for n in adjacency[cur] if n != prev)
        segments.append(Segment(len(segments), tuple(interior), ()))

    # Directly adjacent branch points: record the incidence with no interior.
    for a in sorted(non_regular, key=_raster):
        if degree_class[a] != DegreeClass.BRANCH:
            continue
        for b in adjacency[a]:
            if degree_class[b] == DegreeClass.BRANCH and _raster(a) < _raster(b):
                segments.append(Segment(len(segments), (), (a, b)))

    interior_segment: dict[Coord, int] = {}
    anchor_segments: dict[Coord, list[int]] = {}
    for seg in segments:
        for p in seg.interior:
            interior_segment[p] = seg.id
        for a in seg.anchors:
            ids = anchor_segments.setdefault(a, [])
            if seg.id not in ids:
                ids.append(seg.id)

    return SkeletonGraph(
        pixels=pixels,
        adjacency=adjacency,
        degree_class=degree_class,
        segments=tuple(segments),
        interior_segment=interior_segment,
        anchor_segments={a: tuple(v) for a, v in anchor_segments.items()},
    )


def branch_points(graph: SkeletonGraph) -> list[Coord]:
    """All pixels of degree >= 3, in raster order."""
    return [
        p for p in sorted(graph.adjacency, key=_raster)
        if graph.degree_class[p] == DegreeClass.BRANCH
    ]


def segment_of(graph: SkeletonGraph, pixel: Coord) -> Segment | None:
    """The segment whose interior contains the pixel; None for non-regular pixels."""
    if pixel not in graph.adjacency:
        raise KeyError(f"pixel {pixel} is not in the graph")
    sid = graph.interior_segment.get(pixel)
    if sid is None:
        return None
    return graph.segments[sid]


def export_graph_csv(graph: SkeletonGraph, path: Path) -> None:
    """Debug dump: one row per pixel with degree class and segment id."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "degree_class", "segment_id"])
        for p in graph.pixels.sorted_pixels():
            sid = graph.interior_segment.get(p)
            writer.writerow([p[0], p[1], graph.degree_class[p].value,
                             "" if sid is None else sid])
