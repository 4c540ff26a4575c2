"""PNG overlays: skeleton pixels on white, colored by a per-pixel quantity.

The color map is a linear white-to-red ramp over the observed value range
of the step; a degenerate (single-valued) range renders fully red.
"""

from __future__ import annotations

from pathlib import Path

from .creation import CreationTimeField
from .graph import SkeletonGraph
from .matching import MatchSet, PixelClass
from .persistence import GrowthField, PersistenceDiagram
from .skeletonize import PixelSet

Coord = tuple[int, int]

MODE_CREATION_TIME = "creation-time"
MODE_CLASS = "class"
MODE_GROWTH = "growth"
MODE_INCONSISTENCY = "inconsistency"
RENDER_MODES = (MODE_CREATION_TIME, MODE_CLASS, MODE_GROWTH, MODE_INCONSISTENCY)

_CLASS_RANK = {
    PixelClass.KNOWN: 0.0,
    PixelClass.GROWTH: 1.0,
    PixelClass.DECAY: 2.0,
    PixelClass.IRREGULAR: 3.0,
}


def creation_values(field: CreationTimeField) -> dict[Coord, float]:
    return {p: float(t) for p, t in field.times.items()}


def class_values(matches: MatchSet) -> dict[Coord, float]:
    return {p: _CLASS_RANK[c] for p, c in matches.classification.items()}


def growth_values(graph: SkeletonGraph, growth: GrowthField,
                  field: CreationTimeField) -> dict[Coord, float]:
    out = {}
    for p in graph.adjacency:
        sids = graph.segments_at(p)
        if sids:
            out[p] = float(min(growth.values[sid] for sid in sids))
        else:
            out[p] = float(growth.step - field.times[p])
    return out


def inconsistency_values(graph: SkeletonGraph,
                         diagram: PersistenceDiagram) -> dict[Coord, float]:
    per_segment: dict[int, float] = {}
    for pt in diagram.points:
        per_segment[pt.segment_id] = max(
            per_segment.get(pt.segment_id, 0.0), float(pt.persistence)
        )
    out = {}
    for p in graph.adjacency:
        sids = graph.segments_at(p)
        out[p] = max((per_segment.get(sid, 0.0) for sid in sids), default=0.0)
    return out


def render_overlay(pixels: PixelSet, values: dict[Coord, float], path: Path) -> None:
    """Write the overlay PNG; pixels without a value render as value 0."""
    from PIL import Image

    img = Image.new("RGB", (pixels.width, pixels.height), (255, 255, 255))
    if pixels.pixels:
        present = [values.get(p, 0.0) for p in pixels.pixels]
        vmin, vmax = min(present), max(present)
        span = vmax - vmin
        put = img.putpixel
        for p in pixels.sorted_pixels():
            t = (values.get(p, 0.0) - vmin) / span if span > 0 else 1.0
            shade = round(255 * (1.0 - t))
            put(p, (255, shade, shade))
    path.parent.mkdir(parents=True, exist_ok=True)
    img.save(path, format="PNG")
