"""Creation-time propagation across a skeleton sequence, plus mode smoothing.

Each pixel carries the index of the time step in which it first appeared.
Step 0 pixels get time 0. Later steps reuse times through matches: known
pixels copy their partner, growth pixels are new (and stamped with the
current step) only when no forward match reaches them, and all remaining
pixels take the minimum time over every pixel they are matched with in
either direction, which keeps noisy matches from inflating ages.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .errors import InputError
from .graph import SkeletonGraph
from .matching import MatchSet, PixelClass
from .skeletonize import PixelSet

Coord = tuple[int, int]

SMOOTH_OFF = "off"
SMOOTH_CHAINED = "chained"
SMOOTH_AT_EXPORT = "export"
SMOOTH_MODES = (SMOOTH_OFF, SMOOTH_CHAINED, SMOOTH_AT_EXPORT)


@dataclass(frozen=True)
class CreationTimeField:
    """Per-pixel creation times for one time step."""

    index: int
    times: dict[Coord, int]


def smooth(field: CreationTimeField, graph: SkeletonGraph, matches: MatchSet) -> CreationTimeField:
    """One simultaneous coherence pass over the growth pixels of a step.

    A growth pixel whose skeleton neighbors disagree with it in the strict
    majority takes the mode of their creation times (ties resolve to the
    smallest time). All reads come from the input field, so the pass order
    cannot influence the result.
    """
    if matches.to_index != field.index:
        raise InputError(
            f"match set targets step {matches.to_index}, field is step {field.index}"
        )
    if graph.index != field.index:
        raise InputError(
            f"graph is step {graph.index}, field is step {field.index}"
        )
    out = dict(field.times)
    growth = sorted(
        (q for q, c in matches.classification.items() if c == PixelClass.GROWTH),
        key=lambda c: (c[1], c[0]),
    )
    for q in growth:
        neighbors = graph.adjacency.get(q, ())
        if not neighbors:
            continue
        t = field.times[q]
        neighbor_times = [field.times[n] for n in neighbors]
        differing = sum(1 for nt in neighbor_times if nt != t)
        if 2 * differing > len(neighbor_times):
            counts = Counter(neighbor_times)
            out[q] = min(counts, key=lambda time: (-counts[time], time))
    return CreationTimeField(field.index, out)


def propagate(
    sequence: list[PixelSet],
    matches: list[MatchSet],
    *,
    graphs: list[SkeletonGraph] | None = None,
    smoothing: str = SMOOTH_OFF,
    return_presmooth: bool = False,
):
    """Assign creation times to every pixel of every step.

    ``smoothing`` selects where the coherence pass runs: "off" (never),
    "chained" (each step is smoothed before its times feed the next step),
    or "export" (propagation runs on raw times and each returned field is
    smoothed once at the end). Chained is the pipeline default. With
    ``return_presmooth`` the raw fields are returned alongside.
    """
    if smoothing not in SMOOTH_MODES:
        raise ValueError(f"unknown smoothing mode {smoothing!r}")
    if len(matches) != len(sequence) - 1:
        raise InputError(
            f"{len(matches)} match sets do not cover {len(sequence)} steps"
        )
    for i, ms in enumerate(matches):
        if ms.from_index != sequence[i].index or ms.to_index != sequence[i + 1].index:
            raise InputError(
                f"match set {i} links steps {ms.from_index}->{ms.to_index}, "
                f"expected {sequence[i].index}->{sequence[i + 1].index}"
            )
    if smoothing != SMOOTH_OFF and graphs is None:
        raise InputError("smoothing requires the per-step graphs")

    fields: list[CreationTimeField] = []
    presmooth: list[CreationTimeField] = []
    current = CreationTimeField(sequence[0].index, {p: 0 for p in sequence[0].pixels})
    presmooth.append(current)
    fields.append(current)
    for i, ms in enumerate(matches):
        step = sequence[i + 1].index
        prev_times = current.times
        incoming = ms.forward_sources()
        fwd_in_count = {q: len(ps) for q, ps in incoming.items()}
        times: dict[Coord, int] = {}
        for q in sequence[i + 1].sorted_pixels():
            b = ms.backward.get(q)
            if b is None:
                # No incident match at all: only possible when the previous
                # step was empty, so the pixel is unambiguously new.
                times[q] = step
                continue
            cls = ms.classification[q]
            if cls == PixelClass.KNOWN:
                times[q] = prev_times[b]
            elif cls == PixelClass.GROWTH:
                if fwd_in_count.get(q, 0) == 0:
                    times[q] = step
                else:
                    times[q] = prev_times[b]
            else:
                partners = set(incoming.get(q, ()))
                partners.add(b)
                times[q] = min(prev_times[p] for p in partners)
        field = CreationTimeField(step, times)
        presmooth.append(field)
        if smoothing == SMOOTH_CHAINED:
            field = smooth(field, graphs[i + 1], ms)
        fields.append(field)
        current = field

    if smoothing == SMOOTH_AT_EXPORT:
        smoothed = [fields[0]]
        for i, ms in enumerate(matches):
            smoothed.append(smooth(fields[i + 1], graphs[i + 1], ms))
        fields = smoothed

    if return_presmooth:
        return fields, presmooth
    return fields


def export_creation_csv(field: CreationTimeField, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "creation_time"])
        for (x, y) in sorted(field.times, key=lambda c: (c[1], c[0])):
            writer.writerow([x, y, field.times[(x, y)]])


def read_creation_csv(path: Path) -> CreationTimeField:
    times: dict[Coord, int] = {}
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                times[(int(row["x"]), int(row["y"]))] = int(row["creation_time"])
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise InputError(f"cannot read creation times from {path}: {exc}") from exc
    return CreationTimeField(0, times)
