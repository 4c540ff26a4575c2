"""Nearest-neighbor matching between consecutive skeletons and pixel classes.

Every pixel of step i is matched forward to its nearest pixel of step i+1
and every pixel of step i+1 backward to its nearest pixel of step i, under
exact squared integer Euclidean distance. Equidistant candidates resolve to
the smallest (y, x), so results are reproducible and identical to an
all-pairs scan.

The matcher itself is a uniform grid (8 px cells) searched ring by ring
around the query's cell, vectorized over all queries sharing a cell; tiny
inputs fall back to a plain full scan.
"""

from __future__ import annotations

import csv
import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import InputError
from .skeletonize import PixelSet

logger = logging.getLogger(__name__)

Coord = tuple[int, int]

CELL_SIZE = 8
_FULL_SCAN_LIMIT = 4096  # max n*m for the plain-loop path


class PixelClass(str, Enum):
    KNOWN = "known"
    GROWTH = "growth"
    DECAY = "decay"
    IRREGULAR = "irregular"


@dataclass(frozen=True)
class MatchSet:
    """Directed matches between steps ``from_index`` and ``to_index``.

    ``forward`` maps every pixel of the earlier step to its nearest pixel of
    the later one; ``backward`` the reverse. ``classification`` covers every
    pixel of the later step. When either step is empty both maps are empty
    and all later-step pixels are classified as growth.
    """

    from_index: int
    to_index: int
    forward: dict[Coord, Coord]
    backward: dict[Coord, Coord]
    classification: dict[Coord, PixelClass]

    def forward_sources(self) -> dict[Coord, list[Coord]]:
        """For each later-step pixel, the earlier-step pixels matching it."""
        incoming: dict[Coord, list[Coord]] = {}
        for p, q in self.forward.items():
            incoming.setdefault(q, []).append(p)
        return incoming


def _scan_nearest(p: Coord, targets: list[Coord]) -> Coord:
    px, py = p
    best = None
    for qx, qy in targets:
        dx = qx - px
        dy = qy - py
        key = (dx * dx + dy * dy, qy, qx)
        if best is None or key < best:
            best = key
    return (best[2], best[1])


def _ring_cells(cx: int, cy: int, r: int):
    if r == 0:
        yield (cx, cy)
        return
    for dx in range(-r, r + 1):
        yield (cx + dx, cy - r)
        yield (cx + dx, cy + r)
    for dy in range(-r + 1, r):
        yield (cx - r, cy + dy)
        yield (cx + r, cy + dy)


def _grid_nearest(src: np.ndarray, tgt: np.ndarray) -> np.ndarray:
    """Nearest target for each source row; both arrays are (n, 2) [x, y].

    ``tgt`` must be sorted by (y, x): ring candidates are gathered in that
    order so ``argmin`` lands on the smallest (y, x) among exact ties.
    """
    cell = CELL_SIZE
    buckets: dict[Coord, list[int]] = {}
    tcx = tgt[:, 0] // cell
    tcy = tgt[:, 1] // cell
    for i, (cx, cy) in enumerate(zip(tcx.tolist(), tcy.tolist())):
        buckets.setdefault((cx, cy), []).append(i)
    np_buckets = {k: np.asarray(v, dtype=np.intp) for k, v in buckets.items()}

    scx = src[:, 0] // cell
    scy = src[:, 1] // cell
    order = np.lexsort((scx, scy))
    keys = np.stack([scy[order], scx[order]], axis=1)
    change = np.nonzero(np.any(keys[1:] != keys[:-1], axis=1))[0] + 1
    starts = np.concatenate([[0], change, [len(order)]])

    # One ring past this covers every bucket from any source cell.
    r_cap = 1 + max(
        int(max(scx.max(), tcx.max()) - min(scx.min(), tcx.min())),
        int(max(scy.max(), tcy.max()) - min(scy.min(), tcy.min())),
    )
    inf = np.iinfo(np.int64).max
    out = np.empty_like(src)
    for gi in range(len(starts) - 1):
        a, b = starts[gi], starts[gi + 1]
        rows = order[a:b]
        pts = src[rows]
        k = len(rows)
        best_d2 = np.full(k, inf, dtype=np.int64)
        best_x = np.zeros(k, dtype=np.int64)
        best_y = np.zeros(k, dtype=np.int64)
        ccy, ccx = int(keys[a, 0]), int(keys[a, 1])
        r = 0
        while True:
            found = [np_buckets[c] for c in _ring_cells(ccx, ccy, r) if c in np_buckets]
            if found:
                idx = np.sort(np.concatenate(found)) if len(found) > 1 else found[0]
                cand = tgt[idx]
                dx = pts[:, 0:1] - cand[:, 0]
                dy = pts[:, 1:2] - cand[:, 1]
                d2 = dx * dx + dy * dy
                j = np.argmin(d2, axis=1)
                rng = np.arange(k)
                nd2 = d2[rng, j]
                nx = cand[j, 0]
                ny = cand[j, 1]
                upd = (nd2 < best_d2) | (
                    (nd2 == best_d2)
                    & ((ny < best_y) | ((ny == best_y) & (nx < best_x)))
                )
                best_d2 = np.where(upd, nd2, best_d2)
                best_x = np.where(upd, nx, best_x)
                best_y = np.where(upd, ny, best_y)
            # Ring r+1 pixels are at least 8(r+1)-7 away from anywhere in
            # this cell; stop once no tie or improvement can come from it.
            lb = cell * (r + 1) - (cell - 1)
            if lb * lb > int(best_d2.max()):
                break
            r += 1
            if r > r_cap:
                break
        out[rows, 0] = best_x
        out[rows, 1] = best_y
    return out


def _nearest_map(src: PixelSet, tgt: PixelSet) -> dict[Coord, Coord]:
    src_pts = src.sorted_pixels()
    tgt_pts = tgt.sorted_pixels()
    if len(src_pts) * len(tgt_pts) <= _FULL_SCAN_LIMIT:
        return {p: _scan_nearest(p, tgt_pts) for p in src_pts}
    matched = _grid_nearest(src.to_array(), tgt.to_array())
    return {
        p: (int(mx), int(my))
        for p, (mx, my) in zip(src_pts, matched.tolist())
    }


def _classification(
    forward: dict[Coord, Coord],
    backward: dict[Coord, Coord],
    next_pixels: list[Coord],
) -> dict[Coord, PixelClass]:
    """Assign one class per later-step pixel from the two match maps.

    A pixel is known when it forms an exclusive reciprocal pair. Otherwise
    it is growth while at most one forward match arrives from another
    pixel, decay while at most one other pixel shares its backward target,
    and irregular when both bounds are exceeded. Checked in that order, so
    the four classes partition the step. Brand-new pixels receive no
    forward match at all and land in growth.
    """
    fwd_in = Counter(forward.values())
    bwd_in = Counter(backward.values())
    out: dict[Coord, PixelClass] = {}
    for q in next_pixels:
        b = backward[q]
        recip = forward.get(b) == q
        extra_fwd = fwd_in.get(q, 0) - (1 if recip else 0)
        extra_bwd = bwd_in[b] - 1
        if recip and extra_fwd == 0 and extra_bwd == 0:
            out[q] = PixelClass.KNOWN
        elif extra_fwd <= 1:
            out[q] = PixelClass.GROWTH
        elif extra_bwd <= 1:
            out[q] = PixelClass.DECAY
        else:
            out[q] = PixelClass.IRREGULAR
    return out


def match(prev: PixelSet, nxt: PixelSet) -> MatchSet:
    """Match two consecutive pixel sets in both directions and classify.

    When either set is empty no distances exist: both maps stay empty, all
    later-step pixels are classified growth, and the step is logged as
    degenerate.
    """
    if len(prev) == 0 or len(nxt) == 0:
        logger.warning(
            "degenerate match step %d -> %d (%d -> %d pixels)",
            prev.index, nxt.index, len(prev), len(nxt),
        )
        classification = {q: PixelClass.GROWTH for q in nxt.pixels}
        return MatchSet(prev.index, nxt.index, {}, {}, classification)
    forward = _nearest_map(prev, nxt)
    backward = _nearest_map(nxt, prev)
    classification = _classification(forward, backward, nxt.sorted_pixels())
    return MatchSet(prev.index, nxt.index, forward, backward, classification)


def classify(matches: MatchSet, nxt: PixelSet) -> MatchSet:
    """Recompute the classification of a MatchSet from its match maps."""
    if not matches.forward or not matches.backward:
        classification = {q: PixelClass.GROWTH for q in nxt.pixels}
    else:
        classification = _classification(
            matches.forward, matches.backward, nxt.sorted_pixels()
        )
    return replace(matches, classification=classification)


def match_all(sequence: list[PixelSet], jobs: int = 1) -> list[MatchSet]:
    """Match every consecutive pair of the sequence, in time order."""
    if len(sequence) < 2:
        raise InputError("matching needs at least 2 time steps")
    pairs = list(zip(sequence[:-1], sequence[1:]))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(lambda pq: match(*pq), pairs))
    return [match(p, q) for p, q in pairs]


def export_matches_csv(matches: MatchSet, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["direction", "from_x", "from_y", "to_x", "to_y"])
        for p in sorted(matches.forward, key=lambda c: (c[1], c[0])):
            q = matches.forward[p]
            writer.writerow(["forward", p[0], p[1], q[0], q[1]])
        for q in sorted(matches.backward, key=lambda c: (c[1], c[0])):
            p = matches.backward[q]
            writer.writerow(["backward", q[0], q[1], p[0], p[1]])


def export_classes_csv(matches: MatchSet, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "class"])
        for q in sorted(matches.classification, key=lambda c: (c[1], c[0])):
            writer.writerow([q[0], q[1], matches.classification[q].value])
