"""Frame loading, binarization, and iterative thinning to 1-pixel skeletons.

Coordinates are (x, y) with x growing rightwards and y growing downwards,
matching raster order. Grids are stored as numpy arrays indexed [y, x].
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class Frame:
    """One grayscale time step; ``values`` is a (height, width) uint8 grid."""

    width: int
    height: int
    values: np.ndarray
    index: int = 0

    def __post_init__(self):
        if self.values.shape != (self.height, self.width):
            raise InputError(
                f"frame {self.index}: value grid {self.values.shape} does not "
                f"match {self.height}x{self.width}"
            )


@dataclass(frozen=True)
class BinaryMask:
    """Boolean foreground grid with the dimensions of its source frame."""

    width: int
    height: int
    foreground: np.ndarray

    def pixel_count(self) -> int:
        return int(self.foreground.sum())


@dataclass(frozen=True)
class PixelSet:
    """The skeleton pixels of one time step as a set of (x, y) coordinates."""

    width: int
    height: int
    pixels: frozenset[tuple[int, int]]
    index: int = 0

    def __len__(self) -> int:
        return len(self.pixels)

    def sorted_pixels(self) -> list[tuple[int, int]]:
        """Pixels in raster order (y, then x); the canonical iteration order."""
        return sorted(self.pixels, key=lambda p: (p[1], p[0]))

    def to_array(self) -> np.ndarray:
        """(n, 2) int64 array of [x, y] rows in raster order."""
        if not self.pixels:
            return np.empty((0, 2), dtype=np.int64)
        return np.array(self.sorted_pixels(), dtype=np.int64)

    def to_mask(self) -> BinaryMask:
        grid = np.zeros((self.height, self.width), dtype=bool)
        for x, y in self.pixels:
            grid[y, x] = True
        return BinaryMask(self.width, self.height, grid)


def binarize(frame: Frame, threshold: int, polarity: str = "above") -> BinaryMask:
    """Threshold a frame into a foreground mask.

    ``polarity`` selects which side of the threshold is foreground:
    "above" keeps intensities strictly greater than ``threshold``,
    "below" keeps intensities strictly smaller. Strict comparison keeps a
    0/255 mask with threshold 0 or 255 sensible in both polarities.
    """
    if not 0 <= threshold <= 255:
        raise ValueError(f"threshold {threshold} outside [0, 255]")
    if polarity == "above":
        fg = frame.values > threshold
    elif polarity == "below":
        fg = frame.values < threshold
    else:
        raise ValueError(f"unknown polarity {polarity!r} (use 'above' or 'below')")
    return BinaryMask(frame.width, frame.height, fg)


# Ring offsets around a pixel, clockwise from north. Consecutive entries are
# 8-adjacent; so are some non-consecutive ones (e.g. N and E), which matters
# for the connectivity guard below.
_RING = ((0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1))

# _RING_ADJ[i] = bitmask of ring positions whose pixels are 8-adjacent to
# ring position i.
_RING_ADJ = tuple(
    sum(
        1 << j
        for j, (bx, by) in enumerate(_RING)
        if j != i and max(abs(ax - bx), abs(ay - by)) <= 1
    )
    for i, (ax, ay) in enumerate(_RING)
)


def _shifted(grid: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """Grid translated by (-dx, -dy) so out[y, x] = grid[y+dy, x+dx]; border reads as background."""
    h, w = grid.shape
    out = np.zeros_like(grid)
    ys = slice(max(dy, 0), h + min(dy, 0))
    xs = slice(max(dx, 0), w + min(dx, 0))
    yd = slice(max(-dy, 0), h + min(-dy, 0))
    xd = slice(max(-dx, 0), w + min(-dx, 0))
    out[yd, xd] = grid[ys, xs]
    return out


def _thin_candidates(grid: np.ndarray, subiteration: int) -> np.ndarray:
    """Deletable pixels of one subiteration per the classical two-pass test.

    Conditions: foreground, neighbor count in [2, 6], exactly one 0->1
    transition around the ring, and the directional products of the given
    subiteration all contain a background pixel.
    """
    ring = [_shifted(grid, dx, dy) for dx, dy in _RING]
    n, ne, e, se, s, sw, w, nw = ring
    b = sum(r.astype(np.uint8) for r in ring)
    seq = ring + [ring[0]]
    a = sum((~seq[i] & seq[i + 1]).astype(np.uint8) for i in range(8))
    cond = grid & (b >= 2) & (b <= 6) & (a == 1)
    if subiteration == 0:
        cond &= ~(n & e & s) & ~(e & s & w)
    else:
        cond &= ~(n & e & w) & ~(n & s & w)
    return cond


def _deletion_keeps_connectivity(grid: np.ndarray, x: int, y: int) -> bool:
    """True when removing (x, y) cannot change the 8-component count.

    The pixel's current foreground neighbors must be non-empty and form a
    single 8-connected group inside the 3x3 window; any path through the
    pixel can then be rerouted through that group.
    """
    h, w = grid.shape
    present = 0
    for i, (dx, dy) in enumerate(_RING):
        nx, ny = x + dx, y + dy
        if 0 <= nx < w and 0 <= ny < h and grid[ny, nx]:
            present |= 1 << i
    if not present:
        return False
    start = present & -present
    reached = start
    frontier = start
    while frontier:
        grow = 0
        rest = frontier
        while rest:
            bit = rest & -rest
            rest ^= bit
            grow |= _RING_ADJ[bit.bit_length() - 1]
        frontier = grow & present & ~reached
        reached |= frontier
    return reached == present


def thin(mask: BinaryMask) -> PixelSet:
    """Reduce a mask to a 1-pixel-wide skeleton by iterative thinning.

    Runs the classical two-subiteration deletion test until a full cycle
    deletes nothing. Candidates for each subiteration are found on the grid
    state at its start, then removed one at a time in raster order; a
    removal is skipped when it would alter the 8-connected component count
    (the parallel formulation can delete 2x2 blocks outright). The result is
    a subset of the foreground, a fixed point of the pass, and preserves the
    component count exactly.

    Masks narrower than 3 pixels in either dimension pass through unchanged.
    """
    grid = mask.foreground.astype(bool).copy()
    if mask.width >= 3 and mask.height >= 3:
        while True:
            deleted = 0
            for sub in (0, 1):
                cand = _thin_candidates(grid, sub)
                ys, xs = np.nonzero(cand)
                for y, x in zip(ys.tolist(), xs.tolist()):
                    if _deletion_keeps_connectivity(grid, x, y):
                        grid[y, x] = False
                        deleted += 1
            if not deleted:
                break
    ys, xs = np.nonzero(grid)
    pixels = frozenset(zip(xs.tolist(), ys.tolist()))
    return PixelSet(mask.width, mask.height, pixels)


def read_coords_file(path: Path) -> tuple[int, int, frozenset[tuple[int, int]]]:
    """Parse the pre-skeletonized text format: "# width height" then "x y" lines."""
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines:
        raise InputError(f"{path}: empty coordinate file")
    header = re.match(r"#\s+(\d+)\s+(\d+)\s*$", lines[0])
    if not header:
        raise InputError(f'{path}: first line must be "# width height"')
    width, height = int(header.group(1)), int(header.group(2))
    pixels = set()
    for ln, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise InputError(f"{path}:{ln}: expected 'x y', got {line!r}")
        try:
            x, y = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise InputError(f"{path}:{ln}: non-integer coordinate") from exc
        if not (0 <= x < width and 0 <= y < height):
            raise InputError(f"{path}:{ln}: pixel ({x}, {y}) outside {width}x{height}")
        pixels.add((x, y))
    return width, height, frozenset(pixels)


def write_coords_file(path: Path, pixels: PixelSet) -> None:
    lines = [f"# {pixels.width} {pixels.height}"]
    lines.extend(f"{x} {y}" for x, y in pixels.sorted_pixels())
    path.write_text("\n".join(lines) + "\n")


def _read_image_frame(path: Path, index: int) -> Frame:
    from PIL import Image

    try:
        with Image.open(path) as img:
            gray = img.convert("L")
            values = np.asarray(gray, dtype=np.uint8)
    except OSError as exc:
        raise InputError(f"cannot read image {path}: {exc}") from exc
    h, w = values.shape
    return Frame(w, h, values, index)


_FORMAT_SUFFIXES = {
    "png": (".png",),
    "pgm": (".pgm",),
    "coords": (".txt", ".coords"),
}


@dataclass(frozen=True)
class LoadConfig:
    """Binarization settings and input format for sequence loading."""

    threshold: int = 128
    polarity: str = "above"
    format: str = "auto"


def _frame_paths(source: Path, fmt: str) -> list[Path]:
    if source.is_file():
        if source.suffix.lower() == ".json":
            try:
                manifest = json.loads(source.read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise InputError(f"cannot read manifest {source}: {exc}") from exc
            names = manifest.get("frames")
            if not isinstance(names, list) or not names:
                raise InputError(f'{source}: manifest must contain a non-empty "frames" list')
            return [source.parent / name for name in names]
        return [source]
    if not source.is_dir():
        raise InputError(f"input source {source} does not exist")
    if fmt == "auto":
        for candidate in ("png", "pgm", "coords"):
            found = sorted(
                p for p in source.iterdir()
                if p.suffix.lower() in _FORMAT_SUFFIXES[candidate]
            )
            if found:
                return found
        raise InputError(f"{source}: no frame files found")
    suffixes = _FORMAT_SUFFIXES.get(fmt)
    if suffixes is None:
        raise InputError(f"unknown input format {fmt!r}")
    found = sorted(p for p in source.iterdir() if p.suffix.lower() in suffixes)
    if not found:
        raise InputError(f"{source}: no {fmt} frames found")
    return found


def load_sequence(source: str | Path, config: LoadConfig = LoadConfig()) -> list[PixelSet]:
    """Load a time-ordered sequence of skeletons from images or coordinate files.

    Image frames (PNG, binary PGM) are binarized with the configured
    threshold/polarity and thinned. Coordinate files are taken as already
    skeletonized and passed through. All frames must share one size.
    """
    paths = _frame_paths(Path(source), config.format)
    result: list[PixelSet] = []
    dims: tuple[int, int] | None = None
    for index, path in enumerate(paths):
        if path.suffix.lower() in _FORMAT_SUFFIXES["coords"]:
            width, height, pixels = read_coords_file(path)
            ps = PixelSet(width, height, pixels, index)
        else:
            frame = _read_image_frame(path, index)
            ps_raw = thin(binarize(frame, config.threshold, config.polarity))
            ps = PixelSet(ps_raw.width, ps_raw.height, ps_raw.pixels, index)
        if dims is None:
            dims = (ps.width, ps.height)
        elif dims != (ps.width, ps.height):
            raise InputError(
                f"{path}: frame size {ps.width}x{ps.height} differs from "
                f"first frame {dims[0]}x{dims[1]}"
            )
        result.append(ps)
    return result
