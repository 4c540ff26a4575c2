"""Deterministic synthetic skeleton sequences with exact ground truth.

Scripts grow "fingers" (pixel paths) by explicit events, so the true
creation time of every pixel is the step of the event that placed it.
Geometry is kept clean by construction: a new pixel may touch only the
pixel it extends (plus, for scripted loop closures, exactly one other
tip), which guarantees thin, valid skeletons without re-thinning.

Kinds of events: extend-tip, spawn-branch, inject-noise-spur (present for
exactly one frame), delete-segment (a finger vanishes for good).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .errors import GenerationError, InputError
from .skeletonize import PixelSet, write_coords_file

Coord = tuple[int, int]

DIRECTIONS = {
    "n": (0, -1), "ne": (1, -1), "e": (1, 0), "se": (1, 1),
    "s": (0, 1), "sw": (-1, 1), "w": (-1, 0), "nw": (-1, -1),
}

EXTEND_TIP = "extend-tip"
SPAWN_BRANCH = "spawn-branch"
INJECT_NOISE_SPUR = "inject-noise-spur"
DELETE_SEGMENT = "delete-segment"
EVENT_KINDS = (EXTEND_TIP, SPAWN_BRANCH, INJECT_NOISE_SPUR, DELETE_SEGMENT)


@dataclass(frozen=True)
class FingerSeed:
    """A finger's starting pixel and initial growth direction."""

    name: str
    origin: Coord
    direction: str


@dataclass(frozen=True)
class GrowthEvent:
    step: int
    kind: str
    finger: str
    amount: int = 1           # extend-tip: pixels added; 0 draws 1-2 from the rng
    direction: str | None = None
    at_offset: int = 0        # spawn/spur: attach pixel index within the finger
    new_finger: str | None = None
    length: int = 1           # spawn: initial child pixels; spur: spur pixels
    allow_join: bool = False  # extend-tip: may close a loop onto one other tip

    def describe(self) -> str:
        return f"step {self.step} {self.kind} on finger {self.finger!r}"


@dataclass(frozen=True)
class GrowthScript:
    seed: int
    width: int
    height: int
    steps: int
    fingers: tuple[FingerSeed, ...]
    events: tuple[GrowthEvent, ...] = ()


@dataclass(frozen=True)
class GroundTruth:
    """Per step: the true creation time of every pixel, and which pixels
    are one-frame noise spurs."""

    times: tuple[dict[Coord, int], ...]
    noise: tuple[frozenset[Coord], ...]


class _Finger:
    def __init__(self, name: str, origin: Coord, direction: str, step: int):
        self.name = name
        self.pixels: list[tuple[Coord, int]] = [(origin, step)]
        self.direction = direction
        self.alive = True

    def tip(self) -> Coord:
        return self.pixels[-1][0]


class _World:
    def __init__(self, script: GrowthScript):
        self.script = script
        self.rng = random.Random(script.seed)
        self.fingers: dict[str, _Finger] = {}
        self.occupied: dict[Coord, str] = {}
        self.spur_pixels: list[Coord] = []  # live only for the current step

    def _neighbors_in_use(self, p: Coord) -> list[Coord]:
        x, y = p
        out = []
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                if dx == 0 and dy == 0:
                    continue
                q = (x + dx, y + dy)
                if q in self.occupied:
                    out.append(q)
        return out

    def place(self, p: Coord, attach: Coord | None, owner: str,
              event: GrowthEvent | None, allow_join: bool = False) -> None:
        what = event.describe() if event else f"seed of finger {owner!r}"
        if not (0 <= p[0] < self.script.width and 0 <= p[1] < self.script.height):
            raise GenerationError(f"{what}: pixel {p} leaves the {self.script.width}x"
                                  f"{self.script.height} frame")
        if p in self.occupied:
            raise GenerationError(f"{what}: pixel {p} is already occupied")
        touching = self._neighbors_in_use(p)
        if attach is None:
            if touching:
                raise GenerationError(f"{what}: seed {p} touches existing pixels {touching}")
        elif allow_join:
            others = [t for t in touching if t != attach]
            if attach not in touching or len(others) > 1:
                raise GenerationError(
                    f"{what}: joining pixel {p} must touch its tip and at most "
                    f"one other pixel, touches {touching}"
                )
        elif touching != [attach] and set(touching) != {attach}:
            raise GenerationError(
                f"{what}: pixel {p} would touch {touching}, expected only {attach}"
            )
        self.occupied[p] = owner


def _direction_vector(name: str | None, event: GrowthEvent) -> Coord:
    if name is None:
        raise GenerationError(f"{event.describe()}: missing direction")
    try:
        return DIRECTIONS[name]
    except KeyError:
        raise GenerationError(f"{event.describe()}: unknown direction {name!r}") from None


def _apply_event(world: _World, event: GrowthEvent, step: int) -> list[tuple[Coord, int]]:
    spur: list[tuple[Coord, int]] = []
    finger = world.fingers.get(event.finger)
    if finger is None or not finger.alive:
        raise GenerationError(f"{event.describe()}: finger does not exist or is deleted")

    if event.kind == EXTEND_TIP:
        if event.direction is not None:
            finger.direction = event.direction
        dx, dy = _direction_vector(finger.direction, event)
        amount = event.amount if event.amount else world.rng.randint(1, 2)
        if not 1 <= amount <= 2:
            raise GenerationError(f"{event.describe()}: amount must be 1 or 2")
        for _ in range(amount):
            tip = finger.tip()
            new = (tip[0] + dx, tip[1] + dy)
            world.place(new, tip, finger.name, event, allow_join=event.allow_join)
            finger.pixels.append((new, step))

    elif event.kind == SPAWN_BRANCH:
        if not event.new_finger or event.new_finger in world.fingers:
            raise GenerationError(f"{event.describe()}: needs an unused new_finger name")
        dx, dy = _direction_vector(event.direction, event)
        try:
            attach = finger.pixels[event.at_offset][0]
        except IndexError:
            raise GenerationError(
                f"{event.describe()}: at_offset {event.at_offset} outside finger"
            ) from None
        child = _Finger(event.new_finger, attach, event.direction, step)
        child.pixels.clear()
        prev = attach
        for _ in range(max(1, event.length)):
            new = (prev[0] + dx, prev[1] + dy)
            world.place(new, prev, child.name, event)
            child.pixels.append((new, step))
            prev = new
        world.fingers[child.name] = child

    elif event.kind == INJECT_NOISE_SPUR:
        dx, dy = _direction_vector(event.direction, event)
        try:
            attach = finger.pixels[event.at_offset][0]
        except IndexError:
            raise GenerationError(
                f"{event.describe()}: at_offset {event.at_offset} outside finger"
            ) from None
        prev = attach
        for _ in range(max(1, event.length)):
            new = (prev[0] + dx, prev[1] + dy)
            world.place(new, prev, "__spur__", event)
            spur.append((new, step))
            world.spur_pixels.append(new)
            prev = new

    elif event.kind == DELETE_SEGMENT:
        finger.alive = False
        for p, _ in finger.pixels:
            del world.occupied[p]

    else:
        raise GenerationError(f"{event.describe()}: unknown event kind")
    return spur


def generate(script: GrowthScript, validate: bool = True) -> tuple[list[PixelSet], GroundTruth]:
    """Run a growth script into a pixel-set sequence plus its ground truth.

    Identical scripts regenerate bit-identical output. With ``validate``
    each frame is checked to be a fixed point of the thinning pass.
    """
    if script.steps < 1:
        raise GenerationError("script needs at least 1 step")
    for ev in script.events:
        if ev.kind not in EVENT_KINDS:
            raise GenerationError(f"{ev.describe()}: unknown event kind")
        if not 0 <= ev.step < script.steps:
            raise GenerationError(f"{ev.describe()}: step outside the script range")

    world = _World(script)
    for seed in script.fingers:
        if seed.direction not in DIRECTIONS:
            raise GenerationError(f"seed finger {seed.name!r}: unknown direction")
        if seed.name in world.fingers:
            raise GenerationError(f"duplicate finger name {seed.name!r}")
        world.place(seed.origin, None, seed.name, None)
        world.fingers[seed.name] = _Finger(seed.name, seed.origin, seed.direction, 0)

    by_step: dict[int, list[GrowthEvent]] = {}
    for ev in script.events:
        by_step.setdefault(ev.step, []).append(ev)

    frames: list[PixelSet] = []
    truth_times: list[dict[Coord, int]] = []
    truth_noise: list[frozenset[Coord]] = []
    for step in range(script.steps):
        spur: list[tuple[Coord, int]] = []
        for ev in by_step.get(step, ()):
            spur.extend(_apply_event(world, ev, step))

        times: dict[Coord, int] = {}
        for finger in world.fingers.values():
            if finger.alive:
                for p, created in finger.pixels:
                    times[p] = created
        for p, created in spur:
            times[p] = created
        frames.append(PixelSet(script.width, script.height,
                               frozenset(times), step))
        truth_times.append(times)
        truth_noise.append(frozenset(p for p, _ in spur))

        for p in world.spur_pixels:
            del world.occupied[p]
        world.spur_pixels.clear()

    if validate:
        from .skeletonize import thin

        for frame in frames:
            thinned = thin(frame.to_mask())
            if thinned.pixels != frame.pixels:
                raise GenerationError(
                    f"step {frame.index}: generated frame is not a thinning fixed point"
                )
    return frames, GroundTruth(tuple(truth_times), tuple(truth_noise))


def demo_script(steps: int = 24, width: int = 96, height: int = 96) -> GrowthScript:
    """A small three-finger script with a branch, a noise spur, and a
    deletion; handy as a CLI default and for smoke tests."""
    fingers = (
        FingerSeed("a", (8, 70), "ne"),
        FingerSeed("b", (40, 80), "ne"),
        FingerSeed("c", (70, 84), "nw"),
    )
    events: list[GrowthEvent] = []
    for step in range(1, steps):
        for name in ("a", "b", "c"):
            events.append(GrowthEvent(step, EXTEND_TIP, name, amount=2))
    third = steps // 3
    events.append(GrowthEvent(third, SPAWN_BRANCH, "a", at_offset=2 * third - 2,
                              direction="nw", new_finger="a1", length=2))
    for step in range(third + 1, steps):
        events.append(GrowthEvent(step, EXTEND_TIP, "a1", amount=1))
    events.append(GrowthEvent(2 * third, INJECT_NOISE_SPUR, "b", at_offset=2,
                              direction="se", length=2))
    events.append(GrowthEvent(steps - 4, DELETE_SEGMENT, "c"))
    events.sort(key=lambda e: e.step)
    return GrowthScript(seed=7, width=width, height=height, steps=steps,
                        fingers=fingers, events=tuple(events))


def script_to_json(script: GrowthScript) -> dict:
    return {
        "seed": script.seed,
        "width": script.width,
        "height": script.height,
        "steps": script.steps,
        "fingers": [
            {"name": f.name, "origin": list(f.origin), "direction": f.direction}
            for f in script.fingers
        ],
        "events": [
            {
                "step": e.step, "kind": e.kind, "finger": e.finger,
                "amount": e.amount, "direction": e.direction,
                "at_offset": e.at_offset, "new_finger": e.new_finger,
                "length": e.length, "allow_join": e.allow_join,
            }
            for e in script.events
        ],
    }


def script_from_json(data: dict) -> GrowthScript:
    try:
        fingers = tuple(
            FingerSeed(f["name"], (int(f["origin"][0]), int(f["origin"][1])),
                       f["direction"])
            for f in data.get("fingers", [])
        )
        events = tuple(
            GrowthEvent(
                step=int(e["step"]), kind=e["kind"], finger=e["finger"],
                amount=int(e.get("amount", 1)), direction=e.get("direction"),
                at_offset=int(e.get("at_offset", 0)),
                new_finger=e.get("new_finger"),
                length=int(e.get("length", 1)),
                allow_join=bool(e.get("allow_join", False)),
            )
            for e in data.get("events", [])
        )
        return GrowthScript(
            seed=int(data.get("seed", 0)), width=int(data["width"]),
            height=int(data["height"]), steps=int(data["steps"]),
            fingers=fingers, events=events,
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise InputError(f"malformed growth script: {exc}") from exc


def load_script(path: Path) -> GrowthScript:
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read script {path}: {exc}") from exc
    return script_from_json(data)


def write_synth_output(out_dir: Path, frames: list[PixelSet], truth: GroundTruth,
                       script: GrowthScript | None = None) -> None:
    """Emit one coordinate file per step plus a ground-truth JSON sidecar."""
    out_dir.mkdir(parents=True, exist_ok=True)
    for frame in frames:
        write_coords_file(out_dir / f"frame_{frame.index:04d}.txt", frame)
    sidecar = {
        "steps": [
            {
                "index": i,
                "pixels": [[x, y, t] for (x, y), t in
                           sorted(truth.times[i].items(), key=lambda kv: (kv[0][1], kv[0][0]))],
                "noise": [[x, y] for (x, y) in sorted(truth.noise[i], key=lambda p: (p[1], p[0]))],
            }
            for i in range(len(frames))
        ]
    }
    if script is not None:
        sidecar["script"] = script_to_json(script)
    (out_dir / "ground_truth.json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n"
    )
