"""Shell game: objects slide on a grid, cones cover and uncover smaller objects.

The task is to find the cell of the snitch in the final frame, even when it
is hidden under one or several nested cones.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..constants import SHELL_GAME_QUESTION_TYPE
from ..random_number_generator import SeedLike
from .attributes import PALETTE, SNITCH_COLOR, Color, Shape, SizeTier
from .config import ShellGameConfig
from .exceptions import OracleError, TraceError
from .render import Scene, SceneObject, render_frame_u8

SNITCH = 0
"""Index of the snitch among the objects of an episode"""


class EventKind(str, Enum):
    MOVE = "move"
    COVER = "cover"
    UNCOVER = "uncover"

    __str__ = str.__str__


@dataclass(frozen=True)
class ShellObject:
    shape: Shape
    size: SizeTier
    color: int
    """Palette index, -1 for the snitch"""

    @property
    def is_snitch(self) -> bool:
        return self.color < 0

    @property
    def rgb(self) -> Color:
        return SNITCH_COLOR if self.is_snitch else PALETTE[self.color]


@dataclass(frozen=True)
class ShellEvent:
    frame: int
    """First frame showing the effect of the event"""
    kind: EventKind
    obj: int
    target: int
    """Destination cell of a move or an uncover, covered object of a cover"""

    def to_text(self) -> str:
        return f"event {self.frame} {self.kind} {self.obj} {self.target}"


@dataclass(frozen=True)
class FrameState:
    cells: Tuple[int, ...]
    """Cell of every object"""
    visible: Tuple[bool, ...]
    """Whether every object is drawn, i.e. not covered"""

    @property
    def visible_count(self) -> int:
        return sum(self.visible)


class ShellWorld:
    """Symbolic state of a shell game.

    A cover puts a cone on a smaller object, which then travels with the cone.
    Covered objects are hidden; a cone may cover a cone covering something else.
    """

    def __init__(self, grid_size: int, objects: Sequence[ShellObject], cells: Sequence[int]) -> None:
        if len(set(cells)) != len(cells):
            raise TraceError("Objects must start in distinct cells.")
        if any(not 0 <= c < grid_size**2 for c in cells):
            raise TraceError(f"Start cells must lie in [0, {grid_size**2}).")
        self.grid_size = grid_size
        self.objects = tuple(objects)
        self.cells: List[int] = list(cells)
        self.covered_by: List[Optional[int]] = [None] * len(objects)
        self.covering: List[Optional[int]] = [None] * len(objects)

    def is_top_level(self, obj: int) -> bool:
        return self.covered_by[obj] is None

    def top_level(self) -> List[int]:
        return [i for i in range(len(self.objects)) if self.is_top_level(i)]

    def free_cells(self) -> List[int]:
        occupied = {self.cells[i] for i in self.top_level()}
        return [c for c in range(self.grid_size**2) if c not in occupied]

    def stack(self, obj: int) -> List[int]:
        """The object followed by everything it covers, recursively."""
        chain = [obj]
        while (child := self.covering[chain[-1]]) is not None:
            chain.append(child)
        return chain

    def can_cover(self, coverer: int, target: int) -> bool:
        return (
            coverer != target
            and self.objects[coverer].shape is Shape.CONE
            and self.is_top_level(coverer)
            and self.covering[coverer] is None
            and self.is_top_level(target)
            and self.objects[coverer].size > self.objects[target].size
        )

    def apply(self, event: ShellEvent) -> None:
        obj, n = event.obj, len(self.objects)
        if not 0 <= obj < n or not self.is_top_level(obj):
            raise TraceError(f"{event}: object {obj} cannot act.")
        if event.kind is EventKind.COVER:
            if not 0 <= event.target < n or not self.can_cover(obj, event.target):
                raise TraceError(f"{event}: object {obj} cannot cover {event.target}.")
            self.cells[obj] = self.cells[event.target]
            self.covering[obj] = event.target
            self.covered_by[event.target] = obj
            return
        if event.target not in self.free_cells():
            raise TraceError(f"{event}: cell {event.target} is not free.")
        if event.kind is EventKind.UNCOVER:
            if (child := self.covering[obj]) is None:
                raise TraceError(f"{event}: object {obj} covers nothing.")
            self.covering[obj] = None
            self.covered_by[child] = None
            self.cells[obj] = event.target
            return
        for i in self.stack(obj):
            self.cells[i] = event.target

    def check_invariants(self) -> None:
        """Covering is a forest and covered objects share their top-most coverer's cell.

        Raises:
            OracleError: an invariant is violated
        """
        n = len(self.objects)
        for i in range(n):
            if (child := self.covering[i]) is not None and self.covered_by[child] != i:
                raise OracleError(f"Object {i} covers {child} which is not covered by it.")
            top, depth = i, 0
            while (parent := self.covered_by[top]) is not None:
                top, depth = parent, depth + 1
                if depth > n:
                    raise OracleError(f"Covering cycle through object {i}.")
            if self.cells[i] != self.cells[top]:
                raise OracleError(f"Object {i} is not in the cell of its coverer {top}.")
        top_cells = [self.cells[i] for i in self.top_level()]
        if len(set(top_cells)) != len(top_cells):
            raise OracleError("Two uncovered objects share a cell.")

    def snapshot(self) -> FrameState:
        return FrameState(
            cells=tuple(self.cells),
            visible=tuple(self.is_top_level(i) for i in range(len(self.objects))),
        )

    def scene(self) -> Scene:
        g = self.grid_size
        return Scene(
            rows=g,
            cols=g,
            objects=tuple(
                SceneObject(self.cells[i] // g, self.cells[i] % g, o.shape, o.size, o.rgb)
                for i, o in enumerate(self.objects)
                if self.is_top_level(i)
            ),
        )


@dataclass(frozen=True)
class ShellGameEpisode:
    grid_size: int
    objects: Tuple[ShellObject, ...]
    start_cells: Tuple[int, ...]
    events: Tuple[ShellEvent, ...]
    states: Tuple[FrameState, ...]
    """Symbolic state shown by every frame"""
    label: int
    """Final cell of the snitch"""
    pixels: Optional[np.ndarray] = None
    """Rendered frames (L, H, W, 3) uint8"""

    @property
    def frames(self) -> np.ndarray:
        """Rendered frames with values in [0, 1]"""
        if self.pixels is None:
            raise ValueError("Episode was generated without rendering.")
        return self.pixels.astype(np.float32) / 255.0

    @property
    def num_frames(self) -> int:
        return len(self.states)

    @property
    def question_type(self) -> int:
        return SHELL_GAME_QUESTION_TYPE

    def trace(self) -> str:
        return format_shell_trace(
            self.grid_size, self.objects, self.start_cells, self.events, len(self.states), self.label
        )


def format_shell_trace(
    grid_size: int,
    objects: Sequence[ShellObject],
    start_cells: Sequence[int],
    events: Sequence[ShellEvent],
    num_frames: int,
    label: int,
) -> str:
    lines = [f"shell_game {grid_size} {num_frames}"]
    lines += [
        f"object {i} {o.shape} {int(o.size)} {o.color} {cell}"
        for i, (o, cell) in enumerate(zip(objects, start_cells))
    ]
    lines += [e.to_text() for e in events]
    lines.append(f"label {label}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ShellTrace:
    grid_size: int
    num_frames: int
    objects: Tuple[ShellObject, ...]
    start_cells: Tuple[int, ...]
    events: Tuple[ShellEvent, ...]
    label: int


def parse_shell_trace(text: str) -> ShellTrace:
    """Parse the text written by `format_shell_trace`.

    Raises:
        TraceError: the text is malformed
    """
    objects: List[ShellObject] = []
    cells: List[int] = []
    events: List[ShellEvent] = []
    header: Optional[Tuple[int, int]] = None
    label: Optional[int] = None
    try:
        for lineno, line in enumerate(text.splitlines(), 1):
            fields = line.split()
            if not fields:
                continue
            if fields[0] == "shell_game" and len(fields) == 3:
                header = (int(fields[1]), int(fields[2]))
            elif fields[0] == "object" and len(fields) == 6:
                _, _, shape, size, color, cell = fields
                objects.append(ShellObject(Shape(shape), SizeTier(int(size)), int(color)))
                cells.append(int(cell))
            elif fields[0] == "event" and len(fields) == 5:
                _, frame, kind, obj, target = fields
                events.append(ShellEvent(int(frame), EventKind(kind), int(obj), int(target)))
            elif fields[0] == "label" and len(fields) == 2:
                label = int(fields[1])
            else:
                raise TraceError(f"line {lineno}: unexpected {line!r}.")
    except ValueError as exc:
        raise TraceError(f"Malformed shell-game trace: {exc}") from None
    if header is None or label is None:
        raise TraceError("Shell-game trace lacks its header or its label.")
    return ShellTrace(header[0], header[1], tuple(objects), tuple(cells), tuple(events), label)


def replay(trace: ShellTrace) -> List[FrameState]:
    """Frame states obtained by replaying the events, invariants checked at every step."""
    world = ShellWorld(trace.grid_size, trace.objects, trace.start_cells)
    by_frame: Dict[int, List[ShellEvent]] = {}
    for event in trace.events:
        by_frame.setdefault(event.frame, []).append(event)
    states = []
    for frame in range(trace.num_frames):
        for event in by_frame.get(frame, []):
            world.apply(event)
        world.check_invariants()
        states.append(world.snapshot())
    return states


def recompute_label(trace: ShellTrace) -> int:
    """Final snitch cell according to the symbolic events only."""
    return replay(trace)[-1].cells[SNITCH]


def _sample_objects(cfg: ShellGameConfig, rng: np.random.Generator) -> List[ShellObject]:
    objects = [ShellObject(Shape.SPHERE, SizeTier.SMALL, -1)]
    objects.append(ShellObject(Shape.CONE, SizeTier.LARGE, int(rng.integers(len(PALETTE)))))
    for _ in range(cfg.num_objects - 2):
        objects.append(
            ShellObject(
                Shape(rng.choice([s.value for s in Shape])),
                SizeTier(int(rng.integers(len(SizeTier)))),
                int(rng.integers(len(PALETTE))),
            )
        )
    return objects


def _sample_event(world: ShellWorld, frame: int, cover_rate: float, rng: np.random.Generator) -> ShellEvent:
    top = world.top_level()
    covers = [(c, t) for c in top for t in top if world.can_cover(c, t)]
    free = world.free_cells()
    uncovers = [c for c in top if world.covering[c] is not None] if free else []
    if (covers or uncovers) and rng.random() < cover_rate:
        options = [(EventKind.COVER, c, t) for c, t in covers]
        options += [(EventKind.UNCOVER, c, -1) for c in uncovers]
        kind, obj, target = options[int(rng.integers(len(options)))]
        if kind is EventKind.UNCOVER:
            target = int(rng.choice(free))
        return ShellEvent(frame, kind, obj, target)
    obj = int(rng.choice(top))
    return ShellEvent(frame, EventKind.MOVE, obj, int(rng.choice(free)))


def gen_shell_game(seed: SeedLike, cfg: ShellGameConfig, *, render: bool = True) -> ShellGameEpisode:
    """Generate a shell-game episode from a seed.

    The symbolic events are sampled first; frames are rendered from the
    symbolic states and never take part in labelling.

    Args:
        seed: integer or sequence of integers seeding the episode
        cfg: simulator configuration
        render: render the frames
    """
    rng = np.random.default_rng(seed)
    objects = _sample_objects(cfg, rng)
    start = [int(c) for c in rng.choice(cfg.num_cells, len(objects), replace=False)]
    world = ShellWorld(cfg.grid_size, objects, start)
    events, states, pixels = [], [world.snapshot()], []
    if render:
        pixels.append(render_frame_u8(world.scene(), cfg.image_size, cfg.image_size))
    for frame in range(1, cfg.num_frames):
        if world.free_cells() and rng.random() < cfg.event_rate:
            event = _sample_event(world, frame, cfg.cover_rate, rng)
            world.apply(event)
            events.append(event)
        world.check_invariants()
        states.append(world.snapshot())
        if render:
            pixels.append(render_frame_u8(world.scene(), cfg.image_size, cfg.image_size))
    return ShellGameEpisode(
        grid_size=cfg.grid_size,
        objects=tuple(objects),
        start_cells=tuple(start),
        events=tuple(events),
        states=tuple(states),
        label=world.cells[SNITCH],
        pixels=np.stack(pixels) if render else None,
    )
