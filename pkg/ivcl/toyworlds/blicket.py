"""Blicket detection: infer which objects switch the platform on.

Six context frames show object combinations put on the platform together
with whether it lit up. The task is to say what a seventh combination, the
query, does to the platform.
"""

from dataclasses import dataclass
from itertools import combinations
from typing import FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from ..constants import BlicketLabel, QuestionType
from ..exceptions import ContractViolationError
from ..random_number_generator import SeedLike
from .attributes import PALETTE, Combo, Material, Shape, SizeTier, attribute_combos
from .config import BlicketConfig
from .exceptions import OracleError, TraceError, UnsatisfiableQuestionError
from .render import PlatformState, Scene, SceneObject, render_frame_u8

NUM_CONTEXT_FRAMES = 6
MAX_ORACLE_OBJECTS = 16
"""Largest object count the hypothesis enumeration accepts"""
MAX_FRAME_OBJECTS = 3
"""Largest number of objects put on the platform at once"""
GRID_SIZE = 4
OBJECT_ROW = 2

ObjectSet = FrozenSet[int]


@dataclass(frozen=True)
class BlicketObject:
    shape: Shape
    color: int
    material: Material

    @property
    def combo(self) -> Combo:
        return (self.shape, self.color, self.material)


@dataclass(frozen=True)
class ContextFrame:
    objects: ObjectSet
    lit: bool


@dataclass(frozen=True)
class BlicketEpisode:
    objects: Tuple[BlicketObject, ...]
    blickets: Tuple[bool, ...]
    """Hidden blicketness of every object"""
    context: Tuple[ContextFrame, ...]
    query: ObjectSet
    label: BlicketLabel
    question_type: QuestionType
    pixels: Optional[np.ndarray] = None
    """Rendered context frames then query frame, (7, H, W, 3) uint8"""

    @property
    def frames(self) -> np.ndarray:
        if self.pixels is None:
            raise ValueError("Episode was generated without rendering.")
        return self.pixels.astype(np.float32) / 255.0

    @property
    def num_frames(self) -> int:
        return len(self.context) + 1

    def trace(self) -> str:
        return format_blicket_trace(
            self.objects, self.blickets, self.context, self.query, self.question_type, self.label
        )


def _bitmask(objects: ObjectSet) -> int:
    return sum(1 << i for i in objects)


def consistent_hypotheses(context: Sequence[ContextFrame], num_objects: int) -> np.ndarray:
    """Blicket assignments, as bitmasks, explaining every context frame.

    Raises:
        ContractViolationError: too many objects to enumerate
    """
    if num_objects > MAX_ORACLE_OBJECTS:
        raise ContractViolationError(
            f"Hypothesis enumeration supports at most {MAX_ORACLE_OBJECTS} objects, got {num_objects}."
        )
    hypotheses = np.arange(1 << num_objects, dtype=np.int64)
    keep = np.ones(hypotheses.shape, dtype=bool)
    for frame in context:
        keep &= ((hypotheses & _bitmask(frame.objects)) != 0) == frame.lit
    return hypotheses[keep]


def label_oracle(context: Sequence[ContextFrame], query: ObjectSet, num_objects: int) -> BlicketLabel:
    """Label of a query according to every consistent blicket assignment.

    The platform lights up when at least one blicket is on it.

    Raises:
        ContractViolationError: more than 16 objects
        OracleError: no assignment is consistent with the context
    """
    return _label(_checked_hypotheses(context, num_objects), query)


def _checked_hypotheses(context: Sequence[ContextFrame], num_objects: int) -> np.ndarray:
    hypotheses = consistent_hypotheses(context, num_objects)
    if hypotheses.size == 0:
        raise OracleError("No blicket assignment is consistent with the context frames.")
    return hypotheses


def _label(hypotheses: np.ndarray, query: ObjectSet) -> BlicketLabel:
    lights = (hypotheses & _bitmask(query)) != 0
    if lights.all():
        return BlicketLabel.ACTIVATED
    if not lights.any():
        return BlicketLabel.INACTIVE
    return BlicketLabel.UNDETERMINED


def undetermined_objects(context: Sequence[ContextFrame], num_objects: int) -> List[int]:
    return _undetermined(consistent_hypotheses(context, num_objects), num_objects)


def _undetermined(hypotheses: np.ndarray, num_objects: int) -> List[int]:
    return [
        i
        for i in range(num_objects)
        if 0 < np.count_nonzero(hypotheses & (1 << i)) < hypotheses.size
    ]


def classify_query(context: Sequence[ContextFrame], query: ObjectSet, num_objects: int) -> QuestionType:
    """Kind of reasoning a query asks for.

    An undetermined query is screened off when each of its undetermined objects
    was only put on the platform next to an object already seen lighting it up
    alone.
    """
    return _classify(context, query, _checked_hypotheses(context, num_objects), num_objects)


def _classify(
    context: Sequence[ContextFrame], query: ObjectSet, hypotheses: np.ndarray, num_objects: int
) -> QuestionType:
    if any(frame.objects == query for frame in context):
        return QuestionType.DIRECT
    if _label(hypotheses, query) is not BlicketLabel.UNDETERMINED:
        return QuestionType.INDIRECT
    for obj in set(_undetermined(hypotheses, num_objects)) & query:
        appearances = [i for i, frame in enumerate(context) if obj in frame.objects]
        if not appearances:
            return QuestionType.BACKWARD_BLOCKING
        for i in appearances:
            shown_alone = {
                next(iter(c.objects)) for c in context[:i] if c.lit and len(c.objects) == 1
            }
            if not context[i].lit or not shown_alone & context[i].objects:
                return QuestionType.BACKWARD_BLOCKING
    return QuestionType.SCREENED_OFF


def format_blicket_trace(
    objects: Sequence[BlicketObject],
    blickets: Sequence[bool],
    context: Sequence[ContextFrame],
    query: ObjectSet,
    question_type: QuestionType,
    label: BlicketLabel,
) -> str:
    def ids(s: ObjectSet) -> str:
        return ",".join(str(i) for i in sorted(s))

    lines = [f"blicket {len(objects)}"]
    lines += [
        f"object {i} {o.shape} {o.color} {o.material} {int(b)}"
        for i, (o, b) in enumerate(zip(objects, blickets))
    ]
    lines += [f"context {int(f.lit)} {ids(f.objects)}" for f in context]
    lines.append(f"query {ids(query)}")
    lines.append(f"question {question_type.name.lower()}")
    lines.append(f"label {label.name.lower()}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class BlicketTrace:
    objects: Tuple[BlicketObject, ...]
    blickets: Tuple[bool, ...]
    context: Tuple[ContextFrame, ...]
    query: ObjectSet
    question_type: QuestionType
    label: BlicketLabel


def parse_blicket_trace(text: str) -> BlicketTrace:
    """Parse the text written by `format_blicket_trace`.

    Raises:
        TraceError: the text is malformed
    """
    objects: List[BlicketObject] = []
    blickets: List[bool] = []
    context: List[ContextFrame] = []
    query: Optional[ObjectSet] = None
    question: Optional[QuestionType] = None
    label: Optional[BlicketLabel] = None

    def ids(text: str) -> ObjectSet:
        return frozenset(int(i) for i in text.split(","))

    try:
        for lineno, line in enumerate(text.splitlines(), 1):
            fields = line.split()
            if not fields or (fields[0] == "blicket" and len(fields) == 2):
                continue
            if fields[0] == "object" and len(fields) == 6:
                _, _, shape, color, material, blicket = fields
                objects.append(BlicketObject(Shape(shape), int(color), Material(material)))
                blickets.append(bool(int(blicket)))
            elif fields[0] == "context" and len(fields) == 3:
                context.append(ContextFrame(ids(fields[2]), bool(int(fields[1]))))
            elif fields[0] == "query" and len(fields) == 2:
                query = ids(fields[1])
            elif fields[0] == "question" and len(fields) == 2:
                question = QuestionType[fields[1].upper()]
            elif fields[0] == "label" and len(fields) == 2:
                label = BlicketLabel[fields[1].upper()]
            else:
                raise TraceError(f"line {lineno}: unexpected {line!r}.")
    except (KeyError, ValueError) as exc:
        raise TraceError(f"Malformed blicket trace: {exc}") from None
    if query is None or question is None or label is None:
        raise TraceError("Blicket trace lacks its query, question or label.")
    return BlicketTrace(tuple(objects), tuple(blickets), tuple(context), query, question, label)


def check_trace(trace: BlicketTrace) -> None:
    """Verify the lit flags against the hidden assignment and the label against the oracle.

    Raises:
        OracleError: the trace is inconsistent
    """
    n = len(trace.objects)
    for i, frame in enumerate(trace.context):
        if any(not 0 <= o < n for o in frame.objects | trace.query):
            raise OracleError(f"Context frame {i} or the query names an unknown object.")
        if frame.lit != any(trace.blickets[o] for o in frame.objects):
            raise OracleError(f"Lit flag of context frame {i} breaks the blicket rule.")
    if (label := label_oracle(trace.context, trace.query, n)) is not trace.label:
        raise OracleError(f"Stored label {trace.label.name} differs from the oracle's {label.name}.")


def _subset(pool: Sequence[int], rng: np.random.Generator) -> ObjectSet:
    size = int(rng.integers(1, min(MAX_FRAME_OBJECTS, len(pool)) + 1))
    return frozenset(int(i) for i in rng.choice(pool, size, replace=False))


def _lit_frame(pool: Sequence[int], blickets: Sequence[bool], rng: np.random.Generator) -> Optional[ObjectSet]:
    lit = [i for i in pool if blickets[i]]
    if not lit:
        return None
    first = int(rng.choice(lit))
    others = [i for i in pool if i != first]
    extra = min(int(rng.integers(MAX_FRAME_OBJECTS)), len(others))
    return frozenset([first, *(int(i) for i in rng.choice(others, extra, replace=False))])


def _dim_frame(pool: Sequence[int], blickets: Sequence[bool], rng: np.random.Generator) -> Optional[ObjectSet]:
    dim = [i for i in pool if not blickets[i]]
    return _subset(dim, rng) if dim else None


def _free_frames(
    count: int,
    lit_count: Optional[int],
    pool: Sequence[int],
    blickets: Sequence[bool],
    rng: np.random.Generator,
) -> Optional[List[ContextFrame]]:
    """Context frames without constraints besides the number of lit frames."""
    if lit_count is None:
        frames = [_subset(pool, rng) for _ in range(count)]
        return [ContextFrame(f, any(blickets[i] for i in f)) for f in frames]
    if not 0 <= lit_count <= count:
        return None
    flags = [True] * lit_count + [False] * (count - lit_count)
    rng.shuffle(flags)
    frames = []
    for lit in flags:
        objects = (_lit_frame if lit else _dim_frame)(pool, blickets, rng)
        if objects is None:
            return None
        frames.append(ContextFrame(objects, lit))
    return frames


def _templated_context(
    question_type: QuestionType,
    blickets: Sequence[bool],
    lit_count: Optional[int],
    rng: np.random.Generator,
) -> Optional[List[ContextFrame]]:
    """Six context frames, built around a fixed pair of frames for undetermined questions.

    Screened-off contexts show {A} lit before {A, B} lit, backward-blocking
    contexts show them the other way round. B never appears elsewhere.
    """
    n = len(blickets)
    if question_type in (QuestionType.DIRECT, QuestionType.INDIRECT):
        return _free_frames(NUM_CONTEXT_FRAMES, lit_count, list(range(n)), blickets, rng)
    a = int(rng.choice([i for i in range(n) if blickets[i]]))
    b = int(rng.choice([i for i in range(n) if i != a]))
    pool = [i for i in range(n) if i != b]
    rest = _free_frames(
        NUM_CONTEXT_FRAMES - 2, None if lit_count is None else lit_count - 2, pool, blickets, rng
    )
    if rest is None:
        return None
    pair = [ContextFrame(frozenset({a}), True), ContextFrame(frozenset({a, b}), True)]
    if question_type is QuestionType.BACKWARD_BLOCKING:
        pair.reverse()
    first, second = sorted(int(i) for i in rng.choice(NUM_CONTEXT_FRAMES, 2, replace=False))
    frames = list(rest)
    frames.insert(first, pair[0])
    frames.insert(second, pair[1])
    return frames


def _sample_objects(
    num_objects: int,
    allowed: Sequence[Combo],
    required: Sequence[Combo],
    rng: np.random.Generator,
) -> List[BlicketObject]:
    picks = rng.choice(len(allowed), num_objects, replace=len(allowed) < num_objects)
    combos = [allowed[int(i)] for i in picks]
    if required and not set(combos) & set(required):
        combos[int(rng.integers(num_objects))] = required[int(rng.integers(len(required)))]
    return [BlicketObject(*combo) for combo in combos]


def _candidate_queries(num_objects: int) -> List[ObjectSet]:
    return [
        frozenset(c)
        for size in range(1, MAX_FRAME_OBJECTS + 1)
        for c in combinations(range(num_objects), size)
    ]


def blicket_scene(objects: Sequence[BlicketObject], on_platform: ObjectSet, platform: Optional[PlatformState]) -> Scene:
    """Objects of a frame side by side above the platform band."""
    ids = sorted(on_platform)
    start = (GRID_SIZE - len(ids)) // 2
    return Scene(
        rows=GRID_SIZE,
        cols=GRID_SIZE,
        objects=tuple(
            SceneObject(
                OBJECT_ROW,
                start + k,
                objects[i].shape,
                SizeTier.MEDIUM,
                PALETTE[objects[i].color],
                objects[i].material,
            )
            for k, i in enumerate(ids)
        ),
        platform=platform,
    )


def render_episode(
    objects: Sequence[BlicketObject], context: Sequence[ContextFrame], query: ObjectSet, image_size: int
) -> np.ndarray:
    scenes = [
        blicket_scene(objects, f.objects, PlatformState.LIT if f.lit else PlatformState.DIM)
        for f in context
    ]
    scenes.append(blicket_scene(objects, query, None))
    return np.stack([render_frame_u8(s, image_size, image_size) for s in scenes])


def gen_blicket(
    seed: SeedLike,
    cfg: BlicketConfig,
    *,
    allowed_combos: Optional[Sequence[Combo]] = None,
    required_combos: Sequence[Combo] = (),
    lit_count: Optional[int] = None,
    render: bool = True,
) -> BlicketEpisode:
    """Generate a blicket episode from a seed.

    The question type is drawn from `cfg.question_type_mix`, then blicket
    assignments and context frames are resampled until a query of that type
    exists.

    Args:
        seed: integer or sequence of integers seeding the episode
        cfg: generator configuration
        allowed_combos: attribute combinations objects are drawn from, all by default
        required_combos: at least one object uses one of these combinations
        lit_count: exact number of lit context frames, free by default
        render: render the frames

    Raises:
        UnsatisfiableQuestionError: no episode found within `cfg.max_retries` attempts
    """
    rng = np.random.default_rng(seed)
    allowed = list(allowed_combos) if allowed_combos is not None else attribute_combos(cfg.num_colors)
    mix = np.asarray(cfg.question_type_mix, dtype=np.float64)
    question_type = QuestionType(int(rng.choice(len(QuestionType), p=mix / mix.sum())))
    if question_type in (QuestionType.DIRECT, QuestionType.INDIRECT):
        target = BlicketLabel(int(rng.integers(2)))
    else:
        target = BlicketLabel.UNDETERMINED
    n = cfg.num_objects
    candidates = _candidate_queries(n)
    for _ in range(cfg.max_retries):
        objects = _sample_objects(n, allowed, required_combos, rng)
        blickets = [bool(b) for b in rng.random(n) < 0.5]
        if not any(blickets):
            blickets[int(rng.integers(n))] = True
        context = _templated_context(question_type, blickets, lit_count, rng)
        if context is None:
            continue
        hypotheses = _checked_hypotheses(context, n)
        matching = [
            q
            for q in candidates
            if _classify(context, q, hypotheses, n) is question_type and _label(hypotheses, q) is target
        ]
        if not matching:
            continue
        query = matching[int(rng.integers(len(matching)))]
        return BlicketEpisode(
            objects=tuple(objects),
            blickets=tuple(blickets),
            context=tuple(context),
            query=query,
            label=target,
            question_type=question_type,
            pixels=render_episode(objects, context, query, cfg.image_size) if render else None,
        )
    raise UnsatisfiableQuestionError(
        f"No {question_type.name.lower()} question with a {target.name.lower()} answer "
        f"after {cfg.max_retries} attempts."
    )
