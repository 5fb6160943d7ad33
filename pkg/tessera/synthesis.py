import sys
from collections.abc import Sequence
from dataclasses import dataclass
from logging import getLogger

import numpy as np

from tessera.exceptions import TesseraError, TesseraStructureError
from tessera.similarity import distance
from tessera.structure import (
    LAYER1_ALPHABET_SIZE,
    GridSpec,
    MicroCluster,
    ObjectObservation,
    Rect,
    Symbol,
    SymbolSequence,
    as_sequence,
    drop_repeats,
)

if sys.version_info >= (3, 11):  # pragma: no cover
    from enum import StrEnum
else:  # pragma: no cover
    from backports.strenum import StrEnum

_logger = getLogger(__name__)

Seed = int | np.random.SeedSequence

MAX_NOISE_RATE = 0.5
STANDARD_PATTERN_COUNT = 8
STANDARD_PATTERN_LENGTH = 6
STANDARD_MIN_DISTANCE = 0.6


class NoiseKind(StrEnum):
    insertion = "insertion"
    substitution = "substitution"


class PatternOrder(StrEnum):
    random = "random"
    round_robin = "round_robin"
    shuffled_rounds = "shuffled_rounds"


@dataclass(frozen=True, slots=True)
class PatternSpec:
    """A ground-truth path objects follow through the scene.

    `speed` is in cells per tick and box sizes default to half a cell. A noisy emission shifts the
    object's box by up to its own size, which shows up downstream as a corrupted symbol.
    """

    pattern_id: int
    waypoints: tuple[tuple[float, float], ...]
    speed: float = 0.5
    jitter_sigma: float = 0.0
    symbol_noise_rate: float = 0.0
    box_width: float | None = None
    box_height: float | None = None

    def __post_init__(self) -> None:
        if len(self.waypoints) < 2:
            raise TesseraStructureError(f"Pattern {self.pattern_id} needs at least two waypoints.")
        if self.speed <= 0:
            raise TesseraStructureError(f"Pattern {self.pattern_id} speed must be positive, got {self.speed}.")
        if self.jitter_sigma < 0:
            raise TesseraStructureError(f"Pattern {self.pattern_id} jitter must be non-negative.")
        _check_noise_rate(self.symbol_noise_rate)


@dataclass(frozen=True, slots=True)
class LabeledObservation:
    observation: ObjectObservation
    label: int


@dataclass(frozen=True, slots=True)
class LabeledSequence:
    label: int
    symbols: SymbolSequence


@dataclass(frozen=True, slots=True)
class SequenceFixture:
    patterns: tuple[SymbolSequence, ...]
    items: tuple[LabeledSequence, ...]


def _check_noise_rate(rate: float) -> None:
    if not 0 <= rate <= MAX_NOISE_RATE:
        raise TesseraStructureError(f"Noise rate must be between 0 and {MAX_NOISE_RATE} but got {rate}.")


def pattern_order(count: int, n: int, order: PatternOrder, rng: np.random.Generator) -> list[int]:
    """Which pattern each of `n` items follows"""
    if order == PatternOrder.round_robin:
        return [index % count for index in range(n)]
    if order == PatternOrder.random:
        return [int(index) for index in rng.integers(count, size=n)]
    rounds = -(-n // count)
    return [int(index) for _ in range(rounds) for index in rng.permutation(count)][:n]


def _path_centers(pattern: PatternSpec, grid: GridSpec) -> list[tuple[float, float]]:
    points = np.asarray(pattern.waypoints, dtype=np.float64)
    arc = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(points, axis=0).T))])
    step = pattern.speed * min(grid.cell_width, grid.cell_height)
    travelled = np.arange(0.0, arc[-1] + step / 2, step)
    xs = np.interp(travelled, arc, points[:, 0])
    ys = np.interp(travelled, arc, points[:, 1])
    return [(float(x), float(y)) for x, y in zip(xs, ys, strict=True)]


def gen_point_stream(
    patterns: Sequence[PatternSpec],
    n_objects: int,
    seed: Seed,
    *,
    grid: GridSpec,
    order: PatternOrder = PatternOrder.round_robin,
    spawn_interval: int | None = None,
) -> list[LabeledObservation]:
    """Observations of `n_objects` objects, each following one pattern, sorted by tick and object.

    Objects enter one after another: by default the next one appears one empty tick after the
    previous one left, otherwise every `spawn_interval` ticks.
    """
    if n_objects < 1:
        raise TesseraStructureError(f"At least one object is needed but got {n_objects}.")
    if not patterns:
        raise TesseraStructureError("At least one pattern is needed.")
    rng = np.random.default_rng(seed)
    frame = grid.frame
    stream: list[LabeledObservation] = []
    start = 1
    for object_id, pattern_index in enumerate(pattern_order(len(patterns), n_objects, order, rng), start=1):
        pattern = patterns[pattern_index]
        box_width = pattern.box_width if pattern.box_width is not None else grid.cell_width / 2
        box_height = pattern.box_height if pattern.box_height is not None else grid.cell_height / 2
        centers = _path_centers(pattern, grid)
        clamped_once = False
        for step, (x, y) in enumerate(centers):
            x += float(rng.normal(0.0, pattern.jitter_sigma))
            y += float(rng.normal(0.0, pattern.jitter_sigma))
            if rng.random() < pattern.symbol_noise_rate:
                x += float(rng.uniform(-box_width, box_width))
                y += float(rng.uniform(-box_height, box_height))
            bbox = Rect(x - box_width / 2, y - box_height / 2, box_width, box_height)
            clamped = bbox.clamp_to(frame)
            if clamped != bbox and not clamped_once:
                clamped_once = True
                _logger.warning(
                    "Pattern left the frame, clamping the object into it",
                    extra={"pattern_id": pattern.pattern_id, "object_id": object_id, "t": start + step},
                )
            if clamped.w <= 0 or clamped.h <= 0:
                continue
            stream.append(LabeledObservation(ObjectObservation(object_id, clamped, start + step), pattern.pattern_id))
        start += spawn_interval if spawn_interval is not None else len(centers) + 1
    stream.sort(key=lambda item: (item.observation.t, item.observation.object_id))
    return stream


def _noise_candidates(pattern: SymbolSequence, alphabet_size: int) -> list[Symbol]:
    candidates = [symbol for symbol in range(1, alphabet_size) if symbol not in pattern]
    return candidates or list(range(1, alphabet_size))


def _corrupt(
    pattern: SymbolSequence,
    noise_rate: float,
    kinds: Sequence[NoiseKind],
    rng: np.random.Generator,
    candidates: Sequence[Symbol],
) -> SymbolSequence:
    symbols: list[Symbol] = []
    for symbol in pattern:
        if not kinds or rng.random() >= noise_rate:
            symbols.append(symbol)
            continue
        kind = kinds[int(rng.integers(len(kinds)))]
        noise = int(candidates[int(rng.integers(len(candidates)))])
        if kind == NoiseKind.insertion:
            symbols.extend((symbol, noise))
        else:
            symbols.append(noise)
    return drop_repeats(symbols)


def gen_sequence_stream(
    patterns: Sequence[Sequence[Symbol]],
    n: int,
    noise_rate: float,
    seed: Seed,
    *,
    noise_kinds: Sequence[NoiseKind] = (NoiseKind.insertion, NoiseKind.substitution),
    order: PatternOrder = PatternOrder.random,
    alphabet_size: int = LAYER1_ALPHABET_SIZE,
) -> list[LabeledSequence]:
    """`n` labeled sequences; the label is the index of the pattern each one was drawn from.

    Every pattern symbol is corrupted with probability `noise_rate`, by inserting a symbol after it or
    by replacing it. Noise symbols are drawn from the alphabet symbols the pattern does not use.
    """
    if not patterns:
        raise TesseraStructureError("At least one pattern is needed.")
    _check_noise_rate(noise_rate)
    validated = [as_sequence(pattern) for pattern in patterns]
    rng = np.random.default_rng(seed)
    candidates = [_noise_candidates(pattern, alphabet_size) for pattern in validated]
    return [
        LabeledSequence(label, _corrupt(validated[label], noise_rate, noise_kinds, rng, candidates[label]))
        for label in pattern_order(len(validated), n, order, rng)
    ]


def separated_patterns(
    count: int,
    length: int,
    seed: Seed,
    *,
    min_distance: float = STANDARD_MIN_DISTANCE,
    alphabet_size: int = LAYER1_ALPHABET_SIZE,
    max_attempts: int = 10_000,
) -> tuple[SymbolSequence, ...]:
    """Random patterns of distinct symbols whose pairwise distance exceeds `min_distance`"""
    if length >= alphabet_size:
        raise TesseraStructureError(
            f"Patterns of {length} distinct symbols need an alphabet larger than {alphabet_size - 1}."
        )
    rng = np.random.default_rng(seed)
    alphabet = np.arange(1, alphabet_size)
    patterns: list[SymbolSequence] = []
    for _ in range(max_attempts):
        candidate = tuple(int(symbol) for symbol in rng.choice(alphabet, size=length, replace=False))
        if all(distance(candidate, MicroCluster.from_sequence(pattern, 0)) > min_distance for pattern in patterns):
            patterns.append(candidate)
            if len(patterns) == count:
                return tuple(patterns)
    raise TesseraError(
        f"Could not find {count} patterns of length {length} at distance above {min_distance} "
        f"in {max_attempts} attempts."
    )


def standard_sequence_fixture(
    seed: int = 0,
    *,
    n: int = 230,
    noise_rate: float = 0.1,
    warmup: int = 0,
    warmup_noise_rate: float = MAX_NOISE_RATE,
) -> SequenceFixture:
    """Eight well separated six-symbol patterns presented in shuffled rounds.

    A positive `warmup` corrupts the first `warmup` sequences at `warmup_noise_rate` instead,
    which makes the clustering quality dip early before it recovers.
    """
    pattern_seed, warmup_seed, stream_seed = np.random.SeedSequence(seed).spawn(3)
    patterns = separated_patterns(STANDARD_PATTERN_COUNT, STANDARD_PATTERN_LENGTH, pattern_seed)
    warmup = min(warmup, n)
    items = gen_sequence_stream(
        patterns, warmup, warmup_noise_rate, warmup_seed, order=PatternOrder.shuffled_rounds
    ) + gen_sequence_stream(patterns, n - warmup, noise_rate, stream_seed, order=PatternOrder.shuffled_rounds)
    return SequenceFixture(patterns, tuple(items))


_CROSSING_PATHS: tuple[tuple[tuple[float, float], ...], ...] = (
    ((0.02, 0.3), (0.98, 0.3)),
    ((0.6, 0.02), (0.6, 0.98)),
    ((0.02, 0.02), (0.98, 0.98)),
    ((0.98, 0.1), (0.5, 0.5), (0.02, 0.9)),
)


def crossing_patterns(
    grid: GridSpec, *, speed: float = 0.5, jitter_sigma: float = 0.0, symbol_noise_rate: float = 0.0
) -> tuple[PatternSpec, ...]:
    """Four paths through a crossing: a horizontal, a vertical, a diagonal and a bent one"""
    return tuple(
        PatternSpec(
            pattern_id=pattern_id,
            waypoints=tuple((x * grid.frame_width, y * grid.frame_height) for x, y in path),
            speed=speed,
            jitter_sigma=jitter_sigma,
            symbol_noise_rate=symbol_noise_rate,
        )
        for pattern_id, path in enumerate(_CROSSING_PATHS)
    )
