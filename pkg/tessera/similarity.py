"""Weighted longest-common-subsequence scoring between queries and micro-clusters.

Rows of the DP table are indexed by the query (`j`) and columns by the model (`i`), so a cell
`[j][i]` scores the prefixes `query[:j]` and `model[:i]`. A matching pair contributes the model
character's weight normalized by the heaviest character of that model, which bounds every
contribution by 1 and reduces to classic LCS when all weights are equal.
"""

import itertools
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import numpy.typing as npt

from tessera.exceptions import OracleLimitError
from tessera.structure import MicroCluster, Symbol

LCS_BRUTE_MAX_LENGTH = 12

FloatArray = npt.NDArray[np.float64]
IntArray = npt.NDArray[np.int64]


def normalized_weights(weights: Sequence[float]) -> FloatArray:
    array = np.asarray(weights, dtype=np.float64)
    if not array.size:
        return array
    return array / array.max()


def _advance_rows(previous: FloatArray, hit_norms: FloatArray) -> FloatArray:
    """One DP row per leading index; `hit_norms` holds each model character's norm where it matches, else 0.

    Rows are non-decreasing, so a non-matching diagonal never beats the upper neighbour and needs no masking.
    """
    rows = np.zeros_like(previous)
    body = rows[..., 1:]
    np.add(previous[..., :-1], hit_norms, out=body)
    np.maximum(body, previous[..., 1:], out=body)
    np.maximum.accumulate(body, axis=-1, out=body)
    return rows


@dataclass(frozen=True, slots=True)
class DPTable:
    cells: FloatArray

    @property
    def score(self) -> float:
        return float(self.cells[-1, -1])

    @property
    def query_length(self) -> int:
        return self.cells.shape[0] - 1

    @property
    def model_length(self) -> int:
        return self.cells.shape[1] - 1

    def __getitem__(self, key: tuple[int, int]) -> float:
        return float(self.cells[key])


def weighted_lcs_table(query: Sequence[Symbol], symbols: Sequence[Symbol], weights: Sequence[float]) -> DPTable:
    cells = np.zeros((len(query) + 1, len(symbols) + 1), dtype=np.float64)
    if not query or not symbols:
        return DPTable(cells)
    model_symbols = np.asarray(symbols, dtype=np.int64)
    norms = normalized_weights(weights)
    for j, symbol in enumerate(query, start=1):
        cells[j] = _advance_rows(cells[j - 1], np.where(model_symbols == symbol, norms, 0.0))
    return DPTable(cells)


def lcs_table(query: Sequence[Symbol], model: MicroCluster) -> DPTable:
    return weighted_lcs_table(query, model.sequence, model.weights)


def _distances_from_scores(scores: FloatArray, shorter: IntArray) -> FloatArray:
    """`1 - score / shorter` elementwise; pairs where either side is empty stay at distance 1"""
    ratios = np.divide(scores, shorter, out=np.zeros_like(scores), where=shorter > 0)
    return 1.0 - ratios


def _distance_from_score(score: float, query_length: int, model_length: int) -> float:
    if not query_length or not model_length:
        return 1.0
    return min(max(1.0 - score / min(query_length, model_length), 0.0), 1.0)


def distance(query: Sequence[Symbol], model: MicroCluster) -> float:
    """`1 - weighted LCS / min(|query|, |model|)`. Empty sides are maximally dissimilar."""
    if not query or not model.sequence:
        return 1.0
    return _distance_from_score(lcs_table(query, model).score, len(query), len(model.sequence))


def order_by_weight(a: MicroCluster, b: MicroCluster) -> tuple[MicroCluster, MicroCluster]:
    """Return `(lighter, heavier)`.

    Ties go to the shorter sequence and then to `a`, so callers pass models in store order.
    """
    if (b.w, len(b.sequence)) < (a.w, len(a.sequence)):
        return b, a
    return a, b


def model_distance(a: MicroCluster, b: MicroCluster) -> float:
    lighter, heavier = order_by_weight(a, b)
    return distance(lighter.sequence, heavier)


class AlignmentStep(NamedTuple):
    """One emitted position of a backtracked alignment; aligned pairs carry both indices"""

    model_index: int | None
    query_index: int | None


def backtrack(table: DPTable) -> list[AlignmentStep]:
    """Walk the table from the bottom-right corner, preferring the query, then the model, then a match.

    The order of the returned steps interleaves unaligned characters exactly the way a recursive
    walk that emits on the way back up would.
    """
    cells: list[list[float]] = table.cells.tolist()
    i = table.model_length
    j = table.query_length
    reversed_steps: list[AlignmentStep] = []
    while i and j:
        if cells[j][i] == cells[j - 1][i]:
            j -= 1
            reversed_steps.append(AlignmentStep(None, j))
        elif cells[j][i] == cells[j][i - 1]:
            i -= 1
            reversed_steps.append(AlignmentStep(i, None))
        else:
            i -= 1
            j -= 1
            reversed_steps.append(AlignmentStep(i, j))
    head = [AlignmentStep(None, k) for k in range(j)] + [AlignmentStep(k, None) for k in range(i)]
    return head + reversed_steps[::-1]


def predicted_suffix(
    query: Sequence[Symbol], symbols: Sequence[Symbol], weights: Sequence[float]
) -> tuple[Symbol, ...]:
    """The part of the model sequence that lies after the last model character the query aligned with"""
    symbols = tuple(symbols)
    if not query:
        return symbols
    steps = backtrack(weighted_lcs_table(query, symbols, weights))
    consumed = [model for model, query_index in steps if model is not None and query_index is not None]
    if not consumed:
        return symbols
    return symbols[max(consumed) + 1 :]


def _is_subsequence(candidate: Iterable[Symbol], sequence: Sequence[Symbol]) -> bool:
    remaining = iter(sequence)
    return all(symbol in remaining for symbol in candidate)


def lcs_brute(a: Sequence[Symbol], b: Sequence[Symbol]) -> int:
    """Exact unweighted LCS length by enumerating subsequences. Only meant as a test oracle."""
    if len(a) > LCS_BRUTE_MAX_LENGTH or len(b) > LCS_BRUTE_MAX_LENGTH:
        raise OracleLimitError(
            f"Brute-force LCS enumerates every subsequence and only accepts sequences of up to "
            f"{LCS_BRUTE_MAX_LENGTH} symbols but got lengths {len(a)} and {len(b)}."
        )
    shorter, longer = (a, b) if len(a) <= len(b) else (b, a)
    for length in range(len(shorter), 0, -1):
        if any(_is_subsequence(combo, longer) for combo in itertools.combinations(shorter, length)):
            return length
    return 0


class ModelBank:
    """Every stored model sequence stacked into zero-padded arrays.

    Symbol 0 never appears inside a query so padding never matches, and the running maximum carries
    each model's final score into the last column.
    """

    def __init__(self, models: Iterable[MicroCluster] = ()) -> None:
        super().__init__()
        self.version = 0
        self.symbols: IntArray = np.zeros((0, 1), dtype=np.int64)
        self.norms: FloatArray = np.zeros((0, 1), dtype=np.float64)
        self.lengths: IntArray = np.zeros(0, dtype=np.int64)
        self._hit_cache: dict[Symbol, FloatArray] = {}
        self._hit_version = -1
        self.load(models)

    def __len__(self) -> int:
        return self.lengths.shape[0]

    @property
    def width(self) -> int:
        return self.symbols.shape[1]

    def load(self, models: Iterable[MicroCluster]) -> None:
        models = list(models)
        width = max((len(model.sequence) for model in models), default=1)
        self.symbols = np.zeros((len(models), width), dtype=np.int64)
        self.norms = np.zeros((len(models), width), dtype=np.float64)
        self.lengths = np.zeros(len(models), dtype=np.int64)
        for index, model in enumerate(models):
            self._write(index, model)
        self.version += 1

    def append(self, model: MicroCluster) -> None:
        self._ensure_width(len(model.sequence))
        self.symbols = np.vstack([self.symbols, np.zeros((1, self.width), dtype=np.int64)])
        self.norms = np.vstack([self.norms, np.zeros((1, self.width), dtype=np.float64)])
        self.lengths = np.append(self.lengths, 0)
        self._write(len(self) - 1, model)
        self.version += 1

    def replace(self, index: int, model: MicroCluster) -> None:
        self._ensure_width(len(model.sequence))
        self.symbols[index] = 0
        self.norms[index] = 0.0
        self._write(index, model)
        self.version += 1

    def remove(self, index: int) -> None:
        self.symbols = np.delete(self.symbols, index, axis=0)
        self.norms = np.delete(self.norms, index, axis=0)
        self.lengths = np.delete(self.lengths, index)
        self.version += 1

    def hit_norms(self, symbol: Symbol) -> FloatArray:
        """Norms of every character equal to `symbol`, zero elsewhere. Cached until the bank changes."""
        if self._hit_version != self.version:
            self._hit_cache.clear()
            self._hit_version = self.version
        cached = self._hit_cache.get(symbol)
        if cached is None:
            cached = self._hit_cache[symbol] = np.where(self.symbols == symbol, self.norms, 0.0)
        return cached

    def _ensure_width(self, width: int) -> None:
        if width <= self.width:
            return
        padding = width - self.width
        self.symbols = np.pad(self.symbols, ((0, 0), (0, padding)))
        self.norms = np.pad(self.norms, ((0, 0), (0, padding)))

    def _write(self, index: int, model: MicroCluster) -> None:
        length = len(model.sequence)
        self.symbols[index, :length] = model.sequence
        self.norms[index, :length] = normalized_weights(model.weights)
        self.lengths[index] = length


class QueryCursor:
    """The DP rows of one growing query against every model of a bank.

    Rows are advanced one symbol at a time and replayed from scratch whenever the bank changes,
    so scores always equal a full recomputation. Every row of the current query is kept, which
    lets a merge reuse the table of the model it aligns with.
    """

    def __init__(self, bank: ModelBank) -> None:
        super().__init__()
        self.bank = bank
        self.symbols: list[Symbol] = []
        self._rows: FloatArray = np.zeros((len(bank), bank.width + 1), dtype=np.float64)
        self._history: list[FloatArray] = [self._rows]
        self._version = bank.version

    def __len__(self) -> int:
        return len(self.symbols)

    def push(self, symbol: Symbol) -> None:
        self.symbols.append(symbol)
        if self._version != self.bank.version:
            self._replay()
        else:
            self._rows = _advance_rows(self._rows, self.bank.hit_norms(symbol))
            self._history.append(self._rows)

    def clear(self) -> None:
        self.symbols.clear()
        self._replay()

    def scores(self) -> FloatArray:
        if self._version != self.bank.version:
            self._replay()
        return self._rows[:, -1]

    def table(self, index: int) -> DPTable:
        """The full table of the query against model `index`, equal to `lcs_table` on that model"""
        if self._version != self.bank.version:
            self._replay()
        length = int(self.bank.lengths[index])
        return DPTable(np.stack([rows[index, : length + 1] for rows in self._history]))

    def distances(self) -> FloatArray:
        scores = self.scores()
        if not self.symbols:
            return np.ones_like(scores)
        # Every match contributes at most 1, so the score never exceeds the shorter length
        return _distances_from_scores(scores, np.minimum(len(self.symbols), self.bank.lengths))

    def closest(self) -> tuple[int, float] | None:
        """0-based index of the closest model (lowest index on ties) and its distance"""
        if not len(self.bank) or not self.symbols:
            return None
        distances = self.distances()
        index = int(np.argmin(distances))
        return index, float(distances[index])

    def _replay(self) -> None:
        bank = self.bank
        self._rows = np.zeros((len(bank), bank.width + 1), dtype=np.float64)
        self._history = [self._rows]
        self._version = bank.version
        for symbol in self.symbols:
            self._rows = _advance_rows(self._rows, bank.hit_norms(symbol))
            self._history.append(self._rows)


def distance_matrix(queries: Sequence[Sequence[Symbol]], bank: ModelBank) -> FloatArray:
    """`result[q, m]` is the distance of `queries[q]` against model `m` of the bank.

    Every query advances in lockstep; shorter queries are padded with a symbol that never matches,
    which leaves their final rows untouched.
    """
    result = np.ones((len(queries), len(bank)), dtype=np.float64)
    if not queries or not len(bank):
        return result
    lengths = np.array([len(query) for query in queries], dtype=np.int64)
    padded = np.full((len(queries), max(int(lengths.max()), 1)), -1, dtype=np.int64)
    for index, query in enumerate(queries):
        padded[index, : len(query)] = query
    rows = np.zeros((len(queries), len(bank), bank.width + 1), dtype=np.float64)
    for column in padded.T:
        rows = _advance_rows(rows, np.where(bank.symbols == column[:, np.newaxis, np.newaxis], bank.norms, 0.0))
    non_empty = lengths > 0
    result[non_empty] = _distances_from_scores(
        rows[non_empty, :, -1], np.minimum(lengths[non_empty, np.newaxis], bank.lengths)
    )
    return result
