from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from logging import getLogger

import numpy as np

from tessera.exceptions import ClockError, InvalidSequenceError, TesseraStructureError
from tessera.merging import merge, merge_models
from tessera.similarity import (
    FloatArray,
    ModelBank,
    QueryCursor,
    distance_matrix,
    order_by_weight,
    predicted_suffix,
)
from tessera.structure import (
    DELIMITER,
    Hyperparams,
    MicroCluster,
    Symbol,
    SymbolSequence,
    Timestamp,
    collapse_runs,
    decay_factor,
    decay_weight,
)

_logger = getLogger(__name__)


def _check_symbol(symbol: Symbol) -> None:
    if symbol < 0:
        raise InvalidSequenceError(f"Symbols must be non-negative but got {symbol}.")


def _pairwise_model_distances(models: Sequence[MicroCluster]) -> FloatArray:
    """Symmetric model-to-model distances with the upper triangle filled and everything else at infinity.

    Each model is scored as the plain query against every other one and a pair keeps the larger of its
    two distances: a long model that merely contains a short one as a subsequence is not close to it.
    """
    directed = distance_matrix([model.sequence for model in models], ModelBank(models))
    pairwise = np.maximum(directed, directed.T)
    pairwise[np.tril_indices(len(models))] = np.inf
    return pairwise


@dataclass(slots=True)
class NodeStats:
    sequences: int = 0
    symbols: int = 0
    models_created: int = 0
    merges: int = 0
    cleanup_merges: int = 0
    evictions: int = 0
    removed_models: int = 0
    removed_characters: int = 0
    cleanups: int = 0


@dataclass(frozen=True)
class MatchEvent:
    """The closest stored model for a stream's in-progress sequence.

    `emitted` is only true when the match differs from the previous one of the same stream.
    """

    node_id: int
    stream: int
    t: Timestamp
    model_index: int
    cluster_id: int
    distance: float
    emitted: bool
    query: SymbolSequence
    model_sequence: SymbolSequence = field(repr=False)
    model_weights: tuple[float, ...] = field(repr=False)

    @cached_property
    def predicted_suffix(self) -> SymbolSequence:
        return predicted_suffix(self.query, self.model_sequence, self.model_weights)


@dataclass(frozen=True, slots=True)
class Finalization:
    """What happened to a completed sequence: merged into an existing model or stored as a new one"""

    cluster_id: int
    model_index: int
    distance: float | None
    merged: bool
    t: Timestamp
    stream: int = 0
    sequence: SymbolSequence = ()


@dataclass(slots=True)
class _StreamState:
    cursor: QueryCursor
    last_symbol: Symbol | None = None
    current_match: int | None = None


class ClusterNode:
    """One clustering node: a bounded store of micro-clusters plus per-stream sequence buffers.

    Every stream (one per tracked object on upper layers, a single stream `0` on the first one)
    shares the store but has its own buffer, deduplication and emit-on-change state.
    Model weights are kept un-decayed and brought up to date whenever a model is touched.
    """

    def __init__(
        self,
        node_id: int = 1,
        params: Hyperparams | None = None,
        *,
        store: Iterable[MicroCluster] = (),
        clock: Timestamp = 0,
        next_cluster_id: int | None = None,
    ) -> None:
        super().__init__()
        if node_id < 1:
            raise TesseraStructureError(
                f"Node ids start at 1 so that re-encoded outputs never collide with 0, got {node_id}."
            )
        self.node_id = node_id
        self.params = params if params is not None else Hyperparams()
        self.store: list[MicroCluster] = list(store)
        if len(self.store) > self.params.m_u:
            raise TesseraStructureError(
                f"Node {node_id} can hold at most {self.params.m_u} models but {len(self.store)} were given."
            )
        self.clock = clock
        self.stats = NodeStats()
        used_ids = [model.cluster_id for model in self.store]
        if next_cluster_id is None:
            next_cluster_id = max(used_ids, default=0) + 1
        self._next_cluster_id = next_cluster_id
        self._aliases: dict[int, int] = {}
        self._bank = ModelBank(self.store)
        self._streams: dict[int, _StreamState] = {}
        self._cleaned_through = clock

    @property
    def next_cluster_id(self) -> int:
        return self._next_cluster_id

    def buffer(self, stream: int = 0) -> SymbolSequence:
        state = self._streams.get(stream)
        return tuple(state.cursor.symbols) if state is not None else ()

    def current_match(self, stream: int = 0) -> int | None:
        """1-based store position of the stream's current match, if any"""
        state = self._streams.get(stream)
        if state is None or state.current_match is None:
            return None
        return self.index_of(state.current_match)

    def index_of(self, cluster_id: int) -> int | None:
        cluster_id = self.resolve(cluster_id)
        for index, model in enumerate(self.store, start=1):
            if model.cluster_id == cluster_id:
                return index
        return None

    def resolve(self, cluster_id: int) -> int:
        """Follow merge aliases until reaching the identity of the model that absorbed `cluster_id`"""
        while cluster_id in self._aliases:
            cluster_id = self._aliases[cluster_id]
        return cluster_id

    def ingest_symbol(self, symbol: Symbol, t_now: Timestamp, *, stream: int = 0) -> MatchEvent | None:
        """Feed one symbol of a stream, returning the stream's closest model once matching is active.

        A cleanup due at `t_now` itself only runs once a later tick arrives, since more symbols may still
        come at this one. Callers close the tick with `advance` or, at the end of a stream, with `settle`.
        """
        if symbol == DELIMITER:
            self.finalize(t_now, stream=stream)
            return None
        _check_symbol(symbol)
        self._catch_up(t_now)
        return self._push(symbol, t_now, stream)

    def finalize(self, t_now: Timestamp, *, stream: int = 0) -> Finalization | None:
        """Feed the delimiter to a stream, turning its buffer into a new or reinforced model"""
        self._catch_up(t_now)
        state = self._stream(stream)
        finalization = None
        if state.last_symbol != DELIMITER:
            state.last_symbol = DELIMITER
            if state.cursor.symbols:
                finalization = self._finalize(state, t_now, stream)
        return finalization

    def feed_sequence(
        self, symbols: Sequence[Symbol], t_now: Timestamp | None = None, *, stream: int = 0
    ) -> Finalization | None:
        """Observe a whole sequence as a single tick (the next one unless `t_now` is given).

        The sequence and its delimiter are ingested at that tick and the tick is then closed,
        so a cleanup due at it runs before this returns. No match events are produced on the way.
        """
        if t_now is None:
            t_now = self.clock + 1
        self._catch_up(t_now)
        state = self._stream(stream)
        for symbol in symbols:
            if symbol != DELIMITER:
                _check_symbol(symbol)
                self._buffer(state, symbol)
        finalization = self.finalize(t_now, stream=stream)
        self.advance(t_now)
        return finalization

    def advance(self, t_now: Timestamp) -> None:
        """Close every tick up to and including `t_now`, running the cleanups due on the way.

        Input ingested at a cleanup tick only triggers that cleanup once a later tick arrives,
        so callers that feed several symbols per tick call this when the tick is complete.
        """
        self._catch_up(t_now)
        if t_now % self.params.t_gap == 0 and t_now > self._cleaned_through:
            self.cleanup(t_now)
            self._cleaned_through = t_now

    def settle(self) -> None:
        """Consolidate the store at the end of a stream.

        Cleans up at the current tick until a pass merges nothing. Models folded in by one pass
        bring their own low-weight characters along, and the next pass cuts them.
        """
        while self.cleanup(self.clock):
            pass
        self._cleaned_through = max(self._cleaned_through, self.clock)

    def match_closest(self, query: Sequence[Symbol]) -> tuple[int, float] | None:
        """1-based index of the closest model and its distance; ties go to the lowest index"""
        cursor = QueryCursor(self._bank)
        for symbol in query:
            cursor.push(symbol)
        closest = cursor.closest()
        if closest is None:
            return None
        index, distance = closest
        return index + 1, distance

    def predict(self, query: Sequence[Symbol], model_index: int) -> SymbolSequence:
        if not 1 <= model_index <= len(self.store):
            raise IndexError(f"Model index must be between 1 and {len(self.store)} but got {model_index}.")
        model = self.store[model_index - 1]
        return predicted_suffix(query, model.sequence, model.weights)

    def cleanup(self, t_now: Timestamp) -> int:
        """Fade, prune and consolidate the store, returning how many model pairs were merged.

        Models whose faded weight drops to the removal threshold are forgotten. Characters that fall
        more than `mu` below their model's heaviest character are cut out. Models that came within
        `epsilon` of each other, scored in both directions, are merged pairwise, closest pair first.
        """
        params = self.params
        survivors: list[MicroCluster] = []
        removed_characters = 0
        for model in self.store:
            factor = decay_factor(t_now, model.t, params.lambda_)
            w = model.w * factor
            if w <= params.removal_threshold:
                _logger.debug(
                    "Forgot a faded model",
                    extra={"node_id": self.node_id, "cluster_id": model.cluster_id, "w": w},
                )
                self.stats.removed_models += 1
                continue
            weights = [weight * factor for weight in model.weights]
            heaviest = max(weights, default=0.0)
            kept = [index for index, weight in enumerate(weights) if heaviest - weight <= params.mu]
            if len(kept) != len(weights):
                removed_characters += len(weights) - len(kept)
                _logger.debug(
                    "Removed noise characters",
                    extra={
                        "node_id": self.node_id,
                        "cluster_id": model.cluster_id,
                        "symbols": [model.sequence[i] for i in range(len(weights)) if i not in kept],
                    },
                )
            sequence, weights = collapse_runs([model.sequence[i] for i in kept], [weights[i] for i in kept])
            survivors.append(
                MicroCluster(t=t_now, w=w, sequence=sequence, weights=weights, cluster_id=model.cluster_id)
            )
        self.stats.removed_characters += removed_characters

        merges = self._merge_close_models(survivors, t_now)
        while len(survivors) > params.m_u:
            lightest = min(range(len(survivors)), key=lambda i: survivors[i].w)
            survivors.pop(lightest)
            self.stats.evictions += 1

        self.store = survivors
        self._bank.load(self.store)
        self.stats.cleanups += 1
        _logger.info(
            "Cleaned up the model store",
            extra={
                "node_id": self.node_id,
                "t": t_now,
                "models": len(self.store),
                "merged": merges,
                "removed_characters": removed_characters,
            },
        )
        return merges

    def _merge_close_models(self, models: list[MicroCluster], t_now: Timestamp) -> int:
        merges = 0
        while len(models) > 1:
            distances = _pairwise_model_distances(models)
            first, second = (int(index) for index in np.unravel_index(int(np.argmin(distances)), distances.shape))
            if distances[first, second] > self.params.epsilon:
                break
            lighter, heavier = order_by_weight(models[first], models[second])
            merged = merge_models(heavier, lighter, t_now)
            self._aliases[lighter.cluster_id] = heavier.cluster_id
            survivor_index, absorbed_index = (first, second) if heavier is models[first] else (second, first)
            models[survivor_index] = merged
            models.pop(absorbed_index)
            merges += 1
        self.stats.cleanup_merges += merges
        return merges

    def _stream(self, stream: int) -> _StreamState:
        state = self._streams.get(stream)
        if state is None:
            state = self._streams[stream] = _StreamState(QueryCursor(self._bank))
        return state

    def _catch_up(self, t_now: Timestamp) -> None:
        if t_now < self.clock:
            raise ClockError(t_now, self.clock)
        t_gap = self.params.t_gap
        # Ticks before t_now are complete, so every boundary among them gets its cleanup first
        boundary = (self._cleaned_through // t_gap + 1) * t_gap
        while boundary < t_now:
            self.cleanup(boundary)
            self._cleaned_through = boundary
            boundary += t_gap
        self.clock = t_now

    def _matching_is_active(self) -> bool:
        return len(self.store) > self.params.min_models_for_matching

    def _buffer(self, state: _StreamState, symbol: Symbol) -> bool:
        if symbol == state.last_symbol:
            return False
        state.last_symbol = symbol
        state.cursor.push(symbol)
        self.stats.symbols += 1
        return True

    def _push(self, symbol: Symbol, t_now: Timestamp, stream: int) -> MatchEvent | None:
        state = self._stream(stream)
        if not self._buffer(state, symbol) or not self._matching_is_active():
            return None
        closest = state.cursor.closest()
        assert closest is not None
        index, distance = closest
        model = self.store[index]
        emitted = state.current_match is None or self.resolve(state.current_match) != model.cluster_id
        state.current_match = model.cluster_id
        return MatchEvent(
            node_id=self.node_id,
            stream=stream,
            t=t_now,
            model_index=index + 1,
            cluster_id=model.cluster_id,
            distance=distance,
            emitted=emitted,
            query=tuple(state.cursor.symbols),
            model_sequence=model.sequence,
            model_weights=model.weights,
        )

    def _finalize(self, state: _StreamState, t_now: Timestamp, stream: int) -> Finalization:
        sequence = tuple(state.cursor.symbols)
        closest = state.cursor.closest() if self._matching_is_active() else None
        table = state.cursor.table(closest[0]) if closest is not None and closest[1] <= self.params.epsilon else None
        state.cursor.clear()
        state.current_match = None
        self.stats.sequences += 1

        if closest is not None and table is not None:
            index, distance = closest
            target = self.store[index]
            target.decay_to(t_now, self.params.lambda_)
            merged = merge(target, MicroCluster.from_sequence(sequence, t_now), t_now, table=table)
            self.store[index] = merged
            self._bank.replace(index, merged)
            self.stats.merges += 1
            _logger.info(
                "Merged a sequence into a model",
                extra={"node_id": self.node_id, "cluster_id": merged.cluster_id, "distance": distance, "t": t_now},
            )
            return Finalization(merged.cluster_id, index + 1, distance, True, t_now, stream, sequence)

        if len(self.store) >= self.params.m_u:
            self._evict_lightest(t_now)
        cluster_id = self._next_cluster_id
        self._next_cluster_id += 1
        model = MicroCluster.from_sequence(sequence, t_now, cluster_id=cluster_id)
        self.store.append(model)
        self._bank.append(model)
        self.stats.models_created += 1
        _logger.info(
            "Created a model",
            extra={"node_id": self.node_id, "cluster_id": cluster_id, "length": len(sequence), "t": t_now},
        )
        distance = closest[1] if closest is not None else None
        return Finalization(cluster_id, len(self.store), distance, False, t_now, stream, sequence)

    def _evict_lightest(self, t_now: Timestamp) -> None:
        lambda_ = self.params.lambda_
        faded = [decay_weight(model.w, t_now, model.t, lambda_) for model in self.store]
        index = faded.index(min(faded))
        evicted = self.store.pop(index)
        self._bank.remove(index)
        self.stats.evictions += 1
        _logger.info(
            "Evicted the lightest model to make room",
            extra={"node_id": self.node_id, "cluster_id": evicted.cluster_id, "t": t_now},
        )
