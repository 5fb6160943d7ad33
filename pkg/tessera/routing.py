import math
from collections import defaultdict
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from functools import cached_property
from logging import getLogger

from pydantic import BaseModel, ConfigDict, Field

from tessera.clustering import ClusterNode, MatchEvent
from tessera.encoding import GridEncoder, StepEncoding, encode_output, layer1_node_id
from tessera.exceptions import TesseraStructureError
from tessera.structure import DELIMITER, GridSpec, Hyperparams, ObjectObservation, Symbol, Timestamp

_logger = getLogger(__name__)


class PipelineSpec(BaseModel):
    """Shape of a two-layer pipeline.

    Layer-1 nodes are the grid cells (node id = cell index + 1). Cells are grouped into rectangular
    blocks of `block_rows` x `block_cols`; each block feeds one layer-2 node, numbered after the last
    layer-1 node. Leaving the block sizes unset puts the whole grid under a single layer-2 node.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: GridSpec
    layer1: Hyperparams = Field(default_factory=Hyperparams)
    layer2: Hyperparams = Field(default_factory=Hyperparams)
    block_rows: int | None = Field(default=None, ge=1)
    block_cols: int | None = Field(default=None, ge=1)

    @property
    def layer1_ids(self) -> range:
        return range(1, self.grid.cell_count + 1)

    @property
    def _block_shape(self) -> tuple[int, int]:
        return (self.block_rows or self.grid.rows, self.block_cols or self.grid.cols)

    @property
    def _blocks_per_row(self) -> int:
        return math.ceil(self.grid.cols / self._block_shape[1])

    @property
    def layer2_ids(self) -> range:
        block_rows, _ = self._block_shape
        count = math.ceil(self.grid.rows / block_rows) * self._blocks_per_row
        first = self.grid.cell_count + 1
        return range(first, first + count)

    def layer2_node_of(self, cell: int) -> int:
        block_rows, block_cols = self._block_shape
        row, col = divmod(cell, self.grid.cols)
        block = (row // block_rows) * self._blocks_per_row + col // block_cols
        return self.grid.cell_count + 1 + block

    def layer2_groups(self) -> dict[int, tuple[int, ...]]:
        """Layer-2 node id to the layer-1 node ids that feed it"""
        groups: dict[int, list[int]] = {node_id: [] for node_id in self.layer2_ids}
        for cell in range(self.grid.cell_count):
            groups[self.layer2_node_of(cell)].append(layer1_node_id(cell))
        return {node_id: tuple(members) for node_id, members in groups.items()}


@dataclass(frozen=True, slots=True)
class Layer2Input:
    source_node: int
    target_node: int
    object_id: int
    symbol: Symbol


@dataclass(slots=True)
class Transfer:
    """Holds one tick's layer-2 inputs and releases them ordered by source node.

    The sort is stable, so symbols of one source keep their arrival order and delimiters sent
    after a node's symbols stay behind them.
    """

    pending: list[Layer2Input] = field(default_factory=list)

    def send(self, item: Layer2Input) -> None:
        self.pending.append(item)

    def drain(self) -> list[Layer2Input]:
        released = sorted(self.pending, key=lambda item: item.source_node)
        self.pending.clear()
        return released


@dataclass(frozen=True, slots=True)
class TickResult:
    t: Timestamp
    encoding: StepEncoding
    layer1: tuple[MatchEvent, ...]
    transfers: tuple[Layer2Input, ...]
    layer2: tuple[MatchEvent, ...]


class Pipeline:
    def __init__(self, spec: PipelineSpec, *, strict: bool = False) -> None:
        super().__init__()
        self.spec = spec
        self.strict = strict
        self.encoder = GridEncoder(spec.grid)
        self.layer1 = {node_id: ClusterNode(node_id, spec.layer1) for node_id in spec.layer1_ids}
        self.layer2 = {node_id: ClusterNode(node_id, spec.layer2) for node_id in spec.layer2_ids}
        self.transfer = Transfer()
        self.clock: Timestamp = 0
        self._active_by_group: dict[int, frozenset[int]] = {}

    @cached_property
    def nodes(self) -> dict[int, ClusterNode]:
        return self.layer1 | self.layer2

    def tick(self, observations: Iterable[ObjectObservation], t: Timestamp) -> TickResult:
        if t < self.clock:
            raise TesseraStructureError(f"Pipeline ticks must not go backwards: got {t} after {self.clock}.")
        self.clock = t
        encoding = self.encoder.encode_step(observations, t)
        if self.strict and encoding.contentions:
            raise encoding.contentions[0]

        layer1_events: list[MatchEvent] = []
        # The layer-1 node whose cell an object left last within each group delivers its delimiter
        leaving_source: dict[tuple[int, int], int] = {}
        for event in encoding.events:
            node = self.layer1[layer1_node_id(event.cell)]
            target = self.spec.layer2_node_of(event.cell)
            match = node.ingest_symbol(event.symbol, t)
            if event.symbol == DELIMITER:
                leaving_source[(target, event.object_id)] = node.node_id
            if match is None:
                continue
            layer1_events.append(match)
            if match.emitted:
                symbol = encode_output(node.node_id, match.model_index, self.spec.layer1.m_u)
                self.transfer.send(Layer2Input(node.node_id, target, event.object_id, symbol))

        for (target, object_id), source in sorted(self._left_groups().items()):
            self.transfer.send(Layer2Input(leaving_source.get((target, object_id), source), target, object_id, 0))

        transfers = self.transfer.drain()
        layer2_events: list[MatchEvent] = []
        for item in transfers:
            node = self.layer2[item.target_node]
            if item.symbol == DELIMITER:
                node.finalize(t, stream=item.object_id)
                _logger.info(
                    "Delivered a layer-2 delimiter",
                    extra={"node_id": item.target_node, "object_id": item.object_id, "t": t},
                )
                continue
            match = node.ingest_symbol(item.symbol, t, stream=item.object_id)
            if match is not None:
                layer2_events.append(match)

        for node in self.nodes.values():
            node.advance(t)
        return TickResult(t, encoding, tuple(layer1_events), tuple(transfers), tuple(layer2_events))

    def _left_groups(self) -> dict[tuple[int, int], int]:
        """(layer-2 node, object) pairs whose object stopped occupying every cell of the group this tick.

        Values are a fallback source node for the delimiter: the first layer-1 node of the group.
        """
        active: dict[int, set[int]] = {node_id: set() for node_id in self.spec.layer2_ids}
        for cell, object_id in self.encoder.occupants.items():
            active[self.spec.layer2_node_of(cell)].add(object_id)
        groups = self.spec.layer2_groups()
        left: dict[tuple[int, int], int] = {}
        for target, previous in self._active_by_group.items():
            for object_id in previous - active[target]:
                left[(target, object_id)] = groups[target][0]
        self._active_by_group = {target: frozenset(objects) for target, objects in active.items()}
        return left


def iter_ticks(observations: Iterable[ObjectObservation]) -> Iterator[tuple[Timestamp, list[ObjectObservation]]]:
    """Group observations by tick, yielding empty ticks in between and one trailing empty tick.

    The trailing tick is where objects still on screen at the last observation get their delimiters.
    """
    by_tick: defaultdict[Timestamp, list[ObjectObservation]] = defaultdict(list)
    for observation in observations:
        by_tick[observation.t].append(observation)
    if not by_tick:
        return
    for t in range(min(by_tick), max(by_tick) + 2):
        yield t, by_tick.get(t, [])


def run_pipeline(pipeline: Pipeline, observations: Iterable[ObjectObservation]) -> Iterator[TickResult]:
    for t, step in iter_ticks(observations):
        yield pipeline.tick(step, t)
