"""Wire formats: JSON Lines records for data files and a single JSON document per node snapshot."""

import json
from collections.abc import Iterable, Iterator
from pathlib import Path
from typing import Annotated, Literal, TypeVar

from pydantic import BaseModel, ConfigDict, Field, ValidationError
from typing_extensions import Self

from tessera.clustering import ClusterNode, MatchEvent
from tessera.encoding import SymbolEvent
from tessera.exceptions import RecordParseError, SnapshotError, TesseraStructureError
from tessera.routing import Layer2Input
from tessera.structure import Hyperparams, MicroCluster, ObjectObservation, Rect
from tessera.synthesis import LabeledObservation, LabeledSequence

_RecordT = TypeVar("_RecordT", bound=BaseModel)


class _Record(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class ObservationRecord(_Record):
    t: int = Field(ge=0)
    object_id: int
    x: float
    y: float
    w: float = Field(ge=0)
    h: float = Field(ge=0)
    label: int | None = None

    @classmethod
    def from_labeled(cls, item: LabeledObservation) -> Self:
        observation = item.observation
        bbox = observation.bbox
        return cls(
            t=observation.t,
            object_id=observation.object_id,
            x=bbox.x,
            y=bbox.y,
            w=bbox.w,
            h=bbox.h,
            label=item.label,
        )

    def to_observation(self) -> ObjectObservation:
        return ObjectObservation(self.object_id, Rect(self.x, self.y, self.w, self.h), self.t)


class SymbolEventRecord(_Record):
    t: int
    cell: int
    object_id: int
    symbol: int

    @classmethod
    def from_event(cls, event: SymbolEvent) -> Self:
        return cls(t=event.t, cell=event.cell, object_id=event.object_id, symbol=event.symbol)


class SequenceRecord(_Record):
    label: int | None = None
    symbols: list[Annotated[int, Field(ge=0)]]

    @classmethod
    def from_labeled(cls, item: LabeledSequence) -> Self:
        return cls(label=item.label, symbols=list(item.symbols))


class AssignmentRecord(_Record):
    sequence_id: int
    label: int | None
    model: int
    t: int
    merged: bool


class MatchRecord(_Record):
    kind: Literal["match"] = "match"
    t: int
    layer: int
    node_id: int
    stream: int
    model_index: int
    distance: float
    emitted: bool

    @classmethod
    def from_event(cls, event: MatchEvent, layer: int) -> Self:
        return cls(
            t=event.t,
            layer=layer,
            node_id=event.node_id,
            stream=event.stream,
            model_index=event.model_index,
            distance=event.distance,
            emitted=event.emitted,
        )


class TransferRecord(_Record):
    kind: Literal["transfer"] = "transfer"
    t: int
    source_node: int
    target_node: int
    object_id: int
    symbol: int

    @classmethod
    def from_input(cls, item: Layer2Input, t: int) -> Self:
        return cls(
            t=t,
            source_node=item.source_node,
            target_node=item.target_node,
            object_id=item.object_id,
            symbol=item.symbol,
        )


class ContentionRecord(_Record):
    kind: Literal["contention"] = "contention"
    t: int
    cell: int
    object_ids: list[int]


class ModelRecord(_Record):
    cluster_id: int = Field(alias="id")
    t: int
    w: float = Field(ge=0)
    sequence: list[int] = Field(alias="SE")
    weights: list[float] = Field(alias="SW")

    @classmethod
    def from_model(cls, model: MicroCluster) -> Self:
        return cls(id=model.cluster_id, t=model.t, w=model.w, SE=list(model.sequence), SW=list(model.weights))

    def to_model(self) -> MicroCluster:
        return MicroCluster(
            t=self.t, w=self.w, sequence=tuple(self.sequence), weights=tuple(self.weights), cluster_id=self.cluster_id
        )


class NodeSnapshot(_Record):
    node_id: int = Field(ge=1)
    params: Hyperparams
    clock: int = 0
    next_cluster_id: int = 1
    models: list[ModelRecord] = Field(default_factory=list)

    @classmethod
    def from_node(cls, node: ClusterNode) -> Self:
        return cls(
            node_id=node.node_id,
            params=node.params,
            clock=node.clock,
            next_cluster_id=node.next_cluster_id,
            models=[ModelRecord.from_model(model) for model in node.store],
        )

    def to_node(self) -> ClusterNode:
        try:
            return ClusterNode(
                self.node_id,
                self.params,
                store=[record.to_model() for record in self.models],
                clock=self.clock,
                next_cluster_id=self.next_cluster_id,
            )
        except TesseraStructureError as e:
            raise SnapshotError(f"The snapshot does not describe a valid node: {e}") from e

    def dumps(self) -> str:
        return json.dumps(self.model_dump(mode="json", by_alias=True), indent=2, sort_keys=True) + "\n"


def save_snapshot(node: ClusterNode, path: Path) -> None:
    path.write_text(NodeSnapshot.from_node(node).dumps())


def load_snapshot(path: Path) -> NodeSnapshot:
    try:
        return NodeSnapshot.model_validate_json(path.read_text())
    except ValidationError as e:
        raise SnapshotError(f"{path} is not a valid node snapshot:\n{e}") from e


def _first_error(error: ValidationError) -> str:
    details = error.errors()[0]
    location = ".".join(str(part) for part in details["loc"])
    return f"{location}: {details['msg']}" if location else details["msg"]


def read_records(path: Path, record_type: type[_RecordT]) -> Iterator[_RecordT]:
    """Parse a JSON Lines file; blank lines are skipped and the first bad line stops the read"""
    with path.open() as file:
        for line_number, line in enumerate(file, start=1):
            if not line.strip():
                continue
            try:
                yield record_type.model_validate_json(line)
            except ValidationError as e:
                raise RecordParseError(path, line_number, _first_error(e)) from e


def dump_records(records: Iterable[BaseModel]) -> str:
    return "".join(record.model_dump_json(by_alias=True) + "\n" for record in records)


def write_records(path: Path, records: Iterable[BaseModel]) -> None:
    path.write_text(dump_records(records))
