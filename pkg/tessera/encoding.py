"""Trajectory footprints to first-layer symbols and node matches to upper-layer symbols.

A grid cell is split into 2x2 quadrants; the symbol of an object in a cell is the 4-bit mask of
the quadrants its footprint overlaps with positive area:

    bit 0  top-left      bit 1  top-right
    bit 2  bottom-left   bit 3  bottom-right

Symbol 0 means the cell is empty and doubles as the sequence delimiter on every layer.
"""

from collections import defaultdict
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from logging import getLogger

from tessera.exceptions import CellContentionError, DuplicateObservationError, SymbolRangeError
from tessera.structure import DELIMITER, GridSpec, ObjectObservation, Rect, Symbol, Timestamp

_logger = getLogger(__name__)


def encode_cell(cell: Rect, footprint: Rect | Iterable[Rect]) -> Symbol:
    rects = (footprint,) if isinstance(footprint, Rect) else tuple(footprint)
    symbol = 0
    for bit, quadrant in enumerate(cell.quadrants()):
        if any(quadrant.intersects(rect) for rect in rects):
            symbol |= 1 << bit
    return symbol


def layer1_node_id(cell: int) -> int:
    return cell + 1


def encode_output(node_id: int, model_index: int, m_u: int) -> Symbol:
    """`node_id * m_u + model_index`, the symbol a node sends upwards when its match changes"""
    if node_id < 1:
        raise SymbolRangeError(f"Node ids start at 1 but got {node_id}.")
    if not 1 <= model_index <= m_u:
        raise SymbolRangeError(f"Model index must be between 1 and {m_u} but got {model_index}.")
    return node_id * m_u + model_index


def decode_output(symbol: Symbol, m_u: int) -> tuple[int, int]:
    if symbol == DELIMITER:
        raise SymbolRangeError("Symbol 0 is the delimiter and does not encode a node match.")
    if symbol < m_u + 1:
        raise SymbolRangeError(
            f"Symbol {symbol} would decode to node id 0. Encoded outputs start at {m_u + 1} for m_u={m_u}."
        )
    node_id = (symbol - 1) // m_u
    return node_id, symbol - node_id * m_u


@dataclass(frozen=True, slots=True)
class SymbolEvent:
    t: Timestamp
    cell: int
    object_id: int
    symbol: Symbol


@dataclass(frozen=True, slots=True)
class StepEncoding:
    events: tuple[SymbolEvent, ...]
    contentions: tuple[CellContentionError, ...] = ()


class GridEncoder:
    """Stateful per-grid encoder that remembers which object occupies each cell.

    A cell's stream for an object is the run of its masks followed by the 0 emitted on the tick
    the object leaves. Cells claimed by several objects at once are reported and skipped for
    that tick, keeping their previous occupant.
    """

    def __init__(self, grid: GridSpec) -> None:
        super().__init__()
        self.grid = grid
        self._occupants: dict[int, int] = {}

    @property
    def occupants(self) -> Mapping[int, int]:
        """Cell index to the object currently occupying it"""
        return self._occupants

    def encode_step(self, observations: Iterable[ObjectObservation], t: Timestamp) -> StepEncoding:
        claims: defaultdict[int, list[tuple[int, Symbol]]] = defaultdict(list)
        seen: set[int] = set()
        for observation in sorted(observations, key=lambda observation: observation.object_id):
            if observation.object_id in seen:
                raise DuplicateObservationError(
                    f"Object {observation.object_id} was observed more than once at tick {t}."
                )
            seen.add(observation.object_id)
            footprint = observation.footprint
            touched = sorted({cell for rect in footprint for cell in self.grid.cells_touching(rect)})
            for cell in touched:
                symbol = encode_cell(self.grid.cells[cell], footprint)
                if symbol:
                    claims[cell].append((observation.object_id, symbol))

        events: list[SymbolEvent] = []
        contentions: list[CellContentionError] = []
        for cell in sorted(claims.keys() | self._occupants.keys()):
            cell_claims = claims.get(cell, [])
            previous = self._occupants.get(cell)
            if len(cell_claims) > 1:
                contention = CellContentionError(cell, [object_id for object_id, _ in cell_claims], t)
                _logger.warning(
                    "Skipping a contended cell",
                    extra={"cell": cell, "t": t, "object_ids": list(contention.object_ids)},
                )
                contentions.append(contention)
                continue
            if not cell_claims:
                assert previous is not None
                events.append(SymbolEvent(t, cell, previous, DELIMITER))
                del self._occupants[cell]
                continue
            object_id, symbol = cell_claims[0]
            if previous is not None and previous != object_id:
                events.append(SymbolEvent(t, cell, previous, DELIMITER))
            events.append(SymbolEvent(t, cell, object_id, symbol))
            self._occupants[cell] = object_id
        return StepEncoding(tuple(events), tuple(contentions))


def encode_step(
    grid: GridSpec, observations: Iterable[ObjectObservation], t: Timestamp, encoder: GridEncoder | None = None
) -> StepEncoding:
    """One tick of encoding; pass the same `encoder` across ticks to get the leave delimiters"""
    if encoder is None:
        encoder = GridEncoder(grid)
    return encoder.encode_step(observations, t)
