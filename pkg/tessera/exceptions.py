from collections.abc import Sequence
from pathlib import Path


class TesseraError(Exception):
    pass


class TesseraStructureError(TesseraError):
    pass


class InvalidSequenceError(TesseraStructureError):
    pass


class InvalidMicroClusterError(TesseraStructureError):
    pass


class ClockError(TesseraError):
    def __init__(self, t_now: int, clock: int) -> None:
        self.t_now = t_now
        self.clock = clock
        super().__init__(f"Time cannot move backwards: received tick {t_now} but the node clock is already at {clock}.")


class OracleLimitError(TesseraError):
    pass


class EncodingError(TesseraError):
    pass


class SymbolRangeError(EncodingError):
    pass


class DuplicateObservationError(EncodingError):
    pass


class CellContentionError(EncodingError):
    def __init__(self, cell: int, object_ids: Sequence[int], t: int) -> None:
        self.cell = cell
        self.object_ids = tuple(object_ids)
        self.t = t
        super().__init__(
            f"Cell {cell} is occupied by more than one object at tick {t}: {list(self.object_ids)}. "
            "The tick was skipped for this cell."
        )


class EmptyAssignmentLogError(TesseraError):
    pass


class ConfigError(TesseraError):
    pass


class SnapshotError(TesseraError):
    pass


class RecordParseError(TesseraError):
    def __init__(self, path: Path | str, line_number: int, reason: str) -> None:
        self.path = path
        self.line_number = line_number
        self.reason = reason
        super().__init__(f"{path}:{line_number}: {reason}")
