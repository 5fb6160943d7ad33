from dataclasses import dataclass, field
from functools import cached_property

from tessera.exceptions import TesseraStructureError

from .common import Timestamp


@dataclass(frozen=True, slots=True)
class Rect:
    """Axis-aligned rectangle in scene units. `y` grows downwards, as in image coordinates."""

    x: float
    y: float
    w: float
    h: float

    @property
    def right(self) -> float:
        return self.x + self.w

    @property
    def bottom(self) -> float:
        return self.y + self.h

    def overlap_area(self, other: "Rect") -> float:
        width = min(self.right, other.right) - max(self.x, other.x)
        height = min(self.bottom, other.bottom) - max(self.y, other.y)
        if width <= 0 or height <= 0:
            return 0.0
        return width * height

    def intersects(self, other: "Rect") -> bool:
        return self.overlap_area(other) > 0

    def quadrants(self) -> tuple["Rect", "Rect", "Rect", "Rect"]:
        """Top-left, top-right, bottom-left, bottom-right"""
        half_w = self.w / 2
        half_h = self.h / 2
        return (
            Rect(self.x, self.y, half_w, half_h),
            Rect(self.x + half_w, self.y, half_w, half_h),
            Rect(self.x, self.y + half_h, half_w, half_h),
            Rect(self.x + half_w, self.y + half_h, half_w, half_h),
        )

    def clamp_to(self, frame: "Rect") -> "Rect":
        x = min(max(self.x, frame.x), frame.right)
        y = min(max(self.y, frame.y), frame.bottom)
        right = min(max(self.right, frame.x), frame.right)
        bottom = min(max(self.bottom, frame.y), frame.bottom)
        return Rect(x, y, right - x, bottom - y)


@dataclass(frozen=True)
class GridSpec:
    frame_width: float
    frame_height: float
    rows: int
    cols: int

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise TesseraStructureError(f"A grid needs at least one row and one column, got {self.rows}x{self.cols}.")
        if self.frame_width <= 0 or self.frame_height <= 0:
            raise TesseraStructureError(
                f"Frame dimensions must be positive, got {self.frame_width}x{self.frame_height}."
            )

    @property
    def cell_count(self) -> int:
        return self.rows * self.cols

    @property
    def cell_width(self) -> float:
        return self.frame_width / self.cols

    @property
    def cell_height(self) -> float:
        return self.frame_height / self.rows

    @property
    def frame(self) -> Rect:
        return Rect(0.0, 0.0, self.frame_width, self.frame_height)

    @cached_property
    def cells(self) -> tuple[Rect, ...]:
        """Cells in row-major order; index `row * cols + col`"""
        return tuple(
            Rect(col * self.cell_width, row * self.cell_height, self.cell_width, self.cell_height)
            for row in range(self.rows)
            for col in range(self.cols)
        )

    def cells_touching(self, rect: Rect) -> list[int]:
        if not rect.intersects(self.frame):
            return []
        first_col = max(int(rect.x // self.cell_width), 0)
        last_col = min(int(rect.right // self.cell_width), self.cols - 1)
        first_row = max(int(rect.y // self.cell_height), 0)
        last_row = min(int(rect.bottom // self.cell_height), self.rows - 1)
        return [
            row * self.cols + col
            for row in range(first_row, last_row + 1)
            for col in range(first_col, last_col + 1)
            if self.cells[row * self.cols + col].intersects(rect)
        ]


@dataclass(frozen=True, slots=True)
class ObjectObservation:
    """Tracker output for one object at one tick.

    `parts` lists extra footprint rectangles for blobs a single bounding box describes badly.
    """

    object_id: int
    bbox: Rect
    t: Timestamp
    parts: tuple[Rect, ...] = field(default=())

    @property
    def footprint(self) -> tuple[Rect, ...]:
        return (self.bbox, *self.parts)
