"""Normalized-coordinate grid geometry.

All coordinates live in [0, 1]^2 with x rightward and y downward. Cell
offsets are measured from the top-left corner of the cell, in cell units.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass


class QuadrantViolation(ValueError):
    """A corner point lies outside the quadrant its kind implies."""


@dataclass(frozen=True)
class GridSpec:
    S: int
    B: int
    N: int

    def __post_init__(self):
        for name in ("S", "B", "N"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")

    @property
    def cell_size(self) -> float:
        return 1.0 / self.S

    @property
    def n_slots(self) -> int:
        return 2 * self.B


class CornerKind(enum.Enum):
    LEFT_TOP = "left_top"
    RIGHT_TOP = "right_top"
    LEFT_BOTTOM = "left_bottom"
    RIGHT_BOTTOM = "right_bottom"

    @property
    def is_left(self) -> bool:
        return self in (CornerKind.LEFT_TOP, CornerKind.LEFT_BOTTOM)

    @property
    def is_top(self) -> bool:
        return self in (CornerKind.LEFT_TOP, CornerKind.RIGHT_TOP)

    @property
    def index(self) -> int:
        return CORNER_KINDS.index(self)

    @classmethod
    def parse(cls, text: str) -> "CornerKind":
        key = text.strip().lower().replace("-", "_")
        aliases = {"lt": "left_top", "rt": "right_top", "lb": "left_bottom", "rb": "right_bottom"}
        return cls(aliases.get(key, key))


# canonical branch order; also the on-disk order of multi-branch containers
CORNER_KINDS = (
    CornerKind.LEFT_TOP,
    CornerKind.RIGHT_TOP,
    CornerKind.LEFT_BOTTOM,
    CornerKind.RIGHT_BOTTOM,
)


def _clamp(v: float, lo: float = 0.0, hi: float = 1.0) -> float:
    return min(max(v, lo), hi)


@dataclass(frozen=True)
class Point2D:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite point ({self.x}, {self.y})")
        object.__setattr__(self, "x", _clamp(float(self.x)))
        object.__setattr__(self, "y", _clamp(float(self.y)))


@dataclass(frozen=True)
class Box:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        vals = (self.xmin, self.ymin, self.xmax, self.ymax)
        if not all(math.isfinite(v) and 0.0 <= v <= 1.0 for v in vals):
            raise ValueError(f"box coordinates must lie in [0, 1]: {vals}")
        if self.xmin > self.xmax or self.ymin > self.ymax:
            raise ValueError(f"inverted box: {vals}")

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def area(self) -> float:
        return self.width * self.height

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.xmin, self.ymin, self.xmax, self.ymax)


@dataclass(frozen=True)
class CellLocation:
    row: int
    col: int
    ox: float
    oy: float

    def cell_index(self, S: int) -> int:
        return self.row * S + self.col


def locate(p: Point2D, grid: GridSpec) -> CellLocation:
    S = grid.S
    col = min(max(math.floor(p.x * S), 0), S - 1)
    row = min(max(math.floor(p.y * S), 0), S - 1)
    return CellLocation(row=row, col=col, ox=p.x * S - col, oy=p.y * S - row)


def point_from_cell(row: int, col: int, ox: float, oy: float, S: int) -> Point2D:
    return Point2D((col + ox) / S, (row + oy) / S)


def center_of(b: Box) -> Point2D:
    return Point2D((b.xmin + b.xmax) / 2, (b.ymin + b.ymax) / 2)


def corner_of(b: Box, k: CornerKind) -> Point2D:
    x = b.xmin if k.is_left else b.xmax
    y = b.ymin if k.is_top else b.ymax
    return Point2D(x, y)


def in_quadrant(center: Point2D, corner: Point2D, k: CornerKind) -> bool:
    """Closed-quadrant test: is `corner` on the k side of `center`?"""
    ok_x = corner.x <= center.x if k.is_left else corner.x >= center.x
    ok_y = corner.y <= center.y if k.is_top else corner.y >= center.y
    return ok_x and ok_y


def box_from_pair(center: Point2D, corner: Point2D, k: CornerKind) -> Box:
    if not in_quadrant(center, corner, k):
        raise QuadrantViolation(
            f"{k.value} corner ({corner.x}, {corner.y}) not in quadrant of "
            f"center ({center.x}, {center.y})"
        )
    hw = abs(corner.x - center.x)
    hh = abs(corner.y - center.y)
    # the corner's own coordinate is kept verbatim so roundtrips stay exact
    if k.is_left:
        xmin, xmax = corner.x, center.x + hw
    else:
        xmin, xmax = center.x - hw, corner.x
    if k.is_top:
        ymin, ymax = corner.y, center.y + hh
    else:
        ymin, ymax = center.y - hh, corner.y
    return Box(_clamp(xmin), _clamp(ymin), _clamp(xmax), _clamp(ymax))


def iou(a: Box, b: Box) -> float:
    iw = min(a.xmax, b.xmax) - max(a.xmin, b.xmin)
    ih = min(a.ymax, b.ymax) - max(a.ymin, b.ymin)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)
