"""Basic planar geometry types shared by every module.

Coordinates are plain floats (or exact ``fractions.Fraction`` where the
cascade construction needs them); everything here is immutable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple


class Point(NamedTuple):
    x: float
    y: float

    def is_finite(self) -> bool:
        return math.isfinite(self.x) and math.isfinite(self.y)


@dataclass(frozen=True)
class AxisRect:
    """Axis-aligned rectangle, open or closed depending on the caller's test."""

    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float

    def __post_init__(self):
        if not (self.x_lo < self.x_hi and self.y_lo < self.y_hi):
            raise ValueError(f"degenerate rectangle {self!r}")

    @property
    def width(self):
        return self.x_hi - self.x_lo

    @property
    def height(self):
        return self.y_hi - self.y_lo

    @property
    def area(self):
        return self.width * self.height

    def center(self) -> Point:
        return Point((self.x_lo + self.x_hi) / 2, (self.y_lo + self.y_hi) / 2)

    def contains(self, x, y, closed: bool = True) -> bool:
        if closed:
            return self.x_lo <= x <= self.x_hi and self.y_lo <= y <= self.y_hi
        return self.x_lo < x < self.x_hi and self.y_lo < y < self.y_hi

    # half-open membership [lo, hi): the convention used by piecewise cell
    # lookups so that a point on a seam belongs to the right/upper cell
    def contains_half_open(self, x, y) -> bool:
        return self.x_lo <= x < self.x_hi and self.y_lo <= y < self.y_hi

    def distance_to_boundary(self, x, y) -> float:
        """Distance from an interior point to the rectangle's boundary."""
        return min(x - self.x_lo, self.x_hi - x, y - self.y_lo, self.y_hi - y)

    def shrunk(self, margin) -> "AxisRect":
        return AxisRect(self.x_lo + margin, self.x_hi - margin,
                        self.y_lo + margin, self.y_hi - margin)

    def intersects(self, other: "AxisRect") -> bool:
        return not (other.x_hi <= self.x_lo or self.x_hi <= other.x_lo
                    or other.y_hi <= self.y_lo or self.y_hi <= other.y_lo)

    def as_tuple(self):
        return (self.x_lo, self.x_hi, self.y_lo, self.y_hi)
