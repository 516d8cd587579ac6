"""Grid geometry for reservation-controlled intersections.

The crossing area is an n-by-n matrix of unit cells. A crossing request is
fixed by four parameters -- arrival tick, arrival speed, entry lane and turn.
Together they pin down which cells the vehicle sweeps and at which tick it
occupies each one (constant speed inside the box, no acceleration). The
resulting set of (cell, tick) pairs is the bundle of goods the request
implicitly asks for.

Path convention: a vehicle entering from the west side on lane ``l`` enters at
cell ``(l, 0)`` heading toward increasing column. Straight keeps row ``l``;
a right turn pivots down column ``p = l``; a left turn pivots up column
``q = n - 1 - l``. Paths for the other three sides are the west path rotated
about the grid centre (south 90, east 180, north 270 degrees counterclockwise),
so every property proven for the west side holds for all four by symmetry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import NamedTuple

Cell = tuple[int, int]


class Approach(str, Enum):
    """Compass side a vehicle enters the intersection from."""

    N = "N"
    E = "E"
    S = "S"
    W = "W"


class Turn(str, Enum):
    STRAIGHT = "straight"
    LEFT = "left"
    RIGHT = "right"


class SpaceTimeSlot(NamedTuple):
    """One grid cell at one discrete tick: the atomic reservable good."""

    cell: Cell
    tick: int


Bundle = frozenset  # frozenset[SpaceTimeSlot]


@dataclass(frozen=True)
class IntersectionGrid:
    """Square matrix of space cells, ``lanes_per_approach`` entry lanes per side."""

    n: int = 8
    lanes_per_approach: int = 2

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError(f"grid side n must be >= 2, got {self.n}")
        if not 1 <= self.lanes_per_approach <= self.n:
            raise ValueError(
                f"lanes_per_approach must be in [1, {self.n}], got {self.lanes_per_approach}"
            )

    def contains(self, cell: Cell) -> bool:
        r, c = cell
        return 0 <= r < self.n and 0 <= c < self.n


@dataclass(frozen=True)
class TrajectoryParams:
    """The four request parameters that implicitly define a bundle."""

    arrival_tick: int
    arrival_speed: Fraction  # cells per tick
    approach: Approach
    lane: int
    turn: Turn

    def __post_init__(self) -> None:
        speed = Fraction(self.arrival_speed)
        object.__setattr__(self, "arrival_speed", speed)
        if speed <= 0:
            raise ValueError(f"arrival_speed must be positive, got {speed}")
        if self.arrival_tick < 0:
            raise ValueError(f"arrival_tick must be >= 0, got {self.arrival_tick}")
        if self.lane < 0:
            raise ValueError(f"lane must be >= 0, got {self.lane}")

    def shifted(self, arrival_tick: int) -> "TrajectoryParams":
        """Same trajectory starting at a different tick."""
        return TrajectoryParams(
            arrival_tick=arrival_tick,
            arrival_speed=self.arrival_speed,
            approach=self.approach,
            lane=self.lane,
            turn=self.turn,
        )


# Number of 90-degree counterclockwise rotations mapping the west path onto
# each approach's path.
_ROTATIONS = {Approach.W: 0, Approach.S: 1, Approach.E: 2, Approach.N: 3}


def _rot90_ccw(cell: Cell, n: int) -> Cell:
    r, c = cell
    return (n - 1 - c, r)


def canonical_path(
    grid: IntersectionGrid, approach: Approach, lane: int, turn: Turn
) -> tuple[Cell, ...]:
    """Ordered cells a vehicle traverses for the given entry lane and turn.

    All paths have exactly ``grid.n`` cells: the pivot splits a straight run
    into an entry segment and a perpendicular exit segment of complementary
    lengths.
    """
    if not 0 <= lane < grid.lanes_per_approach:
        raise ValueError(
            f"lane {lane} out of range for {grid.lanes_per_approach} lanes"
        )
    n = grid.n
    if turn is Turn.STRAIGHT:
        path = [(lane, c) for c in range(n)]
    elif turn is Turn.RIGHT:
        pivot = lane
        path = [(lane, c) for c in range(pivot + 1)]
        path += [(r, pivot) for r in range(lane + 1, n)]
    else:  # LEFT
        pivot = n - 1 - lane
        path = [(lane, c) for c in range(pivot + 1)]
        path += [(r, pivot) for r in range(lane - 1, -1, -1)]
    for _ in range(_ROTATIONS[approach]):
        path = [_rot90_ccw(cell, n) for cell in path]
    return tuple(path)


def occupancy_offsets(path_length: int, speed: Fraction) -> tuple[tuple[int, ...], ...]:
    """Tick offsets (relative to arrival) during which each path cell is held.

    At speed v <= 1 cell k is held from floor(k/v) through floor((k+1)/v) - 1;
    at v >= 1 several cells share a tick and cell k is held at floor(k/v) only.
    The two rules agree at v = 1.
    """
    speed = Fraction(speed)
    offsets: list[tuple[int, ...]] = []
    for k in range(path_length):
        if speed >= 1:
            offsets.append((math.floor(Fraction(k) / speed),))
        else:
            first = math.floor(Fraction(k) / speed)
            last = math.floor(Fraction(k + 1) / speed) - 1
            offsets.append(tuple(range(first, last + 1)))
    return tuple(offsets)


def bundle_offsets(
    grid: IntersectionGrid,
    approach: Approach,
    lane: int,
    turn: Turn,
    speed: Fraction,
    buffer_ticks: int = 0,
) -> tuple[tuple[Cell, int], ...]:
    """(cell, tick-offset) pairs of a crossing, relative to the arrival tick.

    ``buffer_ticks`` widens each cell's holding interval by +-b ticks as a
    safety margin (negative absolute ticks are clamped by the caller).
    """
    path = canonical_path(grid, approach, lane, turn)
    per_cell = occupancy_offsets(len(path), speed)
    pairs: list[tuple[Cell, int]] = []
    seen: set[tuple[Cell, int]] = set()
    for cell, ticks in zip(path, per_cell):
        lo = min(ticks) - buffer_ticks
        hi = max(ticks) + buffer_ticks
        for dt in range(lo, hi + 1):
            if (cell, dt) not in seen:
                seen.add((cell, dt))
                pairs.append((cell, dt))
    return tuple(pairs)


def rasterize_bundle(
    grid: IntersectionGrid, params: TrajectoryParams, buffer_ticks: int = 0
) -> Bundle:
    """Expand a request into the exact set of space-time slots it claims.

    Slots whose tick would fall below 0 (possible only with a safety buffer
    at arrival_tick < buffer) are clamped away.
    """
    offsets = bundle_offsets(
        grid, params.approach, params.lane, params.turn, params.arrival_speed,
        buffer_ticks,
    )
    return frozenset(
        SpaceTimeSlot(cell, params.arrival_tick + dt)
        for cell, dt in offsets
        if params.arrival_tick + dt >= 0
    )


def crossing_duration(grid: IntersectionGrid, speed: Fraction) -> int:
    """Ticks from entering the first cell to leaving the last one, inclusive."""
    per_cell = occupancy_offsets(grid.n, speed)
    return max(max(ticks) for ticks in per_cell) + 1


def bundle_span(bundle: Bundle) -> tuple[int, int]:
    """(first tick, last tick) covered by a bundle."""
    ticks = [slot.tick for slot in bundle]
    return min(ticks), max(ticks)
