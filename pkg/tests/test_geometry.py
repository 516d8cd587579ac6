from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intersim.geometry import (
    Approach,
    IntersectionGrid,
    SpaceTimeSlot,
    TrajectoryParams,
    Turn,
    bundle_span,
    canonical_path,
    crossing_duration,
    rasterize_bundle,
)


def _rot90_ccw(cell, n):
    r, c = cell
    return (n - 1 - c, r)


def test_straight_path_w_lane1_n4():
    grid = IntersectionGrid(n=4, lanes_per_approach=2)
    assert canonical_path(grid, Approach.W, 1, Turn.STRAIGHT) == (
        (1, 0), (1, 1), (1, 2), (1, 3),
    )


def test_straight_path_smallest_grid():
    grid = IntersectionGrid(n=2, lanes_per_approach=1)
    assert canonical_path(grid, Approach.W, 0, Turn.STRAIGHT) == ((0, 0), (0, 1))


def test_right_turn_pivots_down_entry_column():
    grid = IntersectionGrid(n=4, lanes_per_approach=2)
    assert canonical_path(grid, Approach.W, 1, Turn.RIGHT) == (
        (1, 0), (1, 1), (2, 1), (3, 1),
    )


def test_left_turn_pivots_up_far_column():
    grid = IntersectionGrid(n=4, lanes_per_approach=2)
    assert canonical_path(grid, Approach.W, 1, Turn.LEFT) == (
        (1, 0), (1, 1), (1, 2), (0, 2),
    )


def test_invalid_lane_rejected():
    grid = IntersectionGrid(n=4, lanes_per_approach=2)
    with pytest.raises(ValueError):
        canonical_path(grid, Approach.W, 2, Turn.STRAIGHT)


grids = st.builds(
    IntersectionGrid,
    n=st.integers(min_value=2, max_value=12),
    lanes_per_approach=st.integers(min_value=1, max_value=2),
)
turns = st.sampled_from(list(Turn))
approaches = st.sampled_from(list(Approach))


@given(grid=grids, lane=st.integers(min_value=0, max_value=1), turn=turns,
       approach=approaches)
def test_rotational_symmetry(grid, lane, turn, approach):
    lane = lane % grid.lanes_per_approach
    rotations = {Approach.W: 0, Approach.S: 1, Approach.E: 2, Approach.N: 3}
    west = canonical_path(grid, Approach.W, lane, turn)
    expected = west
    for _ in range(rotations[approach]):
        expected = tuple(_rot90_ccw(c, grid.n) for c in expected)
    assert canonical_path(grid, approach, lane, turn) == expected


@given(grid=grids, lane=st.integers(min_value=0, max_value=1), turn=turns,
       approach=approaches)
def test_path_is_continuous_in_bounds_and_full_length(grid, lane, turn, approach):
    lane = lane % grid.lanes_per_approach
    path = canonical_path(grid, approach, lane, turn)
    assert len(path) == grid.n
    assert len(set(path)) == len(path)
    for cell in path:
        assert grid.contains(cell)
    for (r1, c1), (r2, c2) in zip(path, path[1:]):
        assert abs(r1 - r2) + abs(c1 - c2) == 1


@given(grid=grids, lane=st.integers(min_value=0, max_value=1), turn=turns)
def test_path_enters_on_boundary_edge(grid, lane, turn):
    lane = lane % grid.lanes_per_approach
    edges = {
        Approach.W: lambda c: c[1] == 0,
        Approach.E: lambda c: c[1] == grid.n - 1,
        Approach.N: lambda c: c[0] == 0,
        Approach.S: lambda c: c[0] == grid.n - 1,
    }
    for approach, on_edge in edges.items():
        path = canonical_path(grid, approach, lane, turn)
        assert on_edge(path[0])


def test_rasterize_unit_speed_one_cell_per_tick():
    grid = IntersectionGrid(n=4, lanes_per_approach=2)
    params = TrajectoryParams(10, Fraction(1), Approach.W, 1, Turn.STRAIGHT)
    assert rasterize_bundle(grid, params) == frozenset(
        {
            SpaceTimeSlot((1, 0), 10),
            SpaceTimeSlot((1, 1), 11),
            SpaceTimeSlot((1, 2), 12),
            SpaceTimeSlot((1, 3), 13),
        }
    )


def test_rasterize_fast_vehicle_shares_ticks():
    grid = IntersectionGrid(n=2, lanes_per_approach=1)
    params = TrajectoryParams(0, Fraction(2), Approach.W, 0, Turn.STRAIGHT)
    assert rasterize_bundle(grid, params) == frozenset(
        {SpaceTimeSlot((0, 0), 0), SpaceTimeSlot((0, 1), 0)}
    )


def test_rasterize_slow_vehicle_holds_cells_longer():
    grid = IntersectionGrid(n=2, lanes_per_approach=1)
    params = TrajectoryParams(5, Fraction(1, 2), Approach.W, 0, Turn.STRAIGHT)
    assert rasterize_bundle(grid, params) == frozenset(
        {
            SpaceTimeSlot((0, 0), 5),
            SpaceTimeSlot((0, 0), 6),
            SpaceTimeSlot((0, 1), 7),
            SpaceTimeSlot((0, 1), 8),
        }
    )


speeds = st.sampled_from(
    [Fraction(1, 3), Fraction(1, 2), Fraction(2, 3), Fraction(1), Fraction(3, 2),
     Fraction(2), Fraction(3)]
)


@settings(max_examples=200)
@given(grid=grids, lane=st.integers(min_value=0, max_value=1), turn=turns,
       approach=approaches, speed=speeds,
       arrival=st.integers(min_value=0, max_value=50))
def test_bundle_time_monotone_along_path(grid, lane, turn, approach, speed, arrival):
    lane = lane % grid.lanes_per_approach
    params = TrajectoryParams(arrival, speed, approach, lane, turn)
    bundle = rasterize_bundle(grid, params)
    path = canonical_path(grid, approach, lane, turn)
    first_tick = {}
    for slot in bundle:
        first_tick[slot.cell] = min(slot.tick, first_tick.get(slot.cell, 10**9))
    ticks_along_path = [first_tick[cell] for cell in path]
    assert ticks_along_path == sorted(ticks_along_path)
    assert min(t for t in ticks_along_path) == arrival


@given(grid=grids, lane=st.integers(min_value=0, max_value=1), turn=turns,
       approach=approaches, arrival=st.integers(min_value=0, max_value=50))
def test_unit_speed_duration_law(grid, lane, turn, approach, arrival):
    lane = lane % grid.lanes_per_approach
    params = TrajectoryParams(arrival, Fraction(1), approach, lane, turn)
    bundle = rasterize_bundle(grid, params)
    assert len(bundle) == grid.n
    assert bundle_span(bundle) == (arrival, arrival + grid.n - 1)


def test_safety_buffer_widens_occupancy():
    grid = IntersectionGrid(n=2, lanes_per_approach=1)
    params = TrajectoryParams(5, Fraction(1), Approach.W, 0, Turn.STRAIGHT)
    plain = rasterize_bundle(grid, params)
    buffered = rasterize_bundle(grid, params, buffer_ticks=1)
    assert plain < buffered
    assert SpaceTimeSlot((0, 0), 4) in buffered
    assert SpaceTimeSlot((0, 0), 6) in buffered


def test_buffer_clamps_negative_ticks():
    grid = IntersectionGrid(n=2, lanes_per_approach=1)
    params = TrajectoryParams(0, Fraction(1), Approach.W, 0, Turn.STRAIGHT)
    bundle = rasterize_bundle(grid, params, buffer_ticks=2)
    assert all(slot.tick >= 0 for slot in bundle)


def test_crossing_duration_matches_bundle_span():
    grid = IntersectionGrid(n=8, lanes_per_approach=2)
    for speed in (Fraction(1, 2), Fraction(1), Fraction(2)):
        params = TrajectoryParams(0, speed, Approach.W, 0, Turn.STRAIGHT)
        _, last = bundle_span(rasterize_bundle(grid, params))
        assert crossing_duration(grid, speed) == last + 1


def test_grid_validation():
    with pytest.raises(ValueError):
        IntersectionGrid(n=1)
    with pytest.raises(ValueError):
        IntersectionGrid(n=4, lanes_per_approach=0)
    with pytest.raises(ValueError):
        IntersectionGrid(n=4, lanes_per_approach=5)


def test_params_validation():
    with pytest.raises(ValueError):
        TrajectoryParams(0, Fraction(0), Approach.W, 0, Turn.STRAIGHT)
    with pytest.raises(ValueError):
        TrajectoryParams(-1, Fraction(1), Approach.W, 0, Turn.STRAIGHT)
