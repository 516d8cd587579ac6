"""Evaluation quantities: delay, moving-average travel time, spend/delay rank
correlation and the cross-policy social cost, plus the stable CSV streams."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class TripRecord:
    vehicle_id: str
    spawn_tick: int
    completion_tick: int
    free_flow_ticks: int
    total_paid: float
    rejections: int
    vehicle_class: str = "standard"

    @property
    def travel_ticks(self) -> int:
        return self.completion_tick - self.spawn_tick


def delay(trip: TripRecord) -> int:
    """Extra travel time versus the same route on an empty network."""
    if trip.completion_tick < trip.spawn_tick:
        raise ValueError("trip is not complete")
    d = trip.travel_ticks - trip.free_flow_ticks
    if d < 0:
        raise ValueError(
            f"negative delay for {trip.vehicle_id}: travelled {trip.travel_ticks}, "
            f"free flow {trip.free_flow_ticks}"
        )
    return d


def moving_avg_travel_time(
    trips: Iterable[TripRecord], window_ticks: int, at_tick: int
) -> float | None:
    """Mean travel time of trips completed in (at_tick - window, at_tick].

    Returns None when no trip completed inside the window.
    """
    if window_ticks <= 0:
        raise ValueError("window must be positive")
    times = [
        t.travel_ticks
        for t in trips
        if at_tick - window_ticks < t.completion_tick <= at_tick
    ]
    if not times:
        return None
    return sum(times) / len(times)


def _average_ranks(values: Sequence[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2 + 1  # 1-based
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def spearman_rank(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Spearman rank correlation with average ranks for ties."""
    if len(xs) != len(ys):
        raise ValueError("mismatched sample lengths")
    if len(xs) < 2:
        raise InsufficientDataError("need at least two samples")
    rx = _average_ranks(xs)
    ry = _average_ranks(ys)
    n = len(xs)
    mx = sum(rx) / n
    my = sum(ry) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    vx = sum((a - mx) ** 2 for a in rx)
    vy = sum((b - my) ** 2 for b in ry)
    if vx == 0 or vy == 0:
        raise InsufficientDataError("zero variance in ranked data")
    return cov / (vx * vy) ** 0.5


def spend_delay_correlation(trips: Sequence[TripRecord], min_trips: int = 10) -> float:
    """Rank correlation between money spent and delay; negative under auctions."""
    if len(trips) < min_trips:
        raise InsufficientDataError(
            f"need >= {min_trips} completed trips, got {len(trips)}"
        )
    return spearman_rank([t.total_paid for t in trips], [delay(t) for t in trips])


def mean_delay(trips: Sequence[TripRecord]) -> float:
    if not trips:
        raise InsufficientDataError("no completed trips")
    return sum(delay(t) for t in trips) / len(trips)


def social_cost(
    ca_trips: Sequence[TripRecord], fcfs_trips: Sequence[TripRecord]
) -> float:
    """How much average delay the value-prioritising policy adds over FCFS."""
    if not ca_trips or not fcfs_trips:
        raise InsufficientDataError("social cost needs both paired runs' trips")
    return mean_delay(ca_trips) - mean_delay(fcfs_trips)


# ---------------------------------------------------------------------------
# CSV streams (stable, documented column order)

TRIPS_COLUMNS = (
    "vehicle_id", "class", "spawn_tick", "completion_tick", "free_flow_ticks",
    "travel_ticks", "delay_ticks", "total_paid", "rejections",
)
PRICES_COLUMNS = ("tick", "intersection", "link", "price", "open")
SUMMARY_COLUMNS = (
    "policy", "seed", "duration_ticks", "vehicles_spawned", "trips_completed",
    "unserved_vehicles", "mean_delay", "mean_travel_ticks", "total_paid",
    "spearman_spend_delay", "final_moving_avg", "closures", "max_price",
)


def write_trips_csv(path: str | Path, trips: Iterable[TripRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRIPS_COLUMNS)
        for t in trips:
            writer.writerow(
                [
                    t.vehicle_id, t.vehicle_class, t.spawn_tick, t.completion_tick,
                    t.free_flow_ticks, t.travel_ticks, delay(t), t.total_paid,
                    t.rejections,
                ]
            )


def write_prices_csv(path: str | Path, rows: Iterable[tuple]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(PRICES_COLUMNS)
        for row in rows:
            writer.writerow(row)


def write_summary_csv(path: str | Path, summaries: Iterable[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for s in summaries:
            writer.writerow([s.get(col, "") for col in SUMMARY_COLUMNS])
