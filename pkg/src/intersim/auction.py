"""Round-based sealed-bid combinatorial auction over space-time bundles.

Each round collects bids for a window of ticks, solves the winner
determination problem (WDP) and commits the winners to the ledger at their
bid price (first price, one shot). Two solvers are provided: an exact
branch-and-bound oracle for small instances, and an anytime greedy ranked by
value density whose partial output is always a feasible winner set. A
first-come first-served grant path serves as the price-free baseline policy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

from .geometry import Bundle, IntersectionGrid, TrajectoryParams, rasterize_bundle
from .ledger import Ledger, Reservation, ReservationKind


@dataclass(frozen=True)
class Bid:
    bidder: str
    params: TrajectoryParams
    bundle: Bundle
    value: float
    priority_multiplier: float = 1.0
    submitted_tick: int = 0

    def __post_init__(self) -> None:
        if self.value < 0:
            raise ValueError(f"bid value must be >= 0, got {self.value}")
        if self.priority_multiplier <= 0:
            raise ValueError("priority_multiplier must be positive")
        if not self.bundle:
            raise ValueError("bid bundle must be non-empty")

    @property
    def effective_value(self) -> float:
        """What the solver maximises; the winner still pays the raw value."""
        return self.value * self.priority_multiplier


@dataclass
class AuctionRound:
    """One collection window worth of bids.

    Bids stamped after ``collect_to_tick`` arrive while the solver runs; they
    are parked in ``late_bids`` and belong to the next round.
    """

    round_id: int
    collect_from_tick: int
    collect_to_tick: int
    bid_set: list[Bid] = field(default_factory=list)
    late_bids: list[Bid] = field(default_factory=list)

    def add(self, bid: Bid) -> None:
        if bid.submitted_tick > self.collect_to_tick:
            self.late_bids.append(bid)
        elif bid.submitted_tick < self.collect_from_tick:
            raise ValueError(
                f"bid from tick {bid.submitted_tick} predates collection window"
            )
        else:
            self.bid_set.append(bid)


@dataclass(frozen=True)
class WinnerSet:
    winners: tuple[Bid, ...]
    total_value: float
    exact: bool


class OracleSizeError(ValueError):
    """Too many bids for exhaustive winner determination."""


def _bundles_conflict(a: Bundle, b: Bundle) -> bool:
    if len(a) > len(b):
        a, b = b, a
    return any(slot in b for slot in a)


def _preference_key(bids: Sequence[Bid]) -> tuple:
    """Deterministic tie-break among equal-value winner sets.

    Fewer total slots first, then earliest submission, then the
    lexicographically smallest sorted bidder list.
    """
    slots = sum(len(b.bundle) for b in bids)
    min_tick = min((b.submitted_tick for b in bids), default=math.inf)
    bidders = tuple(sorted(b.bidder for b in bids))
    return (slots, min_tick, bidders)


def solve_wdp_exact(bids: Sequence[Bid], ledger: Ledger, limit: int = 20) -> WinnerSet:
    """Optimal conflict-free subset by branch and bound.

    Prunes branches that cannot strictly beat the incumbent total, so
    equal-value sets are still explored and resolved by the tie-break key.
    """
    if len(bids) > limit:
        raise OracleSizeError(f"{len(bids)} bids exceeds oracle limit {limit}")
    feasible = [b for b in bids if ledger.is_free(b.bundle)]
    feasible.sort(key=lambda b: (-b.effective_value, b.submitted_tick, b.bidder))
    n = len(feasible)
    conflict: list[int] = [0] * n
    for i in range(n):
        for j in range(i + 1, n):
            if _bundles_conflict(feasible[i].bundle, feasible[j].bundle):
                conflict[i] |= 1 << j
                conflict[j] |= 1 << i
    suffix = [0.0] * (n + 1)
    for i in range(n - 1, -1, -1):
        suffix[i] = suffix[i + 1] + feasible[i].effective_value

    best: list = [0.0, _preference_key(()), ()]

    def visit(i: int, blocked: int, value: float, chosen: tuple[int, ...]) -> None:
        if value > best[0] or (
            value == best[0] and _preference_key([feasible[k] for k in chosen]) < best[1]
        ):
            best[0] = value
            best[1] = _preference_key([feasible[k] for k in chosen])
            best[2] = chosen
        if i == n or value + suffix[i] < best[0]:
            return
        if not (blocked >> i) & 1:
            visit(i + 1, blocked | conflict[i], value + feasible[i].effective_value,
                  chosen + (i,))
        visit(i + 1, blocked, value, chosen)

    visit(0, 0, 0.0, ())
    winners = tuple(feasible[k] for k in best[2])
    return WinnerSet(winners, best[0], exact=True)


def solve_wdp_greedy(
    bids: Sequence[Bid],
    ledger: Ledger,
    deadline_ticks: int | None = None,
    work_rate: int = 10_000,
) -> WinnerSet:
    """Anytime greedy: rank by value per slot, accept whatever fits.

    The simulated time budget is ``deadline_ticks`` at ``work_rate`` bid
    evaluations per tick; when it runs out the winners accepted so far are
    returned, which is always a feasible (if sub-optimal) answer.
    """
    budget = None if deadline_ticks is None else int(deadline_ticks * work_rate)
    ranked = sorted(
        bids,
        key=lambda b: (
            -b.effective_value / len(b.bundle),
            -b.effective_value,
            b.submitted_tick,
            b.bidder,
        ),
    )
    winners: list[Bid] = []
    taken: set = set()
    for examined, bid in enumerate(ranked):
        if budget is not None and examined >= budget:
            break
        if any(slot in taken for slot in bid.bundle):
            continue
        if not ledger.is_free(bid.bundle):
            continue
        winners.append(bid)
        taken.update(bid.bundle)
    total = sum(b.effective_value for b in winners)
    return WinnerSet(tuple(winners), total, exact=False)


@dataclass(frozen=True)
class RoundResult:
    confirmations: tuple[Reservation, ...]
    rejections: tuple[Bid, ...]
    winner_set: WinnerSet


def payment_for(bid: Bid, multiplier_affects_payment: bool = False) -> float:
    """First price by default; optionally discounted by the class multiplier."""
    if multiplier_affects_payment:
        return max(0.0, bid.value / bid.priority_multiplier)
    return bid.value


def run_round(
    round_: AuctionRound,
    ledger: Ledger,
    now_tick: int,
    *,
    solver: str = "greedy",
    deadline_ticks: int | None = None,
    oracle_limit: int = 20,
    multiplier_affects_payment: bool = False,
) -> RoundResult:
    """Solve one round and commit the winners at their bid price.

    Bids in ``late_bids`` are untouched: they are neither confirmed nor
    rejected and must be fed to the next round by the caller.
    """
    if solver == "exact":
        winner_set = solve_wdp_exact(round_.bid_set, ledger, limit=oracle_limit)
    else:
        winner_set = solve_wdp_greedy(round_.bid_set, ledger, deadline_ticks)
    confirmations = []
    won = set()
    for bid in sorted(winner_set.winners, key=lambda b: (b.submitted_tick, b.bidder)):
        res = ledger.commit(
            bid.bidder,
            bid.bundle,
            payment_for(bid, multiplier_affects_payment),
            ReservationKind.AUCTION,
            now_tick,
        )
        confirmations.append(res)
        won.add(id(bid))
    rejections = tuple(b for b in round_.bid_set if id(b) not in won)
    return RoundResult(tuple(confirmations), rejections, winner_set)


@dataclass(frozen=True)
class FcfsDeferral:
    """Advice to retry: the earliest tick the same trajectory fits, if any."""

    advised_tick: int | None


def find_earliest_start(
    ledger: Ledger,
    offsets: Iterable[tuple],
    earliest: int,
    horizon: int,
    admissible: Callable[[int], bool] | None = None,
) -> int | None:
    """First tick >= earliest whose shifted bundle is entirely free.

    ``offsets`` are (cell, dt) pairs relative to the arrival tick;
    ``admissible`` optionally filters candidate start ticks (window phase).
    """
    offsets = tuple(offsets)
    for t in range(earliest, earliest + horizon + 1):
        if admissible is not None and not admissible(t):
            continue
        if all((cell, t + dt) not in ledger.occupancy for cell, dt in offsets):
            return t
    return None


def fcfs_grant(
    ledger: Ledger,
    grid: IntersectionGrid,
    params: TrajectoryParams,
    vehicle_id: str,
    now_tick: int,
    horizon: int = 500,
    buffer_ticks: int = 0,
    admissible: Callable[[int], bool] | None = None,
) -> Reservation | FcfsDeferral:
    """Grant the requested trajectory if it fits right now, else advise.

    The first-come first-served baseline: no payment, no competition, just
    the earliest feasible copy of the same trajectory.
    """
    bundle = rasterize_bundle(grid, params, buffer_ticks)
    if (admissible is None or admissible(params.arrival_tick)) and ledger.is_free(bundle):
        return ledger.commit(vehicle_id, bundle, 0.0, ReservationKind.FCFS, now_tick)
    offsets = [(slot.cell, slot.tick - params.arrival_tick) for slot in bundle]
    advised = find_earliest_start(
        ledger, offsets, params.arrival_tick + 1, horizon, admissible
    )
    return FcfsDeferral(advised)
