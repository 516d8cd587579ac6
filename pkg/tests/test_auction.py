import itertools
import random
from fractions import Fraction

import pytest

from intersim.auction import (
    AuctionRound,
    Bid,
    FcfsDeferral,
    OracleSizeError,
    fcfs_grant,
    payment_for,
    run_round,
    solve_wdp_exact,
    solve_wdp_greedy,
)
from intersim.geometry import (
    Approach,
    IntersectionGrid,
    SpaceTimeSlot,
    TrajectoryParams,
    Turn,
    rasterize_bundle,
)
from intersim.ledger import Ledger, ReservationKind

GRID = IntersectionGrid(n=4, lanes_per_approach=2)
PARAMS = TrajectoryParams(0, Fraction(1), Approach.W, 0, Turn.STRAIGHT)


def slot_bid(bidder, cells_ticks, value, tick=0, mult=1.0):
    """Bid over an explicit slot set (params are a placeholder trajectory)."""
    bundle = frozenset(SpaceTimeSlot(c, t) for c, t in cells_ticks)
    return Bid(bidder, PARAMS, bundle, value, priority_multiplier=mult,
               submitted_tick=tick)


def brute_force_best_total(bids, ledger):
    """Independent oracle: enumerate every subset, no pruning."""
    feasible = [b for b in bids if ledger.is_free(b.bundle)]
    best = 0.0
    for r in range(len(feasible) + 1):
        for combo in itertools.combinations(feasible, r):
            slots = [s for b in combo for s in b.bundle]
            if len(slots) == len(set(slots)):
                best = max(best, sum(b.effective_value for b in combo))
    return best


def test_empty_round_yields_nothing():
    result = run_round(AuctionRound(0, 0, 0), Ledger(), 0)
    assert result.confirmations == () and result.rejections == ()


def test_disjoint_bids_all_win_and_pay_their_bid():
    round_ = AuctionRound(0, 0, 0)
    round_.add(slot_bid("a", [((0, 0), 1)], 3.0))
    round_.add(slot_bid("b", [((1, 1), 1)], 5.0))
    result = run_round(round_, Ledger(), 0)
    assert len(result.confirmations) == 2
    assert sorted(r.payment for r in result.confirmations) == [3.0, 5.0]
    assert all(r.kind is ReservationKind.AUCTION for r in result.confirmations)


def test_conflicting_bids_higher_value_wins():
    round_ = AuctionRound(0, 0, 0)
    round_.add(slot_bid("rich", [((0, 0), 1)], 5.0))
    round_.add(slot_bid("poor", [((0, 0), 1)], 3.0))
    result = run_round(round_, Ledger(), 0)
    assert [r.vehicle_id for r in result.confirmations] == ["rich"]
    assert [b.bidder for b in result.rejections] == ["poor"]


def test_exact_prefers_two_small_over_one_big():
    # A conflicts with both B and C; B and C are disjoint; 6 + 6 > 10.
    a = slot_bid("a", [((0, 0), 0), ((1, 1), 0)], 10.0)
    b = slot_bid("b", [((0, 0), 0)], 6.0)
    c = slot_bid("c", [((1, 1), 0)], 6.0)
    ws = solve_wdp_exact([a, b, c], Ledger())
    assert sorted(x.bidder for x in ws.winners) == ["b", "c"]
    assert ws.total_value == 12.0
    assert ws.exact


def test_exact_single_bid_wins():
    ws = solve_wdp_exact([slot_bid("only", [((0, 0), 0)], 1.0)], Ledger())
    assert [b.bidder for b in ws.winners] == ["only"]


def test_exact_tie_broken_by_earlier_submission():
    early = slot_bid("late_name", [((0, 0), 0)], 4.0, tick=1)
    late = slot_bid("a_earlier_name", [((0, 0), 0)], 4.0, tick=5)
    ws = solve_wdp_exact([late, early], Ledger())
    assert [b.bidder for b in ws.winners] == ["late_name"]


def test_exact_tie_broken_by_fewer_slots():
    lean = slot_bid("lean", [((0, 0), 0)], 4.0)
    fat = slot_bid("fat", [((0, 0), 0), ((1, 1), 0)], 4.0)
    ws = solve_wdp_exact([fat, lean], Ledger())
    assert [b.bidder for b in ws.winners] == ["lean"]


def test_exact_tie_broken_by_bidder_name():
    x = slot_bid("x", [((0, 0), 0)], 4.0)
    y = slot_bid("y", [((0, 0), 0)], 4.0)
    ws = solve_wdp_exact([y, x], Ledger())
    assert [b.bidder for b in ws.winners] == ["x"]


def test_exact_respects_ledger_occupancy():
    led = Ledger()
    led.commit("held", frozenset({SpaceTimeSlot((0, 0), 0)}), 0,
               ReservationKind.FCFS, 0)
    ws = solve_wdp_exact([slot_bid("a", [((0, 0), 0)], 9.0)], led)
    assert ws.winners == ()


def test_exact_size_limit():
    bids = [slot_bid(f"b{i}", [((0, i % 4), i)], 1.0) for i in range(21)]
    with pytest.raises(OracleSizeError):
        solve_wdp_exact(bids, Ledger())


def test_greedy_density_ranking_matches_hand_computation():
    # A: value 10 over 4 slots (density 2.5); B, C: value 6 over 2 slots
    # (density 3) and mutually disjoint, both conflicting with A.
    a = slot_bid("a", [((0, 0), 0), ((0, 1), 0), ((1, 0), 0), ((1, 1), 0)], 10.0)
    b = slot_bid("b", [((0, 0), 0), ((0, 1), 0)], 6.0)
    c = slot_bid("c", [((1, 0), 0), ((1, 1), 0)], 6.0)
    ws = solve_wdp_greedy([a, b, c], Ledger())
    assert sorted(x.bidder for x in ws.winners) == ["b", "c"]
    assert ws.total_value == 12.0
    assert not ws.exact


def test_greedy_all_disjoint_matches_exact():
    bids = [slot_bid(f"b{i}", [((i % 4, i // 4), 0)], float(i + 1)) for i in range(8)]
    greedy = solve_wdp_greedy(bids, Ledger())
    exact = solve_wdp_exact(bids, Ledger())
    assert greedy.total_value == exact.total_value == sum(range(1, 9))


def test_greedy_zero_deadline_returns_empty_feasible_set():
    bids = [slot_bid("a", [((0, 0), 0)], 5.0)]
    ws = solve_wdp_greedy(bids, Ledger(), deadline_ticks=0)
    assert ws.winners == ()


def test_late_bids_never_solved_in_current_round():
    round_ = AuctionRound(1, collect_from_tick=5, collect_to_tick=5)
    round_.add(slot_bid("on_time", [((0, 0), 6)], 2.0, tick=5))
    round_.add(slot_bid("late", [((1, 1), 6)], 9.0, tick=6))
    assert [b.bidder for b in round_.late_bids] == ["late"]
    result = run_round(round_, Ledger(), 5)
    assert [r.vehicle_id for r in result.confirmations] == ["on_time"]
    assert all(b.bidder != "late" for b in result.rejections)


def test_multiplier_boosts_ranking_but_not_payment():
    hov = slot_bid("hov", [((0, 0), 0)], 10.0, mult=1.5)
    std = slot_bid("std", [((0, 0), 0)], 12.0)
    round_ = AuctionRound(0, 0, 0, bid_set=[hov, std])
    result = run_round(round_, Ledger(), 0)
    assert [r.vehicle_id for r in result.confirmations] == ["hov"]
    assert result.confirmations[0].payment == 10.0


def test_multiplier_discount_mode_divides_payment():
    bid = slot_bid("hov", [((0, 0), 0)], 10.0, mult=2.0)
    assert payment_for(bid) == 10.0
    assert payment_for(bid, multiplier_affects_payment=True) == 5.0


def test_fcfs_immediate_grant_on_empty_ledger():
    res = fcfs_grant(Ledger(), GRID, PARAMS, "v1", 0)
    assert res.kind is ReservationKind.FCFS and res.payment == 0


def test_fcfs_deferral_advises_first_free_tick():
    led = Ledger()
    blocker = TrajectoryParams(10, Fraction(1), Approach.W, 1, Turn.STRAIGHT)
    led.commit("b", rasterize_bundle(GRID, blocker), 0, ReservationKind.FCFS, 0)
    request = TrajectoryParams(10, Fraction(1), Approach.W, 1, Turn.STRAIGHT)
    out = fcfs_grant(led, GRID, request, "v2", 10)
    assert isinstance(out, FcfsDeferral)
    assert out.advised_tick == 11
    shifted = rasterize_bundle(GRID, request.shifted(out.advised_tick))
    assert led.is_free(shifted)


def test_fcfs_first_processed_wins_identical_requests():
    led = Ledger()
    first = fcfs_grant(led, GRID, PARAMS, "first", 0)
    second = fcfs_grant(led, GRID, PARAMS, "second", 0)
    assert first.vehicle_id == "first"
    assert isinstance(second, FcfsDeferral)


def test_fcfs_horizon_exhausted_gives_no_advice():
    led = Ledger()
    for t in range(0, 8):
        led.commit("b", rasterize_bundle(GRID, PARAMS.shifted(t)), 0,
                   ReservationKind.FCFS, 0)
    out = fcfs_grant(led, GRID, PARAMS, "v", 0, horizon=3)
    assert isinstance(out, FcfsDeferral) and out.advised_tick is None


def random_instance(rng, max_bids=12, universe=6):
    bids = []
    for i in range(rng.randint(0, max_bids)):
        size = rng.randint(1, 3)
        cells = rng.sample([(r, c) for r in range(universe) for c in range(2)], size)
        slots = [(cell, rng.randint(0, 2)) for cell in cells]
        bids.append(
            slot_bid(f"b{i:02d}", slots, rng.randint(1, 100) / 4.0,
                     tick=rng.randint(0, 3))
        )
    return bids


def test_greedy_feasible_and_dominated_by_exact_on_random_instances():
    rng = random.Random(20240815)
    for _ in range(400):
        bids = random_instance(rng)
        led = Ledger()
        greedy = solve_wdp_greedy(bids, led)
        slots = [s for b in greedy.winners for s in b.bundle]
        assert len(slots) == len(set(slots)), "greedy produced overlapping winners"
        exact = solve_wdp_exact(bids, led)
        assert exact.total_value >= greedy.total_value - 1e-9
        if len(bids) <= 8:
            assert exact.total_value == pytest.approx(
                brute_force_best_total(bids, led), abs=1e-9
            )
