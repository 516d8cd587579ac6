"""Regulatory extensions: priorities, free passes, mixed-traffic windows, audit.

Four mechanisms that wrap the raw auction so the system can coexist with
public-road obligations:

* priority classes give certain vehicle types bid multipliers or exempt them
  from bidding entirely (emergency vehicles cross first and free of charge);
* vehicles that have waited longer than a threshold are granted a free,
  price-floor-bypassing crossing, so nobody can be priced out forever;
* alternating auction/legacy time windows serve vehicles that cannot speak
  the reservation protocol, with an optional demand-adaptive split;
* every allocation decision goes to an append-only audit log that can be
  replayed offline to re-verify single occupancy, payments and the price
  dynamics, record by record.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator

from .auction import Bid
from .geometry import (
    Approach,
    Bundle,
    IntersectionGrid,
    TrajectoryParams,
    Turn,
    rasterize_bundle,
)

# ---------------------------------------------------------------------------
# Priority classes


@dataclass(frozen=True)
class PriorityClass:
    name: str
    multiplier: float = 1.0
    exempt_from_bidding: bool = False
    absolute_priority: bool = False

    def __post_init__(self) -> None:
        if self.multiplier <= 0:
            raise ValueError("multiplier must be positive")
        if self.absolute_priority and not self.exempt_from_bidding:
            raise ValueError("absolute priority implies exemption from bidding")


def default_class_table() -> dict[str, PriorityClass]:
    return {
        "standard": PriorityClass("standard", 1.0),
        "emergency": PriorityClass(
            "emergency", 1.0, exempt_from_bidding=True, absolute_priority=True
        ),
        "low_emission": PriorityClass("low_emission", 1.25),
        "high_occupancy": PriorityClass("high_occupancy", 1.5),
        "disabled": PriorityClass("disabled", 2.0),
        "legacy": PriorityClass("legacy", 1.0),
    }


@dataclass(frozen=True)
class ExemptionGrant:
    """A bidding-exempt request: serve outside the auction, payment 0."""

    vehicle_id: str
    params: TrajectoryParams
    absolute: bool


def apply_priority(
    bid: Bid, class_table: dict[str, PriorityClass], class_name: str = "standard"
) -> Bid | ExemptionGrant:
    """Attach the class multiplier, or divert exempt classes past the auction."""
    cls = class_table.get(class_name, class_table.get("standard"))
    if cls is None:
        cls = PriorityClass("standard", 1.0)
    if cls.exempt_from_bidding:
        return ExemptionGrant(bid.bidder, bid.params, cls.absolute_priority)
    return replace(bid, priority_multiplier=cls.multiplier)


# ---------------------------------------------------------------------------
# Waiting records and free passes


@dataclass
class WaitingRecord:
    vehicle_id: str
    first_request_tick: int
    rejections: int = 0


def free_pass_check(
    waiting: dict[str, WaitingRecord], now_tick: int, threshold: int
) -> tuple[list[WaitingRecord], dict[str, int]]:
    """Split waiters into those owed a free crossing and those still counting.

    Returns the eligible records sorted by (first request tick, vehicle id)
    plus the remaining advised wait for everyone else. The threshold is
    inclusive: exactly ``threshold`` ticks of waiting already qualifies.
    """
    if threshold <= 0:
        raise ValueError("free-pass threshold must be positive")
    eligible = []
    advice: dict[str, int] = {}
    for rec in waiting.values():
        waited = now_tick - rec.first_request_tick
        if waited >= threshold:
            eligible.append(rec)
        else:
            advice[rec.vehicle_id] = threshold - waited
    eligible.sort(key=lambda r: (r.first_request_tick, r.vehicle_id))
    return eligible, advice


# ---------------------------------------------------------------------------
# Mixed-traffic windows


class Phase(str, Enum):
    AUCTION = "auction"
    LEGACY = "legacy"


@dataclass
class WindowSchedule:
    """Alternating auction/legacy service intervals, optionally adaptive."""

    auction_window: int = 8
    legacy_window: int = 2
    adaptive: bool = True
    min_window: int = 1  # lower clamp on the auction share
    max_window: int | None = None  # upper clamp; default cycle - 1
    anchor_tick: int = 0
    equipped_seen: int = 0
    legacy_seen: int = 0

    def __post_init__(self) -> None:
        if self.auction_window < 1 or self.legacy_window < 1:
            raise ValueError("both windows must last at least one tick")

    @property
    def cycle(self) -> int:
        return self.auction_window + self.legacy_window

    def observe_arrival(self, equipped: bool) -> None:
        if equipped:
            self.equipped_seen += 1
        else:
            self.legacy_seen += 1

    def maybe_adapt(self, now_tick: int) -> bool:
        """At each cycle boundary, resize the split to the observed mix."""
        if now_tick <= self.anchor_tick or (now_tick - self.anchor_tick) % self.cycle:
            return False
        changed = False
        total = self.equipped_seen + self.legacy_seen
        if self.adaptive and total > 0:
            cycle = self.cycle
            hi = self.max_window if self.max_window is not None else cycle - 1
            want = round(cycle * self.equipped_seen / total)
            new_auction = min(max(want, self.min_window), min(hi, cycle - 1))
            if new_auction != self.auction_window:
                self.auction_window = new_auction
                self.legacy_window = cycle - new_auction
                changed = True
        self.anchor_tick = now_tick
        self.equipped_seen = 0
        self.legacy_seen = 0
        return changed


def window_phase(schedule: WindowSchedule, now_tick: int) -> Phase:
    pos = (now_tick - schedule.anchor_tick) % schedule.cycle
    return Phase.AUCTION if pos < schedule.auction_window else Phase.LEGACY


# ---------------------------------------------------------------------------
# Audit log

EVENT_KINDS = (
    "run_config",
    "bid",
    "confirm",
    "reject",
    "cancel",
    "price_update",
    "free_pass",
    "closure",
    "window_switch",
)


class AuditOrderingError(ValueError):
    pass


class CorruptLogError(ValueError):
    pass


@dataclass(frozen=True)
class AuditRecord:
    seq: int
    tick: int
    intersection: str
    kind: str
    vehicle_id: str | None
    payload: dict


def bundle_digest(bundle: Bundle) -> str:
    """Stable 64-bit digest of the sorted slot list (blake2b, 8 bytes, hex).

    Replay re-derives slots from the logged trajectory parameters and checks
    them against this digest, so the algorithm must never change silently.
    """
    canon = ";".join(f"{r},{c},{t}" for (r, c), t in sorted(bundle))
    return hashlib.blake2b(canon.encode("ascii"), digest_size=8).hexdigest()


def _record_to_line(rec: AuditRecord) -> str:
    doc = {
        "seq": rec.seq,
        "tick": rec.tick,
        "intersection": rec.intersection,
        "kind": rec.kind,
        "vehicle_id": rec.vehicle_id,
        "payload": rec.payload,
    }
    return json.dumps(doc, separators=(",", ":"))


def _line_to_record(line: str, lineno: int) -> AuditRecord:
    try:
        doc = json.loads(line)
        return AuditRecord(
            seq=doc["seq"],
            tick=doc["tick"],
            intersection=doc["intersection"],
            kind=doc["kind"],
            vehicle_id=doc.get("vehicle_id"),
            payload=doc.get("payload", {}),
        )
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise CorruptLogError(f"line {lineno}: {exc}") from exc


class AuditLog:
    """Append-only event log for one intersection; single writer."""

    def __init__(self, intersection: str, path: str | Path | None = None) -> None:
        self.intersection = intersection
        self.records: list[AuditRecord] = []
        self._next_seq = 0
        self._last_tick: int | None = None
        self._path = Path(path) if path is not None else None
        self._fh = open(self._path, "w", encoding="utf-8") if self._path else None

    def append(
        self, tick: int, kind: str, payload: dict, vehicle_id: str | None = None
    ) -> int:
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown audit event kind {kind!r}")
        if self._last_tick is not None and tick < self._last_tick:
            raise AuditOrderingError(
                f"tick {tick} precedes last appended tick {self._last_tick}"
            )
        rec = AuditRecord(self._next_seq, tick, self.intersection, kind, vehicle_id,
                          payload)
        self.records.append(rec)
        self._next_seq += 1
        self._last_tick = tick
        if self._fh is not None:
            self._fh.write(_record_to_line(rec) + "\n")
        return rec.seq

    def flush(self) -> None:
        if self._fh is not None:
            self._fh.flush()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def purge(self, now_tick: int, retention_ticks: int) -> int:
        """Drop records older than the retention horizon; keeps seq order."""
        if retention_ticks <= 0:
            raise ValueError("retention must be positive")
        cutoff = now_tick - retention_ticks
        before = len(self.records)
        self.records = [r for r in self.records if r.tick >= cutoff]
        removed = before - len(self.records)
        if removed and self._path is not None:
            if self._fh is not None:
                self._fh.close()
            with open(self._path, "w", encoding="utf-8") as fh:
                for rec in self.records:
                    fh.write(_record_to_line(rec) + "\n")
            self._fh = open(self._path, "a", encoding="utf-8")
        return removed


def load_audit_log(path: str | Path) -> list[AuditRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            line = line.strip()
            if line:
                records.append(_line_to_record(line, lineno))
    return records


# ---------------------------------------------------------------------------
# Replay verification


@dataclass(frozen=True)
class Discrepancy:
    seq: int
    message: str


@dataclass
class ReplayReport:
    passed: bool
    discrepancies: list[Discrepancy] = field(default_factory=list)
    commits: int = 0
    cancels: int = 0
    price_updates: int = 0
    empty: bool = False

    def describe(self) -> str:
        lines = [f"verdict: {'PASS' if self.passed else 'FAIL'}"]
        if self.empty:
            lines.append("warning: empty log (vacuous pass)")
        lines.append(
            f"checked {self.commits} commits, {self.cancels} cancels, "
            f"{self.price_updates} price updates"
        )
        for d in self.discrepancies:
            lines.append(f"  seq {d.seq}: {d.message}")
        return "\n".join(lines)


def _params_from_payload(payload: dict) -> TrajectoryParams:
    return TrajectoryParams(
        arrival_tick=payload["arrival_tick"],
        arrival_speed=Fraction(payload["speed"]),
        approach=Approach(payload["approach"]),
        lane=payload["lane"],
        turn=Turn(payload["turn"]),
    )


def audit_replay(records: Iterable[AuditRecord]) -> ReplayReport:
    """Re-execute a decision log against fresh state and check consistency.

    Verifies (a) no two commits ever share a space-time slot, (b) every
    payment matches the recorded bid under the configured payment rule, and
    (c) every price update follows the excess-demand formula with its floor,
    cap and closure bookkeeping.
    """
    records = list(records)
    report = ReplayReport(passed=True)
    if not records:
        report.empty = True
        return report
    header = records[0]
    if header.kind != "run_config":
        raise CorruptLogError("log does not start with a run_config record")
    try:
        grid = IntersectionGrid(
            n=header.payload["grid_n"],
            lanes_per_approach=header.payload["lanes_per_approach"],
        )
    except (KeyError, ValueError) as exc:
        raise CorruptLogError(f"bad run_config: {exc}") from exc
    buffer_ticks = header.payload.get("buffer_ticks", 0)
    mult_pays = header.payload.get("multiplier_affects_payment", False)

    occupancy: dict = {}
    slots_by_rid: dict[str, Bundle] = {}
    last_seq = -1

    def flag(seq: int, message: str) -> None:
        report.passed = False
        report.discrepancies.append(Discrepancy(seq, message))

    for rec in records:
        if rec.seq <= last_seq:
            raise CorruptLogError(f"seq {rec.seq} not increasing")
        last_seq = rec.seq
        if rec.kind in ("confirm", "free_pass"):
            report.commits += 1
            p = rec.payload
            try:
                params = _params_from_payload(p)
            except (KeyError, ValueError) as exc:
                flag(rec.seq, f"unreadable trajectory: {exc}")
                continue
            bundle = rasterize_bundle(grid, params, buffer_ticks)
            if bundle_digest(bundle) != p.get("digest"):
                flag(rec.seq, "slot digest does not match the logged trajectory")
                continue
            rid = p.get("reservation_id")
            if rid in slots_by_rid:
                flag(rec.seq, f"duplicate reservation id {rid}")
                continue
            clash = sorted(s for s in bundle if s in occupancy)
            if clash:
                flag(
                    rec.seq,
                    f"double-booking: slot {clash[0]} already held by "
                    f"{occupancy[clash[0]]}",
                )
                continue
            kind = p.get("kind")
            payment = p.get("payment")
            if kind == "auction":
                value = p.get("value", 0.0)
                mult = p.get("multiplier", 1.0)
                expected = value / mult if mult_pays else value
                if payment is None or abs(payment - expected) > 1e-9:
                    flag(
                        rec.seq,
                        f"payment {payment} does not match bid {value} under "
                        "the payment rule",
                    )
            elif payment != 0:
                flag(rec.seq, f"{kind} reservation must have payment 0, got {payment}")
            for slot in bundle:
                occupancy[slot] = rid
            slots_by_rid[rid] = bundle
        elif rec.kind == "cancel":
            report.cancels += 1
            rid = rec.payload.get("reservation_id")
            bundle = slots_by_rid.pop(rid, None)
            if bundle is None:
                flag(rec.seq, f"cancel of unknown reservation {rid}")
                continue
            for slot in bundle:
                occupancy.pop(slot, None)
        elif rec.kind == "price_update":
            report.price_updates += 1
            p = rec.payload
            try:
                before = p["price_before"]
                z = p["excess"]
                s = p["supply"]
                after = p["price_after"]
                floor = p["floor"]
                cap = p["cap"]
            except KeyError as exc:
                flag(rec.seq, f"price_update missing field {exc}")
                continue
            raw = before + before * (z / s)
            expected = max(raw, floor)
            closed_expected = None
            if cap is not None and raw > cap:
                expected = cap
                closed_expected = rec.tick + p.get("closure_duration", 0)
            if abs(after - expected) > 1e-9:
                flag(
                    rec.seq,
                    f"price {after} != expected {expected} from "
                    f"p={before}, z={z}, s={s}",
                )
            if closed_expected is not None and p.get("closed_until") != closed_expected:
                flag(
                    rec.seq,
                    f"closure end {p.get('closed_until')} != expected {closed_expected}",
                )
    return report
