"""Authoritative record of confirmed reservations for one intersection.

The ledger enforces single occupancy: every space-time slot is held by at
most one reservation, ever. Committing a conflicting bundle is a hard error,
not a rejection -- allocation policies must only commit winner sets they have
already validated, so a conflict here signals a solver bug.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .geometry import Bundle, SpaceTimeSlot, bundle_span


class ReservationKind(str, Enum):
    AUCTION = "auction"
    FCFS = "fcfs"
    FREE_PASS = "free_pass"
    PRIORITY_EXEMPT = "priority_exempt"
    LEGACY_WINDOW = "legacy_window"


#: Kinds that must carry zero payment; auction winners pay their bid.
ZERO_PAYMENT_KINDS = frozenset(
    {
        ReservationKind.FCFS,
        ReservationKind.FREE_PASS,
        ReservationKind.PRIORITY_EXEMPT,
        ReservationKind.LEGACY_WINDOW,
    }
)


class SlotConflictError(RuntimeError):
    """A commit touched an already-occupied slot (upstream validation bug)."""


class UnknownReservationError(KeyError):
    pass


class TooLateToCancelError(ValueError):
    """Cancellation attempted at or after the crossing's first tick."""


@dataclass(frozen=True)
class Reservation:
    id: str
    vehicle_id: str
    bundle: Bundle
    payment: float
    granted_tick: int
    kind: ReservationKind

    @property
    def start_tick(self) -> int:
        return bundle_span(self.bundle)[0]

    @property
    def end_tick(self) -> int:
        return bundle_span(self.bundle)[1]


class Ledger:
    """Slot occupancy plus the reservations that hold it."""

    def __init__(self, id_prefix: str = "r") -> None:
        self.occupancy: dict[SpaceTimeSlot, str] = {}
        self.reservations: dict[str, Reservation] = {}
        self._id_prefix = id_prefix
        self._next_id = 0

    def is_free(self, bundle: Bundle) -> bool:
        return not any(slot in self.occupancy for slot in bundle)

    def conflicts(self, bundle: Bundle) -> set[str]:
        """Ids of reservations overlapping the given bundle."""
        return {self.occupancy[s] for s in bundle if s in self.occupancy}

    def commit(
        self,
        vehicle_id: str,
        bundle: Bundle,
        payment: float,
        kind: ReservationKind,
        granted_tick: int,
    ) -> Reservation:
        if not bundle:
            raise ValueError("cannot commit an empty bundle")
        if payment < 0:
            raise ValueError(f"payment must be >= 0, got {payment}")
        if kind in ZERO_PAYMENT_KINDS and payment != 0:
            raise ValueError(f"{kind.value} reservations must have payment 0")
        if kind is ReservationKind.AUCTION and payment <= 0:
            raise ValueError("auction reservations pay the (positive) winning bid")
        if not self.is_free(bundle):
            taken = sorted(s for s in bundle if s in self.occupancy)[0]
            raise SlotConflictError(
                f"slot {taken} already held by {self.occupancy[taken]}"
            )
        rid = f"{self._id_prefix}{self._next_id}"
        self._next_id += 1
        res = Reservation(rid, vehicle_id, frozenset(bundle), payment, granted_tick, kind)
        self.reservations[rid] = res
        for slot in bundle:
            self.occupancy[slot] = rid
        return res

    def cancel(self, reservation_id: str, cancel_tick: int) -> Bundle:
        """Release a not-yet-started reservation. The payment is not refunded."""
        res = self.reservations.get(reservation_id)
        if res is None:
            raise UnknownReservationError(reservation_id)
        if cancel_tick >= res.start_tick:
            raise TooLateToCancelError(
                f"cannot cancel at tick {cancel_tick}: crossing starts at {res.start_tick}"
            )
        for slot in res.bundle:
            del self.occupancy[slot]
        del self.reservations[reservation_id]
        return res.bundle

    def prune(self, now_tick: int) -> int:
        """Drop reservations that ended strictly before ``now_tick``."""
        stale = [rid for rid, res in self.reservations.items() if res.end_tick < now_tick]
        for rid in stale:
            for slot in self.reservations[rid].bundle:
                del self.occupancy[slot]
            del self.reservations[rid]
        return len(stale)

    def scan_consistent(self) -> list[str]:
        """Exhaustive single-occupancy check; returns human-readable problems.

        Used by test builds after every allocation round: rebuilds the slot
        map from scratch and cross-checks it against the incremental one.
        """
        problems: list[str] = []
        rebuilt: dict[SpaceTimeSlot, str] = {}
        for rid, res in self.reservations.items():
            for slot in res.bundle:
                if slot in rebuilt:
                    problems.append(
                        f"slot {slot} booked by both {rebuilt[slot]} and {rid}"
                    )
                rebuilt[slot] = rid
        if rebuilt != self.occupancy:
            problems.append("occupancy index out of sync with reservations")
        return problems
