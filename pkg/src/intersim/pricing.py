"""Per-link reserve prices with excess-demand dynamics, cap and closure.

Each incoming link carries a reserve price that moves multiplicatively with
excess demand: p' = p + p * z / s, where s is the link's optimal vehicles per
period and z = demand - s. A configurable floor keeps the market out of the
absorbing zero-price state, and an optional cap bounds the price; hitting the
cap temporarily closes the link to new reservations. Prices are published as
immutable per-tick snapshots so every agent and the manager's own intake see
the same numbers within a tick.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping


@dataclass
class ReservePriceState:
    link: str
    supply: int
    price: float = 1.0
    floor: float = 0.01
    cap: float | None = 100.0
    closure_duration: int = 10
    demand_count: int = 0
    closed_until: int | None = None

    def __post_init__(self) -> None:
        if self.supply <= 0:
            raise ValueError(f"supply must be positive, got {self.supply}")
        if self.floor <= 0:
            raise ValueError(f"price floor must be positive, got {self.floor}")
        if self.price <= 0:
            raise ValueError(f"initial price must be positive, got {self.price}")
        if self.cap is not None and self.price > self.cap:
            raise ValueError(f"initial price {self.price} exceeds cap {self.cap}")

    @property
    def excess(self) -> int:
        return self.demand_count - self.supply


def record_demand(state: ReservePriceState, requests_this_period: int) -> int:
    """Register the period's expressed demand; returns the (possibly negative) excess."""
    if requests_this_period < 0:
        raise ValueError("demand count cannot be negative")
    state.demand_count = requests_this_period
    return state.excess


def update_price(state: ReservePriceState, now_tick: int) -> float:
    """Apply one excess-demand price step; call once per pricing period.

    If the raw update overshoots the cap, the price pins to the cap and the
    link closes for ``closure_duration`` ticks. The demand counter resets for
    the next period.
    """
    raw = state.price + state.price * (state.excess / state.supply)
    new_price = max(raw, state.floor)
    if state.cap is not None and raw > state.cap:
        new_price = state.cap
        state.closed_until = now_tick + state.closure_duration
    state.price = new_price
    state.demand_count = 0
    return new_price


def is_open(state: ReservePriceState, now_tick: int) -> bool:
    """Closure covers [trigger, closed_until); expiry clears the marker."""
    if state.closed_until is None:
        return True
    if now_tick < state.closed_until:
        return False
    state.closed_until = None
    return True


@dataclass(frozen=True)
class BoardEntry:
    price: float
    open: bool


@dataclass(frozen=True)
class PriceBoard:
    """Immutable per-tick snapshot of all link prices, safe to share."""

    tick: int
    entries: Mapping[str, BoardEntry]

    def price(self, link: str) -> float:
        return self.entries[link].price

    def is_open(self, link: str) -> bool:
        return self.entries[link].open

    def cost(self, link: str) -> float:
        """Route-choice cost of entering via the link: +inf when closed."""
        entry = self.entries.get(link)
        if entry is None:
            return 0.0
        return entry.price if entry.open else math.inf


EMPTY_BOARD = PriceBoard(0, MappingProxyType({}))


def publish_prices(states: Iterable[ReservePriceState], now_tick: int) -> PriceBoard:
    entries = {
        s.link: BoardEntry(s.price, is_open(s, now_tick))
        for s in sorted(states, key=lambda s: s.link)
    }
    return PriceBoard(now_tick, MappingProxyType(entries))
