"""Scenario configuration: topology, demand, policy and every mechanism knob.

A scenario plus a seed fully determines a run, bit for bit. Scenarios are
plain dataclasses, loadable from a versioned YAML document (see README for
the schema) and hashable into a config digest that run manifests and paired
experiments use to prove two runs really shared their inputs.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path

import yaml


class ScenarioError(ValueError):
    """Config problem, reported as 'field.path: message'."""


class Policy(str, Enum):
    FCFS = "fcfs"
    CA = "ca"
    CTA_CA = "cta-ca"


@dataclass(frozen=True)
class DistSpec:
    """Seed-driven scalar distribution for driver attributes."""

    kind: str = "constant"  # constant | lognormal | uniform
    value: float = 1.0
    median: float = 1.0
    sigma: float = 0.5
    low: float = 0.0
    high: float = 1.0

    def sample(self, rng: random.Random) -> float:
        if self.kind == "constant":
            return self.value
        if self.kind == "lognormal":
            return self.median * math.exp(rng.gauss(0.0, self.sigma))
        if self.kind == "uniform":
            return rng.uniform(self.low, self.high)
        raise ScenarioError(f"dist.kind: unknown distribution {self.kind!r}")

    def validate(self, path: str) -> None:
        if self.kind not in ("constant", "lognormal", "uniform"):
            raise ScenarioError(f"{path}.kind: unknown distribution {self.kind!r}")
        if self.kind == "lognormal" and (self.median <= 0 or self.sigma < 0):
            raise ScenarioError(f"{path}: lognormal needs median > 0, sigma >= 0")
        if self.kind == "uniform" and self.low > self.high:
            raise ScenarioError(f"{path}: uniform needs low <= high")


@dataclass(frozen=True)
class DemandEntry:
    origin: str
    destination: str
    rate: float  # expected vehicles per tick


@dataclass(frozen=True)
class Toggles:
    """Compliance features; all on by default, paper mode turns them off."""

    free_pass: bool = True
    cap: bool = True
    windows: bool = True
    priorities: bool = True
    audit: bool = True


@dataclass(frozen=True)
class PricingConfig:
    initial_price: float = 1.0
    floor: float = 0.01
    cap_multiplier: float = 100.0  # cap = multiplier * initial price
    closure_duration: int = 10
    supply_per_lane: int = 1  # s(link) = supply_per_lane * lanes
    period: int = 1  # ticks between price updates


@dataclass(frozen=True)
class WindowConfig:
    auction: int = 8
    legacy: int = 2
    adaptive: bool = True
    min_window: int = 1
    max_window: int | None = None


@dataclass(frozen=True)
class Scenario:
    name: str = "unnamed"
    schema_version: int = 1
    topology: str = "grid"  # grid | corridor | single
    rows: int = 1
    cols: int = 1
    link_ff: int = 5
    grid_n: int = 8
    lanes_per_approach: int = 2
    demand: tuple[DemandEntry, ...] = ()
    spawn_until: int | None = None  # stop spawning early to let traffic drain
    policy: Policy = Policy.CTA_CA
    seed: int = 0
    duration_ticks: int = 200

    alpha_dist: DistSpec = DistSpec(kind="lognormal", median=1.0, sigma=0.5)
    budget_dist: DistSpec = DistSpec(kind="constant", value=50.0)
    speed_choices: tuple[tuple[str, float], ...] = (("1", 1.0),)
    class_mix: tuple[tuple[str, float], ...] = (("standard", 1.0),)

    round_length: int = 1
    solve_deadline_ticks: int = 1
    wdp_solver: str = "greedy"  # greedy | exact
    oracle_limit: int = 20
    request_horizon: int | None = None  # default 2 * round_length
    bid_scan_horizon: int = 32
    fcfs_horizon: int = 500
    bid_escalation: float = 1.2
    t_free: int = 60
    buffer_ticks: int = 0
    multiplier_affects_payment: bool = False
    refund_on_cancel: bool = False
    prune_interval: int = 50
    audit_retention: int | None = None

    pricing: PricingConfig = PricingConfig()
    windows: WindowConfig = WindowConfig()
    toggles: Toggles = Toggles()

    # -- derived -------------------------------------------------------------

    @property
    def effective_request_horizon(self) -> int:
        if self.request_horizon is not None:
            return self.request_horizon
        return 2 * self.round_length

    @property
    def price_cap(self) -> float | None:
        if not self.toggles.cap:
            return None
        return self.pricing.initial_price * self.pricing.cap_multiplier

    @property
    def pricing_active(self) -> bool:
        return self.policy is Policy.CTA_CA

    def validate(self) -> None:
        if self.schema_version != 1:
            raise ScenarioError(f"schema_version: unsupported {self.schema_version}")
        if self.topology not in ("grid", "corridor", "single"):
            raise ScenarioError(f"topology: unknown {self.topology!r}")
        if self.rows < 1 or self.cols < 1:
            raise ScenarioError("rows/cols: must be >= 1")
        if self.link_ff < 1:
            raise ScenarioError("link_ff: must be >= 1")
        if self.grid_n < 2:
            raise ScenarioError("grid_n: must be >= 2")
        if not 1 <= self.lanes_per_approach <= self.grid_n:
            raise ScenarioError("lanes_per_approach: out of range")
        if self.duration_ticks < 0:
            raise ScenarioError("duration_ticks: must be >= 0")
        if self.round_length < 1:
            raise ScenarioError("round_length: must be >= 1")
        if self.t_free <= 0:
            raise ScenarioError("t_free: must be positive")
        if self.wdp_solver not in ("greedy", "exact"):
            raise ScenarioError(f"wdp_solver: unknown {self.wdp_solver!r}")
        for i, entry in enumerate(self.demand):
            if entry.rate < 0:
                raise ScenarioError(f"demand[{i}].rate: must be >= 0")
            if entry.origin == entry.destination:
                raise ScenarioError(f"demand[{i}]: origin equals destination")
        self.alpha_dist.validate("alpha_dist")
        self.budget_dist.validate("budget_dist")
        total_weight = sum(w for _, w in self.class_mix)
        if not self.class_mix or total_weight <= 0:
            raise ScenarioError("class_mix: weights must sum to a positive value")
        if not self.speed_choices or sum(w for _, w in self.speed_choices) <= 0:
            raise ScenarioError("speed_choices: weights must sum to a positive value")
        if self.pricing.period < 1:
            raise ScenarioError("pricing.period: must be >= 1")
        if self.pricing.initial_price <= 0 or self.pricing.floor <= 0:
            raise ScenarioError("pricing: initial_price and floor must be positive")
        if self.windows.auction < 1 or self.windows.legacy < 1:
            raise ScenarioError("windows: both windows must be >= 1 tick")

    # -- serialisation ---------------------------------------------------------

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["policy"] = self.policy.value
        doc["demand"] = [asdict(d) for d in self.demand]
        doc["speed_choices"] = [list(x) for x in self.speed_choices]
        doc["class_mix"] = [list(x) for x in self.class_mix]
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "Scenario":
        doc = dict(doc)
        try:
            if "policy" in doc:
                doc["policy"] = Policy(doc["policy"])
        except ValueError as exc:
            raise ScenarioError(f"policy: {exc}") from exc
        for key, sub in (("pricing", PricingConfig), ("windows", WindowConfig),
                         ("toggles", Toggles)):
            if key in doc and isinstance(doc[key], dict):
                try:
                    doc[key] = sub(**doc[key])
                except TypeError as exc:
                    raise ScenarioError(f"{key}: {exc}") from exc
        for key in ("alpha_dist", "budget_dist"):
            if key in doc and isinstance(doc[key], dict):
                doc[key] = DistSpec(**doc[key])
        if "demand" in doc:
            doc["demand"] = tuple(
                DemandEntry(**d) if isinstance(d, dict) else d for d in doc["demand"]
            )
        if "speed_choices" in doc:
            doc["speed_choices"] = tuple(
                (str(s), float(w)) for s, w in doc["speed_choices"]
            )
        if "class_mix" in doc:
            doc["class_mix"] = tuple((str(c), float(w)) for c, w in doc["class_mix"])
        try:
            scenario = cls(**doc)
        except TypeError as exc:
            raise ScenarioError(str(exc)) from exc
        scenario.validate()
        return scenario

    def digest(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()

    # -- variants ---------------------------------------------------------------

    def with_(self, **kw) -> "Scenario":
        return replace(self, **kw)

    def paper_mode(self) -> "Scenario":
        """The bare mechanism: no cap, no free pass, no windows, no priorities."""
        return replace(
            self,
            toggles=Toggles(free_pass=False, cap=False, windows=False,
                            priorities=False, audit=self.toggles.audit),
        )


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"scenario file not found: {path}")
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ScenarioError(f"{path}: scenario document must be a mapping")
    return Scenario.from_dict(doc)


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(
        yaml.safe_dump(scenario.to_dict(), sort_keys=False), encoding="utf-8"
    )


# ---------------------------------------------------------------------------
# Builtin scenarios


def _cross_demand(rate: float) -> tuple[DemandEntry, ...]:
    """Straight flows through a single intersection from all four sides."""
    return (
        DemandEntry("w0", "e0", rate),
        DemandEntry("e0", "w0", rate),
        DemandEntry("n0", "s0", rate),
        DemandEntry("s0", "n0", rate),
    )


def builtin_scenario(name: str, **overrides) -> Scenario:
    builders = {
        "smoke": _smoke,
        "single": _single,
        "corridor": _corridor,
        "grid2x2": _grid2x2,
        "grid4x4": _grid4x4,
        "starvation": _starvation,
        "saturated": _saturated,
    }
    if name not in builders:
        raise ScenarioError(
            f"scenario: unknown builtin {name!r} (have {sorted(builders)})"
        )
    scenario = builders[name]()
    if overrides:
        scenario = replace(scenario, **overrides)
    scenario.validate()
    return scenario


BUILTIN_SCENARIOS = ("smoke", "single", "corridor", "grid2x2", "grid4x4",
                     "starvation", "saturated")


def _smoke() -> Scenario:
    return Scenario(
        name="smoke",
        topology="single",
        demand=_cross_demand(0.05),
        policy=Policy.CA,
        duration_ticks=200,
        spawn_until=150,
    )


def _single() -> Scenario:
    return Scenario(
        name="single",
        topology="single",
        demand=_cross_demand(0.5),
        policy=Policy.CA,
        duration_ticks=400,
        spawn_until=300,
    )


def _corridor() -> Scenario:
    return Scenario(
        name="corridor",
        topology="corridor",
        rows=1,
        cols=3,
        demand=(
            DemandEntry("w0", "e0", 0.6),
            DemandEntry("n0", "s0", 0.3),
            DemandEntry("n2", "s2", 0.3),
        ),
        policy=Policy.CTA_CA,
        duration_ticks=400,
        spawn_until=300,
    )


def _grid2x2() -> Scenario:
    return Scenario(
        name="grid2x2",
        topology="grid",
        rows=2,
        cols=2,
        demand=(
            DemandEntry("w0", "e1", 0.7),
            DemandEntry("w1", "e0", 0.7),
            DemandEntry("n0", "s1", 0.4),
            DemandEntry("n1", "s0", 0.4),
        ),
        policy=Policy.CTA_CA,
        duration_ticks=500,
        spawn_until=400,
    )


def _grid4x4() -> Scenario:
    demand = []
    for r in range(4):
        demand.append(DemandEntry(f"w{r}", f"e{(r + 1) % 4}", 0.4))
    for c in range(4):
        demand.append(DemandEntry(f"n{c}", f"s{(c + 2) % 4}", 0.3))
    return Scenario(
        name="grid4x4",
        topology="grid",
        rows=4,
        cols=4,
        demand=tuple(demand),
        policy=Policy.CTA_CA,
        duration_ticks=600,
        spawn_until=450,
    )


def _starvation() -> Scenario:
    """One zero-budget driver against a persistent stream of rich traffic."""
    return Scenario(
        name="starvation",
        topology="single",
        demand=(DemandEntry("n0", "s0", 0.9),),
        policy=Policy.CA,
        duration_ticks=300,
        budget_dist=DistSpec(kind="constant", value=100.0),
        alpha_dist=DistSpec(kind="constant", value=3.0),
    )


def _saturated() -> Scenario:
    """Demand far above supply on every approach; exercises cap and closure."""
    return Scenario(
        name="saturated",
        topology="single",
        demand=_cross_demand(1.5),
        policy=Policy.CTA_CA,
        duration_ticks=150,
        budget_dist=DistSpec(kind="constant", value=1e12),
        pricing=PricingConfig(cap_multiplier=20.0),
    )
