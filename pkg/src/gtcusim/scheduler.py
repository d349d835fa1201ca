"""Fuel-optimal load allocation against a production plan.

Each unit burns ``a + b*q + c*q**2`` fuel per hour at flow ``q`` (c > 0,
strictly convex).  For a given demand the committed units share load at
a common marginal cost: q_i(lambda) = clip((lambda - b_i)/(2 c_i),
q_min, q_max), with lambda found on the monotone clipped sum and then
polished algebraically over the units that sit strictly inside their
bounds, so interior marginals match to machine precision.  Which units
run at all is decided by exhaustive search over on/off subsets; station
scale keeps that cheap (at most 8 units).

Slots of a plan are independent: no start/stop or ramp coupling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

__all__ = [
    "UnitModel",
    "PlanSlot",
    "ProductionPlan",
    "Allocation",
    "ScheduleResult",
    "InfeasibleError",
    "allocate_load",
    "schedule",
    "schedule_to_csv",
    "MAX_UNITS",
]

MAX_UNITS = 8
_EPS = 1e-9


class InfeasibleError(ValueError):
    def __init__(self, message: str, shortfall: float = 0.0, slot: Optional[int] = None):
        self.shortfall = shortfall
        self.slot = slot
        super().__init__(message)


@dataclass(frozen=True)
class UnitModel:
    id: str
    fuel_a: float
    fuel_b: float
    fuel_c: float
    q_min: float
    q_max: float
    available: bool = True

    def __post_init__(self) -> None:
        if self.fuel_c <= 0:
            raise ValueError(f"unit {self.id}: fuel_c must be > 0 (strictly convex)")
        if not 0 <= self.q_min < self.q_max:
            raise ValueError(f"unit {self.id}: need 0 <= q_min < q_max")

    def fuel_rate(self, q: float) -> float:
        return self.fuel_a + self.fuel_b * q + self.fuel_c * q * q

    def marginal(self, q: float) -> float:
        return self.fuel_b + 2.0 * self.fuel_c * q


@dataclass(frozen=True)
class PlanSlot:
    duration_h: float
    demand: float

    def __post_init__(self) -> None:
        if self.duration_h <= 0:
            raise ValueError("slot duration must be > 0")
        if self.demand < 0:
            raise ValueError("slot demand must be >= 0")


@dataclass(frozen=True)
class ProductionPlan:
    slots: tuple[PlanSlot, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "slots", tuple(self.slots))


@dataclass(frozen=True)
class Allocation:
    """Committed flows for one demand level, ordered by unit id."""

    flows: tuple[tuple[str, float], ...]
    unit_fuel_rates: tuple[float, ...]
    total_fuel_rate: float

    @property
    def committed(self) -> tuple[str, ...]:
        return tuple(unit_id for unit_id, _ in self.flows)


@dataclass(frozen=True)
class ScheduleResult:
    allocations: tuple[Allocation, ...]
    total_fuel: float


def _dispatch(units: Sequence[UnitModel], demand: float) -> tuple[float, ...]:
    """Equal-marginal split of ``demand`` over a fixed committed set."""

    def clipped(lam: float) -> list[float]:
        return [
            min(max((lam - u.fuel_b) / (2.0 * u.fuel_c), u.q_min), u.q_max) for u in units
        ]

    lo = min(u.marginal(u.q_min) for u in units)
    hi = max(u.marginal(u.q_max) for u in units)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if sum(clipped(mid)) < demand:
            lo = mid
        else:
            hi = mid
    flows = clipped(hi)

    # polish: exact common marginal over the strictly interior units
    interior = [
        i
        for i, (u, q) in enumerate(zip(units, flows))
        if u.q_min + 1e-7 * (u.q_max - u.q_min) < q < u.q_max - 1e-7 * (u.q_max - u.q_min)
    ]
    if interior:
        rem = demand - sum(flows[i] for i in range(len(units)) if i not in interior)
        inv = sum(1.0 / (2.0 * units[i].fuel_c) for i in interior)
        lam = (rem + sum(units[i].fuel_b / (2.0 * units[i].fuel_c) for i in interior)) / inv
        for i in interior:
            flows[i] = (lam - units[i].fuel_b) / (2.0 * units[i].fuel_c)
    return tuple(flows)


def allocate_load(units: Iterable[UnitModel], demand: float) -> Allocation:
    """Cheapest commitment and dispatch meeting ``demand`` exactly."""
    if demand < 0:
        raise ValueError("demand must be >= 0")
    pool = sorted((u for u in units if u.available), key=lambda u: u.id)
    if demand == 0.0:
        return Allocation(flows=(), unit_fuel_rates=(), total_fuel_rate=0.0)
    if not pool:
        raise InfeasibleError("no available units", shortfall=demand)
    if len(pool) > MAX_UNITS:
        raise ValueError(f"exhaustive commitment caps at {MAX_UNITS} units, got {len(pool)}")
    capacity = sum(u.q_max for u in pool)
    if demand > capacity + _EPS:
        raise InfeasibleError(
            f"demand {demand:g} exceeds available capacity {capacity:g}",
            shortfall=demand - capacity,
        )

    best_key: Optional[tuple[float, int, int]] = None
    best_alloc: Optional[Allocation] = None
    for mask in range(1, 1 << len(pool)):
        subset = [pool[i] for i in range(len(pool)) if mask >> i & 1]
        if sum(u.q_min for u in subset) > demand + _EPS:
            continue
        if sum(u.q_max for u in subset) < demand - _EPS:
            continue
        flows = _dispatch(subset, demand)
        rates = tuple(u.fuel_rate(q) for u, q in zip(subset, flows))
        cost = sum(rates)
        key = (cost, len(subset), mask)
        if best_key is None or key < best_key:
            best_key = key
            best_alloc = Allocation(
                flows=tuple((u.id, q) for u, q in zip(subset, flows)),
                unit_fuel_rates=rates,
                total_fuel_rate=cost,
            )
    if best_alloc is None:
        raise InfeasibleError(
            f"no unit subset can meet demand {demand:g} within minimum-flow limits",
            shortfall=0.0,
        )
    return best_alloc


def schedule(units: Iterable[UnitModel], plan: ProductionPlan) -> ScheduleResult:
    """Dispatch every plan slot; slots are independent."""
    units = list(units)
    allocations = []
    total = 0.0
    for index, slot in enumerate(plan.slots):
        try:
            alloc = allocate_load(units, slot.demand)
        except InfeasibleError as exc:
            raise InfeasibleError(
                f"slot {index} (demand {slot.demand:g}): {exc}", shortfall=exc.shortfall, slot=index
            ) from exc
        allocations.append(alloc)
        total += alloc.total_fuel_rate * slot.duration_h
    return ScheduleResult(allocations=tuple(allocations), total_fuel=total)


def schedule_to_csv(result: ScheduleResult, plan: ProductionPlan) -> str:
    """Dispatch table as ``slot,unit,q,fuel`` rows; fuel is per whole slot."""
    lines = ["slot,unit,q,fuel"]
    for index, (alloc, slot) in enumerate(zip(result.allocations, plan.slots)):
        for (unit_id, q), rate in zip(alloc.flows, alloc.unit_fuel_rates):
            lines.append(f"{index},{unit_id},{q:.6f},{rate * slot.duration_h:.6f}")
    return "\n".join(lines) + "\n"
