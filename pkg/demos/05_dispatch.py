#!/usr/bin/env python3
"""Fuel-optimal dispatch of a small station against a production plan.

Shows unit commitment (which machines run at all) and the equal-marginal
split, including what happens when demand drops below one unit's worth.
"""

from gtcusim.scheduler import PlanSlot, ProductionPlan, UnitModel, allocate_load, schedule

units = [
    UnitModel("gt1", fuel_a=120.0, fuel_b=2.1, fuel_c=0.035, q_min=10.0, q_max=60.0),
    UnitModel("gt2", fuel_a=95.0, fuel_b=2.6, fuel_c=0.050, q_min=8.0, q_max=55.0),
    UnitModel("gt3", fuel_a=140.0, fuel_b=1.8, fuel_c=0.028, q_min=12.0, q_max=70.0),
]

for demand in (25.0, 60.0, 130.0, 170.0):
    alloc = allocate_load(units, demand)
    flows = ", ".join(f"{uid}={q:.2f}" for uid, q in alloc.flows)
    print(f"demand {demand:6.1f}: {flows or 'all off':40s} fuel {alloc.total_fuel_rate:8.2f}/h")

by_id = {u.id: u for u in units}
alloc = allocate_load(units, 130.0)
marginals = {uid: by_id[uid].marginal(q) for uid, q in alloc.flows}
print(f"\nmarginal fuel at demand 130: {marginals} (equal where unconstrained)")

plan = ProductionPlan(
    slots=(PlanSlot(8.0, 60.0), PlanSlot(8.0, 130.0), PlanSlot(8.0, 95.0))
)
result = schedule(units, plan)
print(f"\nday plan, three 8 h slots: total fuel {result.total_fuel:.1f}")
for i, (slot, alloc) in enumerate(zip(plan.slots, result.allocations)):
    print(f"  slot {i} (demand {slot.demand}): {[f'{u}={q:.1f}' for u, q in alloc.flows]}")
