#!/usr/bin/env python3
"""Open-loop plant: oil system, shafts, sensors, and fault injection.

Drives the plant directly with actuator commands (no control level) to
show the signal paths and what the field sensors report.
"""

from gtcusim.control import CommandSet, LoadMode
from gtcusim.plant import Drift, GasTurbinePlant, StuckAt

plant = GasTurbinePlant(dt=0.05, seed=7)
print(f"the unit at rest: {plant.state.t_exh:.1f} degC exhaust, "
      f"{plant.state.p_oil:.0f} kPa oil header")

# start the main lube pump and watch pressure build (3 s time constant)
cmd = CommandSet(main_pump_on=True)
for _ in range(int(10 / 0.05)):
    plant.step(cmd)
print(f"main pump, t=10s: p_oil = {plant.state.p_oil:.1f} kPa "
      f"(nominal {plant.cfg.p_oil_nominal:.0f})")

# open the fuel valve to 60% and let the shafts spin up
cmd = CommandSet(fuel_valve_pos=60.0, main_pump_on=True, load_mode=LoadMode.RING)
for k in range(int(120 / 0.05)):
    s = plant.step(cmd)
    if k % 400 == 0:
        print(f"  t={s.sim_time:6.1f}s n_hpt={s.n_hpt:7.1f} rpm "
              f"n_lpt={s.n_lpt:7.1f} rpm t_exh={s.t_exh:6.1f} degC")
print(f"LPT stayed at rest until the HPT crossed "
      f"{plant.cfg.self_sustain_speed:.0f} rpm (self-sustain)")

# sensors: noisy but honest, until told otherwise
reading = plant.read_sensor("plant.n_hpt")
print(f"\nspeed sensor reads {reading.value:.1f} rpm "
      f"(truth {plant.state.n_hpt:.1f}, quality {'GOOD' if reading.good else 'BAD'})")

plant.inject_fault("plant.n_hpt", StuckAt(5600.0))
print(f"stuck-at fault injected: sensor now reads "
      f"{plant.read_sensor('plant.n_hpt').value:.1f} rpm regardless of truth")

plant.inject_fault("plant.n_hpt", Drift(2.0))
for _ in range(int(5 / 0.05)):
    plant.step(cmd)
print(f"drift fault, 5 s later: reads {plant.read_sensor('plant.n_hpt').value:.1f} "
      f"(truth {plant.state.n_hpt:.1f})")

plant.inject_fault("plant.n_hpt", None)
print(f"fault cleared: reads {plant.read_sensor('plant.n_hpt').value:.1f}")
print(f"fault log: {[(round(t, 2), tag, f) for t, tag, f in plant.fault_log]}")
