"""PLC scan logic: PID, protections, sequencer table, auxiliary commands."""

from collections import deque
from dataclasses import replace

import numpy as np
import pytest

from gtcusim.control import (
    CommandSet,
    ControlConfig,
    LoadMode,
    Measurement,
    OperatorCommands,
    PidState,
    ProtectionLimits,
    SeqState,
    Transition,
    TripCause,
    aux_logic,
    control_scan,
    initial_control_state,
    pid_update,
    sequence_table,
    trip_check,
)

CFG = ControlConfig()
LIMITS = ProtectionLimits()


def measurements(n_hpt=0.0, n_lpt=0.0, t_exh=CFG.ambient_temp, p_oil=350.0, t_oil=20.0, good=True):
    return {
        "plant.n_hpt": Measurement(n_hpt, good),
        "plant.n_lpt": Measurement(n_lpt, good),
        "plant.t_exh": Measurement(t_exh, good),
        "plant.p_oil": Measurement(p_oil, good),
        "plant.t_oil": Measurement(t_oil, good),
    }


class TestPid:
    def test_zero_error_zero_output(self):
        pid = PidState(kp=1.0, ki=0.5, kd=0.1, out_lo=-100, out_hi=100)
        _, out = pid_update(pid, 10.0, 10.0, 0.1)
        assert out == 0.0

    def test_pure_proportional(self):
        pid = PidState(kp=2.0, ki=0.0, kd=0.0, out_lo=-100, out_hi=100)
        _, out = pid_update(pid, 3.0, 0.0, 0.1)
        assert out == 6.0

    def test_anti_windup_pins_output_and_bounds_integrator(self):
        pid = PidState(kp=1.0, ki=0.5, kd=0.0, out_lo=0.0, out_hi=100.0)
        integrators = []
        for _ in range(1000):
            pid, out = pid_update(pid, 1000.0, 0.0, 0.1)
            integrators.append(pid.integrator)
        assert out == 100.0
        # once saturated against the persistent positive error, the
        # integrator must stop growing
        assert max(integrators) == integrators[-1]
        assert integrators[-1] < 200.0

    def test_non_finite_input_rejected(self):
        pid = PidState(kp=1.0, ki=0.5, kd=0.0, out_lo=0.0, out_hi=100.0)
        with pytest.raises(ValueError):
            pid_update(pid, float("nan"), 0.0, 0.1)
        with pytest.raises(ValueError):
            pid_update(pid, 1.0, float("inf"), 0.1)

    def test_limits_validated(self):
        with pytest.raises(ValueError):
            PidState(kp=1, ki=0, kd=0, out_lo=5.0, out_hi=5.0)


class TestSequenceTable:
    def test_every_state_has_an_exit(self):
        table = sequence_table()
        sources = {tr.source for tr in table}
        assert sources == set(SeqState)

    def test_tripped_exits_only_to_stopped(self):
        exits = {tr.target for tr in sequence_table() if tr.source is SeqState.TRIPPED}
        assert exits == {SeqState.STOPPED}

    def test_loaded_reachable_only_through_idle(self):
        entries = {tr.source for tr in sequence_table() if tr.target is SeqState.LOADED}
        assert entries == {SeqState.IDLE}

    def test_reachability_both_ways(self):
        adjacency: dict[SeqState, set[SeqState]] = {}
        for tr in sequence_table():
            adjacency.setdefault(tr.source, set()).add(tr.target)

        def reaches(src, dst):
            seen, queue = {src}, deque([src])
            while queue:
                s = queue.popleft()
                if s is dst:
                    return True
                for nxt in adjacency.get(s, ()):
                    if nxt not in seen:
                        seen.add(nxt)
                        queue.append(nxt)
            return False

        assert reaches(SeqState.STOPPED, SeqState.LOADED)
        assert reaches(SeqState.LOADED, SeqState.STOPPED)


class TestControlScan:
    def test_start_from_stopped_enters_purge(self):
        cs = initial_control_state(CFG)
        new_cs, _ = control_scan(
            cs, measurements(p_oil=0.0), OperatorCommands(start=True), LIMITS, CFG, 0.1
        )
        assert new_cs.seq is SeqState.PURGE
        assert new_cs.step_timer == 0.0

    def test_overspeed_trips_and_cuts_fuel_same_scan(self):
        cs = initial_control_state(CFG)
        inputs = measurements(n_hpt=1.06 * 5200.0)
        new_cs, out = control_scan(cs, inputs, OperatorCommands(), LIMITS, CFG, 0.1)
        assert new_cs.seq is SeqState.TRIPPED
        assert new_cs.trip_cause is TripCause.OVERSPEED
        assert out.fuel_valve_pos == 0.0
        assert out.emerg_pump_on
        assert "overspeed_hpt" in new_cs.latched_alarms

    def test_start_refused_while_tripped(self):
        cs = initial_control_state(CFG)
        cs, _ = control_scan(cs, measurements(n_hpt=6000), OperatorCommands(), LIMITS, CFG, 0.1)
        assert cs.seq is SeqState.TRIPPED
        after, _ = control_scan(cs, measurements(), OperatorCommands(start=True), LIMITS, CFG, 0.1)
        assert after.seq is SeqState.TRIPPED
        assert after.trip_cause is cs.trip_cause
        assert "start_refused" in after.latched_alarms

    def test_reset_leaves_tripped_and_clears_alarms(self):
        cs = initial_control_state(CFG)
        cs, _ = control_scan(cs, measurements(n_hpt=6000), OperatorCommands(), LIMITS, CFG, 0.1)
        cs, _ = control_scan(cs, measurements(), OperatorCommands(reset=True), LIMITS, CFG, 0.1)
        assert cs.seq is SeqState.STOPPED
        assert cs.trip_cause is None
        assert not cs.latched_alarms

    def test_bad_quality_on_protection_tag_trips(self):
        cs = initial_control_state(CFG)
        inputs = measurements()
        inputs["plant.t_exh"] = Measurement(300.0, good=False)
        new_cs, out = control_scan(cs, inputs, OperatorCommands(), LIMITS, CFG, 0.1)
        assert new_cs.seq is SeqState.TRIPPED
        assert new_cs.trip_cause is TripCause.EXHAUST_OVERTEMP
        assert "bad_quality.plant.t_exh" in new_cs.latched_alarms
        assert out.fuel_valve_pos == 0.0

    def test_manual_trip(self):
        cs = initial_control_state(CFG)
        cs, _ = control_scan(cs, measurements(p_oil=300), OperatorCommands(start=True), LIMITS, CFG, 0.1)
        cs, out = control_scan(cs, measurements(), OperatorCommands(trip=True), LIMITS, CFG, 0.1)
        assert cs.seq is SeqState.TRIPPED
        assert cs.trip_cause is TripCause.MANUAL
        assert out.fuel_valve_pos == 0.0

    def test_ignition_timeout_trips(self):
        cs = initial_control_state(CFG)
        cs, _ = control_scan(cs, measurements(), OperatorCommands(start=True), LIMITS, CFG, 0.1)
        # fast-forward purge with established oil pressure
        for _ in range(400):
            cs, _ = control_scan(cs, measurements(p_oil=350), OperatorCommands(), LIMITS, CFG, 0.1)
            if cs.seq is SeqState.IGNITION:
                break
        assert cs.seq is SeqState.IGNITION
        # exhaust never warms: expect a trip after the timeout
        for _ in range(120):
            cs, _ = control_scan(cs, measurements(p_oil=350), OperatorCommands(), LIMITS, CFG, 0.1)
        assert cs.seq is SeqState.TRIPPED
        assert cs.trip_cause is TripCause.IGNITION_FAIL

    def test_load_refused_while_stopped(self):
        cs = initial_control_state(CFG)
        new_cs, _ = control_scan(
            cs, measurements(), OperatorCommands(load_select=LoadMode.RING), LIMITS, CFG, 0.1
        )
        assert new_cs.seq is SeqState.STOPPED
        assert new_cs.target_load_mode is LoadMode.UNLOADED
        assert "load_refused" in new_cs.latched_alarms

    def test_scan_is_pure(self):
        cs = initial_control_state(CFG)
        inputs = measurements(n_hpt=1000.0, p_oil=320.0)
        ops = OperatorCommands(start=True)
        a = control_scan(cs, inputs, ops, LIMITS, CFG, 0.1)
        b = control_scan(cs, inputs, ops, LIMITS, CFG, 0.1)
        assert a == b


class TestAuxLogic:
    def test_all_off_when_stopped(self):
        cs = initial_control_state(CFG)
        main, aux, emerg, cooler, roof = aux_logic(measurements(), cs, LIMITS, CFG)
        assert not any([main, aux, emerg, roof])

    def test_aux_pump_below_threshold(self):
        cs = replace(initial_control_state(CFG), seq=SeqState.IDLE)
        inputs = measurements(p_oil=LIMITS.p_oil_aux_start - 1.0)
        main, aux, emerg, _, _ = aux_logic(inputs, cs, LIMITS, CFG)
        assert main and aux and not emerg

    def test_trip_during_loaded_starts_emergency_pump(self):
        cs = initial_control_state(CFG)
        loaded = replace(cs, seq=SeqState.LOADED, target_load_mode=LoadMode.RING)
        new_cs, out = control_scan(
            loaded, measurements(n_hpt=6000.0), OperatorCommands(), LIMITS, CFG, 0.1
        )
        assert new_cs.seq is SeqState.TRIPPED
        assert out.emerg_pump_on

    def test_cooler_fan_hysteresis(self):
        cs = initial_control_state(CFG)
        idle = replace(cs, seq=SeqState.IDLE)
        on = aux_logic(measurements(t_oil=CFG.t_oil_fan_on + 1), idle, LIMITS, CFG)[3]
        assert on
        warm = replace(idle, cooler_fans_on=True)
        still_on = aux_logic(measurements(t_oil=(CFG.t_oil_fan_on + CFG.t_oil_fan_off) / 2), warm, LIMITS, CFG)[3]
        assert still_on
        off = aux_logic(measurements(t_oil=CFG.t_oil_fan_off - 1), warm, LIMITS, CFG)[3]
        assert not off


class TestFailSafeProperty:
    def test_randomized_trip_vectors_always_cut_fuel(self):
        # acceptance runs 10^4 cases; keep a fast spot-check here
        rng = np.random.default_rng(2024)
        states = list(SeqState)
        for _ in range(1000):
            seq = states[rng.integers(len(states))]
            cs = initial_control_state(CFG)
            trip_cause = TripCause.MANUAL if seq is SeqState.TRIPPED else None
            cs = replace(cs, seq=seq, trip_cause=trip_cause)
            inputs = measurements(
                n_hpt=float(rng.uniform(0, 8000)),
                n_lpt=float(rng.uniform(0, 8000)),
                t_exh=float(rng.uniform(0, 700)),
                p_oil=float(rng.uniform(0, 500)),
                t_oil=float(rng.uniform(0, 120)),
            )
            predicted = trip_check(inputs, seq, LIMITS)
            new_cs, out = control_scan(cs, inputs, OperatorCommands(), LIMITS, CFG, 0.1)
            if predicted or seq is SeqState.TRIPPED:
                assert out.fuel_valve_pos == 0.0
                assert out.emerg_pump_on
                assert new_cs.seq is SeqState.TRIPPED


class TestResetRefusal:
    def test_reset_refused_while_condition_persists(self):
        cs = initial_control_state(CFG)
        cs, _ = control_scan(cs, measurements(n_hpt=6000), OperatorCommands(), LIMITS, CFG, 0.1)
        assert cs.seq is SeqState.TRIPPED
        # sensor still reads overspeed: reset must not clear the trip
        after, out = control_scan(
            cs, measurements(n_hpt=6000), OperatorCommands(reset=True), LIMITS, CFG, 0.1
        )
        assert after.seq is SeqState.TRIPPED
        assert "reset_refused" in after.latched_alarms
        assert out.fuel_valve_pos == 0.0 and out.emerg_pump_on
        # once the reading is healthy the reset goes through
        cleared, _ = control_scan(
            after, measurements(), OperatorCommands(reset=True), LIMITS, CFG, 0.1
        )
        assert cleared.seq is SeqState.STOPPED
