"""Emulated PLC scan for the turbine unit.

One scan evaluates, in order: protection trips, the start/stop sequencer,
the PID speed governor, and auxiliary-equipment (pump/fan) logic, and
returns the new controller state plus the command set for the plant.
``control_scan`` is a pure function: identical inputs give identical
outputs, which is what makes scenario runs replayable.

The sequencer follows a generic gas-turbine start: purge, ignition,
warmup, acceleration to idle, loading, cooldown.  It is not a transcript
of any vendor's program; timers and setpoints are scaled-down trainer
defaults and live in ``ControlConfig``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping, NamedTuple, Optional

__all__ = [
    "SeqState",
    "TripCause",
    "LoadMode",
    "Measurement",
    "OperatorCommands",
    "CommandSet",
    "PidState",
    "ProtectionLimits",
    "ControlConfig",
    "ControlState",
    "Transition",
    "control_scan",
    "pid_update",
    "sequence_table",
    "aux_logic",
    "trip_check",
    "initial_control_state",
    "N_HPT",
    "N_LPT",
    "T_EXH",
    "P_OIL",
    "T_OIL",
]

# measurement tag names the scan consumes
N_HPT = "plant.n_hpt"
N_LPT = "plant.n_lpt"
T_EXH = "plant.t_exh"
P_OIL = "plant.p_oil"
T_OIL = "plant.t_oil"


class SeqState(Enum):
    STOPPED = "stopped"
    PURGE = "purge"
    IGNITION = "ignition"
    WARMUP = "warmup"
    ACCELERATION = "acceleration"
    IDLE = "idle"
    LOADED = "loaded"
    COOLDOWN = "cooldown"
    TRIPPED = "tripped"


class TripCause(Enum):
    OVERSPEED = "overspeed"
    EXHAUST_OVERTEMP = "exhaust_overtemp"
    LOW_OIL_PRESSURE = "low_oil_pressure"
    MANUAL = "manual"
    IGNITION_FAIL = "ignition_fail"


class LoadMode(Enum):
    UNLOADED = "unloaded"
    RING = "ring"
    TRUNK_LINE = "trunk_line"


class Measurement(NamedTuple):
    """A sampled process value; ``good`` is False for BAD or STALE quality."""

    value: float
    good: bool = True


@dataclass(frozen=True)
class OperatorCommands:
    """Edge-detected operator requests for one scan.

    The tag layer turns fresh ``cmd.*`` pokes into these flags; repeated
    pokes of the same value register again (a click is a click).
    """

    start: bool = False
    stop: bool = False
    reset: bool = False
    trip: bool = False
    ack_alarm: bool = False
    load_select: Optional[LoadMode] = None

    @classmethod
    def none(cls) -> "OperatorCommands":
        return cls()


@dataclass(frozen=True)
class CommandSet:
    """Actuator commands emitted by one scan."""

    fuel_valve_pos: float = 0.0
    main_pump_on: bool = False
    aux_pump_on: bool = False
    emerg_pump_on: bool = False
    cooler_fans_on: bool = False
    roof_fans_on: bool = False
    load_mode: LoadMode = LoadMode.UNLOADED


@dataclass(frozen=True)
class PidState:
    """Gains plus internal state of the speed governor."""

    kp: float
    ki: float
    kd: float
    out_lo: float
    out_hi: float
    integrator: float = 0.0
    prev_error: float = 0.0

    def __post_init__(self) -> None:
        if not self.out_lo < self.out_hi:
            raise ValueError("out_lo must be below out_hi")


def pid_update(pid: PidState, setpoint: float, measurement: float, dt: float):
    """One PID step with conditional anti-windup.

    The output uses the integrator as of the previous scan; the
    integrator then accumulates only while the output is not saturated
    against the error sign.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if not (math.isfinite(setpoint) and math.isfinite(measurement)):
        raise ValueError("non-finite PID input")
    error = setpoint - measurement
    derivative = (error - pid.prev_error) / dt
    raw = pid.kp * error + pid.integrator + pid.kd * derivative
    out = min(max(raw, pid.out_lo), pid.out_hi)
    saturated_against_error = (raw >= pid.out_hi and error > 0) or (
        raw <= pid.out_lo and error < 0
    )
    integrator = pid.integrator
    if not saturated_against_error:
        integrator += pid.ki * error * dt
    return replace(pid, integrator=integrator, prev_error=error), out


@dataclass(frozen=True)
class ProtectionLimits:
    n_hpt_trip: float = 5460.0
    n_lpt_trip: float = 5040.0
    t_exh_trip: float = 520.0
    p_oil_trip_low: float = 150.0
    p_oil_aux_start: float = 250.0

    def __post_init__(self) -> None:
        if not self.p_oil_trip_low < self.p_oil_aux_start:
            raise ValueError("p_oil_trip_low must be below p_oil_aux_start")
        if min(self.n_hpt_trip, self.n_lpt_trip, self.t_exh_trip) <= 0:
            raise ValueError("trip limits must be positive")


@dataclass(frozen=True)
class ControlConfig:
    """Sequencer timers, fuel schedule and governor tuning."""

    scan_period: float = 0.1
    purge_time: float = 30.0
    warmup_time: float = 60.0
    ignition_timeout: float = 10.0
    ignition_confirm_delta: float = 5.0   # degC above ambient that confirms light-off
    ambient_temp: float = 15.0
    ignition_fuel: float = 5.0            # %
    warmup_fuel: float = 10.0             # %
    accel_ramp_rate: float = 0.75         # %/s during acceleration
    idle_speed: float = 3640.0            # rpm
    rated_speed: float = 5200.0           # rpm
    idle_band: float = 0.02               # fraction of idle_speed that counts as arrived
    stop_speed: float = 52.0              # rpm below which cooldown completes
    t_oil_fan_on: float = 50.0            # degC
    t_oil_fan_off: float = 45.0
    governor_kp: float = 0.03             # % fuel per rpm
    governor_ki: float = 0.004
    governor_kd: float = 0.0
    fuel_min: float = 0.0
    fuel_max: float = 100.0

    def make_governor(self) -> PidState:
        return PidState(
            kp=self.governor_kp,
            ki=self.governor_ki,
            kd=self.governor_kd,
            out_lo=self.fuel_min,
            out_hi=self.fuel_max,
        )


@dataclass(frozen=True)
class ControlState:
    seq: SeqState
    governor: PidState
    trip_cause: Optional[TripCause] = None
    step_timer: float = 0.0
    target_load_mode: LoadMode = LoadMode.UNLOADED
    accel_fuel: float = 0.0
    cooler_fans_on: bool = False
    latched_alarms: frozenset = frozenset()
    acked_alarms: frozenset = frozenset()

    def __post_init__(self) -> None:
        if (self.trip_cause is not None) != (self.seq is SeqState.TRIPPED):
            raise ValueError("trip_cause must be present iff sequencer is tripped")
        if self.step_timer < 0:
            raise ValueError("step_timer must be >= 0")


def initial_control_state(cfg: ControlConfig | None = None) -> ControlState:
    cfg = cfg or ControlConfig()
    return ControlState(seq=SeqState.STOPPED, governor=cfg.make_governor())


class Transition(NamedTuple):
    source: SeqState
    target: SeqState
    guard: str


_RUNNING = (
    SeqState.PURGE,
    SeqState.IGNITION,
    SeqState.WARMUP,
    SeqState.ACCELERATION,
    SeqState.IDLE,
    SeqState.LOADED,
    SeqState.COOLDOWN,
)

# states in which combustion is possible and the low-oil trip is armed
_OIL_ARMED = (
    SeqState.IGNITION,
    SeqState.WARMUP,
    SeqState.ACCELERATION,
    SeqState.IDLE,
    SeqState.LOADED,
    SeqState.COOLDOWN,
)

_FIRED = (
    SeqState.IGNITION,
    SeqState.WARMUP,
    SeqState.ACCELERATION,
    SeqState.IDLE,
    SeqState.LOADED,
)


def sequence_table() -> list[Transition]:
    """The full transition graph as data, for tests and displays."""
    table = [
        Transition(SeqState.STOPPED, SeqState.PURGE, "start command and oil sensor healthy"),
        Transition(SeqState.PURGE, SeqState.IGNITION, "purge timer elapsed and oil pressure established"),
        Transition(SeqState.IGNITION, SeqState.WARMUP, "exhaust temperature confirms light-off"),
        Transition(SeqState.IGNITION, SeqState.TRIPPED, "no light-off inside ignition timeout"),
        Transition(SeqState.WARMUP, SeqState.ACCELERATION, "warmup timer elapsed"),
        Transition(SeqState.ACCELERATION, SeqState.IDLE, "HPT speed inside idle band"),
        Transition(SeqState.IDLE, SeqState.LOADED, "operator selected ring or trunk-line load"),
        Transition(SeqState.LOADED, SeqState.IDLE, "operator unloaded"),
        Transition(SeqState.IDLE, SeqState.COOLDOWN, "stop command"),
        Transition(SeqState.LOADED, SeqState.COOLDOWN, "stop command"),
        Transition(SeqState.COOLDOWN, SeqState.STOPPED, "speeds below stop threshold"),
        Transition(SeqState.TRIPPED, SeqState.STOPPED, "operator reset"),
    ]
    for state in _RUNNING:
        table.append(Transition(state, SeqState.TRIPPED, "protection trip"))
    return table


def trip_check(
    inputs: Mapping[str, Measurement], seq: SeqState, limits: ProtectionLimits
) -> list[tuple[TripCause, str]]:
    """Active trip conditions, in priority order.

    Speed and exhaust-temperature protections are always armed; the
    low-oil-pressure protection is armed while the machine runs fired or
    coasts down.  A missing or non-GOOD measurement on an armed
    protection tag is itself a trip condition (fail-safe).
    """
    causes: list[tuple[TripCause, str]] = []

    def check(tag: str, cause: TripCause, predicate, alarm: str) -> None:
        m = inputs.get(tag)
        if m is None or not m.good:
            causes.append((cause, f"bad_quality.{tag}"))
        elif predicate(m.value):
            causes.append((cause, alarm))

    check(N_HPT, TripCause.OVERSPEED, lambda v: v >= limits.n_hpt_trip, "overspeed_hpt")
    check(N_LPT, TripCause.OVERSPEED, lambda v: v >= limits.n_lpt_trip, "overspeed_lpt")
    check(T_EXH, TripCause.EXHAUST_OVERTEMP, lambda v: v >= limits.t_exh_trip, "exhaust_overtemp")
    if seq in _OIL_ARMED:
        check(P_OIL, TripCause.LOW_OIL_PRESSURE, lambda v: v <= limits.p_oil_trip_low, "low_oil_pressure")
    return causes


def aux_logic(
    inputs: Mapping[str, Measurement],
    cs: ControlState,
    limits: ProtectionLimits,
    cfg: ControlConfig,
) -> tuple[bool, bool, bool, bool, bool]:
    """Pump and fan commands for the current state.

    Returns (main_pump, aux_pump, emerg_pump, cooler_fans, roof_fans).
    The cooler-fan threshold has a small hysteresis band so the slow oil
    loop does not chatter; during cooldown and after a trip both fan
    groups run regardless of temperature.
    """
    seq = cs.seq
    main_on = seq is not SeqState.STOPPED

    p_oil = inputs.get(P_OIL)
    aux_on = (
        main_on
        and p_oil is not None
        and p_oil.good
        and p_oil.value < limits.p_oil_aux_start
    )

    emerg_on = seq is SeqState.TRIPPED

    t_oil = inputs.get(T_OIL)
    cooler_on = cs.cooler_fans_on
    if t_oil is not None and t_oil.good:
        if t_oil.value >= cfg.t_oil_fan_on:
            cooler_on = True
        elif t_oil.value <= cfg.t_oil_fan_off:
            cooler_on = False
    if seq in (SeqState.COOLDOWN, SeqState.TRIPPED):
        cooler_on = True

    roof_on = seq in _FIRED or seq in (SeqState.COOLDOWN, SeqState.TRIPPED)
    return main_on, aux_on, emerg_on, cooler_on, roof_on


def _value(inputs: Mapping[str, Measurement], tag: str, fallback: float) -> float:
    m = inputs.get(tag)
    if m is None or not m.good:
        return fallback
    return m.value


def control_scan(
    cs: ControlState,
    inputs: Mapping[str, Measurement],
    cmds: OperatorCommands,
    limits: ProtectionLimits,
    cfg: ControlConfig,
    dt: float,
) -> tuple[ControlState, CommandSet]:
    """One full PLC scan: protections, sequencer, governor, aux commands."""
    if dt <= 0:
        raise ValueError("scan dt must be > 0")

    seq = cs.seq
    trip_cause = cs.trip_cause
    timer = cs.step_timer + dt
    governor = cs.governor
    target = cs.target_load_mode
    accel_fuel = cs.accel_fuel
    alarms = set(cs.latched_alarms)
    acked = set(cs.acked_alarms)

    def goto(new_seq: SeqState, cause: Optional[TripCause] = None) -> None:
        nonlocal seq, timer, trip_cause
        seq = new_seq
        timer = 0.0
        trip_cause = cause

    # 1. protections (manual trip counts as one)
    tripped_this_scan = False
    if seq is not SeqState.TRIPPED:
        causes = trip_check(inputs, seq, limits)
        if cmds.trip and seq is not SeqState.STOPPED:
            causes.append((TripCause.MANUAL, "manual_trip"))
        if causes:
            for _, alarm in causes:
                alarms.add(alarm)
            goto(SeqState.TRIPPED, causes[0][0])
            tripped_this_scan = True

    # 2. operator load selection (latched; refused outside idle/loaded)
    if cmds.load_select is not None:
        if cmds.load_select is LoadMode.UNLOADED:
            target = LoadMode.UNLOADED
        elif seq in (SeqState.IDLE, SeqState.LOADED):
            target = cmds.load_select
        else:
            alarms.add("load_refused")

    if cmds.ack_alarm:
        acked |= alarms

    # 3. sequencer
    if seq is SeqState.STOPPED:
        target = LoadMode.UNLOADED
        if cmds.reset:
            alarms.clear()
            acked.clear()
        if cmds.start:
            oil = inputs.get(P_OIL)
            if oil is not None and oil.good:
                goto(SeqState.PURGE)
            else:
                alarms.add("start_refused")
    elif seq is SeqState.TRIPPED:
        # a reset acts only on a pre-existing trip, and is refused while
        # any trip condition persists
        if cmds.reset and not tripped_this_scan:
            if trip_check(inputs, SeqState.STOPPED, limits):
                alarms.add("reset_refused")
            else:
                alarms.clear()
                acked.clear()
                target = LoadMode.UNLOADED
                goto(SeqState.STOPPED)
        elif cmds.start:
            alarms.add("start_refused")
    elif seq is SeqState.PURGE:
        if cmds.stop:
            goto(SeqState.COOLDOWN)
        elif timer >= cfg.purge_time and _value(inputs, P_OIL, 0.0) >= limits.p_oil_aux_start:
            goto(SeqState.IGNITION)
    elif seq is SeqState.IGNITION:
        t_exh = _value(inputs, T_EXH, cfg.ambient_temp)
        if cmds.stop:
            goto(SeqState.COOLDOWN)
        elif t_exh >= cfg.ambient_temp + cfg.ignition_confirm_delta:
            goto(SeqState.WARMUP)
        elif timer > cfg.ignition_timeout:
            alarms.add("ignition_fail")
            goto(SeqState.TRIPPED, TripCause.IGNITION_FAIL)
    elif seq is SeqState.WARMUP:
        if cmds.stop:
            goto(SeqState.COOLDOWN)
        elif timer >= cfg.warmup_time:
            accel_fuel = cfg.warmup_fuel
            goto(SeqState.ACCELERATION)
    elif seq is SeqState.ACCELERATION:
        n_hpt = _value(inputs, N_HPT, 0.0)
        if cmds.stop:
            goto(SeqState.COOLDOWN)
        else:
            accel_fuel = min(accel_fuel + cfg.accel_ramp_rate * dt, cfg.fuel_max)
            if n_hpt >= cfg.idle_speed * (1.0 - cfg.idle_band):
                # bumpless transfer: governor picks up at the ramp's fuel
                error = cfg.idle_speed - n_hpt
                governor = replace(
                    governor,
                    integrator=accel_fuel - governor.kp * error,
                    prev_error=error,
                )
                goto(SeqState.IDLE)
    elif seq is SeqState.IDLE:
        if cmds.stop:
            goto(SeqState.COOLDOWN)
        elif target is not LoadMode.UNLOADED:
            goto(SeqState.LOADED)
    elif seq is SeqState.LOADED:
        if cmds.stop:
            target = LoadMode.UNLOADED
            goto(SeqState.COOLDOWN)
        elif target is LoadMode.UNLOADED:
            goto(SeqState.IDLE)
    elif seq is SeqState.COOLDOWN:
        if _value(inputs, N_HPT, 0.0) < cfg.stop_speed:
            goto(SeqState.STOPPED)

    # 4. governor / fuel schedule
    if seq is SeqState.IGNITION:
        fuel = cfg.ignition_fuel
    elif seq is SeqState.WARMUP:
        fuel = cfg.warmup_fuel
    elif seq is SeqState.ACCELERATION:
        fuel = accel_fuel
    elif seq in (SeqState.IDLE, SeqState.LOADED):
        setpoint = cfg.idle_speed if seq is SeqState.IDLE else cfg.rated_speed
        measurement = _value(inputs, N_HPT, 0.0)
        governor, fuel = pid_update(governor, setpoint, measurement, dt)
    else:
        fuel = 0.0

    # 5. auxiliary equipment
    interim = replace(
        cs,
        seq=seq,
        trip_cause=trip_cause,
        step_timer=timer,
        cooler_fans_on=cs.cooler_fans_on,
    )
    main_on, aux_on, emerg_on, cooler_on, roof_on = aux_logic(inputs, interim, limits, cfg)

    new_cs = ControlState(
        seq=seq,
        governor=governor,
        trip_cause=trip_cause,
        step_timer=timer,
        target_load_mode=target,
        accel_fuel=accel_fuel,
        cooler_fans_on=cooler_on,
        latched_alarms=frozenset(alarms),
        acked_alarms=frozenset(acked),
    )
    commands = CommandSet(
        fuel_valve_pos=fuel,
        main_pump_on=main_on,
        aux_pump_on=aux_on,
        emerg_pump_on=emerg_on,
        cooler_fans_on=cooler_on,
        roof_fans_on=roof_on,
        load_mode=target if seq is SeqState.LOADED else LoadMode.UNLOADED,
    )
    return new_cs, commands
