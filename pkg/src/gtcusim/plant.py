"""Physical model of the turbine unit and its field sensors.

Signal paths, all built from first-order transfer-function blocks
realized at the plant step:

    fuel valve  ->  HPT shaft speed (rpm)
    HPT excess over the self-sustain threshold, derated by the load
                ->  LPT shaft speed (rpm); the LPT is held at rest while
                    the gas generator is below self-sustain
    fuel + load ->  exhaust temperature above ambient
    pump states ->  oil header pressure (fraction of nominal: the best
                    of main/aux at 100% and the emergency pump at 60%)
    shaft heat minus fan cooling -> oil temperature above ambient

Every parameter here is a configurable artifact default with plausible
magnitudes for a ~10 MW class unit; none of it is measured data, and a
real unit's identified models drop in through the configuration file.

Sensors add seeded gaussian noise (one counter-based stream per sensor,
so runs replay bit-exactly) and support injected faults: stuck-at,
drift, and out-of-range.  Readings outside the configured range carry
BAD quality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from gtcusim.control import CommandSet, LoadMode, Measurement
from gtcusim.dynamics import TransferFunction, discretize

__all__ = [
    "PlantState",
    "PlantConfig",
    "SensorConfig",
    "StuckAt",
    "Drift",
    "OutOfRange",
    "Fault",
    "GasTurbinePlant",
    "CommandError",
    "UnknownTagError",
    "default_plant_config",
    "default_sensor_configs",
]


class CommandError(ValueError):
    """Rejected actuator command; plant state is unchanged."""


class UnknownTagError(KeyError):
    """No sensor is configured under that tag name."""


@dataclass(frozen=True)
class PlantState:
    """Physical state of the unit at one instant."""

    fuel_valve_pos: float = 0.0   # %
    n_hpt: float = 0.0            # rpm
    n_lpt: float = 0.0            # rpm
    t_exh: float = 15.0           # degC
    p_oil: float = 0.0            # kPa
    t_oil: float = 15.0           # degC
    main_pump_on: bool = False
    aux_pump_on: bool = False
    emerg_pump_on: bool = False
    cooler_fans_on: bool = False
    roof_fans_on: bool = False
    load_mode: LoadMode = LoadMode.UNLOADED
    sim_time: float = 0.0

    def __post_init__(self) -> None:
        for name in ("fuel_valve_pos", "n_hpt", "n_lpt", "t_exh", "p_oil", "t_oil", "sim_time"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not 0.0 <= self.fuel_valve_pos <= 100.0:
            raise ValueError("fuel_valve_pos must be within 0..100%")
        if self.n_hpt < 0 or self.n_lpt < 0 or self.p_oil < 0:
            raise ValueError("speeds and oil pressure must be >= 0")


def default_plant_config() -> "PlantConfig":
    return PlantConfig()


@dataclass(frozen=True)
class PlantConfig:
    """Plant topology parameters; artifact defaults, not measured data."""

    n_hpt_nominal: float = 5200.0    # rpm
    n_lpt_nominal: float = 4800.0    # rpm
    p_oil_nominal: float = 350.0     # kPa
    ambient_temp: float = 15.0       # degC

    # 100% fuel drives the HPT to 110% of nominal speed
    tf_fuel_to_hpt: TransferFunction = field(
        default_factory=lambda: TransferFunction(gain=57.2, t1=8.0, dead_time=0.5)
    )
    # rpm of LPT per rpm of HPT excess; sized so the unloaded LPT at
    # rated HPT speed sits at its nominal speed
    tf_hpt_to_lpt: TransferFunction = field(
        default_factory=lambda: TransferFunction(gain=4800.0 / 3640.0, t1=12.0)
    )
    # degC above ambient per % of fuel-equivalent input
    tf_fuel_to_texh: TransferFunction = field(
        default_factory=lambda: TransferFunction(gain=4.5, t1=20.0, dead_time=2.0)
    )
    # normalized: output is the fraction of nominal oil pressure
    tf_pump_to_poil: TransferFunction = field(
        default_factory=lambda: TransferFunction(gain=1.0, t1=3.0)
    )
    # degC above ambient per degC-equivalent of net heat input
    tf_fans_to_toil: TransferFunction = field(
        default_factory=lambda: TransferFunction(gain=1.0, t1=60.0)
    )

    load_torque_ring: float = 0.25    # recirculation: low load fraction
    load_torque_trunk: float = 0.60   # pipeline: high load fraction
    self_sustain_frac: float = 0.30   # of n_hpt_nominal; LPT coupling threshold
    aux_pump_fraction: float = 1.0    # of nominal pressure
    emerg_pump_fraction: float = 0.6
    texh_load_equiv: float = 20.0     # % fuel-equivalent at load fraction 1.0
    t_oil_heat_gain: float = 45.0     # degC-equivalent at rated HPT speed
    fan_cooling: float = 20.0         # degC-equivalent removed by cooler fans

    def __post_init__(self) -> None:
        if min(self.n_hpt_nominal, self.n_lpt_nominal, self.p_oil_nominal) <= 0:
            raise ValueError("nominal values must be positive")
        for frac in (self.load_torque_ring, self.load_torque_trunk, self.self_sustain_frac):
            if not 0.0 <= frac <= 1.0:
                raise ValueError("load and self-sustain fractions must be within 0..1")

    def load_fraction(self, mode: LoadMode) -> float:
        if mode is LoadMode.RING:
            return self.load_torque_ring
        if mode is LoadMode.TRUNK_LINE:
            return self.load_torque_trunk
        return 0.0

    @property
    def self_sustain_speed(self) -> float:
        return self.self_sustain_frac * self.n_hpt_nominal


@dataclass(frozen=True)
class StuckAt:
    value: float


@dataclass(frozen=True)
class Drift:
    rate_per_s: float


@dataclass(frozen=True)
class OutOfRange:
    pass


Fault = Union[StuckAt, Drift, OutOfRange, None]


@dataclass(frozen=True)
class SensorConfig:
    tag_name: str
    source_field: str
    units: str = ""
    noise_sigma: float = 0.0
    range_lo: float = -math.inf
    range_hi: float = math.inf
    fault: Fault = None
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.range_lo < self.range_hi:
            raise ValueError("range_lo must be below range_hi")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.source_field not in PlantState.__dataclass_fields__:
            raise ValueError(f"unknown plant state field {self.source_field!r}")


def default_sensor_configs() -> list[SensorConfig]:
    return [
        SensorConfig("plant.n_hpt", "n_hpt", "rpm", 2.0, -100.0, 8000.0, seed=1),
        SensorConfig("plant.n_lpt", "n_lpt", "rpm", 2.0, -100.0, 8000.0, seed=2),
        SensorConfig("plant.t_exh", "t_exh", "degC", 0.5, -50.0, 700.0, seed=3),
        SensorConfig("plant.p_oil", "p_oil", "kPa", 0.5, -50.0, 600.0, seed=4),
        SensorConfig("plant.t_oil", "t_oil", "degC", 0.1, -50.0, 150.0, seed=5),
    ]


class _Sensor:
    """Runtime pairing of a SensorConfig with its noise stream and fault."""

    def __init__(self, cfg: SensorConfig, master_seed: int):
        self.cfg = cfg
        self.rng = np.random.Generator(np.random.Philox(key=(master_seed, cfg.seed)))
        self.fault: Fault = cfg.fault
        self.fault_time: float = 0.0

    def read(self, state: PlantState) -> Measurement:
        cfg = self.cfg
        value = float(getattr(state, cfg.source_field))
        if isinstance(value, bool):
            value = float(value)
        if cfg.noise_sigma > 0.0:
            value += cfg.noise_sigma * float(self.rng.standard_normal())

        fault = self.fault
        if isinstance(fault, StuckAt):
            value = fault.value
        elif isinstance(fault, Drift):
            value += fault.rate_per_s * (state.sim_time - self.fault_time)
        elif isinstance(fault, OutOfRange):
            span = cfg.range_hi - cfg.range_lo
            value = cfg.range_hi + (0.1 * span if math.isfinite(span) else 1.0)

        good = cfg.range_lo <= value <= cfg.range_hi
        return Measurement(value=value, good=good)


class GasTurbinePlant:
    """The simulated unit: owns the state, the blocks, and the sensors.

    Exactly one simulation loop steps the plant; everyone else observes
    it through published tag snapshots.
    """

    def __init__(
        self,
        cfg: Optional[PlantConfig] = None,
        dt: float = 0.05,
        sensors: Optional[list[SensorConfig]] = None,
        seed: int = 0,
    ):
        self.cfg = cfg or default_plant_config()
        self.dt = float(dt)
        self._hpt = discretize(self.cfg.tf_fuel_to_hpt, self.dt)
        self._lpt = discretize(self.cfg.tf_hpt_to_lpt, self.dt)
        self._texh = discretize(self.cfg.tf_fuel_to_texh, self.dt)
        self._poil = discretize(self.cfg.tf_pump_to_poil, self.dt)
        self._toil = discretize(self.cfg.tf_fans_to_toil, self.dt)
        self.state = PlantState(t_exh=self.cfg.ambient_temp, t_oil=self.cfg.ambient_temp)
        self._sensors: dict[str, _Sensor] = {}
        self.fault_log: list[tuple[float, str, Fault]] = []
        for sc in default_sensor_configs() if sensors is None else sensors:
            self._sensors[sc.tag_name] = _Sensor(sc, seed)

    @property
    def sensor_tags(self) -> list[str]:
        return list(self._sensors)

    def sensor_config(self, tag_name: str) -> SensorConfig:
        try:
            return self._sensors[tag_name].cfg
        except KeyError:
            raise UnknownTagError(tag_name) from None

    def step(self, commands: CommandSet) -> PlantState:
        """Advance one plant step under the given actuator commands."""
        cfg = self.cfg
        fuel = float(commands.fuel_valve_pos)
        if not math.isfinite(fuel):
            raise CommandError(f"non-finite fuel command {fuel!r}")
        fuel = min(max(fuel, 0.0), 100.0)

        # the LPT sees the gas stream one step behind the HPT state, so
        # its rise begins strictly after the self-sustain crossing
        n_hpt_prev = self.state.n_hpt
        n_hpt = max(self._hpt.step(fuel), 0.0)

        threshold = cfg.self_sustain_speed
        if n_hpt_prev < threshold:
            self._lpt.reset()
            n_lpt = 0.0
        else:
            load = cfg.load_fraction(commands.load_mode)
            n_lpt = max(self._lpt.step((n_hpt_prev - threshold) * (1.0 - load)), 0.0)

        load = cfg.load_fraction(commands.load_mode)
        t_exh = cfg.ambient_temp + self._texh.step(fuel + cfg.texh_load_equiv * load)

        drive = 0.0
        if commands.main_pump_on:
            drive = 1.0
        if commands.aux_pump_on:
            drive = max(drive, cfg.aux_pump_fraction)
        if commands.emerg_pump_on:
            drive = max(drive, cfg.emerg_pump_fraction)
        p_oil = max(cfg.p_oil_nominal * self._poil.step(drive), 0.0)

        heat = cfg.t_oil_heat_gain * (n_hpt / cfg.n_hpt_nominal)
        if commands.cooler_fans_on:
            heat -= cfg.fan_cooling
        t_oil = cfg.ambient_temp + self._toil.step(max(heat, 0.0))

        self.state = PlantState(
            fuel_valve_pos=fuel,
            n_hpt=n_hpt,
            n_lpt=n_lpt,
            t_exh=t_exh,
            p_oil=p_oil,
            t_oil=t_oil,
            main_pump_on=commands.main_pump_on,
            aux_pump_on=commands.aux_pump_on,
            emerg_pump_on=commands.emerg_pump_on,
            cooler_fans_on=commands.cooler_fans_on,
            roof_fans_on=commands.roof_fans_on,
            load_mode=commands.load_mode,
            sim_time=self.state.sim_time + self.dt,
        )
        return self.state

    def read_sensor(self, tag_name: str) -> Measurement:
        """Sample one sensor: truth + seeded noise, then the fault transform."""
        try:
            sensor = self._sensors[tag_name]
        except KeyError:
            raise UnknownTagError(tag_name) from None
        return sensor.read(self.state)

    def read_all(self) -> dict[str, Measurement]:
        return {tag: s.read(self.state) for tag, s in self._sensors.items()}

    def inject_fault(self, tag_name: str, fault: Fault) -> None:
        """Apply (or clear, with None) a sensor fault from now on."""
        try:
            sensor = self._sensors[tag_name]
        except KeyError:
            raise UnknownTagError(tag_name) from None
        sensor.fault = fault
        sensor.fault_time = self.state.sim_time
        self.fault_log.append((self.state.sim_time, tag_name, fault))
