"""Scenario and configuration file handling.

One YAML file describes a whole run: the scenario header (timing, seed,
speed), optional plant/sensor/control/protection overrides, the timed
event script, and (for dispatch work) unit models plus a production
plan.  Anything omitted falls back to the documented defaults, so the
minimal scenario is just a name and a duration.

Event forms:

    - {t: 1.0,   poke: {tag: cmd.start, value: 1}}
    - {t: 120.0, inject_fault: {sensor: plant.n_hpt, fault: stuck_at, value: 5600}}
    - {t: 120.0, inject_fault: {sensor: plant.n_hpt, fault: drift, rate: 0.5}}
    - {t: 150.0, inject_fault: {sensor: plant.n_hpt, fault: none}}
    - {t: 250.0, assert: {tag: ctl.seq, equals: loaded}}
    - {t: 250.0, assert: {tag: plant.n_hpt, gte: 5000, lte: 5400}}

Numeric ``equals`` accepts an optional ``tol``.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, fields as dataclass_fields
from pathlib import Path
from typing import Optional, Union

import yaml

from gtcusim.control import ControlConfig, LoadMode, ProtectionLimits
from gtcusim.dynamics import TransferFunction
from gtcusim.plant import (
    Drift,
    Fault,
    OutOfRange,
    PlantConfig,
    SensorConfig,
    StuckAt,
    default_sensor_configs,
)
from gtcusim.scheduler import PlanSlot, ProductionPlan, UnitModel

__all__ = [
    "ConfigError",
    "PokeEvent",
    "FaultEvent",
    "AssertEvent",
    "Event",
    "Scenario",
    "SimConfig",
    "load_config",
    "parse_load_mode",
]


class ConfigError(ValueError):
    """A scenario/config file violates the schema; names the key path."""


@dataclass(frozen=True)
class PokeEvent:
    t: float
    tag: str
    value: Union[int, float, str]


@dataclass(frozen=True)
class FaultEvent:
    t: float
    sensor: str
    fault: Fault


@dataclass(frozen=True)
class AssertEvent:
    t: float
    tag: str
    equals: Optional[Union[int, float, str]] = None
    tol: float = 0.0
    gte: Optional[float] = None
    lte: Optional[float] = None

    def describe(self) -> str:
        parts = []
        if self.equals is not None:
            parts.append(f"== {self.equals!r}" + (f" (tol {self.tol})" if self.tol else ""))
        if self.gte is not None:
            parts.append(f">= {self.gte}")
        if self.lte is not None:
            parts.append(f"<= {self.lte}")
        return f"{self.tag} " + " and ".join(parts)

    def check(self, value) -> bool:
        if self.equals is not None:
            if isinstance(self.equals, str) or isinstance(value, str):
                if str(value) != str(self.equals):
                    return False
            elif abs(float(value) - float(self.equals)) > self.tol:
                return False
        if self.gte is not None and not float(value) >= self.gte:
            return False
        if self.lte is not None and not float(value) <= self.lte:
            return False
        return True


Event = Union[PokeEvent, FaultEvent, AssertEvent]


@dataclass(frozen=True)
class Scenario:
    name: str = "unnamed"
    dt: float = 0.05
    scan_period: float = 0.1
    duration: float = 60.0
    speed: float = 0.0  # 0 = as fast as possible, 1 = real time, k = k-times
    seed: int = 0
    events: tuple[Event, ...] = ()

    def __post_init__(self) -> None:
        if self.dt <= 0 or self.scan_period <= 0 or self.duration <= 0:
            raise ConfigError("dt, scan_period and duration must be positive")
        ratio = self.scan_period / self.dt
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ConfigError(
                f"dt ({self.dt}) must divide scan_period ({self.scan_period})"
            )
        if self.speed < 0:
            raise ConfigError("speed must be >= 0")
        events = tuple(sorted(self.events, key=lambda e: e.t))
        for e in events:
            if e.t < 0 or e.t > self.duration:
                raise ConfigError(f"event at t={e.t} outside run duration {self.duration}")
        object.__setattr__(self, "events", events)

    @property
    def steps_per_scan(self) -> int:
        return int(round(self.scan_period / self.dt))


@dataclass(frozen=True)
class SimConfig:
    """Everything a run needs, parsed and validated."""

    scenario: Scenario
    plant: PlantConfig = field(default_factory=PlantConfig)
    sensors: tuple[SensorConfig, ...] = field(
        default_factory=lambda: tuple(default_sensor_configs())
    )
    control: ControlConfig = field(default_factory=ControlConfig)
    limits: ProtectionLimits = field(default_factory=ProtectionLimits)
    units: tuple[UnitModel, ...] = ()
    plan: Optional[ProductionPlan] = None
    source: str = "<defaults>"
    config_hash: str = ""


_LOAD_ALIASES = {
    "ring": LoadMode.RING,
    "trunk": LoadMode.TRUNK_LINE,
    "trunk_line": LoadMode.TRUNK_LINE,
    "unload": LoadMode.UNLOADED,
    "unloaded": LoadMode.UNLOADED,
    "none": LoadMode.UNLOADED,
}


def parse_load_mode(token: str) -> Optional[LoadMode]:
    return _LOAD_ALIASES.get(str(token).lower())


def _require_mapping(node, path: str) -> dict:
    if not isinstance(node, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(node).__name__}")
    return node


def _known_keys(node: dict, allowed: set, path: str) -> None:
    unknown = set(node) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")


def _build_dataclass(cls, node: dict, path: str, converters: dict = {}):
    names = {f.name for f in dataclass_fields(cls) if f.init}
    _known_keys(node, names, path)
    kwargs = {}
    for key, raw in node.items():
        try:
            kwargs[key] = converters[key](raw) if key in converters else raw
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}.{key}: {exc}") from exc
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_tf(node, path: str) -> TransferFunction:
    node = _require_mapping(node, path)
    try:
        return TransferFunction.from_config(node)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_fault(node: dict, path: str) -> Fault:
    kind = str(node.get("fault", "none")).lower()
    if kind in ("none", "clear"):
        return None
    if kind == "stuck_at":
        if "value" not in node:
            raise ConfigError(f"{path}: stuck_at needs a value")
        return StuckAt(float(node["value"]))
    if kind == "drift":
        if "rate" not in node:
            raise ConfigError(f"{path}: drift needs a rate (units per second)")
        return Drift(float(node["rate"]))
    if kind == "out_of_range":
        return OutOfRange()
    raise ConfigError(f"{path}: unknown fault kind {kind!r}")


def _parse_event(node, index: int) -> Event:
    path = f"events[{index}]"
    node = _require_mapping(node, path)
    if "t" not in node:
        raise ConfigError(f"{path}: missing event time t")
    t = float(node["t"])
    kinds = [k for k in ("poke", "inject_fault", "assert") if k in node]
    if len(kinds) != 1:
        raise ConfigError(f"{path}: exactly one of poke/inject_fault/assert required")
    kind = kinds[0]
    body = _require_mapping(node[kind], f"{path}.{kind}")

    if kind == "poke":
        _known_keys(body, {"tag", "value"}, f"{path}.poke")
        if "tag" not in body or "value" not in body:
            raise ConfigError(f"{path}.poke: needs tag and value")
        value = body["value"]
        if isinstance(value, bool):
            value = int(value)
        if not isinstance(value, (int, float, str)):
            raise ConfigError(f"{path}.poke: unsupported value type {type(value).__name__}")
        return PokeEvent(t=t, tag=str(body["tag"]), value=value)

    if kind == "inject_fault":
        _known_keys(body, {"sensor", "fault", "value", "rate"}, f"{path}.inject_fault")
        if "sensor" not in body:
            raise ConfigError(f"{path}.inject_fault: needs a sensor tag")
        return FaultEvent(t=t, sensor=str(body["sensor"]), fault=_parse_fault(body, path))

    _known_keys(body, {"tag", "equals", "tol", "gte", "lte"}, f"{path}.assert")
    if "tag" not in body:
        raise ConfigError(f"{path}.assert: needs a tag")
    if not any(k in body for k in ("equals", "gte", "lte")):
        raise ConfigError(f"{path}.assert: needs equals, gte, or lte")
    equals = body.get("equals")
    if isinstance(equals, bool):
        equals = int(equals)
    return AssertEvent(
        t=t,
        tag=str(body["tag"]),
        equals=equals,
        tol=float(body.get("tol", 0.0)),
        gte=float(body["gte"]) if "gte" in body else None,
        lte=float(body["lte"]) if "lte" in body else None,
    )


def _parse_sensor(node, index: int) -> SensorConfig:
    path = f"sensors[{index}]"
    node = dict(_require_mapping(node, path))
    _known_keys(
        node,
        {"tag_name", "source", "units", "noise_sigma", "range", "seed", "fault", "value", "rate"},
        path,
    )
    for key in ("tag_name", "source"):
        if key not in node:
            raise ConfigError(f"{path}: missing {key}")
    rng = node.get("range", [-math.inf, math.inf])
    if not (isinstance(rng, (list, tuple)) and len(rng) == 2):
        raise ConfigError(f"{path}.range: expected [lo, hi]")
    fault = _parse_fault(node, path) if "fault" in node else None
    try:
        return SensorConfig(
            tag_name=str(node["tag_name"]),
            source_field=str(node["source"]),
            units=str(node.get("units", "")),
            noise_sigma=float(node.get("noise_sigma", 0.0)),
            range_lo=float(rng[0]),
            range_hi=float(rng[1]),
            fault=fault,
            seed=int(node.get("seed", 0)),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_unit(node, index: int) -> UnitModel:
    path = f"units[{index}]"
    node = _require_mapping(node, path)
    _known_keys(node, {"id", "fuel_curve", "q_min", "q_max", "available"}, path)
    curve = node.get("fuel_curve")
    if not (isinstance(curve, (list, tuple)) and len(curve) == 3):
        raise ConfigError(f"{path}.fuel_curve: expected [a, b, c]")
    try:
        return UnitModel(
            id=str(node.get("id", f"unit{index}")),
            fuel_a=float(curve[0]),
            fuel_b=float(curve[1]),
            fuel_c=float(curve[2]),
            q_min=float(node.get("q_min", 0.0)),
            q_max=float(node["q_max"]),
            available=bool(node.get("available", True)),
        )
    except KeyError as exc:
        raise ConfigError(f"{path}: missing {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_plan(node, path: str = "plan") -> ProductionPlan:
    node = _require_mapping(node, path)
    _known_keys(node, {"slots"}, path)
    slots_node = node.get("slots")
    if not isinstance(slots_node, list) or not slots_node:
        raise ConfigError(f"{path}.slots: expected a nonempty list")
    slots = []
    for i, sn in enumerate(slots_node):
        sn = _require_mapping(sn, f"{path}.slots[{i}]")
        _known_keys(sn, {"duration_h", "demand"}, f"{path}.slots[{i}]")
        try:
            slots.append(
                PlanSlot(duration_h=float(sn["duration_h"]), demand=float(sn["demand"]))
            )
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"{path}.slots[{i}]: {exc}") from exc
    return ProductionPlan(slots=tuple(slots))


_TF_FIELDS = {
    "tf_fuel_to_hpt",
    "tf_hpt_to_lpt",
    "tf_fuel_to_texh",
    "tf_pump_to_poil",
    "tf_fans_to_toil",
}

_TOP_LEVEL = {"scenario", "plant", "sensors", "control", "limits", "events", "units", "plan"}


def load_config(path: Union[str, Path]) -> SimConfig:
    """Parse and validate one scenario/config file."""
    path = Path(path)
    try:
        raw_bytes = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    try:
        doc = yaml.safe_load(raw_bytes) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    doc = _require_mapping(doc, str(path))
    _known_keys(doc, _TOP_LEVEL, str(path))

    scen_node = dict(_require_mapping(doc.get("scenario", {}), "scenario"))
    events = tuple(
        _parse_event(node, i) for i, node in enumerate(doc.get("events", []) or [])
    )
    scen_node["events"] = events
    scenario = _build_dataclass(
        Scenario,
        scen_node,
        "scenario",
        converters={
            "dt": float,
            "scan_period": float,
            "duration": float,
            "speed": float,
            "seed": int,
            "name": str,
            "events": lambda v: v,
        },
    )

    plant_node = dict(_require_mapping(doc.get("plant", {}), "plant"))
    tf_converters = {name: (lambda n, p=name: _parse_tf(n, f"plant.{p}")) for name in _TF_FIELDS}
    plant_cfg = _build_dataclass(PlantConfig, plant_node, "plant", converters=tf_converters)

    sensors = (
        tuple(_parse_sensor(node, i) for i, node in enumerate(doc["sensors"]))
        if "sensors" in doc and doc["sensors"] is not None
        else tuple(default_sensor_configs())
    )

    control_cfg = _build_dataclass(
        ControlConfig, dict(_require_mapping(doc.get("control", {}), "control")), "control"
    )
    limits = _build_dataclass(
        ProtectionLimits, dict(_require_mapping(doc.get("limits", {}), "limits")), "limits"
    )
    if not (
        limits.n_hpt_trip > plant_cfg.n_hpt_nominal and limits.n_lpt_trip > plant_cfg.n_lpt_nominal
    ):
        raise ConfigError("limits: trip speeds must exceed the nominal speeds")

    units = tuple(_parse_unit(node, i) for i, node in enumerate(doc.get("units", []) or []))
    plan = _parse_plan(doc["plan"]) if "plan" in doc and doc["plan"] is not None else None

    return SimConfig(
        scenario=scenario,
        plant=plant_cfg,
        sensors=sensors,
        control=control_cfg,
        limits=limits,
        units=units,
        plan=plan,
        source=str(path),
        config_hash=hashlib.sha256(raw_bytes).hexdigest(),
    )
