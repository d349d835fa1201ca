"""The coupled simulation loop behind batch runs and live serving.

Per plant sample at time t (ordering is the determinism contract):

1. scenario events due at t fire: pokes land on ``cmd.*`` tags, fault
   injections reach the sensors
2. sensors sample the plant and commit ``plant.*`` tags stamped t
3. on a scan boundary the control level consumes the tag snapshot plus
   fresh command pokes and commits ``ctl.*`` tags, including the
   actuator commands
4. assertions due at t are evaluated against the tag snapshot
5. one trace row is written
6. the plant advances one step under the latest actuator commands

Everything the levels exchange flows through the tag store, and every
committed change lands in the historian, so a batch run, a live
training session, and a replay all expose the same picture.  Runs are
bit-reproducible: same scenario, config and seed give byte-identical
traces.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from gtcusim.control import (
    CommandSet,
    LoadMode,
    Measurement,
    OperatorCommands,
    SeqState,
    control_scan,
    initial_control_state,
)
from gtcusim.plant import GasTurbinePlant
from gtcusim.scenario import (
    AssertEvent,
    FaultEvent,
    PokeEvent,
    Scenario,
    SimConfig,
    parse_load_mode,
)
from gtcusim.tagbus import Historian, Quality, TagStore
from gtcusim.tagbus.store import ReadOnlyError, UnknownTagError

__all__ = ["AssertionResult", "RunRecord", "SimulationRun", "run_scenario", "runs_root"]

log = logging.getLogger(__name__)

CMD_MOMENTARY = ("cmd.start", "cmd.stop", "cmd.reset", "cmd.trip", "cmd.ack_alarm")
CMD_LOAD = "cmd.load"


@dataclass(frozen=True)
class AssertionResult:
    t: float
    expression: str
    passed: bool
    actual: object

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] t={self.t:g}s {self.expression} (actual {self.actual!r})"


@dataclass
class RunRecord:
    run_id: str
    scenario_name: str
    config_hash: str
    seed: int
    started_at: str
    out_dir: Optional[Path]
    assertions: list[AssertionResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(a.passed for a in self.assertions)

    def to_json(self) -> str:
        return json.dumps(
            {
                "run_id": self.run_id,
                "scenario": self.scenario_name,
                "config_hash": self.config_hash,
                "seed": self.seed,
                "started_at": self.started_at,
                "ok": self.ok,
                "assertions": [
                    {
                        "t": a.t,
                        "expression": a.expression,
                        "passed": a.passed,
                        "actual": repr(a.actual),
                    }
                    for a in self.assertions
                ],
                "trace": "trace.csv",
                "history": "history.log",
            },
            indent=2,
        )


def runs_root(explicit: Optional[str] = None) -> Path:
    """Output directory: --out flag, then GTCU_RUN_DIR, then ./runs."""
    if explicit:
        return Path(explicit)
    return Path(os.environ.get("GTCU_RUN_DIR", "runs"))


def _unique_run_dir(root: Path, name: str) -> Path:
    stamp = datetime.now(timezone.utc).strftime("%Y%m%d-%H%M%S")
    base = f"{name}-{stamp}"
    candidate = root / base
    suffix = 0
    while candidate.exists():
        suffix += 1
        candidate = root / f"{base}-{suffix}"
    candidate.mkdir(parents=True)
    return candidate


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".10g")
    return str(value)


class SimulationRun:
    """One configured run: owns the plant, control state, store, trace."""

    def __init__(self, cfg: SimConfig, out_dir: Optional[Path] = None):
        self.cfg = cfg
        self.scenario: Scenario = cfg.scenario
        self.dt = self.scenario.dt
        self.plant = GasTurbinePlant(
            cfg.plant, dt=self.dt, sensors=list(cfg.sensors), seed=self.scenario.seed
        )
        self.control_state = initial_control_state(cfg.control)
        self.commands = CommandSet()
        self.store = TagStore()
        self.now_ms = 0
        self.out_dir = out_dir
        self.historian = Historian(out_dir / "history.log" if out_dir else None)
        self.store.add_change_listener(
            lambda rec: self.historian.append(rec.name, rec.timestamp_ms, rec.value, rec.quality)
        )
        self._consumed_cmd_ts: dict[str, int] = {}
        self._declare_tags()
        self._trace_tags = self._trace_columns()
        self._stop = threading.Event()

    # tag universe ------------------------------------------------------------

    def _declare_tags(self) -> None:
        scan_ms = int(round(self.scenario.scan_period * 1000))
        dt_ms = int(round(self.dt * 1000))
        for sc in self.cfg.sensors:
            self.store.declare(sc.tag_name, 0.0, units=sc.units, period_ms=dt_ms)
        truth = [
            ("plant.fuel_valve", 0.0, "pct"),
            ("plant.main_pump", 0, ""),
            ("plant.aux_pump", 0, ""),
            ("plant.emerg_pump", 0, ""),
            ("plant.cooler_fans", 0, ""),
            ("plant.roof_fans", 0, ""),
            ("plant.load_mode", LoadMode.UNLOADED.value, ""),
            ("plant.sim_time", 0.0, "s"),
        ]
        for name, initial, units in truth:
            self.store.declare(name, initial, units=units, period_ms=dt_ms)
        ctl = [
            ("ctl.seq", SeqState.STOPPED.value, ""),
            ("ctl.trip_cause", "none", ""),
            ("ctl.step_timer", 0.0, "s"),
            ("ctl.fuel_cmd", 0.0, "pct"),
            ("ctl.main_pump_cmd", 0, ""),
            ("ctl.aux_pump_cmd", 0, ""),
            ("ctl.emerg_pump_cmd", 0, ""),
            ("ctl.cooler_fans_cmd", 0, ""),
            ("ctl.roof_fans_cmd", 0, ""),
            ("ctl.load_cmd", LoadMode.UNLOADED.value, ""),
            ("ctl.setpoint", 0.0, "rpm"),
            ("ctl.alarms", "none", ""),
        ]
        for name, initial, units in ctl:
            self.store.declare(name, initial, units=units, period_ms=scan_ms)
        for name in CMD_MOMENTARY:
            self.store.declare(name, 0)
        self.store.declare(CMD_LOAD, LoadMode.UNLOADED.value)
        # scenario pokes may talk to extra command tags
        for event in self.scenario.events:
            if not isinstance(event, PokeEvent):
                continue
            if not event.tag.startswith("cmd."):
                raise ValueError(f"scenario poke targets non-command tag {event.tag!r}")
            if event.tag not in self.store.names():
                self.store.declare(event.tag, 0 if isinstance(event.value, (int, float)) else "")

    def _trace_columns(self) -> list[str]:
        sensor_tags = [sc.tag_name for sc in self.cfg.sensors]
        truth = [
            "plant.fuel_valve",
            "plant.main_pump",
            "plant.aux_pump",
            "plant.emerg_pump",
            "plant.cooler_fans",
            "plant.roof_fans",
            "plant.load_mode",
        ]
        ctl = [
            "ctl.seq",
            "ctl.trip_cause",
            "ctl.fuel_cmd",
            "ctl.main_pump_cmd",
            "ctl.aux_pump_cmd",
            "ctl.emerg_pump_cmd",
            "ctl.cooler_fans_cmd",
            "ctl.roof_fans_cmd",
            "ctl.load_cmd",
            "ctl.setpoint",
            "ctl.alarms",
        ]
        return sensor_tags + truth + ctl

    def _header(self) -> list[str]:
        cols = ["t [s]"]
        for tag in self._trace_tags:
            units = self.store.snapshot(tag).units
            cols.append(f"{tag} [{units}]" if units else tag)
        return cols

    # loop pieces ---------------------------------------------------------------

    def _publish_sensors(self) -> None:
        for tag, meas in self.plant.read_all().items():
            self.store.commit(
                tag,
                meas.value,
                Quality.GOOD if meas.good else Quality.BAD,
                timestamp_ms=self.now_ms,
            )

    def _publish_truth(self) -> None:
        s = self.plant.state
        pairs = [
            ("plant.fuel_valve", s.fuel_valve_pos),
            ("plant.main_pump", int(s.main_pump_on)),
            ("plant.aux_pump", int(s.aux_pump_on)),
            ("plant.emerg_pump", int(s.emerg_pump_on)),
            ("plant.cooler_fans", int(s.cooler_fans_on)),
            ("plant.roof_fans", int(s.roof_fans_on)),
            ("plant.load_mode", s.load_mode.value),
            ("plant.sim_time", s.sim_time),
        ]
        for name, value in pairs:
            self.store.commit(name, value, timestamp_ms=self.now_ms)

    def _operator_commands(self) -> OperatorCommands:
        flags = {}
        for tag in CMD_MOMENTARY:
            rec = self.store.snapshot(tag)
            fresh = rec.timestamp_ms > self._consumed_cmd_ts.get(tag, -1)
            flags[tag] = bool(rec.value) and fresh
            if fresh:
                self._consumed_cmd_ts[tag] = rec.timestamp_ms
        load_select = None
        rec = self.store.snapshot(CMD_LOAD)
        if rec.timestamp_ms > self._consumed_cmd_ts.get(CMD_LOAD, -1):
            self._consumed_cmd_ts[CMD_LOAD] = rec.timestamp_ms
            load_select = parse_load_mode(rec.value)
            if load_select is None:
                log.warning("ignoring unknown load mode %r", rec.value)
        return OperatorCommands(
            start=flags["cmd.start"],
            stop=flags["cmd.stop"],
            reset=flags["cmd.reset"],
            trip=flags["cmd.trip"],
            ack_alarm=flags["cmd.ack_alarm"],
            load_select=load_select,
        )

    def _measurements(self) -> dict[str, Measurement]:
        out = {}
        for sc in self.cfg.sensors:
            rec = self.store.snapshot(sc.tag_name)
            out[sc.tag_name] = Measurement(
                value=float(rec.value), good=rec.quality is Quality.GOOD
            )
        return out

    def _scan(self) -> None:
        ops = self._operator_commands()
        self.control_state, self.commands = control_scan(
            self.control_state,
            self._measurements(),
            ops,
            self.cfg.limits,
            self.cfg.control,
            self.scenario.scan_period,
        )
        cs, cmd = self.control_state, self.commands
        setpoint = (
            self.cfg.control.idle_speed
            if cs.seq is SeqState.IDLE
            else self.cfg.control.rated_speed if cs.seq is SeqState.LOADED else 0.0
        )
        alarms = ",".join(sorted(cs.latched_alarms)) if cs.latched_alarms else "none"
        pairs = [
            ("ctl.seq", cs.seq.value),
            ("ctl.trip_cause", cs.trip_cause.value if cs.trip_cause else "none"),
            ("ctl.step_timer", cs.step_timer),
            ("ctl.fuel_cmd", cmd.fuel_valve_pos),
            ("ctl.main_pump_cmd", int(cmd.main_pump_on)),
            ("ctl.aux_pump_cmd", int(cmd.aux_pump_on)),
            ("ctl.emerg_pump_cmd", int(cmd.emerg_pump_on)),
            ("ctl.cooler_fans_cmd", int(cmd.cooler_fans_on)),
            ("ctl.roof_fans_cmd", int(cmd.roof_fans_on)),
            ("ctl.load_cmd", cmd.load_mode.value),
            ("ctl.setpoint", setpoint),
            ("ctl.alarms", alarms),
        ]
        for name, value in pairs:
            self.store.commit(name, value, timestamp_ms=self.now_ms)
        self.store.sweep_stale(self.now_ms)

    def _fire(self, event) -> None:
        if isinstance(event, PokeEvent):
            try:
                self.store.poke(event.tag, event.value, self.now_ms)
            except (UnknownTagError, ReadOnlyError) as exc:
                raise ValueError(f"event poke at t={event.t}: {exc}") from exc
        elif isinstance(event, FaultEvent):
            self.plant.inject_fault(event.sensor, event.fault)

    def _check_assert(self, event: AssertEvent, record: RunRecord) -> None:
        try:
            actual = self.store.snapshot(event.tag).value
        except UnknownTagError:
            record.assertions.append(
                AssertionResult(event.t, event.describe(), False, "<no such tag>")
            )
            return
        record.assertions.append(
            AssertionResult(event.t, event.describe(), event.check(actual), actual)
        )

    def request_stop(self) -> None:
        self._stop.set()

    # the run --------------------------------------------------------------------

    def execute(self, speed: Optional[float] = None, hold: bool = False) -> RunRecord:
        """Run the scenario; with ``hold`` keep simulating past its end."""
        scenario = self.scenario
        speed = scenario.speed if speed is None else speed
        record = RunRecord(
            run_id=self.out_dir.name if self.out_dir else scenario.name,
            scenario_name=scenario.name,
            config_hash=self.cfg.config_hash,
            seed=scenario.seed,
            started_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
            out_dir=self.out_dir,
        )

        trace_file = None
        writer = None
        if self.out_dir is not None:
            trace_file = open(self.out_dir / "trace.csv", "w", encoding="utf-8", newline="")
            writer = csv.writer(trace_file)
            writer.writerow(self._header())

        events = list(scenario.events)
        next_event = 0
        n_samples = int(round(scenario.duration / self.dt))
        wall_start = time.monotonic()
        overruns = 0

        try:
            k = 0
            while not self._stop.is_set():
                t = k * self.dt
                self.now_ms = int(round(t * 1000))

                pending_asserts = []
                while next_event < len(events) and events[next_event].t <= t + 1e-9:
                    event = events[next_event]
                    next_event += 1
                    if isinstance(event, AssertEvent):
                        pending_asserts.append(event)
                    else:
                        self._fire(event)

                self._publish_sensors()
                self._publish_truth()
                if k % scenario.steps_per_scan == 0:
                    self._scan()
                for event in pending_asserts:
                    self._check_assert(event, record)

                if writer is not None and k <= n_samples:
                    row = [_fmt(t)]
                    for tag in self._trace_tags:
                        row.append(_fmt(self.store.snapshot(tag).value))
                    writer.writerow(row)

                if speed > 0:
                    target = wall_start + (t + self.dt) / speed
                    lag = time.monotonic() - target
                    if lag > 0:
                        if lag > scenario.scan_period:
                            overruns += 1
                            if overruns in (1, 10, 100):
                                log.warning(
                                    "real-time overrun: %.3fs behind at t=%.2fs", lag, t
                                )
                    else:
                        time.sleep(-lag)

                if k >= n_samples and not hold:
                    break
                self.plant.step(self.commands)
                k += 1
        finally:
            if trace_file is not None:
                trace_file.close()
            self.historian.flush()
            self.historian.close()
            if self.out_dir is not None:
                (self.out_dir / "run.json").write_text(record.to_json(), encoding="utf-8")

        return record


def run_scenario(cfg: SimConfig, out_root: Optional[str] = None, speed: Optional[float] = None) -> RunRecord:
    """Batch entry: make a run directory, execute, return the record."""
    root = runs_root(out_root)
    out_dir = _unique_run_dir(root, cfg.scenario.name)
    return SimulationRun(cfg, out_dir=out_dir).execute(speed=speed)
