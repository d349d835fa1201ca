"""Command-line front end.

    gtcusim run      --scenario FILE [--speed K] [--out DIR]
    gtcusim serve    --scenario FILE [--port N] [--ws-port N] [--speed K] [--out DIR]
    gtcusim ident    --csv FILE --input COL --output COL [--order 1|2] [--max-delay S]
    gtcusim schedule --config FILE [--out FILE]
    gtcusim replay   --run ID [--runs-dir DIR] [--port N] [--ws-port N] [--speed K]

Exit codes: 0 on success, 1 when a scenario assertion fails, 2 for
usage/configuration problems.  GTCU_RUN_DIR overrides the default
./runs output root.
"""

from __future__ import annotations

import argparse
import logging
import sys
import threading
import time
from pathlib import Path

from gtcusim.runner import SimulationRun, run_scenario, runs_root, _unique_run_dir
from gtcusim.scenario import ConfigError, load_config
from gtcusim.scheduler import InfeasibleError, schedule, schedule_to_csv
from gtcusim.sysid import (
    InstabilityError,
    UnidentifiableError,
    default_delay_grid,
    fit_first_order,
    fit_second_order,
    load_dataset,
)
from gtcusim.tagbus import Quality, TagBusServer, TagStore, load_history

USAGE_ERROR = 2
FAILURE = 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gtcusim",
        description="Desk-scale gas-turbine compressor unit simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a scenario in batch")
    run_p.add_argument("--scenario", required=True, help="scenario/config YAML file")
    run_p.add_argument("--speed", type=float, default=None, help="0 = as fast as possible")
    run_p.add_argument("--out", default=None, help="output root (default ./runs)")

    serve_p = sub.add_parser("serve", help="run interactively and serve the tag bus")
    serve_p.add_argument("--scenario", required=True)
    serve_p.add_argument("--port", type=int, default=7117)
    serve_p.add_argument("--ws-port", type=int, default=7118)
    serve_p.add_argument("--speed", type=float, default=1.0)
    serve_p.add_argument("--out", default=None)
    serve_p.add_argument(
        "--no-hold", action="store_true", help="stop at scenario end instead of holding"
    )

    ident_p = sub.add_parser("ident", help="fit a transfer function to CSV data")
    ident_p.add_argument("--csv", required=True)
    ident_p.add_argument("--input", required=True, help="input column name")
    ident_p.add_argument("--output", required=True, help="output column name")
    ident_p.add_argument("--order", type=int, choices=(1, 2), default=1)
    ident_p.add_argument("--max-delay", type=float, default=5.0, help="delay grid end, seconds")

    sched_p = sub.add_parser("schedule", help="dispatch a production plan")
    sched_p.add_argument("--config", required=True, help="file with units and plan sections")
    sched_p.add_argument("--out", default=None, help="write CSV here instead of stdout")

    replay_p = sub.add_parser("replay", help="re-serve a recorded run's history")
    replay_p.add_argument("--run", required=True, help="run id under the runs directory")
    replay_p.add_argument("--runs-dir", default=None)
    replay_p.add_argument("--port", type=int, default=7117)
    replay_p.add_argument("--ws-port", type=int, default=7118)
    replay_p.add_argument("--speed", type=float, default=1.0)
    return parser


def _cmd_run(args) -> int:
    cfg = load_config(args.scenario)
    record = run_scenario(cfg, out_root=args.out, speed=args.speed)
    for result in record.assertions:
        print(result.line())
    print(f"run {record.run_id}: trace + history in {record.out_dir}")
    return 0 if record.ok else FAILURE


def _cmd_serve(args) -> int:
    cfg = load_config(args.scenario)
    out_dir = _unique_run_dir(runs_root(args.out), cfg.scenario.name)
    sim = SimulationRun(cfg, out_dir=out_dir)
    server = TagBusServer(
        sim.store,
        port=args.port,
        ws_port=args.ws_port,
        clock_ms=lambda: sim.now_ms,
    )
    server.start()
    print(f"serving tag bus on :{args.port} (ws :{args.ws_port}), run dir {out_dir}")
    try:
        record = sim.execute(speed=args.speed, hold=not args.no_hold)
    except KeyboardInterrupt:
        sim.request_stop()
        record = None
        print("interrupted; historian flushed")
    finally:
        server.stop()
    if record is not None:
        for result in record.assertions:
            print(result.line())
        return 0 if record.ok else FAILURE
    return 0


def _cmd_ident(args) -> int:
    ds = load_dataset(args.csv, args.input, args.output)
    grid = default_delay_grid(ds.dt, args.max_delay)
    fit = fit_first_order(ds, grid) if args.order == 1 else fit_second_order(ds, grid)
    tf = fit.tf
    print(f"order:      {args.order}")
    print(f"gain:       {tf.gain:.6g}")
    print(f"t1:         {tf.t1:.6g} s")
    if args.order == 2:
        print(f"t2:         {tf.t2:.6g} s^2")
        if fit.degenerate:
            print("note:       t2 is degenerate; a first-order fit should suffice")
    print(f"dead_time:  {tf.dead_time:.6g} s")
    print(f"fit:        {fit.fit_percent:.2f}%")
    print("config fragment:", fit.to_config())
    return 0


def _cmd_schedule(args) -> int:
    cfg = load_config(args.config)
    if not cfg.units or cfg.plan is None:
        raise ConfigError(f"{args.config}: schedule needs units and plan sections")
    result = schedule(list(cfg.units), cfg.plan)
    text = schedule_to_csv(result, cfg.plan)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out} (total fuel {result.total_fuel:.6g})")
    else:
        sys.stdout.write(text)
        print(f"# total fuel {result.total_fuel:.6g}", file=sys.stderr)
    return 0


def _cmd_replay(args) -> int:
    run_dir = runs_root(args.runs_dir) / args.run
    history_path = run_dir / "history.log"
    if not history_path.exists():
        raise ConfigError(f"no history log at {history_path}")
    records = load_history(history_path)
    if not records:
        raise ConfigError(f"{history_path}: empty history")

    store = TagStore()
    clock_ms = {"now": records[0].timestamp_ms}
    server = TagBusServer(
        store, port=args.port, ws_port=args.ws_port, clock_ms=lambda: clock_ms["now"]
    )
    for rec in records:
        if rec.tag not in store.names():
            store.declare(rec.tag, rec.value, quality=Quality.STALE, timestamp_ms=rec.timestamp_ms)
    server.start()
    print(f"replaying {len(records)} records from {args.run} on :{args.port} (ws :{args.ws_port})")
    try:
        t0_wall = time.monotonic()
        t0_ms = records[0].timestamp_ms
        for rec in records:
            if args.speed > 0:
                target = t0_wall + (rec.timestamp_ms - t0_ms) / 1000.0 / args.speed
                delay = target - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
            clock_ms["now"] = rec.timestamp_ms
            store.commit(rec.tag, rec.value, rec.quality, rec.timestamp_ms)
        print("replay complete; serving final snapshot until interrupted")
        while True:
            time.sleep(0.5)
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE_ERROR if exc.code not in (0, None) else 0
    handlers = {
        "run": _cmd_run,
        "serve": _cmd_serve,
        "ident": _cmd_ident,
        "schedule": _cmd_schedule,
        "replay": _cmd_replay,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, InfeasibleError, UnidentifiableError, InstabilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
