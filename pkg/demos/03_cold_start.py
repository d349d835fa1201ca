#!/usr/bin/env python3
"""Cold start to loaded operation, end to end through the tag bus.

Runs the stock cold-start scenario in batch (plant stepping at 50 ms,
control scanning at 100 ms, everything archived) and plots the speed
and temperature traces.
"""

import csv
from pathlib import Path

from gtcusim.runner import run_scenario
from gtcusim.scenario import load_config

scenario = Path(__file__).resolve().parent.parent / "scenarios" / "cold_start_ring.yaml"
cfg = load_config(scenario)
record = run_scenario(cfg, out_root="runs")

print(f"run {record.run_id}: {'PASS' if record.ok else 'FAIL'}")
for result in record.assertions:
    print(" ", result.line())

with open(record.out_dir / "trace.csv", newline="") as fh:
    reader = csv.reader(fh)
    header = next(reader)
    rows = list(reader)
cols = {h.split(" [")[0]: i for i, h in enumerate(header)}

# print the sequencer milestones
last = None
for row in rows:
    seq = row[cols["ctl.seq"]]
    if seq != last:
        print(f"  t={float(row[cols['t']]):6.1f}s  {seq}")
        last = seq

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    t = [float(r[cols["t"]]) for r in rows]
    n_hpt = [float(r[cols["plant.n_hpt"]]) for r in rows]
    n_lpt = [float(r[cols["plant.n_lpt"]]) for r in rows]
    t_exh = [float(r[cols["plant.t_exh"]]) for r in rows]

    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(9, 6))
    ax1.plot(t, n_hpt, label="HPT speed")
    ax1.plot(t, n_lpt, label="LPT speed")
    ax1.set_ylabel("rpm")
    ax1.legend(loc="lower right")
    ax2.plot(t, t_exh, color="tab:red", label="exhaust temperature")
    ax2.set_ylabel("degC")
    ax2.set_xlabel("t [s]")
    ax2.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig("demo03_cold_start.png", dpi=120)
    print("wrote demo03_cold_start.png")
except ImportError:
    pass
