/**
 * DOM rendering for the console: mimic readouts, trend canvas, alarm
 * table, command buttons. One render pass per animation tick reads the
 * view model; no state lives in the DOM.
 */

import { TrendPoint, ViewModel } from "./viewmodel.js";

export interface CommandHooks {
  start(): void;
  stop(): void;
  reset(): void;
  loadRing(): void;
  loadTrunk(): void;
  unload(): void;
  ack(): void;
  togglePause(): void;
}

const NUMERIC_READOUTS: Array<[string, string, number]> = [
  // element id, tag, decimals
  ["ro-n-hpt", "plant.n_hpt", 0],
  ["ro-n-lpt", "plant.n_lpt", 0],
  ["ro-t-exh", "plant.t_exh", 1],
  ["ro-p-oil", "plant.p_oil", 1],
  ["ro-t-oil", "plant.t_oil", 1],
  ["ro-fuel", "ctl.fuel_cmd", 1],
];

const EQUIPMENT_LAMPS: Array<[string, string]> = [
  ["lamp-main-pump", "plant.main_pump"],
  ["lamp-aux-pump", "plant.aux_pump"],
  ["lamp-emerg-pump", "plant.emerg_pump"],
  ["lamp-cooler-fans", "plant.cooler_fans"],
  ["lamp-roof-fans", "plant.roof_fans"],
];

export class ConsoleUI {
  private readonly doc: Document;

  constructor(
    private readonly vm: ViewModel,
    hooks: CommandHooks,
    doc: Document = document,
  ) {
    this.doc = doc;
    const bind = (id: string, fn: () => void) => {
      const el = doc.getElementById(id);
      if (el) el.addEventListener("click", fn);
    };
    bind("btn-start", hooks.start);
    bind("btn-stop", hooks.stop);
    bind("btn-reset", hooks.reset);
    bind("btn-load-ring", hooks.loadRing);
    bind("btn-load-trunk", hooks.loadTrunk);
    bind("btn-unload", hooks.unload);
    bind("btn-ack", hooks.ack);
    bind("btn-pause", hooks.togglePause);
  }

  render(now: number): void {
    const vm = this.vm;
    this.text("status-banner", vm.status.toUpperCase());
    this.klass("status-banner", `banner ${vm.status}`);

    const seq = vm.sequencerState();
    this.text("seq-banner", vm.tripped() ? `TRIPPED: ${vm.tripCause()}` : seq.toUpperCase());
    this.klass("seq-banner", vm.tripped() ? "banner tripped" : "banner running");

    for (const [id, tag, decimals] of NUMERIC_READOUTS) {
      const value = vm.numeric(tag);
      const quality = vm.displayQuality(tag, now);
      this.text(id, value === undefined ? "--" : value.toFixed(decimals));
      this.klass(id, `readout q-${quality.toLowerCase()}`);
    }
    for (const [id, tag] of EQUIPMENT_LAMPS) {
      const on = vm.value(tag) === 1;
      this.klass(id, on ? "lamp on" : "lamp");
    }
    this.text("load-mode", String(vm.value("plant.load_mode") ?? "--"));

    for (const btn of [
      "btn-start",
      "btn-stop",
      "btn-reset",
      "btn-load-ring",
      "btn-load-trunk",
      "btn-unload",
      "btn-ack",
    ]) {
      const el = this.doc.getElementById(btn) as HTMLButtonElement | null;
      if (el) el.disabled = !vm.commandsEnabled;
    }

    this.renderAlarms();
    this.renderTrend(now);
  }

  private renderAlarms(): void {
    const body = this.doc.getElementById("alarm-rows");
    if (!body) return;
    body.innerHTML = "";
    for (const alarm of this.vm.alarms) {
      const row = this.doc.createElement("tr");
      row.className = alarm.acknowledged ? "alarm acked" : "alarm active";
      const when = this.doc.createElement("td");
      when.textContent = (alarm.firstSeen / 1000).toFixed(1) + "s";
      const what = this.doc.createElement("td");
      what.textContent = alarm.id;
      const state = this.doc.createElement("td");
      state.textContent = alarm.acknowledged ? "ACKED" : "ACTIVE";
      row.append(when, what, state);
      body.appendChild(row);
    }
    this.text("alarm-count", String(this.vm.unacknowledgedCount));
  }

  private renderTrend(_now: number): void {
    const canvas = this.doc.getElementById("trend") as HTMLCanvasElement | null;
    if (!canvas) return;
    const ctx = canvas.getContext("2d");
    if (!ctx) return;
    const { width, height } = canvas;
    ctx.clearRect(0, 0, width, height);
    ctx.fillStyle = "#10151c";
    ctx.fillRect(0, 0, width, height);

    const series: Array<[string, string, number]> = [
      ["plant.n_hpt", "#5ad1ff", 6000],
      ["plant.n_lpt", "#ffd166", 6000],
      ["plant.t_exh", "#ff6b6b", 600],
    ];
    const all = series
      .map(([tag]) => this.vm.visibleTrend(tag))
      .filter((pts) => pts.length > 1);
    if (all.length === 0) return;
    const tMax = Math.max(...all.map((pts) => pts[pts.length - 1].t));
    const span = 120_000; // two minutes across the canvas
    const tMin = tMax - span;

    for (const [tag, color, scale] of series) {
      const pts = this.vm.visibleTrend(tag).filter((p) => p.t >= tMin);
      if (pts.length < 2) continue;
      ctx.strokeStyle = color;
      ctx.lineWidth = 1.5;
      ctx.beginPath();
      for (let i = 0; i < pts.length; i++) {
        const x = ((pts[i].t - tMin) / span) * width;
        const y = height - Math.min(pts[i].value / scale, 1) * (height - 8) - 4;
        if (i === 0) ctx.moveTo(x, y);
        else ctx.lineTo(x, y);
      }
      ctx.stroke();
    }
  }

  private text(id: string, value: string): void {
    const el = this.doc.getElementById(id);
    if (el && el.textContent !== value) el.textContent = value;
  }

  private klass(id: string, className: string): void {
    const el = this.doc.getElementById(id);
    if (el && el.className !== className) el.className = className;
  }
}

export function trendBounds(points: TrendPoint[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const p of points) {
    lo = Math.min(lo, p.value);
    hi = Math.max(hi, p.value);
  }
  return [lo, hi];
}
