/**
 * Display state for the operator console.
 *
 * Purely frame-driven: every value on screen traces back to a received
 * DATA frame, and nothing here extrapolates. Trend buffers are rings
 * keyed by the tag timestamps (not arrival time); the alarm list
 * mirrors the controller's latched set with local acknowledge marks;
 * staleness is flagged when a subscribed tag goes quiet for five of
 * its expected periods.
 */

import { DataFrame, Quality, TagValue } from "./protocol.js";

export interface TagSample {
  value: TagValue;
  quality: Quality;
  timestamp: number;
  /** wall-clock arrival, for staleness checks */
  receivedAt: number;
}

export interface TrendPoint {
  t: number;
  value: number;
}

export interface AlarmEntry {
  id: string;
  acknowledged: boolean;
  firstSeen: number;
}

export type ConnectionStatus = "connecting" | "connected" | "disconnected";

export interface TrendSpec {
  tag: string;
  /** samples kept; at 10 Hz display rate 6000 covers ten minutes */
  capacity?: number;
}

const DEFAULT_CAPACITY = 6000;

export class ViewModel {
  readonly tags = new Map<string, TagSample>();
  readonly trends = new Map<string, TrendPoint[]>();
  private readonly capacities = new Map<string, number>();
  alarms: AlarmEntry[] = [];
  status: ConnectionStatus = "disconnected";
  paused = false;
  /** expected producer period per tag, ms; informs staleness */
  periodMs = 100;

  constructor(trendSpecs: TrendSpec[] = []) {
    for (const spec of trendSpecs) {
      this.trends.set(spec.tag, []);
      this.capacities.set(spec.tag, spec.capacity ?? DEFAULT_CAPACITY);
    }
  }

  setStatus(status: ConnectionStatus): void {
    this.status = status;
  }

  /** Commands are enabled only while the bridge is up. */
  get commandsEnabled(): boolean {
    return this.status === "connected";
  }

  applyData(frame: DataFrame, receivedAt: number): void {
    this.tags.set(frame.tag, {
      value: frame.value,
      quality: frame.quality,
      timestamp: frame.timestamp,
      receivedAt,
    });
    const buffer = this.trends.get(frame.tag);
    if (buffer !== undefined && typeof frame.value === "number") {
      const last = buffer[buffer.length - 1];
      if (last === undefined || frame.timestamp >= last.t) {
        buffer.push({ t: frame.timestamp, value: frame.value });
        const cap = this.capacities.get(frame.tag) ?? DEFAULT_CAPACITY;
        if (buffer.length > cap) {
          buffer.splice(0, buffer.length - cap);
        }
      }
    }
    if (frame.tag === "ctl.alarms") {
      this.mergeAlarms(String(frame.value), frame.timestamp);
    }
  }

  private mergeAlarms(token: string, timestamp: number): void {
    const active = token === "none" || token === "" ? [] : token.split(",");
    const known = new Map(this.alarms.map((a) => [a.id, a]));
    const next: AlarmEntry[] = [];
    for (const id of active) {
      const existing = known.get(id);
      next.push(existing ?? { id, acknowledged: false, firstSeen: timestamp });
    }
    // entries the controller dropped disappear, acknowledged or not:
    // the controller owns the latched set
    this.alarms = next;
  }

  acknowledgeAll(): void {
    for (const alarm of this.alarms) {
      alarm.acknowledged = true;
    }
  }

  get unacknowledgedCount(): number {
    return this.alarms.filter((a) => !a.acknowledged).length;
  }

  /** Display quality: a silent subscribed tag degrades to STALE. */
  displayQuality(tag: string, now: number): Quality | "NODATA" {
    const sample = this.tags.get(tag);
    if (sample === undefined) return "NODATA";
    if (sample.quality === "GOOD" && now - sample.receivedAt > 5 * this.periodMs) {
      return "STALE";
    }
    return sample.quality;
  }

  value(tag: string): TagValue | undefined {
    return this.tags.get(tag)?.value;
  }

  numeric(tag: string): number | undefined {
    const v = this.tags.get(tag)?.value;
    return typeof v === "number" ? v : undefined;
  }

  sequencerState(): string {
    return String(this.value("ctl.seq") ?? "unknown");
  }

  tripped(): boolean {
    return this.sequencerState() === "tripped";
  }

  tripCause(): string {
    const cause = String(this.value("ctl.trip_cause") ?? "none");
    return cause === "none" ? "" : cause;
  }

  /** Trend points for drawing; pausing freezes what is shown only. */
  visibleTrend(tag: string): TrendPoint[] {
    const buffer = this.trends.get(tag) ?? [];
    if (!this.paused) {
      this.frozen.delete(tag);
      return buffer;
    }
    let snap = this.frozen.get(tag);
    if (snap === undefined) {
      snap = buffer.slice();
      this.frozen.set(tag, snap);
    }
    return snap;
  }

  private frozen = new Map<string, TrendPoint[]>();

  setPaused(paused: boolean): void {
    this.paused = paused;
    if (!paused) this.frozen.clear();
  }
}
