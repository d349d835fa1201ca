import { describe, expect, it } from "vitest";

import { BridgeClient, SocketLike } from "../src/client.js";
import { Frame } from "../src/protocol.js";

class FakeSocket implements SocketLike {
  sent: string[] = [];
  closed = false;
  onopen: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: unknown }) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onerror: ((ev?: unknown) => void) | null = null;

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.closed = true;
    this.onclose?.();
  }
}

function harness() {
  const sockets: FakeSocket[] = [];
  const frames: Frame[] = [];
  const statuses: string[] = [];
  const timers: Array<{ fn: () => void; ms: number }> = [];
  const client = new BridgeClient({
    url: "ws://test:7118",
    tags: ["plant.n_hpt", "ctl.seq"],
    socketFactory: () => {
      const s = new FakeSocket();
      sockets.push(s);
      return s;
    },
    onFrame: (f) => frames.push(f),
    onStatus: (s) => statuses.push(s),
    setTimer: (fn, ms) => timers.push({ fn, ms }),
    now: () => 123,
  });
  return { client, sockets, frames, statuses, timers };
}

describe("bridge client", () => {
  it("requests an initial image then subscribes on connect", () => {
    const { client, sockets } = harness();
    client.start();
    sockets[0].onopen?.();
    expect(sockets[0].sent).toEqual([
      "REQUEST plant.n_hpt\n",
      "REQUEST ctl.seq\n",
      "ADVISE plant.n_hpt\n",
      "ADVISE ctl.seq\n",
    ]);
  });

  it("delivers decoded frames and ignores junk", () => {
    const { client, sockets, frames } = harness();
    client.start();
    sockets[0].onopen?.();
    sockets[0].onmessage?.({ data: "DATA plant.n_hpt 5100.5 GOOD 2000\n" });
    sockets[0].onmessage?.({ data: "GARBAGE\n" });
    sockets[0].onmessage?.({ data: "ACK cmd.start\n" });
    expect(frames).toHaveLength(2);
    expect(frames[0]).toMatchObject({ verb: "DATA", value: 5100.5 });
    expect(frames[1]).toMatchObject({ verb: "ACK" });
  });

  it("reconnects with backoff and re-issues all advises", () => {
    const { client, sockets, statuses, timers } = harness();
    client.start();
    sockets[0].onopen?.();
    sockets[0].onclose?.();
    expect(statuses).toEqual(["connecting", "connected", "disconnected"]);
    expect(timers).toHaveLength(1);
    expect(timers[0].ms).toBe(500);
    timers[0].fn(); // fire the retry
    expect(sockets).toHaveLength(2);
    sockets[1].onopen?.();
    expect(sockets[1].sent.filter((l) => l.startsWith("ADVISE"))).toEqual([
      "ADVISE plant.n_hpt\n",
      "ADVISE ctl.seq\n",
    ]);
  });

  it("pokes only while a socket exists", () => {
    const { client, sockets } = harness();
    expect(client.poke("cmd.start", 1)).toBe(false);
    client.start();
    sockets[0].onopen?.();
    expect(client.poke("cmd.start", 1)).toBe(true);
    expect(sockets[0].sent).toContain("POKE cmd.start 1\n");
  });

  it("stop() suppresses reconnection", () => {
    const { client, sockets, timers } = harness();
    client.start();
    sockets[0].onopen?.();
    client.stop();
    expect(timers).toHaveLength(0);
  });
});
