/**
 * Bridge client: one WebSocket to the tag bus, with reconnect.
 *
 * On every (re)connect it REQUESTs an initial image of the display
 * set and re-issues all ADVISEs; frames then stream in until the
 * socket drops, after which it backs off and retries. One socket
 * message carries exactly one protocol frame.
 */

import {
  decodeFrame,
  encodeAdvise,
  encodePoke,
  encodeRequest,
  Frame,
  ProtocolError,
  TagValue,
} from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ClientOptions {
  url: string;
  tags: string[];
  socketFactory?: SocketFactory;
  onFrame?: (frame: Frame, receivedAt: number) => void;
  onStatus?: (status: "connecting" | "connected" | "disconnected") => void;
  /** backoff schedule in ms; the last entry repeats */
  backoff?: number[];
  now?: () => number;
  setTimer?: (fn: () => void, ms: number) => unknown;
}

export class BridgeClient {
  private socket: SocketLike | null = null;
  private closed = false;
  private attempt = 0;
  private readonly opts: Required<Pick<ClientOptions, "backoff">> & ClientOptions;

  constructor(options: ClientOptions) {
    this.opts = { backoff: [500, 1000, 2000, 5000], ...options };
  }

  start(): void {
    this.closed = false;
    this.connect();
  }

  stop(): void {
    this.closed = true;
    this.socket?.close();
    this.socket = null;
  }

  get connected(): boolean {
    return this.socket !== null && this.attempt === 0;
  }

  poke(tag: string, value: TagValue | boolean): boolean {
    if (this.socket === null) return false;
    this.socket.send(encodePoke(tag, value));
    return true;
  }

  private factory(): SocketFactory {
    return (
      this.opts.socketFactory ??
      ((url: string) => new WebSocket(url) as unknown as SocketLike)
    );
  }

  private connect(): void {
    this.opts.onStatus?.("connecting");
    const socket = this.factory()(this.opts.url);
    this.socket = socket;

    socket.onopen = () => {
      this.attempt = 0;
      this.opts.onStatus?.("connected");
      // initial image, then the change stream
      for (const tag of this.opts.tags) {
        socket.send(encodeRequest(tag));
      }
      for (const tag of this.opts.tags) {
        socket.send(encodeAdvise(tag));
      }
    };

    socket.onmessage = (ev) => {
      const now = (this.opts.now ?? Date.now)();
      let frame: Frame;
      try {
        frame = decodeFrame(String(ev.data));
      } catch (err) {
        if (err instanceof ProtocolError) return; // tolerate junk frames
        throw err;
      }
      this.opts.onFrame?.(frame, now);
    };

    const lost = () => {
      if (this.socket !== socket) return;
      this.socket = null;
      this.opts.onStatus?.("disconnected");
      if (this.closed) return;
      const schedule = this.opts.backoff;
      const delay = schedule[Math.min(this.attempt, schedule.length - 1)];
      this.attempt += 1;
      const timer = this.opts.setTimer ?? ((fn: () => void, ms: number) => setTimeout(fn, ms));
      timer(() => {
        if (!this.closed) this.connect();
      }, delay);
    };
    socket.onclose = lost;
    socket.onerror = () => {
      // some implementations fire error without close; treat as lost
      try {
        socket.close();
      } catch {
        /* already closed */
      }
    };
  }
}
