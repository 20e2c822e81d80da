/** Gateway connection: decode-and-dispatch with a malformed-line counter and
 * capped-backoff auto-reconnect. The socket factory is injected so tests can
 * run without a browser. */

import { decodeLine, Message, ProtocolError } from "./protocol.js";

export const RECONNECT_BASE_MS = 500;
export const RECONNECT_CAP_MS = 5_000;

/** The subset of the WebSocket surface the console uses. */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ConnectionEvents {
  onMessage: (msg: Message) => void;
  onStatus: (status: "connecting" | "connected" | "disconnected") => void;
  onMalformed: (count: number) => void;
}

export class Connection {
  malformed = 0;
  private socket: SocketLike | null = null;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private backoffMs = RECONNECT_BASE_MS;
  private closed = false;
  private connected = false;

  constructor(
    readonly url: string,
    private readonly events: ConnectionEvents,
    private readonly factory: SocketFactory,
  ) {}

  connect(): void {
    this.closed = false;
    this.open();
  }

  get isConnected(): boolean {
    return this.connected;
  }

  send(line: string): boolean {
    if (!this.connected || this.socket === null) {
      return false;
    }
    this.socket.send(line);
    return true;
  }

  /** Stop for good; no reconnect after this. */
  close(): void {
    this.closed = true;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.socket?.close();
    this.socket = null;
    this.setConnected(false);
  }

  private open(): void {
    this.events.onStatus("connecting");
    let socket: SocketLike;
    try {
      socket = this.factory(this.url);
    } catch {
      this.scheduleReconnect();
      return;
    }
    this.socket = socket;
    socket.onopen = () => {
      this.backoffMs = RECONNECT_BASE_MS;
      this.setConnected(true);
    };
    socket.onmessage = (ev) => this.handleData(ev.data);
    socket.onerror = () => {};
    socket.onclose = () => {
      this.socket = null;
      this.setConnected(false);
      this.scheduleReconnect();
    };
  }

  private handleData(data: unknown): void {
    if (typeof data !== "string") {
      return; // binary frames are not part of the contract
    }
    for (const line of data.split("\n")) {
      if (line.trim() === "") {
        continue;
      }
      try {
        this.events.onMessage(decodeLine(line));
      } catch (err) {
        if (!(err instanceof ProtocolError)) {
          throw err;
        }
        this.malformed += 1;
        this.events.onMalformed(this.malformed);
      }
    }
  }

  private setConnected(connected: boolean): void {
    this.connected = connected;
    this.events.onStatus(connected ? "connected" : "disconnected");
  }

  private scheduleReconnect(): void {
    if (this.closed || this.timer !== null) {
      return;
    }
    const delay = this.backoffMs;
    this.backoffMs = Math.min(this.backoffMs * 2, RECONNECT_CAP_MS);
    this.timer = setTimeout(() => {
      this.timer = null;
      if (!this.closed) {
        this.open();
      }
    }, delay);
  }
}
