/** View model: latest message of each kind plus bounded rolling history. */

import {
  Message,
  PoseMsg,
  PredictionMsg,
  SurvivabilityMsg,
  TelemetryMsg,
} from "./protocol.js";

export const HISTORY_WINDOW_MS = 60_000;

/** Fixed-capacity ring that also drops entries older than the time window. */
export class RingHistory<T extends { timestamp_ms: number }> {
  private items: T[] = [];

  constructor(readonly capacity: number = 64) {
    if (capacity < 1) {
      throw new RangeError(`capacity must be >= 1, got ${capacity}`);
    }
  }

  push(item: T): void {
    this.items.push(item);
    const cutoff = item.timestamp_ms - HISTORY_WINDOW_MS;
    while (
      this.items.length > this.capacity ||
      (this.items.length > 0 && this.items[0]!.timestamp_ms < cutoff)
    ) {
      this.items.shift();
    }
  }

  get length(): number {
    return this.items.length;
  }

  toArray(): readonly T[] {
    return this.items;
  }
}

export type ConnectionStatus = "connecting" | "connected" | "disconnected";

export class ViewState {
  telemetry: TelemetryMsg | null = null;
  prediction: PredictionMsg | null = null;
  survivability: SurvivabilityMsg | null = null;
  pose: PoseMsg | null = null;
  status: ConnectionStatus = "disconnected";
  malformed = 0;
  logLines: string[] = [];
  telemetryHistory = new RingHistory<TelemetryMsg>();
  predictionHistory = new RingHistory<PredictionMsg>();
  poseHistory = new RingHistory<PoseMsg>();

  /** Fold one already-validated message into the state. */
  apply(msg: Message): void {
    switch (msg.type) {
      case "telemetry":
        this.telemetry = msg;
        this.telemetryHistory.push(msg);
        break;
      case "prediction":
        this.prediction = msg;
        this.predictionHistory.push(msg);
        break;
      case "survivability":
        this.survivability = msg;
        break;
      case "pose":
        this.pose = msg;
        this.poseHistory.push(msg);
        break;
      case "log":
        this.pushLog(`[${msg.level}] ${msg.text}`);
        break;
      case "error":
        this.pushLog(`[error:${msg.code}] ${msg.text}`);
        break;
      case "drive":
        break; // echoes of our own commands; nothing to show
    }
  }

  private pushLog(line: string): void {
    this.logLines.push(line);
    while (this.logLines.length > 200) {
      this.logLines.shift();
    }
  }
}
