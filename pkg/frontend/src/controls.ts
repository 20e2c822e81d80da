/** Teleop input: WASD plus space-for-stop, rate limited to 10 Hz, inert while
 * disconnected. The clock is injected so the limiter is testable. */

import { encodeDrive } from "./protocol.js";

export const MIN_SEND_INTERVAL_MS = 100; // 10 Hz ceiling

export const KEY_BINDINGS: Record<string, { direction: string; magnitude: number }> = {
  w: { direction: "forward", magnitude: 1.0 },
  s: { direction: "reverse", magnitude: 1.0 },
  a: { direction: "left", magnitude: 0.5 },
  d: { direction: "right", magnitude: 0.5 },
  " ": { direction: "stop", magnitude: 0.0 },
};

export interface DriveSink {
  isConnected: boolean;
  send(line: string): boolean;
}

export class DriveController {
  sent = 0;
  private lastSendMs = -Infinity;

  constructor(
    private readonly sink: DriveSink,
    private readonly now: () => number = () => Date.now(),
  ) {}

  /** Key event -> drive message; returns the line sent, or null if dropped. */
  handleKey(key: string): string | null {
    const binding = KEY_BINDINGS[key.toLowerCase() === " " ? " " : key.toLowerCase()];
    if (binding === undefined) {
      return null;
    }
    return this.sendDrive(binding.direction, binding.magnitude);
  }

  /** On-screen button press; same path and limiter as the keyboard. */
  sendDrive(direction: string, magnitude: number): string | null {
    if (!this.sink.isConnected) {
      return null;
    }
    const t = this.now();
    if (t - this.lastSendMs < MIN_SEND_INTERVAL_MS) {
      return null;
    }
    const line = encodeDrive(direction, magnitude);
    if (!this.sink.send(line)) {
      return null;
    }
    this.lastSendMs = t;
    this.sent += 1;
    return line;
  }
}
