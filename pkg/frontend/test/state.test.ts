import { describe, expect, it } from "vitest";

import { decodeLine, TelemetryMsg } from "../src/protocol.js";
import { HISTORY_WINDOW_MS, RingHistory, ViewState } from "../src/state.js";
import { loadProtocolFixture } from "./fixture.js";

const fixture = loadProtocolFixture();

function telemetryAt(timestampMs: number, seq: number): TelemetryMsg {
  return {
    type: "telemetry",
    seq,
    timestamp_ms: timestampMs,
    gas: 100,
    temp_c: 20,
    humidity_pct: 50,
    pressure_kpa: 101,
  };
}

describe("RingHistory", () => {
  it("is bounded by capacity", () => {
    const ring = new RingHistory<TelemetryMsg>(8);
    for (let i = 0; i < 100; i++) {
      ring.push(telemetryAt(i, i)); // same-instant burst: window keeps all
    }
    expect(ring.length).toBe(8);
    expect(ring.toArray()[0]!.seq).toBe(92);
  });

  it("drops entries older than the 60 s window", () => {
    const ring = new RingHistory<TelemetryMsg>(1000);
    for (let i = 0; i < 100; i++) {
      ring.push(telemetryAt(i * 2000, i)); // one entry per 2 s tick
    }
    const items = ring.toArray();
    const latest = items[items.length - 1]!.timestamp_ms;
    expect(items[0]!.timestamp_ms).toBeGreaterThanOrEqual(latest - HISTORY_WINDOW_MS);
    expect(items.length).toBe(HISTORY_WINDOW_MS / 2000 + 1);
  });

  it("rejects a nonsense capacity", () => {
    expect(() => new RingHistory(0)).toThrow(RangeError);
  });
});

describe("ViewState.apply", () => {
  it("routes every fixture message kind to its panel slot", () => {
    const state = new ViewState();
    for (const entry of fixture.valid) {
      state.apply(decodeLine(entry.line));
    }
    expect(state.telemetry).not.toBeNull();
    expect(state.prediction).not.toBeNull();
    expect(state.survivability).not.toBeNull();
    expect(state.pose).not.toBeNull();
    expect(state.logLines.length).toBeGreaterThanOrEqual(2); // log + error
    expect(state.telemetryHistory.length).toBeGreaterThanOrEqual(2);
  });

  it("keeps only the latest message of each kind", () => {
    const state = new ViewState();
    state.apply(telemetryAt(0, 1));
    state.apply(telemetryAt(2000, 2));
    expect(state.telemetry!.seq).toBe(2);
    expect(state.telemetryHistory.length).toBe(2);
  });

  it("bounds the log buffer", () => {
    const state = new ViewState();
    for (let i = 0; i < 500; i++) {
      state.apply({ type: "log", seq: i, timestamp_ms: 0, level: "info", text: `line ${i}` });
    }
    expect(state.logLines.length).toBe(200);
    expect(state.logLines[199]).toContain("line 499");
  });

  it("ignores drive echoes", () => {
    const state = new ViewState();
    state.apply({ type: "drive", seq: 1, timestamp_ms: 0, direction: "forward", magnitude: 1 });
    expect(state.telemetry).toBeNull();
    expect(state.logLines.length).toBe(0);
  });
});
