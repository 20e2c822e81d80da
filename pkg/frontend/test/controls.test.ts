import { describe, expect, it } from "vitest";

import { DriveController, DriveSink, MIN_SEND_INTERVAL_MS } from "../src/controls.js";

class FakeSink implements DriveSink {
  isConnected = true;
  sent: string[] = [];

  send(line: string): boolean {
    this.sent.push(line);
    return true;
  }
}

function rig(startMs = 0): { sink: FakeSink; driver: DriveController; clock: { t: number } } {
  const sink = new FakeSink();
  const clock = { t: startMs };
  const driver = new DriveController(sink, () => clock.t);
  return { sink, driver, clock };
}

describe("key mapping", () => {
  it("W sends forward at full magnitude", () => {
    const { sink, driver } = rig();
    expect(driver.handleKey("w")).not.toBeNull();
    expect(JSON.parse(sink.sent[0]!)).toMatchObject({
      type: "drive",
      direction: "forward",
      magnitude: 1,
    });
  });

  it("space sends stop", () => {
    const { sink, driver } = rig();
    driver.handleKey(" ");
    expect(JSON.parse(sink.sent[0]!)).toMatchObject({ direction: "stop", magnitude: 0 });
  });

  it("maps A/S/D to left/reverse/right and is case-insensitive", () => {
    const { sink, driver, clock } = rig();
    for (const key of ["a", "S", "D"]) {
      driver.handleKey(key);
      clock.t += MIN_SEND_INTERVAL_MS;
    }
    expect(sink.sent.map((l) => JSON.parse(l).direction)).toEqual(["left", "reverse", "right"]);
  });

  it("ignores unbound keys", () => {
    const { sink, driver } = rig();
    expect(driver.handleKey("q")).toBeNull();
    expect(sink.sent.length).toBe(0);
  });
});

describe("rate limit", () => {
  it("a key held for 1 s emits at most 10 messages", () => {
    const { sink, driver, clock } = rig();
    for (let t = 0; t < 1000; t += 10) {
      clock.t = t; // browser key repeat ~100 Hz
      driver.handleKey("w");
    }
    expect(sink.sent.length).toBeLessThanOrEqual(10);
    expect(sink.sent.length).toBeGreaterThan(0);
  });

  it("spaced presses all go through", () => {
    const { sink, driver, clock } = rig();
    for (let i = 0; i < 5; i++) {
      clock.t = i * 2 * MIN_SEND_INTERVAL_MS;
      expect(driver.handleKey("w")).not.toBeNull();
    }
    expect(sink.sent.length).toBe(5);
  });
});

describe("disconnected behaviour", () => {
  it("drops input while the sink is disconnected", () => {
    const { sink, driver } = rig();
    sink.isConnected = false;
    expect(driver.handleKey("w")).toBeNull();
    expect(driver.sendDrive("forward", 1)).toBeNull();
    expect(sink.sent.length).toBe(0);
    expect(driver.sent).toBe(0);
  });

  it("resumes after the sink reconnects", () => {
    const { sink, driver, clock } = rig();
    sink.isConnected = false;
    driver.handleKey("w");
    sink.isConnected = true;
    clock.t += MIN_SEND_INTERVAL_MS;
    expect(driver.handleKey("w")).not.toBeNull();
    expect(sink.sent.length).toBe(1);
  });
});
