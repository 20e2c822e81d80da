/** Loads the wire-contract fixture shared with the gateway test suite. */

import { readFileSync } from "node:fs";

export interface FixtureEntry {
  line: string;
  expect: Record<string, unknown>;
}

export interface ProtocolFixture {
  valid: FixtureEntry[];
  invalid: string[];
}

const FIXTURE_URL = new URL(
  "../../src/rubble_probe/fixtures/protocol_messages.json",
  import.meta.url,
);

export function loadProtocolFixture(): ProtocolFixture {
  return JSON.parse(readFileSync(FIXTURE_URL, "utf-8")) as ProtocolFixture;
}

export function fixtureLine(fixture: ProtocolFixture, predicate: (expect: Record<string, unknown>) => boolean): string {
  const entry = fixture.valid.find((e) => predicate(e.expect));
  if (entry === undefined) {
    throw new Error("no fixture entry matches the predicate");
  }
  return entry.line;
}
