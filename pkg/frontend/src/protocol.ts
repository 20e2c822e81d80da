/** Wire contract with the gateway: one JSON object per NDJSON line or
 * websocket text frame. Mirrors the validation the gateway applies, so the
 * console never renders or sends a non-schema message. */

export const LABELS = ["breathes", "cough", "hello_help", "muffled_words", "noise"] as const;
export type Label = (typeof LABELS)[number];

export const CONFIDENCE_THRESHOLD = 0.6;
export const MAX_LINE_BYTES = 65536;

export type Grade = "Good" | "Moderate" | "Poor";

export interface TelemetryMsg {
  type: "telemetry";
  seq: number;
  timestamp_ms: number;
  gas: number;
  temp_c: number;
  humidity_pct: number;
  pressure_kpa: number;
}

export interface PredictionMsg {
  type: "prediction";
  seq: number;
  timestamp_ms: number;
  dsp_ms: number;
  classification_ms: number;
  anomaly_ms: number;
  probabilities: Record<Label, number>;
  decision: string | null;
}

export interface SurvivabilityMsg {
  type: "survivability";
  seq: number;
  timestamp_ms: number;
  air: Grade;
  thermal: Grade;
  overall: Grade;
  rationale: string[];
}

export interface DriveMsg {
  type: "drive";
  seq: number;
  timestamp_ms: number;
  direction: string;
  magnitude: number;
}

export interface PoseMsg {
  type: "pose";
  seq: number;
  timestamp_ms: number;
  x_m: number;
  y_m: number;
  heading_rad: number;
}

export interface LogMsg {
  type: "log";
  seq: number;
  timestamp_ms: number;
  level: string;
  text: string;
}

export interface ErrorMsg {
  type: "error";
  seq: number;
  timestamp_ms: number;
  code: string;
  text: string;
}

export type Message =
  | TelemetryMsg
  | PredictionMsg
  | SurvivabilityMsg
  | DriveMsg
  | PoseMsg
  | LogMsg
  | ErrorMsg;

export class ProtocolError extends Error {}

const GRADES: readonly string[] = ["Good", "Moderate", "Poor"];

function isInt(v: unknown): v is number {
  return typeof v === "number" && Number.isInteger(v);
}

function isNum(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

function isStr(v: unknown): v is string {
  return typeof v === "string";
}

/** field name -> predicate, per message type; extra fields pass through */
const VALIDATORS: Record<string, Record<string, (v: unknown) => boolean>> = {
  telemetry: { gas: isInt, temp_c: isNum, humidity_pct: isNum, pressure_kpa: isNum },
  prediction: {
    dsp_ms: isInt,
    classification_ms: isInt,
    anomaly_ms: isInt,
    probabilities: (v) => typeof v === "object" && v !== null && !Array.isArray(v),
  },
  survivability: {
    air: (v) => isStr(v) && GRADES.includes(v),
    thermal: (v) => isStr(v) && GRADES.includes(v),
    overall: (v) => isStr(v) && GRADES.includes(v),
  },
  drive: { direction: isStr, magnitude: isNum },
  pose: { x_m: isNum, y_m: isNum, heading_rad: isNum },
  log: { level: isStr, text: isStr },
  error: { code: isStr, text: isStr },
};

function checkPrediction(obj: Record<string, unknown>): void {
  const probs = obj.probabilities as Record<string, unknown>;
  for (const lbl of LABELS) {
    if (!isNum(probs[lbl])) {
      throw new ProtocolError(`prediction missing probability for ${lbl}`);
    }
  }
}

export function decodeLine(line: string): Message {
  if (line.length > MAX_LINE_BYTES) {
    throw new ProtocolError(`line exceeds ${MAX_LINE_BYTES} bytes`);
  }
  let obj: unknown;
  try {
    obj = JSON.parse(line);
  } catch (err) {
    throw new ProtocolError(`malformed JSON: ${String(err)}`);
  }
  if (typeof obj !== "object" || obj === null || Array.isArray(obj)) {
    throw new ProtocolError("message must be a JSON object");
  }
  const rec = obj as Record<string, unknown>;
  const mtype = rec.type;
  if (!isStr(mtype) || !(mtype in VALIDATORS)) {
    throw new ProtocolError(`unknown message type ${JSON.stringify(mtype)}`);
  }
  const seq = rec.seq ?? 0;
  const ts = rec.timestamp_ms ?? 0;
  if (!isInt(seq) || !isInt(ts) || seq < 0) {
    throw new ProtocolError("seq and timestamp_ms must be non-negative integers");
  }
  const rules = VALIDATORS[mtype]!;
  for (const [field, ok] of Object.entries(rules)) {
    if (!(field in rec)) {
      throw new ProtocolError(`${mtype} message missing field '${field}'`);
    }
    if (!ok(rec[field])) {
      throw new ProtocolError(`${mtype} field '${field}' has wrong type`);
    }
  }
  if (mtype === "prediction") {
    checkPrediction(rec);
    if (!("decision" in rec)) {
      rec.decision = null;
    }
  }
  if (mtype === "survivability" && !Array.isArray(rec.rationale)) {
    rec.rationale = [];
  }
  return { ...rec, seq, timestamp_ms: ts } as Message;
}

/** Canonical drive line (sorted keys) ready to send to the gateway. */
export function encodeDrive(direction: string, magnitude: number): string {
  if (!["forward", "reverse", "left", "right", "stop"].includes(direction)) {
    throw new ProtocolError(`unknown direction '${direction}'`);
  }
  if (!(magnitude >= 0 && magnitude <= 1)) {
    throw new ProtocolError(`magnitude ${magnitude} outside [0, 1]`);
  }
  return JSON.stringify({
    direction,
    magnitude,
    seq: 0,
    timestamp_ms: 0,
    type: "drive",
  });
}

/** Client-side copy of the gateway's survivability rule table, used when a
 * telemetry frame arrives before any survivability message. */
export function deriveSurvivability(frame: TelemetryMsg): { air: Grade; thermal: Grade; overall: Grade } {
  const air: Grade = frame.gas <= 400 ? "Good" : frame.gas <= 700 ? "Moderate" : "Poor";
  const tempGood = frame.temp_c >= 15 && frame.temp_c <= 35;
  const humGood = frame.humidity_pct >= 20 && frame.humidity_pct <= 80;
  const tempNear = frame.temp_c >= 10 && frame.temp_c <= 40;
  const humNear = frame.humidity_pct >= 10 && frame.humidity_pct <= 90;
  const thermal: Grade = tempGood && humGood ? "Good" : tempNear && humNear ? "Moderate" : "Poor";
  const rank: Record<Grade, number> = { Good: 0, Moderate: 1, Poor: 2 };
  const overall = rank[air] >= rank[thermal] ? air : thermal;
  return { air, thermal, overall };
}
