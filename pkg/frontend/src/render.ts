/** Pure view projection: ViewState in, plain render model out. DOM writing
 * lives in main.ts so every visual rule here is testable as data. */

import { CONFIDENCE_THRESHOLD, Grade, LABELS, deriveSurvivability } from "./protocol.js";
import { ViewState } from "./state.js";

export interface BarView {
  label: string;
  value: number;
  widthPct: number;
  highlighted: boolean;
}

export interface BadgeView {
  grade: Grade;
  air: Grade;
  thermal: Grade;
  derived: boolean; // true when computed client-side from telemetry
}

export interface GaugeView {
  gasText: string;
  tempText: string;
  humidityText: string;
  pressureText: string;
}

export interface RenderModel {
  bannerText: string;
  bannerKind: "ok" | "warn" | "bad";
  malformedText: string;
  bars: BarView[];
  decisionText: string;
  decisionUncertain: boolean;
  timingsText: string;
  gauges: GaugeView | null;
  badge: BadgeView | null;
  poseText: string;
  logLines: string[];
  controlsEnabled: boolean;
}

export function renderModel(state: ViewState): RenderModel {
  const bars: BarView[] = LABELS.map((label) => {
    const value = state.prediction?.probabilities[label] ?? 0;
    return {
      label,
      value,
      widthPct: Math.round(1000 * Math.min(1, Math.max(0, value))) / 10,
      highlighted: value >= CONFIDENCE_THRESHOLD,
    };
  });

  let decisionText = "no prediction yet";
  let decisionUncertain = false;
  if (state.prediction !== null) {
    const top = Math.max(...bars.map((b) => b.value));
    if (top >= CONFIDENCE_THRESHOLD) {
      decisionText = state.prediction.decision ?? bars.find((b) => b.value === top)!.label;
    } else {
      decisionText = "uncertain";
      decisionUncertain = true;
    }
  }

  const timingsText =
    state.prediction === null
      ? ""
      : `DSP ${state.prediction.dsp_ms} ms, classify ${state.prediction.classification_ms} ms, ` +
        `anomaly ${state.prediction.anomaly_ms} ms`;

  let gauges: GaugeView | null = null;
  if (state.telemetry !== null) {
    gauges = {
      gasText: `${state.telemetry.gas}`,
      tempText: `${state.telemetry.temp_c.toFixed(2)} °C`,
      humidityText: `${state.telemetry.humidity_pct.toFixed(2)}%`,
      pressureText: `${state.telemetry.pressure_kpa.toFixed(2)} kPa`,
    };
  }

  let badge: BadgeView | null = null;
  if (state.survivability !== null) {
    badge = {
      grade: state.survivability.overall,
      air: state.survivability.air,
      thermal: state.survivability.thermal,
      derived: false,
    };
  } else if (state.telemetry !== null) {
    const derived = deriveSurvivability(state.telemetry);
    badge = { grade: derived.overall, air: derived.air, thermal: derived.thermal, derived: true };
  }

  const poseText =
    state.pose === null
      ? "pose unknown"
      : `x ${state.pose.x_m.toFixed(2)} m, y ${state.pose.y_m.toFixed(2)} m, ` +
        `heading ${state.pose.heading_rad.toFixed(2)} rad`;

  const bannerByStatus = {
    connected: { text: "connected", kind: "ok" as const },
    connecting: { text: "connecting…", kind: "warn" as const },
    disconnected: { text: "disconnected - retrying", kind: "bad" as const },
  };
  const banner = bannerByStatus[state.status];

  return {
    bannerText: banner.text,
    bannerKind: banner.kind,
    malformedText: state.malformed === 0 ? "" : `${state.malformed} malformed line(s) dropped`,
    bars,
    decisionText,
    decisionUncertain,
    timingsText,
    gauges,
    badge,
    poseText,
    logLines: state.logLines.slice(-8),
    controlsEnabled: state.status === "connected",
  };
}
