/** Browser wiring: connect the gateway stream to the panels in index.html. */

import { Connection, SocketLike } from "./net.js";
import { DriveController, KEY_BINDINGS } from "./controls.js";
import { renderModel } from "./render.js";
import { ViewState } from "./state.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function defaultUrl(): string {
  const host = location.hostname === "" ? "127.0.0.1" : location.hostname;
  return `ws://${host}:8765/stream`;
}

function draw(state: ViewState): void {
  const model = renderModel(state);

  const banner = el<HTMLDivElement>("banner");
  banner.textContent = model.bannerText;
  banner.dataset.kind = model.bannerKind;
  el<HTMLSpanElement>("malformed").textContent = model.malformedText;

  const barsBox = el<HTMLDivElement>("bars");
  barsBox.replaceChildren(
    ...model.bars.map((bar) => {
      const row = document.createElement("div");
      row.className = bar.highlighted ? "bar-row highlighted" : "bar-row";
      const name = document.createElement("span");
      name.className = "bar-label";
      name.textContent = bar.label;
      const track = document.createElement("div");
      track.className = "bar-track";
      const fill = document.createElement("div");
      fill.className = "bar-fill";
      fill.style.width = `${bar.widthPct}%`;
      track.appendChild(fill);
      const value = document.createElement("span");
      value.className = "bar-value";
      value.textContent = bar.value.toFixed(2);
      row.append(name, track, value);
      return row;
    }),
  );

  const decision = el<HTMLDivElement>("decision");
  decision.textContent = model.decisionText;
  decision.dataset.uncertain = String(model.decisionUncertain);
  el<HTMLDivElement>("timings").textContent = model.timingsText;

  el<HTMLSpanElement>("gauge-gas").textContent = model.gauges?.gasText ?? "-";
  el<HTMLSpanElement>("gauge-temp").textContent = model.gauges?.tempText ?? "-";
  el<HTMLSpanElement>("gauge-humidity").textContent = model.gauges?.humidityText ?? "-";
  el<HTMLSpanElement>("gauge-pressure").textContent = model.gauges?.pressureText ?? "-";

  const badge = el<HTMLDivElement>("badge");
  if (model.badge === null) {
    badge.textContent = "awaiting data";
    badge.dataset.grade = "";
  } else {
    const suffix = model.badge.derived ? " (from telemetry)" : "";
    badge.textContent = `${model.badge.grade}${suffix}`;
    badge.title = `air ${model.badge.air}, thermal ${model.badge.thermal}`;
    badge.dataset.grade = model.badge.grade;
  }

  el<HTMLDivElement>("pose").textContent = model.poseText;
  el<HTMLPreElement>("log").textContent = model.logLines.join("\n");

  for (const button of document.querySelectorAll<HTMLButtonElement>("button[data-direction]")) {
    button.disabled = !model.controlsEnabled;
  }
}

function start(): void {
  const state = new ViewState();
  const url = new URLSearchParams(location.search).get("gateway") ?? defaultUrl();

  const connection = new Connection(
    url,
    {
      onMessage: (msg) => {
        state.apply(msg);
        draw(state);
      },
      onStatus: (status) => {
        state.status = status;
        draw(state);
      },
      onMalformed: (count) => {
        state.malformed = count;
        draw(state);
      },
    },
    (wsUrl) => {
      const ws = new WebSocket(wsUrl);
      const like: SocketLike = {
        send: (data) => ws.send(data),
        close: () => ws.close(),
        onopen: null,
        onmessage: null,
        onclose: null,
        onerror: null,
      };
      ws.onopen = () => like.onopen?.();
      ws.onmessage = (ev) => like.onmessage?.({ data: ev.data });
      ws.onclose = () => like.onclose?.();
      ws.onerror = () => like.onerror?.();
      return like;
    },
  );

  const driver = new DriveController(connection);
  document.addEventListener("keydown", (ev) => {
    if (ev.repeat && ev.key !== " ") {
      // held keys keep streaming; the limiter caps the rate
    }
    if (ev.key.toLowerCase() in KEY_BINDINGS || ev.key === " ") {
      ev.preventDefault();
      driver.handleKey(ev.key);
    }
  });
  for (const button of document.querySelectorAll<HTMLButtonElement>("button[data-direction]")) {
    button.addEventListener("click", () => {
      driver.sendDrive(button.dataset.direction!, Number(button.dataset.magnitude ?? "1"));
    });
  }

  el<HTMLSpanElement>("gateway-url").textContent = url;
  draw(state);
  connection.connect();
}

start();
