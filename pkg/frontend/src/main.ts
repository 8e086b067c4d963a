// Console wiring: table on the left, controls on top, map in the middle,
// preview panels on the right. All numbers shown are the canonical wire
// rendering of values taken verbatim from the latest state frame.

import { GatewayClient, ClientEvent } from "./client.js";
import { renderNumber, WireMessage } from "./codec.js";
import {
  pauseCommand,
  replayCommand,
  resetCommand,
  startCommand,
  TelemetryRow,
} from "./messages.js";
import { drawMap, drawPreview, STATUS_COLORS } from "./render.js";
import { applyEvent, ConsoleState, initialState } from "./state.js";
import { TeleopLoop } from "./teleop.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (el === null) throw new Error(`missing element #${id}`);
  return el as T;
}

const urlInput = byId<HTMLInputElement>("gateway-url");
const connectBtn = byId<HTMLButtonElement>("connect");
const stateChip = byId<HTMLSpanElement>("experiment-state");
const clockCell = byId<HTMLSpanElement>("clock");
const errorLine = byId<HTMLDivElement>("error-line");
const banner = byId<HTMLDivElement>("disconnect-banner");
const tableBody = byId<HTMLTableSectionElement>("vehicle-rows");
const mapCanvas = byId<HTMLCanvasElement>("map");
const previewColumn = byId<HTMLDivElement>("previews");

const mapCtx = mapCanvas.getContext("2d");
if (mapCtx === null) throw new Error("2D canvas context unavailable");

let state: ConsoleState = initialState();
let client: GatewayClient | null = null;
let generation = 0; // ignores events from sockets we already abandoned
let retryTimer: ReturnType<typeof setTimeout> | null = null;

const teleop = new TeleopLoop((msg: WireMessage) => {
  try {
    client?.send(msg);
  } catch {
    // Socket mid-handshake or already closed; the banner tells the story.
  }
});

// -- connection --------------------------------------------------------

function connect(url: string): void {
  generation += 1;
  const mine = generation;
  teleop.release();
  client?.close();
  state = initialState();
  tableBody.replaceChildren();
  sceneShown = null;
  client = new GatewayClient(url, (ev) => {
    if (mine === generation) onEvent(ev);
  });
}

function onEvent(ev: ClientEvent): void {
  if (ev.kind === "badframe") {
    state.lastError = ev.error;
    return;
  }
  applyEvent(state, ev);
  if (ev.kind === "close") {
    teleop.release();
    if (retryTimer === null) {
      retryTimer = setTimeout(() => {
        retryTimer = null;
        if (state.connection === "closed") connect(urlInput.value);
      }, 2000);
    }
  }
}

connectBtn.onclick = () => connect(urlInput.value);

byId<HTMLButtonElement>("cmd-start").onclick = () => client?.send(startCommand());
byId<HTMLButtonElement>("cmd-pause").onclick = () => client?.send(pauseCommand());
byId<HTMLButtonElement>("cmd-reset").onclick = () => client?.send(resetCommand());
byId<HTMLButtonElement>("cmd-replay").onclick = () => client?.send(replayCommand());

// -- vehicle table -----------------------------------------------------

interface TableRow {
  status: HTMLTableCellElement;
  x: HTMLTableCellElement;
  y: HTMLTableCellElement;
  v: HTMLTableCellElement;
}

const tableRows = new Map<number, TableRow>();
let sceneShown: ConsoleState["scene"] = null;

function rebuildTable(): void {
  tableBody.replaceChildren();
  tableRows.clear();
  if (state.scene === null) return;
  for (const sv of state.scene.vehicles) {
    const tr = document.createElement("tr");
    const id = document.createElement("td");
    id.textContent = String(sv.vehicle_id);
    const status = document.createElement("td");
    const x = document.createElement("td");
    const y = document.createElement("td");
    const v = document.createElement("td");
    for (const cell of [x, y, v]) cell.className = "num";
    const open = document.createElement("td");
    const btn = document.createElement("button");
    btn.textContent = "preview";
    btn.onclick = () => openPreview(sv.vehicle_id);
    open.appendChild(btn);
    tr.append(id, status, x, y, v, open);
    tableBody.appendChild(tr);
    tableRows.set(sv.vehicle_id, { status, x, y, v });
  }
}

function updateTable(): void {
  if (state.frame === null) return;
  for (const row of state.frame.vehicles) {
    const cells = tableRows.get(row.vehicle_id);
    if (cells === undefined) continue;
    cells.status.textContent = row.status;
    cells.status.style.color = STATUS_COLORS[row.status] ?? "";
    cells.x.textContent = renderNumber(row.x);
    cells.y.textContent = renderNumber(row.y);
    cells.v.textContent = renderNumber(row.v);
  }
}

// -- preview panels ----------------------------------------------------

const READOUT_FIELDS: (keyof TelemetryRow & string)[] = [
  "status", "p", "x", "y", "yaw", "v", "u_d", "steer", "gas", "brake", "handbrake",
];

interface Panel {
  root: HTMLDivElement;
  canvas: HTMLCanvasElement;
  cells: Map<string, HTMLSpanElement>;
  driveBtn: HTMLButtonElement;
}

const panels = new Map<number, Panel>();

function openPreview(vehicleId: number): void {
  if (panels.has(vehicleId)) return;
  const root = document.createElement("div");
  root.className = "panel";
  const head = document.createElement("div");
  head.className = "panel-head";
  const title = document.createElement("span");
  title.textContent = `vehicle ${vehicleId}`;
  const driveBtn = document.createElement("button");
  driveBtn.textContent = "drive";
  driveBtn.onclick = () => {
    if (teleop.engaged === vehicleId) {
      teleop.release();
    } else {
      teleop.engage(vehicleId);
    }
  };
  const closeBtn = document.createElement("button");
  closeBtn.textContent = "close";
  closeBtn.onclick = () => {
    if (teleop.engaged === vehicleId) teleop.release();
    panels.delete(vehicleId);
    root.remove();
  };
  head.append(title, driveBtn, closeBtn);
  const canvas = document.createElement("canvas");
  canvas.width = 220;
  canvas.height = 220;
  const list = document.createElement("dl");
  const cells = new Map<string, HTMLSpanElement>();
  for (const field of READOUT_FIELDS) {
    const dt = document.createElement("dt");
    dt.textContent = field;
    const dd = document.createElement("dd");
    const span = document.createElement("span");
    dd.appendChild(span);
    cells.set(field, span);
    list.append(dt, dd);
  }
  root.append(head, canvas, list);
  previewColumn.appendChild(root);
  panels.set(vehicleId, { root, canvas, cells, driveBtn });
}

function updatePanels(): void {
  for (const [vehicleId, panel] of panels) {
    const row = state.frame?.vehicles.find((r) => r.vehicle_id === vehicleId);
    if (row !== undefined) {
      for (const field of READOUT_FIELDS) {
        const value = row[field];
        panel.cells.get(field)!.textContent =
          typeof value === "number" ? renderNumber(value) : String(value);
      }
    }
    const ctx = panel.canvas.getContext("2d");
    if (ctx !== null) {
      const zoom = state.scene === null ? 1.6
        : Math.max(...state.scene.vehicles.map((sv) => sv.length)) * 9;
      drawPreview(ctx, state, vehicleId, panel.canvas.width, panel.canvas.height,
        teleop.engaged === vehicleId, zoom);
    }
    panel.driveBtn.textContent = teleop.engaged === vehicleId ? "release" : "drive";
    panel.driveBtn.classList.toggle("engaged", teleop.engaged === vehicleId);
  }
}

// -- keyboard ----------------------------------------------------------

window.addEventListener("keydown", (ev) => {
  if (ev.key === "Escape") {
    teleop.release();
    return;
  }
  if (teleop.keyDown(ev.key)) ev.preventDefault();
});
window.addEventListener("keyup", (ev) => {
  if (teleop.keyUp(ev.key)) ev.preventDefault();
});

// -- frame loop --------------------------------------------------------

function resizeMap(): void {
  const rect = mapCanvas.getBoundingClientRect();
  if (mapCanvas.width !== Math.round(rect.width) || mapCanvas.height !== Math.round(rect.height)) {
    mapCanvas.width = Math.round(rect.width);
    mapCanvas.height = Math.round(rect.height);
  }
}

function frame(): void {
  if (state.scene !== sceneShown) {
    sceneShown = state.scene;
    rebuildTable();
  }
  resizeMap();
  drawMap(mapCtx!, state, mapCanvas.width, mapCanvas.height, teleop.engaged);
  updateTable();
  updatePanels();
  stateChip.textContent = state.frame?.state ?? "no frames";
  stateChip.dataset["state"] = state.frame?.state ?? "";
  clockCell.textContent = state.frame === null ? "-" : renderNumber(state.frame.clock) + " s";
  errorLine.textContent = state.lastError ?? "";
  banner.style.display = state.connection === "open" ? "none" : "block";
  banner.textContent =
    state.connection === "connecting" ? "connecting to gateway..." :
    state.connection === "closed" ? "gateway disconnected; view frozen on last frame" : "";
  requestAnimationFrame(frame);
}

connect(urlInput.value);
requestAnimationFrame(frame);
