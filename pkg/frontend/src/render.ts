// Canvas drawing for the top-down map and the per-vehicle preview. Pure
// painting: everything rendered comes straight out of ConsoleState.

import { ConsoleState } from "./state.js";
import { TelemetryRow } from "./messages.js";
import { Viewport, fitPoints, worldToScreen, vehicleOutline } from "./view.js";

export const STATUS_COLORS: Record<string, string> = {
  queued: "#d9a440",
  driving: "#4f9cf0",
  yielding: "#e06666",
  complete: "#5cb876",
};

const PATH_COLOR = "#3c4250";
const TRAIL_COLOR = "rgba(120, 170, 240, 0.35)";
const LABEL_COLOR = "#c8cdd6";
const MANUAL_RING = "#f2e05c";

export function sceneViewport(state: ConsoleState, width: number, height: number): Viewport {
  const pts: [number, number][] = [];
  if (state.scene !== null) {
    for (const poly of state.scene.paths) {
      pts.push(...poly.points);
    }
  }
  return fitPoints(pts, width, height);
}

function drawPaths(ctx: CanvasRenderingContext2D, vp: Viewport, state: ConsoleState): void {
  if (state.scene === null) return;
  ctx.lineWidth = 2;
  ctx.strokeStyle = PATH_COLOR;
  for (const poly of state.scene.paths) {
    ctx.beginPath();
    poly.points.forEach(([x, y], i) => {
      const [sx, sy] = worldToScreen(vp, x, y);
      if (i === 0) ctx.moveTo(sx, sy);
      else ctx.lineTo(sx, sy);
    });
    ctx.stroke();
  }
}

function drawTrail(
  ctx: CanvasRenderingContext2D,
  vp: Viewport,
  state: ConsoleState,
  vehicleId: number,
): void {
  const trail = state.trails.get(vehicleId);
  if (trail === undefined || trail.length < 2) return;
  ctx.lineWidth = 3;
  ctx.strokeStyle = TRAIL_COLOR;
  ctx.beginPath();
  trail.forEach((pt, i) => {
    const [sx, sy] = worldToScreen(vp, pt.x, pt.y);
    if (i === 0) ctx.moveTo(sx, sy);
    else ctx.lineTo(sx, sy);
  });
  ctx.stroke();
}

function bodyLength(state: ConsoleState, vehicleId: number): number {
  const v = state.scene?.vehicles.find((sv) => sv.vehicle_id === vehicleId);
  return v === undefined ? 0.18 : v.length;
}

function drawVehicle(
  ctx: CanvasRenderingContext2D,
  vp: Viewport,
  state: ConsoleState,
  row: TelemetryRow,
  manual: boolean,
  withLabel: boolean,
): void {
  const corners = vehicleOutline(row.x, row.y, row.yaw, bodyLength(state, row.vehicle_id));
  ctx.beginPath();
  corners.forEach(([x, y], i) => {
    const [sx, sy] = worldToScreen(vp, x, y);
    if (i === 0) ctx.moveTo(sx, sy);
    else ctx.lineTo(sx, sy);
  });
  ctx.closePath();
  ctx.fillStyle = STATUS_COLORS[row.status] ?? "#888";
  ctx.fill();
  if (manual) {
    ctx.lineWidth = 2;
    ctx.strokeStyle = MANUAL_RING;
    ctx.stroke();
  }
  // Nose tick so heading reads at a glance.
  const len = bodyLength(state, row.vehicle_id);
  const [nx, ny] = worldToScreen(
    vp,
    row.x + Math.cos(row.yaw) * len * 0.6,
    row.y + Math.sin(row.yaw) * len * 0.6,
  );
  const [cx0, cy0] = worldToScreen(vp, row.x, row.y);
  ctx.beginPath();
  ctx.moveTo(cx0, cy0);
  ctx.lineTo(nx, ny);
  ctx.lineWidth = 1;
  ctx.strokeStyle = LABEL_COLOR;
  ctx.stroke();
  if (withLabel) {
    ctx.fillStyle = LABEL_COLOR;
    ctx.font = "12px system-ui, sans-serif";
    ctx.fillText(String(row.vehicle_id), cx0 + 8, cy0 - 8);
  }
}

export function drawMap(
  ctx: CanvasRenderingContext2D,
  state: ConsoleState,
  width: number,
  height: number,
  manualVehicle: number | null,
): void {
  ctx.clearRect(0, 0, width, height);
  const vp = sceneViewport(state, width, height);
  drawPaths(ctx, vp, state);
  if (state.frame === null) return;
  for (const row of state.frame.vehicles) {
    drawTrail(ctx, vp, state, row.vehicle_id);
  }
  for (const row of state.frame.vehicles) {
    drawVehicle(ctx, vp, state, row, row.vehicle_id === manualVehicle, true);
  }
}

/** Zoomed view centered on one vehicle, trail included: the console's
 * stand-in for a chase camera. */
export function drawPreview(
  ctx: CanvasRenderingContext2D,
  state: ConsoleState,
  vehicleId: number,
  width: number,
  height: number,
  manual: boolean,
  metersAcross = 1.6,
): void {
  ctx.clearRect(0, 0, width, height);
  const row = state.frame?.vehicles.find((r) => r.vehicle_id === vehicleId);
  if (row === undefined) return;
  const vp: Viewport = {
    scale: width / metersAcross,
    cx: row.x,
    cy: row.y,
    width,
    height,
  };
  drawPaths(ctx, vp, state);
  drawTrail(ctx, vp, state, vehicleId);
  drawVehicle(ctx, vp, state, row, manual, false);
}
