// Console state: the latest scene and state frame, verbatim, plus short
// position trails. Nothing here extrapolates or recomputes physics; every
// number a view shows must exist in some frame exactly as received.

import { SceneMsg, StateMsg, InboundMsg } from "./messages.js";

export const TRAIL_SECONDS = 5.0;

export interface TrailPoint {
  t: number;
  x: number;
  y: number;
}

export type Connection = "connecting" | "open" | "closed";

export interface ConsoleState {
  connection: Connection;
  scene: SceneMsg | null;
  frame: StateMsg | null;
  trails: Map<number, TrailPoint[]>;
  lastError: string | null;
  framesSeen: number;
}

export type ConsoleEvent =
  | { kind: "connecting" }
  | { kind: "open" }
  | { kind: "close" }
  | { kind: "message"; message: InboundMsg };

export function initialState(): ConsoleState {
  return {
    connection: "connecting",
    scene: null,
    frame: null,
    trails: new Map(),
    lastError: null,
    framesSeen: 0,
  };
}

function updateTrails(state: ConsoleState, frame: StateMsg): void {
  const prev = state.frame;
  if (prev !== null && frame.clock < prev.clock) {
    // The run restarted (reset or replay loop); history before the jump
    // would draw as a teleport streak.
    state.trails.clear();
  }
  for (const row of frame.vehicles) {
    let trail = state.trails.get(row.vehicle_id);
    if (trail === undefined) {
      trail = [];
      state.trails.set(row.vehicle_id, trail);
    }
    const last = trail[trail.length - 1];
    if (last === undefined || frame.clock > last.t) {
      trail.push({ t: frame.clock, x: row.x, y: row.y });
    }
    const cutoff = frame.clock - TRAIL_SECONDS;
    while (trail.length > 0 && trail[0]!.t < cutoff) {
      trail.shift();
    }
  }
}

/** Fold one event into the state, in place. On disconnect the last frame
 * stays put: the view freezes rather than guessing. */
export function applyEvent(state: ConsoleState, ev: ConsoleEvent): void {
  switch (ev.kind) {
    case "connecting":
      state.connection = "connecting";
      return;
    case "open":
      state.connection = "open";
      // A reconnect rebuilds the whole picture from the next frames.
      state.scene = null;
      state.frame = null;
      state.trails.clear();
      state.lastError = null;
      return;
    case "close":
      state.connection = "closed";
      return;
    case "message":
      switch (ev.message.type) {
        case "scene":
          state.scene = ev.message;
          return;
        case "state":
          updateTrails(state, ev.message);
          state.frame = ev.message;
          state.framesSeen += 1;
          return;
        case "error":
          state.lastError = ev.message.message;
          return;
      }
  }
}
