// Typed views of the gateway traffic the console actually touches. The
// codec validates shape and types against the schema; these interfaces
// just give the rest of the console names to work with.

import { WireMessage } from "./codec.js";

export interface ScenePoly {
  path_id: string;
  points: [number, number][];
}

export interface SceneVehicle {
  vehicle_id: number;
  appearance: string;
  length: number;
}

export interface SceneMsg {
  type: "scene";
  paths: ScenePoly[];
  vehicles: SceneVehicle[];
}

export interface TelemetryRow {
  vehicle_id: number;
  status: string;
  p: number;
  x: number;
  y: number;
  yaw: number;
  v: number;
  u_d: number;
  steer: number;
  gas: number;
  brake: number;
  handbrake: number;
}

export interface StateMsg {
  type: "state";
  clock: number;
  state: string; // idle | running | paused | complete | failed
  vehicles: TelemetryRow[];
}

export interface ErrorMsg {
  type: "error";
  message: string;
}

export type InboundMsg = SceneMsg | StateMsg | ErrorMsg;

export function isInbound(msg: WireMessage): msg is InboundMsg & WireMessage {
  return msg.type === "scene" || msg.type === "state" || msg.type === "error";
}

// Operator commands, built as plain wire messages.

export function startCommand(): WireMessage {
  return { type: "start" };
}

export function pauseCommand(): WireMessage {
  return { type: "pause" };
}

export function resetCommand(): WireMessage {
  return { type: "reset" };
}

export function replayCommand(): WireMessage {
  return { type: "replay" };
}

export function manualDrive(vehicleId: number, steer: number, throttle: number): WireMessage {
  return { type: "manual_drive", vehicle_id: vehicleId, steer, throttle };
}

export function releaseManual(vehicleId: number): WireMessage {
  return { type: "release_manual", vehicle_id: vehicleId };
}
