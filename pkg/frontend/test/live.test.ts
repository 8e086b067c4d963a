// Live tests against a real experiment process. Each test spawns the
// simulation CLI with an ephemeral gateway port and drives it through the
// console's own pipeline: GatewayClient -> codec -> state. Skipped
// cleanly when the simulation package is not installed next door.

import { ChildProcess, spawn, spawnSync } from "node:child_process";
import { readFileSync, readdirSync, mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterEach, describe, expect, it } from "vitest";
import WebSocket from "ws";

import { GatewayClient, SocketLike } from "../src/client.js";
import { renderNumber } from "../src/codec.js";
import { manualDrive, pauseCommand, resetCommand, startCommand, StateMsg } from "../src/messages.js";
import { applyEvent, ConsoleState, initialState } from "../src/state.js";
import { TeleopLoop } from "../src/teleop.js";

// Desk-scale contract values of the bundled scenario: the planner ticks
// at 0.1 s and the car prefab's handbrake decelerates at 6/25 m/s^2.
const PLANNER_DT = 0.1;
const HANDBRAKE_DECEL = 0.24;

function findScenario(): string | null {
  const probe = spawnSync("python3", [
    "-c",
    "import cavsim, pathlib; print(pathlib.Path(cavsim.__file__).parent / 'data' / 'scenarios' / 'roundabout.scn')",
  ], { encoding: "utf-8", timeout: 20000 });
  if (probe.status !== 0) return null;
  const path = probe.stdout.trim();
  const check = spawnSync("cavsim", ["validate", path], { encoding: "utf-8", timeout: 20000 });
  return check.status === 0 ? path : null;
}

const SCENARIO = findScenario();
const live = SCENARIO === null ? describe.skip : describe;

interface Run {
  child: ChildProcess;
  port: number;
  logDir: string;
  exited: Promise<number | null>;
}

const cleanups: (() => void)[] = [];

afterEach(() => {
  while (cleanups.length > 0) cleanups.pop()!();
});

async function startRun(duration: number): Promise<Run> {
  const logDir = mkdtempSync(join(tmpdir(), "console-live-"));
  const child = spawn("cavsim", [
    "run", SCENARIO!, "--gateway-port", "0",
    "--log-dir", logDir, "--duration", String(duration),
  ], { stdio: ["ignore", "pipe", "pipe"] });
  cleanups.push(() => {
    child.kill("SIGKILL");
    rmSync(logDir, { recursive: true, force: true });
  });
  const exited = new Promise<number | null>((resolve) => {
    child.on("exit", (code) => resolve(code));
  });
  const port = await new Promise<number>((resolve, reject) => {
    let buf = "";
    const timer = setTimeout(() => reject(new Error(`no gateway banner in: ${buf}`)), 20000);
    child.stdout!.on("data", (chunk: Buffer) => {
      buf += chunk.toString();
      const m = /ws:\/\/127\.0\.0\.1:(\d+)/.exec(buf);
      if (m) {
        clearTimeout(timer);
        resolve(parseInt(m[1]!, 10));
      }
    });
    child.on("exit", () => reject(new Error(`process exited early: ${buf}`)));
  });
  return { child, port, logDir, exited };
}

interface Console {
  state: ConsoleState;
  frames: StateMsg[];
  client: GatewayClient;
  closed: Promise<void>;
}

function attachConsole(port: number): Console {
  const state = initialState();
  const frames: StateMsg[] = [];
  let markClosed: () => void;
  const closed = new Promise<void>((resolve) => { markClosed = resolve; });
  const client = new GatewayClient(
    `ws://127.0.0.1:${port}`,
    (ev) => {
      if (ev.kind === "badframe") {
        throw new Error(`undecodable frame: ${ev.error}`);
      }
      applyEvent(state, ev);
      if (ev.kind === "message" && ev.message.type === "state") {
        frames.push(ev.message);
      }
      if (ev.kind === "close") markClosed();
    },
    (url) => new WebSocket(url) as unknown as SocketLike,
  );
  cleanups.push(() => client.close());
  return { state, frames, client, closed };
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

async function waitFor<T>(
  probe: () => T | undefined,
  what: string,
  timeoutMs = 30000,
): Promise<T> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    const got = probe();
    if (got !== undefined) return got;
    await sleep(20);
  }
  throw new Error(`timed out waiting for ${what}`);
}

function readLog(logDir: string): Map<string, Map<number, Record<string, string>>> {
  const files = readdirSync(logDir).filter((f) => f.endsWith(".csv"));
  expect(files.length).toBe(1);
  const lines = readFileSync(join(logDir, files[0]!), "utf-8").trimEnd().split("\n");
  const header = lines[0]!.split(",");
  const byTick = new Map<string, Map<number, Record<string, string>>>();
  for (const line of lines.slice(1)) {
    const cells = line.split(",");
    const rec: Record<string, string> = {};
    header.forEach((name, i) => { rec[name] = cells[i]!; });
    const t = rec["t"]!;
    if (!byTick.has(t)) byTick.set(t, new Map());
    byTick.get(t)!.set(parseInt(rec["vehicle_id"]!, 10), rec);
  }
  return byTick;
}

live("console against a live experiment", () => {
  it("shows table and preview values byte-identical to the harness log for the same tick", async () => {
    const run = await startRun(6);
    const con = attachConsole(run.port);

    await waitFor(() => (con.state.scene !== null ? true : undefined), "scene frame");
    expect(con.state.scene!.vehicles.length).toBe(6);
    expect(con.state.scene!.paths.length).toBe(2);

    // The gateway stops when the run completes; collect until then.
    await con.closed;
    expect(await run.exited).toBe(0);
    expect(con.frames.length).toBeGreaterThan(40);

    const log = readLog(run.logDir);
    let checked = 0;
    for (const frame of con.frames) {
      if (frame.clock === 0) continue; // synthetic pre-run rows, log starts at the first tick
      const tick = log.get(renderNumber(frame.clock));
      expect(tick, `no log rows at t=${frame.clock}`).toBeDefined();
      for (const row of frame.vehicles) {
        const rec = tick!.get(row.vehicle_id);
        expect(rec, `vehicle ${row.vehicle_id} missing at t=${frame.clock}`).toBeDefined();
        // Same canonical renderer on both sides: the comparison is
        // string equality, i.e. bit-for-bit on the doubles.
        for (const field of ["p", "x", "y", "yaw", "v", "u_d", "steer", "gas", "brake"] as const) {
          expect(renderNumber(row[field]), `${field} of ${row.vehicle_id} at t=${frame.clock}`)
            .toBe(rec![field]);
        }
        expect(String(row.handbrake)).toBe(rec!["handbrake"]);
        checked += 1;
      }
    }
    expect(checked).toBeGreaterThan(200);

    // The table vocabulary never strays from the declared statuses.
    for (const frame of con.frames) {
      for (const row of frame.vehicles) {
        expect(["queued", "driving", "yielding", "complete"]).toContain(row.status);
      }
    }
  }, 60000);

  it("stops a manually braked vehicle inside the handbrake envelope and resumes on release", async () => {
    const run = await startRun(14);
    const con = attachConsole(run.port);
    const teleop = new TeleopLoop((msg) => con.client.send(msg));
    cleanups.push(() => teleop.release());

    const rowOf = (frame: StateMsg, id: number) =>
      frame.vehicles.find((r) => r.vehicle_id === id);

    await waitFor(
      () => (con.state.frame !== null && con.state.frame.clock >= 1.0 ? true : undefined),
      "run to reach t=1",
    );

    teleop.engage(1);
    teleop.keys.fullBrake = true;

    const engaged = await waitFor(() => {
      const f = con.state.frame;
      const row = f === null ? undefined : rowOf(f, 1);
      return row !== undefined && row.handbrake === 1 ? { t: f!.clock, v: row.v } : undefined;
    }, "handbrake to engage");

    // Worst case stop time from the engagement speed, plus one planner
    // tick of command latency and one broadcast period of observation lag.
    const envelope = engaged.v / HANDBRAKE_DECEL + PLANNER_DT + 0.1;
    const stopped = await waitFor(() => {
      const f = con.state.frame;
      const row = f === null ? undefined : rowOf(f, 1);
      return row !== undefined && row.v < 0.01 ? f!.clock : undefined;
    }, "vehicle 1 to stop", 15000);
    expect(stopped - engaged.t).toBeLessThanOrEqual(envelope);

    // While held, the brake stays on and the vehicle stays put.
    await sleep(500);
    const heldRow = rowOf(con.state.frame!, 1)!;
    expect(heldRow.handbrake).toBe(1);
    expect(heldRow.v).toBeLessThan(0.01);

    teleop.release();
    await waitFor(() => {
      const f = con.state.frame;
      const row = f === null ? undefined : rowOf(f, 1);
      return row !== undefined && row.handbrake === 0 && row.v > 0.05 ? true : undefined;
    }, "planner to resume driving vehicle 1", 15000);

    run.child.kill("SIGKILL");
    await run.exited;
  }, 60000);

  it("round-trips start, pause and reset and reports bad commands inline", async () => {
    const run = await startRun(30);
    const con = attachConsole(run.port);

    await waitFor(
      () => (con.state.frame !== null && con.state.frame.state === "running"
        && con.state.frame.clock > 0.3 ? true : undefined),
      "running frames",
    );

    con.client.send(pauseCommand());
    await waitFor(
      () => (con.state.frame!.state === "paused" ? true : undefined),
      "paused state",
    );
    const frozen = con.state.frame!.clock;
    await sleep(500);
    expect(con.state.frame!.state).toBe("paused");
    expect(con.state.frame!.clock).toBe(frozen);

    con.client.send(startCommand());
    await waitFor(
      () => (con.state.frame!.state === "running" && con.state.frame!.clock > frozen
        ? true : undefined),
      "resumed clock",
    );

    // A command the experiment must refuse comes back as an inline error
    // and the stream keeps flowing.
    con.client.send(manualDrive(99, 0, 0));
    await waitFor(
      () => (con.state.lastError !== null ? con.state.lastError : undefined),
      "error reply",
    );
    expect(con.state.lastError).toContain("99");
    expect(con.state.frame!.state).toBe("running");

    const before = con.state.frame!.clock;
    con.client.send(resetCommand());
    await waitFor(
      () => (con.state.frame !== null && con.state.frame.clock < before ? true : undefined),
      "clock to restart after reset",
    );

    run.child.kill("SIGKILL");
    await run.exited;
  }, 60000);
});
