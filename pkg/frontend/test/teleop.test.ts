import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { decodeMessage, encodeMessage, WireMessage } from "../src/codec.js";
import { commandFor, emptyKeys, INTERVAL_MS, keyAxis, TeleopLoop } from "../src/teleop.js";

describe("key mapping", () => {
  it("maps arrows, wasd and space onto the five axes", () => {
    expect(keyAxis("ArrowLeft")).toBe("left");
    expect(keyAxis("a")).toBe("left");
    expect(keyAxis("D")).toBe("right");
    expect(keyAxis("ArrowUp")).toBe("forward");
    expect(keyAxis("s")).toBe("back");
    expect(keyAxis(" ")).toBe("fullBrake");
    expect(keyAxis("q")).toBeNull();
  });

  it("sends (0, 0) with no keys held so the vehicle coasts", () => {
    expect(commandFor(emptyKeys())).toEqual({ steer: 0, throttle: 0 });
  });

  it("full brake key commands throttle -1, the handbrake region", () => {
    const keys = { ...emptyKeys(), fullBrake: true, forward: true };
    expect(commandFor(keys).throttle).toBe(-1);
  });

  it("keeps the gentle brake inside the proportional band", () => {
    const keys = { ...emptyKeys(), back: true };
    const throttle = commandFor(keys).throttle;
    expect(throttle).toBeLessThan(0);
    expect(throttle).toBeGreaterThan(-0.5);
  });

  it("steers left positive, right negative, both cancel", () => {
    expect(commandFor({ ...emptyKeys(), left: true }).steer).toBe(1);
    expect(commandFor({ ...emptyKeys(), right: true }).steer).toBe(-1);
    expect(commandFor({ ...emptyKeys(), left: true, right: true }).steer).toBe(0);
  });
});

describe("teleop loop", () => {
  let sent: WireMessage[];
  let loop: TeleopLoop;

  beforeEach(() => {
    vi.useFakeTimers();
    sent = [];
    loop = new TeleopLoop((msg) => sent.push(msg));
  });

  afterEach(() => {
    vi.useRealTimers();
  });

  it("repeats manual_drive at 20 Hz or better while engaged", () => {
    expect(INTERVAL_MS).toBeLessThanOrEqual(50);
    loop.engage(3);
    sent.length = 0;
    vi.advanceTimersByTime(1000);
    expect(sent.length).toBeGreaterThanOrEqual(20);
    for (const msg of sent) {
      expect(msg.type).toBe("manual_drive");
      expect(msg["vehicle_id"]).toBe(3);
    }
  });

  it("folds the live key state into each command", () => {
    loop.engage(1);
    loop.keyDown("ArrowUp");
    loop.tick();
    expect(sent[sent.length - 1]).toEqual(
      { type: "manual_drive", vehicle_id: 1, steer: 0, throttle: 1 });
    loop.keyDown(" ");
    loop.tick();
    expect(sent[sent.length - 1]!["throttle"]).toBe(-1);
    loop.keyUp(" ");
    loop.keyUp("ArrowUp");
    loop.tick();
    expect(sent[sent.length - 1]!["throttle"]).toBe(0);
  });

  it("sends release_manual exactly once and stops the stream", () => {
    loop.engage(2);
    vi.advanceTimersByTime(200);
    sent.length = 0;
    loop.release();
    expect(sent).toEqual([{ type: "release_manual", vehicle_id: 2 }]);
    vi.advanceTimersByTime(500);
    expect(sent.length).toBe(1);
    expect(loop.engaged).toBeNull();
  });

  it("hands over between vehicles with a release in between", () => {
    loop.engage(1);
    sent.length = 0;
    loop.engage(2);
    expect(sent[0]).toEqual({ type: "release_manual", vehicle_id: 1 });
    expect(sent[1]!["vehicle_id"]).toBe(2);
  });

  it("ignores keys while disengaged", () => {
    expect(loop.keyDown("ArrowUp")).toBe(false);
    loop.tick();
    expect(sent.length).toBe(0);
  });

  it("produces commands the wire codec accepts", () => {
    loop.engage(4);
    loop.keyDown("a");
    loop.keyDown("s");
    loop.tick();
    for (const msg of sent) {
      const text = encodeMessage(msg);
      expect(decodeMessage(text)).toEqual(msg);
    }
  });
});
