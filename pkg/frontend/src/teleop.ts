// Keyboard driving. While a vehicle is engaged the loop sends a
// manual_drive command every INTERVAL_MS from the current key state and
// a single release_manual hands control back to the planner. The mapping:
// arrows or WASD steer and drive, space is full brake (the handbrake
// region of the throttle map), S/ArrowDown is a proportional brake.

import { WireMessage } from "./codec.js";
import { manualDrive, releaseManual } from "./messages.js";

export const INTERVAL_MS = 40; // 25 Hz

export interface TeleopKeys {
  left: boolean;
  right: boolean;
  forward: boolean;
  back: boolean;
  fullBrake: boolean;
}

export function emptyKeys(): TeleopKeys {
  return { left: false, right: false, forward: false, back: false, fullBrake: false };
}

/** Map key names (KeyboardEvent.key) onto axes; returns null for keys the
 * console does not use. */
export function keyAxis(key: string): keyof TeleopKeys | null {
  switch (key) {
    case "ArrowLeft":
    case "a":
    case "A":
      return "left";
    case "ArrowRight":
    case "d":
    case "D":
      return "right";
    case "ArrowUp":
    case "w":
    case "W":
      return "forward";
    case "ArrowDown":
    case "s":
    case "S":
      return "back";
    case " ":
      return "fullBrake";
    default:
      return null;
  }
}

/** Current axes as a (steer, throttle) pair in [-1, 1]. Positive steer
 * turns left. No keys means (0, 0): the vehicle coasts. */
export function commandFor(keys: TeleopKeys): { steer: number; throttle: number } {
  const steer = (keys.left ? 1 : 0) - (keys.right ? 1 : 0);
  let throttle: number;
  if (keys.fullBrake) {
    throttle = -1;
  } else {
    // -0.4 stays in the proportional braking band of the throttle map.
    throttle = (keys.forward ? 1 : 0) - (keys.back ? 0.4 : 0);
  }
  return { steer, throttle };
}

export class TeleopLoop {
  keys: TeleopKeys = emptyKeys();
  private vehicleId: number | null = null;
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(private send: (msg: WireMessage) => void) {}

  get engaged(): number | null {
    return this.vehicleId;
  }

  engage(vehicleId: number): void {
    if (this.vehicleId !== null && this.vehicleId !== vehicleId) {
      this.send(releaseManual(this.vehicleId));
    }
    this.vehicleId = vehicleId;
    this.keys = emptyKeys();
    this.tick();
    if (this.timer === null) {
      this.timer = setInterval(() => this.tick(), INTERVAL_MS);
    }
  }

  release(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
    if (this.vehicleId !== null) {
      this.send(releaseManual(this.vehicleId));
      this.vehicleId = null;
    }
    this.keys = emptyKeys();
  }

  /** One command from the current key state; the interval calls this. */
  tick(): void {
    if (this.vehicleId === null) {
      return;
    }
    const { steer, throttle } = commandFor(this.keys);
    this.send(manualDrive(this.vehicleId, steer, throttle));
  }

  keyDown(key: string): boolean {
    const axis = keyAxis(key);
    if (axis === null || this.vehicleId === null) {
      return false;
    }
    this.keys[axis] = true;
    return true;
  }

  keyUp(key: string): boolean {
    const axis = keyAxis(key);
    if (axis === null || this.vehicleId === null) {
      return false;
    }
    this.keys[axis] = false;
    return true;
  }
}
