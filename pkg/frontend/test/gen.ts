// Seeded random wire messages, driven by the schema so new types are
// covered the day they appear in messages.json.

import { WireMessage, WireValue } from "../src/codec.js";
import { WIRE_SCHEMA } from "../src/schema.js";

/** mulberry32: small deterministic PRNG, good enough for test data. */
export function rng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function randomFloat(r: () => number): number {
  const pick = r();
  if (pick < 0.15) {
    return [0, 1, -1, 0.5, -0.5, 0.1, 1 / 3, 1e-5, -2.5e-7, 1e16, 9007199254740993][
      Math.floor(r() * 11)
    ]!;
  }
  const magnitude = 10 ** Math.floor(r() * 24 - 12);
  const v = (r() * 2 - 1) * magnitude;
  return Number.isFinite(v) ? v : 0;
}

function randomInt(r: () => number): number {
  return Math.floor(r() * 2000) - 1000;
}

function randomString(r: () => number): string {
  const alphabet = "abz 09_\"\\\n\té中";
  const chars = [...alphabet];
  let out = "";
  const n = Math.floor(r() * 12);
  for (let i = 0; i < n; i++) {
    out += chars[Math.floor(r() * chars.length)];
  }
  return out;
}

function randomValue(kind: string, r: () => number): WireValue {
  switch (kind) {
    case "int":
      return randomInt(r);
    case "float":
      return randomFloat(r);
    case "str":
      return randomString(r);
    case "float3":
      return [randomFloat(r), randomFloat(r), randomFloat(r)];
    case "float4":
      return [randomFloat(r), randomFloat(r), randomFloat(r), randomFloat(r)];
    case "num_map": {
      const out: Record<string, WireValue> = {};
      const n = Math.floor(r() * 4);
      for (let i = 0; i < n; i++) {
        out[`k${randomString(r)}${i}`] = randomFloat(r);
      }
      return out;
    }
    case "prefab_map": {
      const out: Record<string, WireValue> = {};
      const n = Math.floor(r() * 3);
      for (let i = 0; i < n; i++) {
        out[`p${i}`] = randomValue("num_map", r);
      }
      return out;
    }
    case "id_stamp_list": {
      const n = Math.floor(r() * 4);
      return Array.from({ length: n }, () => [randomInt(r), randomFloat(r)]);
    }
    case "point_list": {
      const n = Math.floor(r() * 5);
      return Array.from({ length: n }, () => [randomFloat(r), randomFloat(r)]);
    }
    case "segment_list": {
      const n = Math.floor(r() * 3);
      return Array.from({ length: n }, () =>
        r() < 0.5
          ? { kind: "line", x0: randomFloat(r), y0: randomFloat(r), x1: randomFloat(r), y1: randomFloat(r) }
          : { kind: "arc", cx: randomFloat(r), cy: randomFloat(r), radius: Math.abs(randomFloat(r)) + 0.1, start_angle: randomFloat(r), sweep: randomFloat(r) },
      );
    }
    case "path_list":
    case "poly_list":
    case "scene_vehicle_list":
    case "row_list": {
      const subtype = { path_list: "path", poly_list: "poly", scene_vehicle_list: "scene_vehicle", row_list: "row" }[kind]!;
      const spec = WIRE_SCHEMA.subtypes[subtype]!;
      const n = Math.floor(r() * 3);
      return Array.from({ length: n }, () => {
        const obj: Record<string, WireValue> = {};
        for (const [name, fieldKind] of spec) {
          obj[name] = name === "kind" ? "line" : randomValue(fieldKind, r);
        }
        return obj;
      });
    }
    default:
      throw new Error(`no generator for kind ${kind}`);
  }
}

export function randomMessage(tag: string, r: () => number): WireMessage {
  const spec = WIRE_SCHEMA.types[tag];
  if (spec === undefined) throw new Error(`unknown tag ${tag}`);
  const msg: WireMessage = { type: tag };
  for (const [name, kind] of spec) {
    msg[name] = randomValue(kind, r);
  }
  return msg;
}
