// Wire codec for gateway traffic, schema-driven and byte-compatible with
// the simulation side. One message per text frame: a JSON object with the
// "type" tag first, the remaining fields in schema order, and a trailing
// linefeed. Numbers render in shortest round-trip decimal with the exact
// formatting the other side uses, so re-encoding a decoded message always
// reproduces the original bytes.

import { WIRE_SCHEMA } from "./schema.js";

export class WireError extends Error {}

export type WireValue =
  | number
  | string
  | WireValue[]
  | { [key: string]: WireValue };

export type WireMessage = { type: string } & Record<string, WireValue>;

// --------------------------------------------------------------------------
// canonical rendering

/** Shortest round-trip decimal, formatted like the simulation side:
 * integral values below 1e16 as bare integers, small magnitudes switch to
 * exponent notation below 1e-4, exponents are signed and zero-padded to
 * two digits. */
export function renderNumber(v: number): string {
  if (typeof v !== "number" || !Number.isFinite(v)) {
    throw new WireError(`non-finite number ${v} cannot be encoded`);
  }
  if (Number.isInteger(v) && Math.abs(v) < 1e16) {
    // BigInt of an integral double is exact even above 2^53.
    return BigInt(v).toString();
  }
  const exp = v.toExponential(); // shortest digits, e.g. "-1.25e-7"
  const m = /^(-?)(\d)(?:\.(\d+))?e([+-]\d+)$/.exec(exp);
  if (!m) {
    throw new WireError(`unexpected exponential form ${exp}`);
  }
  const sign = m[1]!;
  const digits = m[2]! + (m[3] ?? "");
  const e10 = parseInt(m[4]!, 10);
  if (e10 < -4 || e10 >= 16) {
    const mantissa = digits.length > 1 ? digits[0] + "." + digits.slice(1) : digits;
    const expSign = e10 < 0 ? "-" : "+";
    const expDigits = String(Math.abs(e10)).padStart(2, "0");
    return sign + mantissa + "e" + expSign + expDigits;
  }
  if (e10 < 0) {
    return sign + "0." + "0".repeat(-e10 - 1) + digits;
  }
  // Non-integral, so there is always at least one digit past the point.
  return sign + digits.slice(0, e10 + 1) + "." + digits.slice(e10 + 1);
}

export function renderString(s: string): string {
  // JSON.stringify escapes the same set as the other side: quote,
  // backslash, and controls below U+0020; everything else stays raw.
  return JSON.stringify(s);
}

function asNumber(v: WireValue, what: string): number {
  if (typeof v !== "number") {
    throw new WireError(`${what}: expected number, got ${JSON.stringify(v)}`);
  }
  return v;
}

function asInt(v: WireValue, what: string): number {
  if (typeof v !== "number" || !Number.isInteger(v)) {
    throw new WireError(`${what}: expected integer, got ${JSON.stringify(v)}`);
  }
  return v;
}

function isRecord(v: WireValue): v is { [key: string]: WireValue } {
  return typeof v === "object" && v !== null && !Array.isArray(v);
}

/** Sort keys by code point, the way the other side's sorted() compares. */
function codePointCompare(a: string, b: string): number {
  const ap = [...a];
  const bp = [...b];
  const n = Math.min(ap.length, bp.length);
  for (let i = 0; i < n; i++) {
    const d = ap[i]!.codePointAt(0)! - bp[i]!.codePointAt(0)!;
    if (d !== 0) return d;
  }
  return ap.length - bp.length;
}

// --------------------------------------------------------------------------
// encoding

const SEGMENT_SPECS: Record<string, readonly (readonly [string, string])[]> = {
  line: WIRE_SCHEMA.subtypes["segment_line"]!,
  arc: WIRE_SCHEMA.subtypes["segment_arc"]!,
};

function renderFields(
  spec: readonly (readonly [string, string])[],
  values: { [key: string]: WireValue },
  what: string,
): string {
  for (const key of Object.keys(values)) {
    if (!spec.some(([name]) => name === key)) {
      throw new WireError(`${what}: unexpected field ${key}`);
    }
  }
  const parts: string[] = [];
  for (const [name, kind] of spec) {
    const v = values[name];
    if (v === undefined) {
      throw new WireError(`${what}: missing field ${name}`);
    }
    parts.push(renderString(name) + ":" + renderValue(kind, v, `${what}.${name}`));
  }
  return "{" + parts.join(",") + "}";
}

function renderSegment(v: WireValue, what: string): string {
  if (!isRecord(v) || typeof v["kind"] !== "string") {
    throw new WireError(`${what}: segment must be an object with a kind`);
  }
  const spec = SEGMENT_SPECS[v["kind"]];
  if (!spec) {
    throw new WireError(`${what}: unknown segment kind ${v["kind"]}`);
  }
  return renderFields(spec, v, what);
}

function renderObject(subtype: string, v: WireValue, what: string): string {
  const spec = WIRE_SCHEMA.subtypes[subtype];
  if (!spec) {
    throw new WireError(`unknown subtype ${subtype}`);
  }
  if (!isRecord(v)) {
    throw new WireError(`${what}: expected object for ${subtype}`);
  }
  return renderFields(spec, v, what);
}

function renderPairList(
  v: WireValue,
  what: string,
  first: (x: WireValue, w: string) => string,
  second: (x: WireValue, w: string) => string,
): string {
  if (!Array.isArray(v)) {
    throw new WireError(`${what}: expected array of pairs`);
  }
  const parts = v.map((pair, i) => {
    if (!Array.isArray(pair) || pair.length !== 2) {
      throw new WireError(`${what}[${i}]: expected a two-element pair`);
    }
    return "[" + first(pair[0]!, `${what}[${i}][0]`) + "," + second(pair[1]!, `${what}[${i}][1]`) + "]";
  });
  return "[" + parts.join(",") + "]";
}

function renderValue(kind: string, v: WireValue, what: string): string {
  switch (kind) {
    case "int":
      return String(asInt(v, what));
    case "float":
      return renderNumber(asNumber(v, what));
    case "str":
      if (typeof v !== "string") {
        throw new WireError(`${what}: expected string`);
      }
      return renderString(v);
    case "float3":
    case "float4": {
      const n = kind === "float3" ? 3 : 4;
      if (!Array.isArray(v) || v.length !== n) {
        throw new WireError(`${what}: expected array of ${n} numbers`);
      }
      return "[" + v.map((x, i) => renderNumber(asNumber(x, `${what}[${i}]`))).join(",") + "]";
    }
    case "num_map": {
      if (!isRecord(v)) {
        throw new WireError(`${what}: expected object of numbers`);
      }
      const keys = Object.keys(v).sort(codePointCompare);
      return "{" + keys.map(
        (k) => renderString(k) + ":" + renderNumber(asNumber(v[k]!, `${what}.${k}`)),
      ).join(",") + "}";
    }
    case "prefab_map": {
      if (!isRecord(v)) {
        throw new WireError(`${what}: expected object of parameter blocks`);
      }
      const keys = Object.keys(v).sort(codePointCompare);
      return "{" + keys.map(
        (k) => renderString(k) + ":" + renderValue("num_map", v[k]!, `${what}.${k}`),
      ).join(",") + "}";
    }
    case "id_stamp_list":
      return renderPairList(v, what,
        (x, w) => String(asInt(x, w)),
        (x, w) => renderNumber(asNumber(x, w)));
    case "point_list":
      return renderPairList(v, what,
        (x, w) => renderNumber(asNumber(x, w)),
        (x, w) => renderNumber(asNumber(x, w)));
    case "segment_list":
      if (!Array.isArray(v)) {
        throw new WireError(`${what}: expected array of segments`);
      }
      return "[" + v.map((s, i) => renderSegment(s, `${what}[${i}]`)).join(",") + "]";
    case "path_list":
    case "poly_list":
    case "scene_vehicle_list":
    case "row_list": {
      const subtype = { path_list: "path", poly_list: "poly", scene_vehicle_list: "scene_vehicle", row_list: "row" }[kind]!;
      if (!Array.isArray(v)) {
        throw new WireError(`${what}: expected array of ${subtype}s`);
      }
      return "[" + v.map((x, i) => renderObject(subtype, x, `${what}[${i}]`)).join(",") + "]";
    }
    default:
      throw new WireError(`unknown field kind ${kind}`);
  }
}

/** Canonical text for one message, trailing linefeed included. The UTF-8
 * encoding of this string is exactly what the other side produces. */
export function encodeMessage(msg: WireMessage): string {
  const spec = WIRE_SCHEMA.types[msg.type];
  if (spec === undefined) {
    throw new WireError(`unknown type tag ${JSON.stringify(msg.type)}`);
  }
  for (const key of Object.keys(msg)) {
    if (key !== "type" && !spec.some(([name]) => name === key)) {
      throw new WireError(`${msg.type}: unexpected field ${key}`);
    }
  }
  const parts = ['"type":' + renderString(msg.type)];
  for (const [name, kind] of spec) {
    const v = msg[name];
    if (v === undefined) {
      throw new WireError(`${msg.type}: missing field ${name}`);
    }
    parts.push(renderString(name) + ":" + renderValue(kind, v, `${msg.type}.${name}`));
  }
  return "{" + parts.join(",") + "}\n";
}

// --------------------------------------------------------------------------
// decoding

function checkValue(kind: string, v: unknown, what: string): WireValue {
  switch (kind) {
    case "int":
      // JSON.parse collapses 1.0 to 1, so an integral float in an int slot
      // passes here; the simulation decoder is stricter, and canonical
      // traffic never writes ints with a decimal point.
      return asInt(v as WireValue, what);
    case "float":
      return asNumber(v as WireValue, what);
    case "str":
      if (typeof v !== "string") {
        throw new WireError(`${what}: expected string`);
      }
      return v;
    case "float3":
    case "float4": {
      const n = kind === "float3" ? 3 : 4;
      if (!Array.isArray(v) || v.length !== n) {
        throw new WireError(`${what}: expected array of ${n} numbers`);
      }
      return v.map((x, i) => asNumber(x, `${what}[${i}]`));
    }
    case "num_map": {
      if (!isRecord(v as WireValue)) {
        throw new WireError(`${what}: expected object of numbers`);
      }
      const rec = v as { [key: string]: WireValue };
      const out: { [key: string]: WireValue } = {};
      for (const k of Object.keys(rec)) {
        out[k] = asNumber(rec[k]!, `${what}.${k}`);
      }
      return out;
    }
    case "prefab_map": {
      if (!isRecord(v as WireValue)) {
        throw new WireError(`${what}: expected object of parameter blocks`);
      }
      const rec = v as { [key: string]: WireValue };
      const out: { [key: string]: WireValue } = {};
      for (const k of Object.keys(rec)) {
        out[k] = checkValue("num_map", rec[k], `${what}.${k}`);
      }
      return out;
    }
    case "id_stamp_list": {
      if (!Array.isArray(v)) {
        throw new WireError(`${what}: expected array of [id, t_stamp] pairs`);
      }
      return v.map((pair, i) => {
        if (!Array.isArray(pair) || pair.length !== 2) {
          throw new WireError(`${what}[${i}]: expected [id, t_stamp] pair`);
        }
        return [asInt(pair[0], `${what}[${i}][0]`), asNumber(pair[1], `${what}[${i}][1]`)];
      });
    }
    case "point_list": {
      if (!Array.isArray(v)) {
        throw new WireError(`${what}: expected array of points`);
      }
      return v.map((pt, i) => {
        if (!Array.isArray(pt) || pt.length !== 2) {
          throw new WireError(`${what}[${i}]: expected [x, y] point`);
        }
        return [asNumber(pt[0], `${what}[${i}][0]`), asNumber(pt[1], `${what}[${i}][1]`)];
      });
    }
    case "segment_list": {
      if (!Array.isArray(v)) {
        throw new WireError(`${what}: expected array of segments`);
      }
      return v.map((s, i) => checkSegment(s, `${what}[${i}]`));
    }
    case "path_list":
    case "poly_list":
    case "scene_vehicle_list":
    case "row_list": {
      const subtype = { path_list: "path", poly_list: "poly", scene_vehicle_list: "scene_vehicle", row_list: "row" }[kind]!;
      if (!Array.isArray(v)) {
        throw new WireError(`${what}: expected array of ${subtype}s`);
      }
      return v.map((x, i) => checkObject(subtype, x, `${what}[${i}]`));
    }
    default:
      throw new WireError(`unknown field kind ${kind}`);
  }
}

function checkFields(
  spec: readonly (readonly [string, string])[],
  v: { [key: string]: unknown },
  what: string,
): { [key: string]: WireValue } {
  const names = new Set(spec.map(([name]) => name));
  for (const key of Object.keys(v)) {
    if (!names.has(key)) {
      throw new WireError(`${what}: fields do not match (unexpected ${key})`);
    }
  }
  const out: { [key: string]: WireValue } = {};
  for (const [name, kind] of spec) {
    if (!(name in v)) {
      throw new WireError(`${what}: missing field ${name}`);
    }
    out[name] = checkValue(kind, v[name], `${what}.${name}`);
  }
  return out;
}

function checkSegment(v: unknown, what: string): WireValue {
  if (!isRecord(v as WireValue) || typeof (v as Record<string, unknown>)["kind"] !== "string") {
    throw new WireError(`${what}: segment must be an object with a kind`);
  }
  const kind = (v as Record<string, unknown>)["kind"] as string;
  const spec = SEGMENT_SPECS[kind];
  if (!spec) {
    throw new WireError(`${what}: unknown segment kind ${kind}`);
  }
  return checkFields(spec, v as Record<string, unknown>, what);
}

function checkObject(subtype: string, v: unknown, what: string): WireValue {
  if (!isRecord(v as WireValue)) {
    throw new WireError(`${what}: expected object for ${subtype}`);
  }
  return checkFields(WIRE_SCHEMA.subtypes[subtype]!, v as Record<string, unknown>, what);
}

/** One message back from its text. Throws WireError on anything that is
 * not a complete, well-typed message of a known type. */
export function decodeMessage(text: string): WireMessage {
  let obj: unknown;
  try {
    obj = JSON.parse(text);
  } catch (e) {
    throw new WireError(`not valid JSON: ${(e as Error).message}`);
  }
  if (typeof obj !== "object" || obj === null || Array.isArray(obj)) {
    throw new WireError("top level is not an object");
  }
  const rec = obj as Record<string, unknown>;
  const tag = rec["type"];
  if (typeof tag !== "string" || !(tag in WIRE_SCHEMA.types)) {
    throw new WireError(`unknown type tag ${JSON.stringify(tag)}`);
  }
  const spec = WIRE_SCHEMA.types[tag]!;
  const allowed = new Set(["type", ...spec.map(([name]) => name)]);
  for (const key of Object.keys(rec)) {
    if (!allowed.has(key)) {
      throw new WireError(`${tag}: unexpected field ${key}`);
    }
  }
  const out: WireMessage = { type: tag };
  for (const [name, kind] of spec) {
    if (!(name in rec)) {
      throw new WireError(`${tag}: missing field ${name}`);
    }
    out[name] = checkValue(kind, rec[name], `${tag}.${name}`);
  }
  return out;
}
