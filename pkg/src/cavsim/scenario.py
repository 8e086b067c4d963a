"""Scenario files: multi-vehicle experiment descriptions.

A scenario is a YAML document (conventionally ``*.scn``) that names the
track files, the merge that welds their longitudinal frames together,
parameter blocks, and the vehicle list. All positions in the file are
raw path-local arc lengths of the front bumper; the loader converts
yield rules and conflict windows into the merge-aligned frame the
planner works in.

Example::

    scale: 25
    physics_dt: 0.01
    planner_dt: 0.1
    duration: 60
    paths:
      entry: entry.path
      ring: ring.path
    merge: {anchor: ring, other: entry, at: [0.0, 0.6]}
    idm:
      desk: {u_max: 0.06, u_min: -0.12, v_max: 0.3, s_0: 0.08, T: 1.0}
    vehicle_params:
      car: {scale: 25}
    yield_rules:
      - {yield_path: entry, priority: ring, at: 3.38, window: [1.2, 2.46]}
    vehicles:
      - {id: 1, path: entry, p: 1.90, v: 0.2, idm: desk, params: car}
"""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass
from typing import Mapping

import yaml

from .control import LongitudinalGains, StanleyGains
from .dynamics import VehicleParams, default_params
from .errors import (InvariantViolation, ParseError, PathTooShort,
                     UnknownReference)
from .geometry import Path, align_to_merge, load_path_file, project
from .planner import IDMParams, MergeMap, PlannerState, YieldRule

_STANLEY_KEYS = ("k_a", "k_e", "k_y", "k_s")
_LONGITUDINAL_KEYS = ("kp", "ki", "kd", "k_ff", "integrator_limit")
_PARAM_KEYS = ("mass", "wheelbase", "length", "max_steer", "max_drive_force",
               "max_brake_force", "handbrake_decel", "drag_coeff",
               "rolling_resist", "scale")
_IDM_KEYS = ("u_max", "u_min", "v_max", "s_0", "T", "v_min", "delta_exp")


@dataclass(frozen=True)
class VehicleSpec:
    """One vehicle's spawn request with resolved parameter blocks."""

    vehicle_id: int
    path_id: str
    p: float  # raw path-local arc length of the front bumper
    v: float
    params: VehicleParams
    idm: IDMParams
    stanley: StanleyGains
    longitudinal: LongitudinalGains
    appearance: str


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    scale: float
    physics_dt: float
    planner_dt: float
    duration: float
    seed: int
    paths: Mapping[str, Path]  # merge offsets already applied
    merge_pairs: tuple[tuple[str, str, float], ...]  # (a, b, aligned position)
    vehicles: tuple[VehicleSpec, ...]
    yield_rules: tuple[YieldRule, ...]  # aligned coordinates

    @property
    def substeps(self) -> int:
        return int(round(self.planner_dt / self.physics_dt))

    def merge_map(self) -> MergeMap:
        return MergeMap(self.merge_pairs)

    def path_order(self) -> list[str]:
        """Path ids in file order; the wire protocol indexes into this."""
        return list(self.paths)


# ---------------------------------------------------------------------------
# field access helpers; every reader carries its location for error text


def _mapping(v, ctx: str) -> dict:
    if not isinstance(v, dict):
        raise ParseError(f"{ctx}: expected a mapping, got {type(v).__name__}")
    return v


def _sequence(v, ctx: str) -> list:
    if not isinstance(v, list):
        raise ParseError(f"{ctx}: expected a list, got {type(v).__name__}")
    return v


def _get(m: dict, key: str, ctx: str):
    if key not in m:
        raise ParseError(f"{ctx}.{key}: required field is missing")
    return m[key]


def _number(v, ctx: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"{ctx}: expected a number, got {v!r}")
    f = float(v)
    if not math.isfinite(f):
        raise ParseError(f"{ctx}: expected a finite number, got {v!r}")
    return f


def _integer(v, ctx: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ParseError(f"{ctx}: expected an integer, got {v!r}")
    return v


def _string(v, ctx: str) -> str:
    if not isinstance(v, str):
        raise ParseError(f"{ctx}: expected a string, got {v!r}")
    return v


def _no_unknown_keys(block: dict, allowed, ctx: str):
    unknown = [k for k in block if k not in allowed]
    if unknown:
        raise ParseError(f"{ctx}: unknown field {unknown[0]!r}")


# ---------------------------------------------------------------------------
# block materialization


def _build_params(block: dict, default_scale: float, ctx: str) -> VehicleParams:
    _no_unknown_keys(block, _PARAM_KEYS, ctx)
    scale = _number(block.get("scale", default_scale), f"{ctx}.scale")
    base = dataclasses.asdict(default_params(scale))
    for key in block:
        if key != "scale":
            base[key] = _number(block[key], f"{ctx}.{key}")
    return VehicleParams(**base)


def _build_idm(block: dict, ctx: str) -> IDMParams:
    _no_unknown_keys(block, _IDM_KEYS, ctx)
    kwargs = {}
    for key in ("u_max", "u_min", "v_max", "s_0", "T"):
        kwargs[key] = _number(_get(block, key, ctx), f"{ctx}.{key}")
    for key in ("v_min", "delta_exp"):
        if key in block:
            kwargs[key] = _number(block[key], f"{ctx}.{key}")
    return IDMParams(**kwargs)


def _build_gains(block: dict, ctx: str) -> tuple[StanleyGains, LongitudinalGains]:
    _no_unknown_keys(block, _STANLEY_KEYS + _LONGITUDINAL_KEYS, ctx)
    sk = {k: _number(block[k], f"{ctx}.{k}") for k in _STANLEY_KEYS if k in block}
    lk = {k: _number(block[k], f"{ctx}.{k}") for k in _LONGITUDINAL_KEYS if k in block}
    return StanleyGains(**sk), LongitudinalGains(**lk)


def _resolve(blocks: dict, ref: str, kind: str, ctx: str):
    if ref not in blocks:
        raise UnknownReference(f"{ctx}: no {kind} block named {ref!r}")
    return blocks[ref]


# ---------------------------------------------------------------------------
# loading


def load_scenario(file_path) -> ScenarioConfig:
    """Parse a scenario file, loading referenced path files next to it."""
    file_path = os.fspath(file_path)
    with open(file_path, "r", encoding="utf-8") as fh:
        text = fh.read()
    name = os.path.splitext(os.path.basename(file_path))[0]
    return parse_scenario(text, base_dir=os.path.dirname(file_path) or ".",
                          default_name=name)


def parse_scenario(text: str, base_dir: str = ".",
                   default_name: str = "scenario") -> ScenarioConfig:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f"line {mark.line + 1}" if mark is not None else "document"
        raise ParseError(f"{where}: {e}") from None
    doc = _mapping(doc, "scenario")
    _no_unknown_keys(doc, ("name", "scale", "physics_dt", "planner_dt",
                           "duration", "seed", "paths", "merge",
                           "vehicle_params", "idm", "gains", "yield_rules",
                           "vehicles"), "scenario")

    name = _string(doc.get("name", default_name), "name")
    scale = _number(_get(doc, "scale", "scenario"), "scale")
    physics_dt = _number(_get(doc, "physics_dt", "scenario"), "physics_dt")
    planner_dt = _number(_get(doc, "planner_dt", "scenario"), "planner_dt")
    duration = _number(_get(doc, "duration", "scenario"), "duration")
    seed = _integer(doc.get("seed", 0), "seed")
    if scale <= 0.0:
        raise InvariantViolation("scale must be positive")
    if physics_dt <= 0.0 or planner_dt <= 0.0:
        raise InvariantViolation("physics_dt and planner_dt must be positive")
    if duration < 0.0:
        raise InvariantViolation("duration must be non-negative")
    ratio = planner_dt / physics_dt
    if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
        raise InvariantViolation(
            f"planner_dt ({planner_dt}) must be a positive integer multiple "
            f"of physics_dt ({physics_dt})")

    paths = _load_paths(_mapping(_get(doc, "paths", "scenario"), "paths"), base_dir)
    merge_pairs = _apply_merges(doc.get("merge"), paths)

    param_blocks = {
        ref: _build_params(_mapping(block, f"vehicle_params.{ref}"), scale,
                           f"vehicle_params.{ref}")
        for ref, block in _mapping(doc.get("vehicle_params", {}),
                                   "vehicle_params").items()
    }
    idm_blocks = {
        ref: _build_idm(_mapping(block, f"idm.{ref}"), f"idm.{ref}")
        for ref, block in _mapping(doc.get("idm", {}), "idm").items()
    }
    gain_blocks = {
        ref: _build_gains(_mapping(block, f"gains.{ref}"), f"gains.{ref}")
        for ref, block in _mapping(doc.get("gains", {}), "gains").items()
    }

    merge_at = {frozenset((a, b)): p for a, b, p in merge_pairs}
    rules = _load_yield_rules(doc.get("yield_rules", []), paths, merge_at)
    vehicles = _load_vehicles(_sequence(_get(doc, "vehicles", "scenario"),
                                        "vehicles"),
                              paths, scale, param_blocks, idm_blocks,
                              gain_blocks)
    return ScenarioConfig(
        name=name, scale=scale, physics_dt=physics_dt, planner_dt=planner_dt,
        duration=duration, seed=seed, paths=paths, merge_pairs=merge_pairs,
        vehicles=vehicles, yield_rules=rules,
    )


def _load_paths(block: dict, base_dir: str) -> dict[str, Path]:
    if not block:
        raise ParseError("paths: at least one path is required")
    paths = {}
    for pid, fname in block.items():
        pid = _string(pid, "paths key")
        fname = _string(fname, f"paths.{pid}")
        full = os.path.join(base_dir, fname)
        try:
            with open(full, "r", encoding="utf-8") as fh:
                paths[pid] = load_path_file(fh.read(), path_id=pid)
        except FileNotFoundError:
            raise UnknownReference(f"paths.{pid}: file not found: {fname}") from None
    return paths


def _apply_merges(decl, paths: dict[str, Path]) -> tuple:
    if decl is None:
        return ()
    decls = decl if isinstance(decl, list) else [decl]
    pairs = []
    for i, m in enumerate(decls):
        ctx = f"merge[{i}]" if isinstance(decl, list) else "merge"
        m = _mapping(m, ctx)
        _no_unknown_keys(m, ("anchor", "other", "at"), ctx)
        anchor = _string(_get(m, "anchor", ctx), f"{ctx}.anchor")
        other = _string(_get(m, "other", ctx), f"{ctx}.other")
        if anchor not in paths:
            raise UnknownReference(f"{ctx}.anchor: no path named {anchor!r}")
        if other not in paths:
            raise UnknownReference(f"{ctx}.other: no path named {other!r}")
        at = _sequence(_get(m, "at", ctx), f"{ctx}.at")
        if len(at) != 2:
            raise ParseError(f"{ctx}.at: expected [x, y]")
        xy = (_number(at[0], f"{ctx}.at[0]"), _number(at[1], f"{ctx}.at[1]"))
        if paths[anchor].merge_offset != 0.0:
            raise InvariantViolation(
                f"{ctx}: anchor {anchor!r} already carries a merge offset; "
                f"anchor every merge on the same path")
        aligned_a, aligned_b = align_to_merge(paths[anchor], paths[other], xy)
        paths[anchor] = aligned_a
        paths[other] = aligned_b
        merge_pos = project(aligned_a, xy[0], xy[1]).s
        pairs.append((anchor, other, merge_pos))
    return tuple(pairs)


def _load_yield_rules(decl, paths, merge_at: dict) -> tuple[YieldRule, ...]:
    rules = []
    for i, r in enumerate(_sequence(decl, "yield_rules")):
        ctx = f"yield_rules[{i}]"
        r = _mapping(r, ctx)
        _no_unknown_keys(r, ("yield_path", "priority", "at", "window"), ctx)
        ypath = _string(_get(r, "yield_path", ctx), f"{ctx}.yield_path")
        ppath = _string(_get(r, "priority", ctx), f"{ctx}.priority")
        for pid, field in ((ypath, "yield_path"), (ppath, "priority")):
            if pid not in paths:
                raise UnknownReference(f"{ctx}.{field}: no path named {pid!r}")
        merge_pos = merge_at.get(frozenset((ypath, ppath)))
        if merge_pos is None:
            raise InvariantViolation(
                f"{ctx}: paths {ypath!r} and {ppath!r} do not merge")
        at_raw = _number(_get(r, "at", ctx), f"{ctx}.at")
        window = _sequence(_get(r, "window", ctx), f"{ctx}.window")
        if len(window) != 2:
            raise ParseError(f"{ctx}.window: expected [lo, hi]")
        lo_raw = _number(window[0], f"{ctx}.window[0]")
        hi_raw = _number(window[1], f"{ctx}.window[1]")
        yield_pos = at_raw + paths[ypath].merge_offset
        lo = lo_raw + paths[ppath].merge_offset
        hi = hi_raw + paths[ppath].merge_offset
        if yield_pos > merge_pos:
            raise InvariantViolation(
                f"{ctx}: yield sign at aligned {yield_pos:.3f} lies past the "
                f"merge point at {merge_pos:.3f}")
        rules.append(YieldRule(yield_path=ypath, priority_path=ppath,
                               yield_position=yield_pos,
                               window_lo=lo, window_hi=hi))
    return tuple(rules)


def _load_vehicles(decl: list, paths, scale, param_blocks, idm_blocks,
                   gain_blocks) -> tuple[VehicleSpec, ...]:
    if not decl:
        raise ParseError("vehicles: at least one vehicle is required")
    if "default" not in param_blocks:
        param_blocks = dict(param_blocks)
        param_blocks["default"] = default_params(scale)
    specs = []
    seen = set()
    for i, v in enumerate(decl):
        ctx = f"vehicles[{i}]"
        v = _mapping(v, ctx)
        _no_unknown_keys(v, ("id", "path", "p", "v", "params", "idm", "gains",
                             "appearance"), ctx)
        vid = _integer(_get(v, "id", ctx), f"{ctx}.id")
        if vid < 0:
            raise InvariantViolation(f"{ctx}.id: must be non-negative")
        if vid in seen:
            raise InvariantViolation(f"{ctx}.id: duplicate vehicle id {vid}")
        seen.add(vid)
        pid = _string(_get(v, "path", ctx), f"{ctx}.path")
        if pid not in paths:
            raise UnknownReference(f"{ctx}.path: no path named {pid!r}")
        p = _number(_get(v, "p", ctx), f"{ctx}.p")
        v0 = _number(v.get("v", 0.0), f"{ctx}.v")
        if v0 < 0.0:
            raise InvariantViolation(f"{ctx}.v: must be non-negative")
        params_ref = _string(v.get("params", "default"), f"{ctx}.params")
        params = _resolve(param_blocks, params_ref, "vehicle_params", f"{ctx}.params")
        idm_ref = _string(_get(v, "idm", ctx), f"{ctx}.idm")
        idm = _resolve(idm_blocks, idm_ref, "idm", f"{ctx}.idm")
        if "gains" in v:
            gains_ref = _string(v["gains"], f"{ctx}.gains")
            stanley, longitudinal = _resolve(gain_blocks, gains_ref, "gains",
                                             f"{ctx}.gains")
        else:
            stanley, longitudinal = StanleyGains(), LongitudinalGains()
        appearance = _string(v.get("appearance", params_ref), f"{ctx}.appearance")
        specs.append(VehicleSpec(
            vehicle_id=vid, path_id=pid, p=p, v=v0, params=params, idm=idm,
            stanley=stanley, longitudinal=longitudinal, appearance=appearance,
        ))
    return tuple(specs)


# ---------------------------------------------------------------------------
# spawning


def spawn_vehicles(config: ScenarioConfig) -> list[PlannerState]:
    """Initial planner states in listed order, bodies disentangled.

    Vehicles are placed at their requested positions one by one. When a
    new body interval [p - length, p] touches an already placed vehicle
    on the same path, the newcomer moves back until its front sits one
    standstill distance (its own s_0) behind the blocker's rear bumper;
    the check repeats until the spot is free. A vehicle pushed off the
    start of its path (or requested beyond its end) raises PathTooShort.
    """
    placed: list[PlannerState] = []
    specs_by_id = {s.vehicle_id: s for s in config.vehicles}
    for spec in config.vehicles:
        path = config.paths[spec.path_id]
        p = spec.p + path.merge_offset
        while True:
            blocker = _rearmost_overlap(p, spec, placed, specs_by_id)
            if blocker is None:
                break
            p = (blocker.p - blocker.vehicle_length) - spec.idm.s_0
        raw = p - path.merge_offset
        if raw < 0.0 or raw > path.length:
            raise PathTooShort(
                f"vehicle {spec.vehicle_id}: front bumper at arc length "
                f"{raw:.3f} falls outside path {spec.path_id!r} "
                f"[0, {path.length:.3f}]")
        placed.append(PlannerState(
            vehicle_id=spec.vehicle_id, path_id=spec.path_id, p=p, v=spec.v,
            vehicle_length=spec.params.length,
        ))
    return placed


def _rearmost_overlap(p: float, spec: VehicleSpec, placed, specs_by_id):
    lo = p - spec.params.length
    hits = [
        other for other in placed
        if other.path_id == spec.path_id
        and p >= other.p - other.vehicle_length and other.p >= lo
    ]
    if not hits:
        return None
    return min(hits, key=lambda o: (o.p - o.vehicle_length, o.vehicle_id))
