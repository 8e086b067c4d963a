"""Longitudinal planning on merge-aligned paths.

Each vehicle is planned as a double integrator driven by the intelligent
driver model (IDM). All positions here are merge-aligned: p = raw arc
length + the path's merge_offset, so that positions on merging paths are
directly comparable. p is the position of the front bumper.

Cross-path visibility starts exactly at the merge point: upstream of it,
vehicles on the other path do not exist as leaders. Yielding upstream is
mediated by a virtual stopped vehicle placed at the yield sign while the
conflict window on the priority path is occupied. The virtual vehicle
has zero body length, so the gap to it is the full distance to the sign.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Optional, Sequence, Union

from .control import Waypoint
from .errors import InvariantViolation, NonFiniteInput, NonPositiveGap
from .geometry import Path, pose_at


@dataclass(frozen=True)
class PlannerState:
    """Front-bumper position and speed of one planned vehicle.

    The spec-level planner works purely in the merge-aligned coordinate;
    conversion to raw path arc length happens only at waypoint emission.
    """

    vehicle_id: int
    path_id: str
    p: float
    v: float
    vehicle_length: float

    def __post_init__(self):
        if not (math.isfinite(self.p) and math.isfinite(self.v)):
            raise NonFiniteInput(f"planner state not finite: {self}")
        if self.v < 0.0:
            raise InvariantViolation(f"planner speed negative: {self.v}")
        if not self.vehicle_length >= 0.0:
            raise InvariantViolation(f"vehicle length negative: {self.vehicle_length}")

    @property
    def rear(self) -> float:
        return self.p - self.vehicle_length


@dataclass(frozen=True)
class IDMParams:
    u_max: float          # max acceleration, > 0
    u_min: float          # max deceleration, stored signed < 0
    v_max: float
    s_0: float            # standstill distance, > 0
    T: float              # time headway, >= 0
    v_min: float = 0.0
    delta_exp: float = 4.0

    def __post_init__(self):
        if not (self.u_min < 0.0 < self.u_max):
            raise InvariantViolation(f"need u_min < 0 < u_max: {self}")
        if not (0.0 <= self.v_min < self.v_max):
            raise InvariantViolation(f"need 0 <= v_min < v_max: {self}")
        if not self.s_0 > 0.0:
            raise InvariantViolation(f"need s_0 > 0: {self}")
        if not self.T >= 0.0:
            raise InvariantViolation(f"need T >= 0: {self}")
        if not self.delta_exp > 0.0:
            raise InvariantViolation(f"need delta_exp > 0: {self}")


@dataclass(frozen=True)
class VirtualVehicle:
    """Stopped zero-length obstacle pinned at a yield sign."""

    path_id: str
    p: float
    active: bool

    v: float = 0.0
    vehicle_length: float = 0.0

    def __post_init__(self):
        if self.v != 0.0:
            raise InvariantViolation("virtual vehicle must be stopped")


Entity = Union[PlannerState, VirtualVehicle]


@dataclass(frozen=True)
class YieldRule:
    """Yield path gives way to priority path at a merge.

    All positions are merge-aligned. The conflict window is a closed
    interval on the priority path; while any priority vehicle's front
    bumper is inside it, the virtual vehicle at yield_position is active.
    """

    yield_path: str
    priority_path: str
    yield_position: float
    window_lo: float
    window_hi: float

    def __post_init__(self):
        if not self.window_lo <= self.window_hi:
            raise InvariantViolation(f"empty conflict window: {self}")


class MergeMap:
    """Which path pairs merge, and the aligned position where they do."""

    def __init__(self, merges: Sequence[tuple[str, str, float]] = ()):
        self._at = {}
        for a, b, p in merges:
            self._at[frozenset((a, b))] = p

    def merge_start(self, path_a: str, path_b: str) -> Optional[float]:
        """Aligned position where the shared region of a and b begins."""
        return self._at.get(frozenset((path_a, path_b)))

    @classmethod
    def from_paths(cls, paths: Mapping[str, Path], pairs: Sequence[tuple[str, str, float]]):
        """pairs carry (path_a, path_b, aligned merge position)."""
        return cls(pairs)


def idm_accel(v: float, gap: float, dv: float, params: IDMParams) -> float:
    """IDM acceleration for a follower, clamped to [u_min, u_max].

    gap is bumper-to-bumper and must be positive; gap <= 0 means the
    collision already happened and is reported loudly, not smoothed
    over. Free road is gap = inf (dv is then irrelevant).
    dv = v_follower - v_leader.
    """
    if not (math.isfinite(v) and math.isfinite(dv)):
        raise NonFiniteInput(f"idm inputs not finite: v={v} dv={dv}")
    if math.isnan(gap):
        raise NonFiniteInput("idm gap is nan")
    if v < 0.0:
        raise InvariantViolation(f"idm speed negative: {v}")
    if gap <= 0.0:
        raise NonPositiveGap(f"gap {gap} <= 0")
    s_star = params.s_0 + max(
        0.0, v * params.T + v * dv / (2.0 * math.sqrt(params.u_max * abs(params.u_min)))
    )
    u = params.u_max * (
        1.0 - (v / params.v_max) ** params.delta_exp - (s_star / gap) ** 2
    )
    return min(max(u, params.u_min), params.u_max)


def _order_key(entity: Entity):
    # Virtual vehicles sort ahead of real ones at identical p; real ones
    # tie-break by id so the choice of leader is deterministic.
    if isinstance(entity, VirtualVehicle):
        return (0, 0)
    return (1, entity.vehicle_id)


def find_predecessor(
    self_state: PlannerState,
    others: Sequence[PlannerState],
    virtuals: Sequence[VirtualVehicle],
    merge_map: MergeMap,
) -> Optional[tuple[Entity, float, float]]:
    """Nearest entity ahead of self_state, with bumper gap and dv.

    Same-path entities are always candidates. Entities on another path
    are candidates only once they are at or past the merge point shared
    with self's path; upstream of it the paths are mutually invisible.
    Returns None on a free road.
    """
    candidates: list[Entity] = []
    for e in list(others) + [v for v in virtuals if v.active]:
        if isinstance(e, PlannerState) and e.vehicle_id == self_state.vehicle_id:
            continue
        if e.path_id != self_state.path_id:
            merge = merge_map.merge_start(self_state.path_id, e.path_id)
            if merge is None or e.p < merge:
                continue
        ahead = e.p > self_state.p or (
            e.p == self_state.p and _order_key(e) < _order_key(self_state)
        )
        if ahead:
            candidates.append(e)
    if not candidates:
        return None
    leader = min(candidates, key=lambda e: (e.p, _order_key(e)))
    gap = leader.p - self_state.p - leader.vehicle_length
    dv = self_state.v - leader.v
    return leader, gap, dv


def update_yield(rule: YieldRule, others: Sequence[PlannerState]) -> VirtualVehicle:
    """Place the virtual vehicle; active while the window is occupied.

    Occupancy is the closed interval test on priority-path front bumpers.
    """
    occupied = any(
        s.path_id == rule.priority_path and rule.window_lo <= s.p <= rule.window_hi
        for s in others
    )
    return VirtualVehicle(path_id=rule.yield_path, p=rule.yield_position, active=occupied)


def plan_step(state: PlannerState, u: float, dt: float, params: IDMParams) -> PlannerState:
    """Semi-implicit Euler with the speed clamped to [v_min, v_max]."""
    if not dt > 0.0:
        raise InvariantViolation(f"dt must be positive: {dt}")
    if not (params.u_min - 1e-12 <= u <= params.u_max + 1e-12):
        raise InvariantViolation(f"unclamped acceleration {u} passed to plan_step")
    v1 = min(max(state.v + u * dt, params.v_min), params.v_max)
    return replace(state, p=state.p + v1 * dt, v=v1)


def emit_waypoint(state: PlannerState, path: Path, t: float) -> Waypoint:
    """Waypoint at the planner position, back in raw path coordinates.

    Raises OutOfRange once the plan passes the path end; the harness
    treats that as route completion, not a fault.
    """
    raw_s = state.p - path.merge_offset
    pose = pose_at(path, raw_s)
    return Waypoint(t_stamp=t, x=pose.x, y=pose.y, yaw=pose.yaw, speed=state.v)


def plan_tick(
    states: Sequence[PlannerState],
    rules: Sequence[YieldRule],
    merge_map: MergeMap,
    params_by_id: Mapping[int, IDMParams],
    dt: float,
) -> list[tuple[PlannerState, float]]:
    """One synchronized planner tick for every vehicle.

    All vehicles read the same immutable snapshot; updates commit in
    vehicle-id order, which makes the result independent of input order.
    Returns (new state, accel) pairs sorted by vehicle id.
    """
    snapshot = sorted(states, key=lambda s: s.vehicle_id)
    virtuals = [update_yield(rule, snapshot) for rule in rules]
    out = []
    for s in snapshot:
        params = params_by_id[s.vehicle_id]
        pred = find_predecessor(s, snapshot, virtuals, merge_map)
        if pred is None:
            u = idm_accel(s.v, math.inf, 0.0, params)
        else:
            _, gap, dv = pred
            u = idm_accel(s.v, gap, dv, params)
        out.append((plan_step(s, u, dt, params), u))
    return out
