"""Wire messages and their canonical text codec.

Every message is one UTF-8 text object: fields in the exact order given
by data/messages.json, numbers in shortest round-trip decimal form with
integral values rendered as plain integers, no whitespace outside string
values, one trailing linefeed. The schema file is shared with the
operator console codec; a drift test on each side pins the field order.

The command channel carries one encoded message per datagram; stream and
gateway channels carry them newline-delimited.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields as _dc_fields
from importlib import resources
from typing import Mapping, Union

from .errors import (
    CavsimError,
    InvariantViolation,
    MalformedMessage,
    RangeError,
    UnknownType,
)
from .geometry import Arc, Line

_SCHEMA = json.loads(
    resources.files("cavsim.data").joinpath("messages.json").read_text("utf-8")
)
TYPE_FIELDS = {tag: [tuple(f) for f in spec] for tag, spec in _SCHEMA["types"].items()}
SUBTYPE_FIELDS = {
    tag: [tuple(f) for f in spec] for tag, spec in _SCHEMA["subtypes"].items()
}
CHANNELS = _SCHEMA["channels"]

EXPERIMENT_STATES = ("idle", "running", "paused", "complete", "failed")
VEHICLE_STATUSES = ("queued", "driving", "yielding", "complete")


def _require_finite(obj, *names):
    for n in names:
        v = float(getattr(obj, n))
        if not math.isfinite(v):
            raise InvariantViolation(f"{type(obj).__name__}.{n} not finite: {v}")
        object.__setattr__(obj, n, v)


def _require_int(obj, *names):
    for n in names:
        v = getattr(obj, n)
        if isinstance(v, bool) or not isinstance(v, int):
            raise InvariantViolation(f"{type(obj).__name__}.{n} must be an integer")


@dataclass(frozen=True)
class InitMessage:
    """Vehicle registration: algorithm, gains, start state, appearance.

    controller_params is a flat name → number map. Besides the gains it
    carries the index of the vehicle's path in the session path list
    under the key "path" (the init shape has no other numeric slot for
    it and path assignment is a controller parameter here: it defines
    what the on-vehicle controller tracks).
    """

    vehicle_id: int
    algorithm: str
    controller_params: Mapping[str, float]
    initial_state: tuple[float, float, float, float]
    appearance: str

    def __post_init__(self):
        _require_int(self, "vehicle_id")
        if self.vehicle_id < 0:
            raise InvariantViolation("vehicle_id must be non-negative")
        if not isinstance(self.algorithm, str) or not isinstance(self.appearance, str):
            raise InvariantViolation("algorithm and appearance must be strings")
        params = {}
        for k, v in dict(self.controller_params).items():
            if not isinstance(k, str):
                raise InvariantViolation("controller_params keys must be strings")
            fv = float(v)
            if not math.isfinite(fv):
                raise InvariantViolation(f"controller_params[{k!r}] not finite")
            params[k] = fv
        object.__setattr__(self, "controller_params", params)
        st = tuple(float(v) for v in self.initial_state)
        if len(st) != 4 or not all(math.isfinite(v) for v in st):
            raise InvariantViolation("initial_state must be 4 finite numbers")
        if st[3] < 0.0:
            raise InvariantViolation("initial speed must be >= 0")
        object.__setattr__(self, "initial_state", st)


@dataclass(frozen=True)
class WaypointCommand:
    vehicle_id: int
    t_stamp: float
    x: float
    y: float
    yaw: float
    speed: float

    def __post_init__(self):
        _require_int(self, "vehicle_id")
        if self.vehicle_id < 0:
            raise InvariantViolation("vehicle_id must be non-negative")
        _require_finite(self, "t_stamp", "x", "y", "yaw", "speed")
        if self.speed < 0.0:
            raise InvariantViolation("negative speed")


@dataclass(frozen=True)
class TransformReport:
    """Timestamped pose in motion-capture shape: position + quaternion."""

    vehicle_id: int
    t_stamp: float
    position: tuple[float, float, float]
    rotation: tuple[float, float, float, float]

    def __post_init__(self):
        _require_int(self, "vehicle_id")
        if self.vehicle_id < 0:
            raise InvariantViolation("vehicle_id must be non-negative")
        _require_finite(self, "t_stamp")
        pos = tuple(float(v) for v in self.position)
        rot = tuple(float(v) for v in self.rotation)
        if len(pos) != 3 or not all(math.isfinite(v) for v in pos):
            raise InvariantViolation("position must be 3 finite numbers")
        if len(rot) != 4 or not all(math.isfinite(v) for v in rot):
            raise InvariantViolation("rotation must be 4 finite numbers")
        norm = math.sqrt(sum(v * v for v in rot))
        if abs(norm - 1.0) > 1e-9:
            raise InvariantViolation(f"quaternion norm {norm} not 1")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "rotation", rot)


@dataclass(frozen=True)
class ActuatorReport:
    """Controller outputs echoed by the simulator alongside transforms."""

    vehicle_id: int
    t_stamp: float
    v: float
    u_d: float
    steer: float
    gas: float
    brake: float
    handbrake: int

    def __post_init__(self):
        _require_int(self, "vehicle_id", "handbrake")
        if self.vehicle_id < 0:
            raise InvariantViolation("vehicle_id must be non-negative")
        _require_finite(self, "t_stamp", "v", "u_d", "steer", "gas", "brake")
        if self.v < 0.0:
            raise InvariantViolation("negative speed")
        if not -1.0 <= self.u_d <= 1.0:
            raise InvariantViolation(f"u_d out of range: {self.u_d}")
        if not (0.0 <= self.gas <= 1.0 and 0.0 <= self.brake <= 1.0):
            raise InvariantViolation("gas/brake out of range")
        if self.handbrake not in (0, 1):
            raise InvariantViolation("handbrake must be 0 or 1")


@dataclass(frozen=True)
class PathGeometry:
    """Path payload inside a session message: raw segments, no offsets."""

    path_id: str
    segments: tuple[Union[Line, Arc], ...]

    def __post_init__(self):
        if not isinstance(self.path_id, str):
            raise InvariantViolation("path_id must be a string")
        segs = tuple(self.segments)
        if not segs:
            raise InvariantViolation("path without segments")
        for s in segs:
            if not isinstance(s, (Line, Arc)):
                raise InvariantViolation(f"not a segment: {s!r}")
        object.__setattr__(self, "segments", segs)


@dataclass(frozen=True)
class SessionSetup:
    """First message on the simulator control connection.

    Carries everything the simulator needs before vehicles arrive:
    timing, scale, track geometry, and the vehicle prefab parameter
    blocks that init messages reference by appearance tag.
    """

    scale: float
    physics_dt: float
    substeps: int
    paths: tuple[PathGeometry, ...]
    prefabs: Mapping[str, Mapping[str, float]]

    def __post_init__(self):
        _require_finite(self, "scale", "physics_dt")
        _require_int(self, "substeps")
        if self.scale <= 0.0 or self.physics_dt <= 0.0 or self.substeps < 1:
            raise InvariantViolation("scale, physics_dt, substeps must be positive")
        object.__setattr__(self, "paths", tuple(self.paths))
        prefabs = {}
        for tag, block in dict(self.prefabs).items():
            prefabs[tag] = {k: float(v) for k, v in dict(block).items()}
        object.__setattr__(self, "prefabs", prefabs)


@dataclass(frozen=True)
class TickTrigger:
    """Lockstep advance: run one planner tick's worth of physics.

    expected lists (vehicle_id, t_stamp) of the waypoints the simulator
    should wait for (briefly) before integrating, so a loss-free run is
    bit-reproducible while a lossy one still advances.
    """

    t: float
    expected: tuple[tuple[int, float], ...]

    def __post_init__(self):
        _require_finite(self, "t")
        pairs = []
        for pair in self.expected:
            vid, stamp = pair
            if isinstance(vid, bool) or not isinstance(vid, int) or vid < 0:
                raise InvariantViolation("expected vehicle_id must be int >= 0")
            stamp = float(stamp)
            if not math.isfinite(stamp):
                raise InvariantViolation("expected t_stamp not finite")
            pairs.append((vid, stamp))
        object.__setattr__(self, "expected", tuple(pairs))


@dataclass(frozen=True)
class TickDone:
    t: float

    def __post_init__(self):
        _require_finite(self, "t")


@dataclass(frozen=True)
class ResetSignal:
    pass


@dataclass(frozen=True)
class ScenePoly:
    path_id: str
    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if not isinstance(self.path_id, str):
            raise InvariantViolation("path_id must be a string")
        pts = tuple((float(x), float(y)) for x, y in self.points)
        if len(pts) < 2:
            raise InvariantViolation("polyline needs at least 2 points")
        for x, y in pts:
            if not (math.isfinite(x) and math.isfinite(y)):
                raise InvariantViolation("polyline point not finite")
        object.__setattr__(self, "points", pts)


@dataclass(frozen=True)
class SceneVehicle:
    vehicle_id: int
    appearance: str
    length: float

    def __post_init__(self):
        _require_int(self, "vehicle_id")
        if self.vehicle_id < 0:
            raise InvariantViolation("vehicle_id must be non-negative")
        if not isinstance(self.appearance, str):
            raise InvariantViolation("appearance must be a string")
        _require_finite(self, "length")
        if self.length < 0.0:
            raise InvariantViolation("negative vehicle length")


@dataclass(frozen=True)
class SceneFrame:
    """Static description sent to a console once on connect."""

    paths: tuple[ScenePoly, ...]
    vehicles: tuple[SceneVehicle, ...]

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(self.paths))
        object.__setattr__(self, "vehicles", tuple(self.vehicles))


@dataclass(frozen=True)
class TelemetryRow:
    """One vehicle's latest log values, as shown in the console."""

    vehicle_id: int
    status: str
    p: float
    x: float
    y: float
    yaw: float
    v: float
    u_d: float
    steer: float
    gas: float
    brake: float
    handbrake: int

    def __post_init__(self):
        _require_int(self, "vehicle_id", "handbrake")
        if self.status not in VEHICLE_STATUSES:
            raise InvariantViolation(f"unknown vehicle status {self.status!r}")
        _require_finite(self, "p", "x", "y", "yaw", "v", "u_d", "steer", "gas", "brake")
        if self.handbrake not in (0, 1):
            raise InvariantViolation("handbrake must be 0 or 1")


@dataclass(frozen=True)
class StateFrame:
    clock: float
    state: str
    vehicles: tuple[TelemetryRow, ...]

    def __post_init__(self):
        _require_finite(self, "clock")
        if self.state not in EXPERIMENT_STATES:
            raise InvariantViolation(f"unknown experiment state {self.state!r}")
        object.__setattr__(self, "vehicles", tuple(self.vehicles))


@dataclass(frozen=True)
class ErrorReply:
    message: str

    def __post_init__(self):
        if not isinstance(self.message, str):
            raise InvariantViolation("error message must be a string")


@dataclass(frozen=True)
class StartCommand:
    pass


@dataclass(frozen=True)
class PauseCommand:
    pass


@dataclass(frozen=True)
class ReplayCommand:
    pass


@dataclass(frozen=True)
class ManualDrive:
    vehicle_id: int
    steer: float
    throttle: float

    def __post_init__(self):
        _require_int(self, "vehicle_id")
        if self.vehicle_id < 0:
            raise InvariantViolation("vehicle_id must be non-negative")
        _require_finite(self, "steer", "throttle")
        if not (-1.0 <= self.steer <= 1.0 and -1.0 <= self.throttle <= 1.0):
            raise InvariantViolation("manual axes must be within [-1, 1]")


@dataclass(frozen=True)
class ReleaseManual:
    vehicle_id: int

    def __post_init__(self):
        _require_int(self, "vehicle_id")
        if self.vehicle_id < 0:
            raise InvariantViolation("vehicle_id must be non-negative")


MESSAGE_CLASSES = {
    "init": InitMessage,
    "waypoint": WaypointCommand,
    "transform": TransformReport,
    "actuators": ActuatorReport,
    "session": SessionSetup,
    "tick": TickTrigger,
    "tick_done": TickDone,
    "reset": ResetSignal,
    "scene": SceneFrame,
    "state": StateFrame,
    "error": ErrorReply,
    "start": StartCommand,
    "pause": PauseCommand,
    "replay": ReplayCommand,
    "manual_drive": ManualDrive,
    "release_manual": ReleaseManual,
}
_TAG_OF = {cls: tag for tag, cls in MESSAGE_CLASSES.items()}
_SUBTYPE_CLASSES = {
    "path": PathGeometry,
    "poly": ScenePoly,
    "scene_vehicle": SceneVehicle,
    "row": TelemetryRow,
}

Message = Union[tuple(MESSAGE_CLASSES.values())]


# ---------------------------------------------------------------------------
# encoding

def _render_number(v) -> str:
    if isinstance(v, bool):
        raise InvariantViolation("booleans are not wire numbers")
    if isinstance(v, int):
        return str(v)
    if not math.isfinite(v):
        raise InvariantViolation(f"non-finite number {v!r} cannot be encoded")
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _render_string(s: str) -> str:
    return json.dumps(s, ensure_ascii=False)


def _render_segment(seg) -> str:
    if isinstance(seg, Line):
        spec = SUBTYPE_FIELDS["segment_line"]
        values = {"kind": "line", "x0": seg.x0, "y0": seg.y0,
                  "x1": seg.x1, "y1": seg.y1}
    elif isinstance(seg, Arc):
        spec = SUBTYPE_FIELDS["segment_arc"]
        values = {"kind": "arc", "cx": seg.cx, "cy": seg.cy,
                  "radius": seg.radius, "start_angle": seg.start_angle,
                  "sweep": seg.sweep}
    else:
        raise InvariantViolation(f"not a segment: {seg!r}")
    return _render_fields(spec, values)


def _render_fields(spec, values) -> str:
    parts = []
    for name, kind in spec:
        parts.append(_render_string(name) + ":" + _render_value(kind, values[name]))
    return "{" + ",".join(parts) + "}"


def _render_object(subtype: str, obj) -> str:
    values = {name: getattr(obj, name) for name, _ in SUBTYPE_FIELDS[subtype]}
    return _render_fields(SUBTYPE_FIELDS[subtype], values)


def _render_value(kind: str, v) -> str:
    if kind == "int":
        if isinstance(v, bool) or not isinstance(v, int):
            raise InvariantViolation(f"expected int, got {v!r}")
        return str(v)
    if kind == "float":
        return _render_number(float(v))
    if kind == "str":
        if not isinstance(v, str):
            raise InvariantViolation(f"expected string, got {v!r}")
        return _render_string(v)
    if kind in ("float3", "float4"):
        return "[" + ",".join(_render_number(float(x)) for x in v) + "]"
    if kind == "num_map":
        items = sorted(v.items())
        return "{" + ",".join(
            _render_string(k) + ":" + _render_number(float(x)) for k, x in items
        ) + "}"
    if kind == "prefab_map":
        items = sorted(v.items())
        return "{" + ",".join(
            _render_string(k) + ":" + _render_value("num_map", block)
            for k, block in items
        ) + "}"
    if kind == "id_stamp_list":
        return "[" + ",".join(
            "[" + str(int(vid)) + "," + _render_number(float(st)) + "]"
            for vid, st in v
        ) + "]"
    if kind == "segment_list":
        return "[" + ",".join(_render_segment(s) for s in v) + "]"
    if kind == "point_list":
        return "[" + ",".join(
            "[" + _render_number(float(x)) + "," + _render_number(float(y)) + "]"
            for x, y in v
        ) + "]"
    if kind == "path_list":
        return "[" + ",".join(_render_object("path", p) for p in v) + "]"
    if kind == "poly_list":
        return "[" + ",".join(_render_object("poly", p) for p in v) + "]"
    if kind == "scene_vehicle_list":
        return "[" + ",".join(_render_object("scene_vehicle", p) for p in v) + "]"
    if kind == "row_list":
        return "[" + ",".join(_render_object("row", r) for r in v) + "]"
    raise InvariantViolation(f"unknown field kind {kind!r}")


def encode(message) -> bytes:
    """Canonical bytes for one message, trailing linefeed included."""
    tag = _TAG_OF.get(type(message))
    if tag is None:
        raise InvariantViolation(f"not a wire message: {message!r}")
    parts = ['"type":' + _render_string(tag)]
    for name, kind in TYPE_FIELDS[tag]:
        parts.append(_render_string(name) + ":" + _render_value(kind, getattr(message, name)))
    return ("{" + ",".join(parts) + "}\n").encode("utf-8")


# ---------------------------------------------------------------------------
# decoding

class _NonFiniteToken(Exception):
    def __init__(self, token):
        self.token = token


def _byte_offset(text: str, char_pos: int) -> int:
    return len(text[:char_pos].encode("utf-8"))


def _field_offset(text: str, name: str) -> int:
    pos = text.find(f'"{name}"')
    return _byte_offset(text, pos) if pos >= 0 else 0


class _FieldError(Exception):
    def __init__(self, msg):
        self.msg = msg


def _parse_segment(v):
    if not isinstance(v, dict) or "kind" not in v:
        raise _FieldError("segment must be an object with a kind")
    kind = v["kind"]
    if kind == "line":
        spec = SUBTYPE_FIELDS["segment_line"]
    elif kind == "arc":
        spec = SUBTYPE_FIELDS["segment_arc"]
    else:
        raise _FieldError(f"unknown segment kind {kind!r}")
    if set(v) != {n for n, _ in spec}:
        raise _FieldError("segment fields do not match its kind")
    nums = {}
    for name, fk in spec:
        if name == "kind":
            continue
        nums[name] = _parse_value("float", v[name])
    if kind == "line":
        return Line(nums["x0"], nums["y0"], nums["x1"], nums["y1"])
    return Arc(nums["cx"], nums["cy"], nums["radius"], nums["start_angle"], nums["sweep"])


def _parse_object(subtype: str, v):
    spec = SUBTYPE_FIELDS[subtype]
    if not isinstance(v, dict):
        raise _FieldError(f"expected object for {subtype}")
    if set(v) != {n for n, _ in spec}:
        raise _FieldError(f"fields do not match {subtype}")
    kwargs = {name: _parse_value(kind, v[name]) for name, kind in spec}
    return _SUBTYPE_CLASSES[subtype](**kwargs)


def _parse_value(kind: str, v):
    if kind == "int":
        if isinstance(v, bool) or not isinstance(v, int):
            raise _FieldError(f"expected integer, got {v!r}")
        return v
    if kind == "float":
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise _FieldError(f"expected number, got {v!r}")
        return float(v)
    if kind == "str":
        if not isinstance(v, str):
            raise _FieldError(f"expected string, got {v!r}")
        return v
    if kind in ("float3", "float4"):
        n = 3 if kind == "float3" else 4
        if not isinstance(v, list) or len(v) != n:
            raise _FieldError(f"expected array of {n} numbers")
        return tuple(_parse_value("float", x) for x in v)
    if kind == "num_map":
        if not isinstance(v, dict):
            raise _FieldError("expected object of numbers")
        return {k: _parse_value("float", x) for k, x in v.items()}
    if kind == "prefab_map":
        if not isinstance(v, dict):
            raise _FieldError("expected object of parameter blocks")
        return {k: _parse_value("num_map", block) for k, block in v.items()}
    if kind == "id_stamp_list":
        if not isinstance(v, list):
            raise _FieldError("expected array of [id, t_stamp] pairs")
        out = []
        for pair in v:
            if not isinstance(pair, list) or len(pair) != 2:
                raise _FieldError("expected [id, t_stamp] pair")
            out.append((_parse_value("int", pair[0]), _parse_value("float", pair[1])))
        return tuple(out)
    if kind == "point_list":
        if not isinstance(v, list):
            raise _FieldError("expected array of points")
        out = []
        for pt in v:
            if not isinstance(pt, list) or len(pt) != 2:
                raise _FieldError("expected [x, y] point")
            out.append((_parse_value("float", pt[0]), _parse_value("float", pt[1])))
        return tuple(out)
    if kind == "segment_list":
        if not isinstance(v, list):
            raise _FieldError("expected array of segments")
        return tuple(_parse_segment(s) for s in v)
    if kind == "path_list":
        if not isinstance(v, list):
            raise _FieldError("expected array of paths")
        return tuple(_parse_object("path", p) for p in v)
    if kind == "poly_list":
        if not isinstance(v, list):
            raise _FieldError("expected array of polylines")
        return tuple(_parse_object("poly", p) for p in v)
    if kind == "scene_vehicle_list":
        if not isinstance(v, list):
            raise _FieldError("expected array of vehicles")
        return tuple(_parse_object("scene_vehicle", p) for p in v)
    if kind == "row_list":
        if not isinstance(v, list):
            raise _FieldError("expected array of rows")
        return tuple(_parse_object("row", r) for r in v)
    raise _FieldError(f"unknown field kind {kind!r}")


def decode(data: bytes):
    """One message back from its bytes; raises typed errors with offsets."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise MalformedMessage("invalid UTF-8", offset=e.start)

    def _constant(token):
        raise _NonFiniteToken(token)

    try:
        obj = json.loads(text, parse_constant=_constant)
    except _NonFiniteToken as e:
        pos = text.find(e.token)
        raise RangeError(f"non-finite number {e.token}",
                         offset=_byte_offset(text, max(pos, 0)))
    except json.JSONDecodeError as e:
        raise MalformedMessage(e.msg, offset=_byte_offset(text, e.pos))

    if not isinstance(obj, dict):
        raise MalformedMessage("top level is not an object", offset=0)
    if "type" not in obj:
        raise MalformedMessage("missing type tag", offset=0)
    tag = obj["type"]
    if not isinstance(tag, str) or tag not in TYPE_FIELDS:
        raise UnknownType(f"unknown type tag {tag!r}",
                          offset=_field_offset(text, "type"))
    spec = TYPE_FIELDS[tag]
    allowed = {"type"} | {n for n, _ in spec}
    for key in obj:
        if key not in allowed:
            raise MalformedMessage(f"unexpected field {key!r}",
                                   offset=_field_offset(text, key))
    kwargs = {}
    for name, kind in spec:
        if name not in obj:
            raise MalformedMessage(f"missing field {name!r}", offset=0)
        try:
            kwargs[name] = _parse_value(kind, obj[name])
        except _FieldError as e:
            raise MalformedMessage(f"{name}: {e.msg}",
                                   offset=_field_offset(text, name))
    try:
        return MESSAGE_CLASSES[tag](**kwargs)
    except CavsimError as e:
        raise RangeError(str(e), offset=0)


def iter_stream(buffer: bytes):
    """Split a stream buffer into complete messages plus the remainder."""
    messages = []
    while True:
        nl = buffer.find(b"\n")
        if nl < 0:
            return messages, buffer
        line, buffer = buffer[: nl + 1], buffer[nl + 1:]
        if line.strip():
            messages.append(decode(line))


# ---------------------------------------------------------------------------
# pure-yaw quaternions (motion-capture transform convention)

def yaw_to_quaternion(yaw: float) -> tuple[float, float, float, float]:
    """(qx, qy, qz, qw) for a rotation of yaw about +z."""
    return (0.0, 0.0, math.sin(yaw / 2.0), math.cos(yaw / 2.0))


def quaternion_to_yaw(rotation) -> float:
    qx, qy, qz, qw = rotation
    return math.atan2(2.0 * (qw * qz + qx * qy), 1.0 - 2.0 * (qy * qy + qz * qz))


def transform_for(vehicle_id: int, t_stamp: float, x: float, y: float,
                  yaw: float) -> TransformReport:
    """Ground-vehicle transform: z = 0, pure yaw rotation."""
    return TransformReport(
        vehicle_id=vehicle_id,
        t_stamp=t_stamp,
        position=(x, y, 0.0),
        rotation=yaw_to_quaternion(yaw),
    )


def schema_field_names(cls) -> list:
    """Dataclass field names, for the schema drift test."""
    return [f.name for f in _dc_fields(cls)]
