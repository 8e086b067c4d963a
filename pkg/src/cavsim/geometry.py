"""Piecewise line/arc road geometry with arc-length parameterization.

A path is an ordered chain of segments traversed start to end. Positions
along a path are expressed by the arc length s measured from the path
start, so longitudinal planning can run on scalars while the chain carries
the full planar pose. Paths can additionally carry a merge offset so that
two paths joining at a common point share one longitudinal coordinate:
aligned position p = s + merge_offset.

Conventions: world frame is right-handed (x east, y north), yaw measured
counterclockwise from +x and normalized to (-pi, pi]. A positive arc sweep
turns counterclockwise; curvature is +1/r on such an arc and -1/r on a
clockwise one. Lateral offsets are signed by the cross product of the path
tangent with the offset vector, so a point left of the tangent has a
positive lateral error.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, replace
from typing import Optional, Union

from .errors import (
    DegenerateSegment,
    DiscontinuousPath,
    MergePointNotOnPath,
    OutOfRange,
    PathFileError,
)

TWO_PI = 2.0 * math.pi

# Maximum positional jump allowed where consecutive segments join, meters.
CONTINUITY_TOL = 1e-6

# A merge point must lie on both paths within this distance, meters.
MERGE_POINT_TOL = 1e-3

# Arc-length half-window searched around a projection hint, meters.
HINT_WINDOW = 2.0


def wrap_angle(theta: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    w = (theta + math.pi) % TWO_PI - math.pi
    return math.pi if w == -math.pi else w


@dataclass(frozen=True)
class Pose2:
    """Planar pose: position in meters, yaw in radians, (-pi, pi]."""

    x: float
    y: float
    yaw: float

    def __post_init__(self):
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))


@dataclass(frozen=True)
class Line:
    """Straight segment from (x0, y0) to (x1, y1)."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if self.length <= 0.0:
            raise DegenerateSegment(f"line has zero length: {self}")

    @property
    def length(self) -> float:
        return math.hypot(self.x1 - self.x0, self.y1 - self.y0)

    @property
    def heading(self) -> float:
        return math.atan2(self.y1 - self.y0, self.x1 - self.x0)

    def curvature(self, s: float) -> float:
        return 0.0

    def pose_at(self, s: float) -> Pose2:
        f = s / self.length
        return Pose2(
            self.x0 + f * (self.x1 - self.x0),
            self.y0 + f * (self.y1 - self.y0),
            self.heading,
        )

    def project(self, px: float, py: float) -> tuple[float, float]:
        """Nearest point as (local s, distance)."""
        dx = self.x1 - self.x0
        dy = self.y1 - self.y0
        ln = self.length
        t = ((px - self.x0) * dx + (py - self.y0) * dy) / (ln * ln)
        s = min(max(t, 0.0), 1.0) * ln
        p = self.pose_at(s)
        return s, math.hypot(px - p.x, py - p.y)


@dataclass(frozen=True)
class Arc:
    """Circular arc around (cx, cy).

    Starts at angle start_angle (radians from the +x axis of the center)
    and sweeps by the signed angle sweep: positive is counterclockwise.
    |sweep| may not exceed a full turn.
    """

    cx: float
    cy: float
    radius: float
    start_angle: float
    sweep: float

    def __post_init__(self):
        if self.radius <= 0.0:
            raise DegenerateSegment(f"arc has non-positive radius: {self}")
        if self.sweep == 0.0:
            raise DegenerateSegment(f"arc has zero sweep: {self}")
        if abs(self.sweep) > TWO_PI:
            raise DegenerateSegment(f"arc sweep exceeds a full turn: {self}")

    @property
    def length(self) -> float:
        return self.radius * abs(self.sweep)

    def curvature(self, s: float) -> float:
        return (1.0 if self.sweep > 0.0 else -1.0) / self.radius

    def _angle_at(self, s: float) -> float:
        return self.start_angle + math.copysign(s / self.radius, self.sweep)

    def pose_at(self, s: float) -> Pose2:
        a = self._angle_at(s)
        # Tangent of a CCW arc leads the radial angle by +pi/2, CW by -pi/2.
        yaw = a + math.copysign(math.pi / 2.0, self.sweep)
        return Pose2(
            self.cx + self.radius * math.cos(a),
            self.cy + self.radius * math.sin(a),
            yaw,
        )

    def project(self, px: float, py: float) -> tuple[float, float]:
        """Nearest point as (local s, distance)."""
        dx = px - self.cx
        dy = py - self.cy
        if dx == 0.0 and dy == 0.0:
            # Query at the exact center: every arc point is equidistant.
            return 0.0, self.radius
        ang = math.atan2(dy, dx)
        # Angular advance from the start, measured in the sweep direction.
        if self.sweep > 0.0:
            adv = (ang - self.start_angle) % TWO_PI
        else:
            adv = (self.start_angle - ang) % TWO_PI
        candidates = [0.0, self.length]
        if adv <= abs(self.sweep):
            candidates.append(adv * self.radius)
        best: Optional[tuple[float, float]] = None
        for s in candidates:
            p = self.pose_at(s)
            d = math.hypot(px - p.x, py - p.y)
            if best is None or d < best[1] - 1e-15 or (abs(d - best[1]) <= 1e-15 and s < best[0]):
                best = (s, d)
        return best


Segment = Union[Line, Arc]


@dataclass(frozen=True)
class Path:
    """Immutable chain of segments with cumulative arc length.

    merge_offset shifts the path's longitudinal coordinate into a frame
    shared with a merging path; see align_to_merge.
    """

    path_id: int
    segments: tuple[Segment, ...]
    cum_lengths: tuple[float, ...]
    length: float
    merge_offset: float = 0.0


@dataclass(frozen=True)
class PathProjection:
    """Result of projecting a world point onto a path.

    s is the arc length of the nearest path point, lateral_error the
    signed offset of the query from it (positive left of the tangent),
    path_yaw the tangent direction and curvature the signed curvature
    there.
    """

    s: float
    lateral_error: float
    path_yaw: float
    curvature: float


def build_path(segments, path_id: int = 0) -> Path:
    """Assemble segments into a Path, checking end-to-start continuity.

    Parameters
    ----------
    segments : iterable of Line | Arc
        Ordered chain; segment k+1 must start where segment k ends,
        within CONTINUITY_TOL.
    path_id : int
        Identifier carried through planning and logging.
    """
    segs = tuple(segments)
    if not segs:
        raise DegenerateSegment("path needs at least one segment")
    cum = []
    total = 0.0
    for i, seg in enumerate(segs):
        if i > 0:
            prev_end = segs[i - 1].pose_at(segs[i - 1].length)
            start = seg.pose_at(0.0)
            gap = math.hypot(start.x - prev_end.x, start.y - prev_end.y)
            if gap > CONTINUITY_TOL:
                raise DiscontinuousPath(
                    f"path {path_id}: segment {i} starts {gap:.3e} m away "
                    f"from the end of segment {i - 1}"
                )
        total += seg.length
        cum.append(total)
    return Path(path_id=path_id, segments=segs, cum_lengths=tuple(cum), length=total)


def _locate(path: Path, s: float) -> tuple[int, float]:
    """Segment index and local arc length for a global s."""
    idx = bisect_left(path.cum_lengths, s)
    if idx == len(path.segments):
        idx -= 1
    s0 = path.cum_lengths[idx - 1] if idx > 0 else 0.0
    return idx, s - s0


def pose_at(path: Path, s: float) -> Pose2:
    """Pose at arc length s from the path start.

    Raises OutOfRange unless 0 <= s <= path.length.
    """
    if not (0.0 <= s <= path.length):
        raise OutOfRange(f"s={s!r} outside [0, {path.length!r}] on path {path.path_id}")
    idx, s_local = _locate(path, s)
    return path.segments[idx].pose_at(s_local)


def project(path: Path, x: float, y: float, hint_s: Optional[float] = None) -> PathProjection:
    """Project a world point onto the path.

    Searches every segment for the global nearest point. With hint_s the
    search is restricted to segments overlapping [hint_s - 2 m,
    hint_s + 2 m] of arc length, which pins the result to the expected
    branch where distinct parts of a path run close together. Distance
    ties resolve to the smaller s.
    """
    best: Optional[tuple[float, float]] = None  # (global s, distance)
    lo = hi = None
    if hint_s is not None:
        lo, hi = hint_s - HINT_WINDOW, hint_s + HINT_WINDOW
    for i, seg in enumerate(path.segments):
        s_start = path.cum_lengths[i - 1] if i > 0 else 0.0
        s_end = path.cum_lengths[i]
        if lo is not None and (s_end < lo or s_start > hi):
            continue
        s_local, dist = seg.project(x, y)
        s = s_start + s_local
        if best is None or dist < best[1] - 1e-15 or (abs(dist - best[1]) <= 1e-15 and s < best[0]):
            best = (s, dist)
    if best is None:
        # Hint window missed every segment; fall back to a full search.
        return project(path, x, y, hint_s=None)
    s, _ = best
    idx, s_local = _locate(path, s)
    seg = path.segments[idx]
    foot = seg.pose_at(s_local)
    tx, ty = math.cos(foot.yaw), math.sin(foot.yaw)
    lateral = tx * (y - foot.y) - ty * (x - foot.x)
    return PathProjection(
        s=s,
        lateral_error=lateral,
        path_yaw=foot.yaw,
        curvature=seg.curvature(s_local),
    )


def _distance_to(path: Path, x: float, y: float, s: float) -> float:
    p = pose_at(path, s)
    return math.hypot(x - p.x, y - p.y)


def align_to_merge(path_a: Path, path_b: Path, merge_xy: tuple[float, float]) -> tuple[Path, Path]:
    """Return copies of both paths sharing a longitudinal frame.

    The merge point must lie on both paths within MERGE_POINT_TOL. Path A
    keeps its own arc length as the shared coordinate (offset 0); path B
    receives the offset that makes s + merge_offset equal for the merge
    point on both paths.
    """
    mx, my = merge_xy
    pa = project(path_a, mx, my)
    pb = project(path_b, mx, my)
    da = _distance_to(path_a, mx, my, pa.s)
    db = _distance_to(path_b, mx, my, pb.s)
    if da > MERGE_POINT_TOL:
        raise MergePointNotOnPath(
            f"merge point {merge_xy} is {da:.3e} m from path {path_a.path_id}"
        )
    if db > MERGE_POINT_TOL:
        raise MergePointNotOnPath(
            f"merge point {merge_xy} is {db:.3e} m from path {path_b.path_id}"
        )
    return (
        replace(path_a, merge_offset=0.0),
        replace(path_b, merge_offset=pa.s - pb.s),
    )


def load_path_file(text: str, path_id: int = 0) -> Path:
    """Parse a path definition and build the Path.

    One segment per line, fields separated by whitespace, SI units:

        LINE x0 y0 x1 y1
        ARC  cx cy radius start_angle sweep

    '#' starts a comment; blank lines are ignored. Raises PathFileError
    with the offending line number on any parse problem and the usual
    geometry errors on invalid segments.
    """
    segments = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        fields = body.split()
        kind, args = fields[0], fields[1:]
        try:
            values = [float(a) for a in args]
        except ValueError:
            raise PathFileError(line_no, f"non-numeric field in {body!r}") from None
        if kind == "LINE":
            if len(values) != 4:
                raise PathFileError(line_no, "LINE takes 4 numbers: x0 y0 x1 y1")
            segments.append(Line(*values))
        elif kind == "ARC":
            if len(values) != 5:
                raise PathFileError(line_no, "ARC takes 5 numbers: cx cy radius start_angle sweep")
            segments.append(Arc(*values))
        else:
            raise PathFileError(line_no, f"unknown segment kind {kind!r}")
    if not segments:
        raise PathFileError(0, "file defines no segments")
    return build_path(segments, path_id=path_id)


def sample_polyline(path: Path, max_spacing: float = 0.05) -> list[tuple[float, float]]:
    """Points along the path no farther apart than max_spacing, for drawing."""
    n = max(2, int(math.ceil(path.length / max_spacing)) + 1)
    step = path.length / (n - 1)
    pts = []
    for i in range(n):
        p = pose_at(path, min(i * step, path.length))
        pts.append((p.x, p.y))
    return pts
