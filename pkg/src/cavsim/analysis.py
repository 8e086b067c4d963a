"""Run logs and the measurements taken on them.

One LogRecord per vehicle per planner tick, written as CSV with
round-trip decimal rendering so a parsed log reproduces the run's
floats bit for bit. The helpers here are what the experiment scripts
and the acceptance checks share: column extraction, a centered moving
average, and the coarse event sequence of a merge scenario (who queued,
who merged, who finished, in what order).
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import CorruptLog, EmptySeries, InvariantViolation, OutOfRange
from .protocol import _render_number

_COLUMNS = ("t", "vehicle_id", "p", "x", "y", "yaw", "v", "u_d", "steer",
            "gas", "brake", "handbrake")
_HEADER = ",".join(_COLUMNS)


@dataclass(frozen=True)
class LogRecord:
    """State and command of one vehicle at the end of one planner tick."""

    t: float
    vehicle_id: int
    p: float      # merge-aligned front bumper arc length (planner state)
    x: float
    y: float
    yaw: float
    v: float
    u_d: float
    steer: float
    gas: float
    brake: float
    handbrake: int


def render_record(rec: LogRecord) -> str:
    parts = []
    for col in _COLUMNS:
        value = getattr(rec, col)
        parts.append(str(value) if isinstance(value, int)
                     else _render_number(value))
    return ",".join(parts)


class LogWriter:
    """Streams records to a CSV file, header first."""

    def __init__(self, fh):
        self._fh = fh
        self._fh.write(_HEADER + "\n")

    def write(self, rec: LogRecord):
        self._fh.write(render_record(rec) + "\n")

    def close(self):
        self._fh.close()


def write_log(records: Iterable[LogRecord], file_path):
    with open(file_path, "w", encoding="utf-8", newline="") as fh:
        writer = LogWriter(fh)
        for rec in records:
            writer.write(rec)


def read_log(file_path) -> list[LogRecord]:
    """Parse a log file, checking schema and clock monotonicity.

    Raises CorruptLog with the offending 1-based line number when the
    header or a row does not match the schema, or when t decreases
    (globally) or fails to increase strictly per vehicle.
    """
    with open(file_path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _HEADER:
        raise CorruptLog(1, f"expected header {_HEADER!r}")
    records: list[LogRecord] = []
    last_t = None
    last_per_vehicle: dict[int, float] = {}
    for line_no, line in enumerate(lines[1:], start=2):
        if not line:
            raise CorruptLog(line_no, "blank line inside the log")
        parts = line.split(",")
        if len(parts) != len(_COLUMNS):
            raise CorruptLog(
                line_no, f"expected {len(_COLUMNS)} fields, got {len(parts)}")
        try:
            rec = LogRecord(
                t=float(parts[0]),
                vehicle_id=int(parts[1]),
                p=float(parts[2]), x=float(parts[3]), y=float(parts[4]),
                yaw=float(parts[5]), v=float(parts[6]), u_d=float(parts[7]),
                steer=float(parts[8]), gas=float(parts[9]),
                brake=float(parts[10]), handbrake=int(parts[11]),
            )
        except ValueError as e:
            raise CorruptLog(line_no, f"bad field: {e}") from None
        if rec.handbrake not in (0, 1):
            raise CorruptLog(line_no, f"handbrake must be 0 or 1, got {rec.handbrake}")
        if last_t is not None and rec.t < last_t:
            raise CorruptLog(line_no, f"t went backwards: {rec.t} after {last_t}")
        prev = last_per_vehicle.get(rec.vehicle_id)
        if prev is not None and rec.t <= prev:
            raise CorruptLog(
                line_no,
                f"vehicle {rec.vehicle_id}: t must increase strictly, "
                f"{rec.t} after {prev}")
        last_t = rec.t
        last_per_vehicle[rec.vehicle_id] = rec.t
        records.append(rec)
    return records


def by_vehicle(records: Iterable[LogRecord]) -> dict[int, list[LogRecord]]:
    out: dict[int, list[LogRecord]] = {}
    for rec in records:
        out.setdefault(rec.vehicle_id, []).append(rec)
    return out


def series(records: Iterable[LogRecord], field: str) -> list[tuple[float, float]]:
    """(t, value) pairs of one column, in log order."""
    if field not in _COLUMNS:
        raise OutOfRange(f"unknown log column {field!r}")
    return [(rec.t, float(getattr(rec, field))) for rec in records]


def moving_average(samples: Sequence[tuple[float, float]],
                   window: float) -> list[tuple[float, float]]:
    """Centered moving average over a time window.

    Every output sample at t0 averages the input values whose timestamps
    satisfy |t - t0| <= window / 2 (closed on both sides); near the ends
    of the series the window simply truncates. Timestamps must increase
    strictly.
    """
    if not (window > 0.0):
        raise OutOfRange(f"window must be positive, got {window!r}")
    if len(samples) == 0:
        raise EmptySeries("moving_average needs at least one sample")
    times = [t for t, _ in samples]
    for a, b in zip(times, times[1:]):
        if not b > a:
            raise InvariantViolation(
                f"sample times must increase strictly: {b} after {a}")
    values = [v for _, v in samples]
    half = window / 2.0
    out = []
    for t0 in times:
        lo = bisect_left(times, t0 - half)
        hi = bisect_right(times, t0 + half)
        chunk = values[lo:hi]
        out.append((t0, sum(chunk) / len(chunk)))
    return out


# ---------------------------------------------------------------------------
# event sequences


@dataclass(frozen=True)
class EventSequence:
    """Scale-free summary of a merge scenario run.

    queued: vehicles in the order their speed first fell below the
    threshold. merged: vehicles in the order their front bumper first
    reached the aligned merge position of their path pair. completed:
    vehicles in the order they stopped being logged (ran off their
    path). Orders break timestamp ties by vehicle id.
    """

    queued: tuple[int, ...]
    merged: tuple[int, ...]
    completed: tuple[int, ...]


def extract_events(records: Sequence[LogRecord], merge_position: float,
                   stop_speed: float) -> EventSequence:
    per = by_vehicle(records)
    queued = []
    merged = []
    completed = []
    for vid, recs in per.items():
        stop = next((r.t for r in recs if r.v < stop_speed), None)
        if stop is not None:
            queued.append((stop, vid))
        cross = next((r.t for r in recs if r.p >= merge_position), None)
        if cross is not None:
            merged.append((cross, vid))
        completed.append((recs[-1].t, vid))
    return EventSequence(
        queued=tuple(vid for _, vid in sorted(queued)),
        merged=tuple(vid for _, vid in sorted(merged)),
        completed=tuple(vid for _, vid in sorted(completed)),
    )
