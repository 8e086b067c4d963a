"""Shared error taxonomy.

Every failure the library raises deliberately derives from CavsimError so
callers can fence off library faults from programming errors.
"""


class CavsimError(Exception):
    """Base class for all errors raised by this package."""


# geometry

class DegenerateSegment(CavsimError):
    """Segment with no usable extent (zero length, zero radius, zero sweep)."""


class DiscontinuousPath(CavsimError):
    """Consecutive segments do not join within the continuity tolerance."""


class OutOfRange(CavsimError):
    """A scalar argument lies outside its documented domain."""


class MergePointNotOnPath(CavsimError):
    """Claimed merge point does not lie on one of the paths."""


class PathFileError(CavsimError):
    """Path definition file could not be parsed."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


# dynamics / control

class NonFiniteInput(CavsimError):
    """NaN or infinity where a finite number is required."""


class InvariantViolation(CavsimError):
    """A declared invariant of a type or operation was violated."""


# behavior planning

class NonPositiveGap(CavsimError):
    """Bumper-to-bumper gap is zero or negative: a collision has occurred."""


# wire protocol

class MalformedMessage(CavsimError):
    """Message bytes are not a well-formed encoded object."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class UnknownType(CavsimError):
    """Well-formed object whose type tag is not recognized."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class RangeError(CavsimError):
    """Well-formed message with a field value outside its legal range."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class BindFailure(CavsimError):
    """A network service could not bind its address."""


# experiment harness

class ParseError(CavsimError):
    """Scenario file is syntactically or structurally invalid."""


class UnknownReference(CavsimError):
    """Scenario references a named block that does not exist."""


class PathTooShort(CavsimError):
    """Requested vehicle placement does not fit on the path."""


class SimulatorUnreachable(CavsimError):
    """Networked run could not reach the simulator endpoint."""


class CollisionDetected(CavsimError):
    """Two vehicle bodies overlapped; the experiment is aborted."""

    def __init__(self, t: float, vehicle_ids: tuple):
        super().__init__(f"collision at t={t:.3f}s between vehicles {vehicle_ids}")
        self.t = t
        self.vehicle_ids = vehicle_ids


class CorruptLog(CavsimError):
    """Log file violates the log schema."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class EmptySeries(CavsimError):
    """An operation over a time series received no samples."""
