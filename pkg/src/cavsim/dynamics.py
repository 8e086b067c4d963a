"""Kinematic bicycle with a longitudinal force balance.

The same parameter set describes a full-size vehicle (scale 1) or a
scaled testbed model (scale n): lengths shrink by n, mass by n, forces by
n^2 and the handbrake deceleration by n, while angles and the time base
stay put. Accelerations then scale by 1/n and the nondimensional motion
is identical at every scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvariantViolation, NonFiniteInput, OutOfRange
from .geometry import wrap_angle


@dataclass(frozen=True)
class VehicleParams:
    mass: float              # kg
    wheelbase: float         # m
    length: float            # m, bumper to bumper
    max_steer: float         # rad, symmetric steering limit
    max_drive_force: float   # N at gas = 1
    max_brake_force: float   # N at brake = 1
    handbrake_decel: float   # m/s^2 while the handbrake is set
    drag_coeff: float        # N s^2/m^2
    rolling_resist: float    # N while moving
    scale: float = 1.0       # 1 = full size, 25 = 1:25 testbed

    def __post_init__(self):
        for name in ("mass", "wheelbase", "length", "max_steer", "scale"):
            if not getattr(self, name) > 0.0:
                raise InvariantViolation(f"VehicleParams.{name} must be positive")
        for name in ("max_drive_force", "max_brake_force", "handbrake_decel",
                     "drag_coeff", "rolling_resist"):
            if getattr(self, name) < 0.0:
                raise InvariantViolation(f"VehicleParams.{name} must be non-negative")


@dataclass(frozen=True)
class VehicleState:
    x: float
    y: float
    yaw: float       # rad, (-pi, pi]
    v: float         # m/s, >= 0
    yaw_rate: float  # rad/s
    t: float         # s


@dataclass(frozen=True)
class ActuatorInput:
    steer: float      # rad, clamped to +-max_steer by step()
    gas: float        # [0, 1]
    brake: float      # [0, 1]
    handbrake: int    # 0 or 1

    def __post_init__(self):
        for name in ("steer", "gas", "brake"):
            if not math.isfinite(getattr(self, name)):
                raise NonFiniteInput(f"ActuatorInput.{name} is not finite")
        if not (0.0 <= self.gas <= 1.0 and 0.0 <= self.brake <= 1.0):
            raise InvariantViolation("gas and brake must lie in [0, 1]")
        if self.handbrake not in (0, 1):
            raise InvariantViolation("handbrake must be 0 or 1")
        # The throttle map never commands drive and brake together.
        if self.gas > 0.0 and self.brake > 0.0:
            raise InvariantViolation("gas and brake cannot both be positive")


def default_params(scale: float = 1.0) -> VehicleParams:
    """Stock parameter set at the requested scale.

    Full-size baseline: 1500 kg, 2.7 m wheelbase, 4.5 m body.
    """
    if not (isinstance(scale, (int, float)) and scale > 0.0):
        raise OutOfRange(f"scale must be positive, got {scale!r}")
    s = float(scale)
    return VehicleParams(
        mass=1500.0 / s,
        wheelbase=2.7 / s,
        length=4.5 / s,
        max_steer=0.55,
        max_drive_force=4000.0 / (s * s),
        max_brake_force=8000.0 / (s * s),
        handbrake_decel=6.0 / s,
        drag_coeff=0.4,
        rolling_resist=120.0 / (s * s),
        scale=s,
    )


def step(state: VehicleState, u: ActuatorInput, params: VehicleParams, dt: float) -> VehicleState:
    """Advance one step of dt seconds, semi-implicit Euler.

    Speed integrates first from the force balance, then yaw from the new
    speed, then position along the new heading. Resistive forces act only
    while the vehicle moves, and speed clamps at zero, so braking can
    never push the vehicle backwards or wedge it there.
    """
    for name in ("x", "y", "yaw", "v", "yaw_rate", "t"):
        if not math.isfinite(getattr(state, name)):
            raise NonFiniteInput(f"VehicleState.{name} is not finite")
    if not (math.isfinite(dt) and dt > 0.0):
        raise OutOfRange(f"dt must be positive and finite, got {dt!r}")

    if u.handbrake:
        # Handbrake overrides drive entirely.
        v1 = max(0.0, state.v - params.handbrake_decel * dt)
    else:
        accel = u.gas * params.max_drive_force / params.mass
        if state.v > 0.0:
            resist = (
                u.brake * params.max_brake_force
                + params.rolling_resist
                + params.drag_coeff * state.v * state.v
            )
            accel -= resist / params.mass
        v1 = max(0.0, state.v + accel * dt)

    steer = min(max(u.steer, -params.max_steer), params.max_steer)
    yaw_rate1 = v1 * math.tan(steer) / params.wheelbase
    yaw1 = wrap_angle(state.yaw + yaw_rate1 * dt)
    return VehicleState(
        x=state.x + v1 * math.cos(yaw1) * dt,
        y=state.y + v1 * math.sin(yaw1) * dt,
        yaw=yaw1,
        v=v1,
        yaw_rate=yaw_rate1,
        t=state.t + dt,
    )
