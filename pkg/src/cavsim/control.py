"""Waypoint tracking: steering law, longitudinal regulator, throttle map.

Sign conventions, chosen so the closed loop is stable in this package's
right-handed world frame (positive steer turns counterclockwise):

* heading error psi_e = path heading minus vehicle heading, wrapped;
* cross-track error y_e is positive when the vehicle sits to the RIGHT of
  the path tangent (the negative of the projection's lateral_error);
* desired yaw rate is curvature times speed.

With those definitions the steering command is

    delta = (psi_e - k_a * v * yaw_rate)
            + atan(k_e * y_e / (k_s + v))
            - k_y * (yaw_rate - yaw_rate_desired)

clamped to the steering limit. The longitudinal regulator turns the
along-track error to the commanded waypoint into a normalized drive level
u_d in [-1, 1], which the throttle map splits into gas, brake and
handbrake. Strong reverse demand (u_d <= -0.5) engages the handbrake
alone; otherwise exactly one of gas/brake is positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .dynamics import ActuatorInput, VehicleState
from .errors import NonFiniteInput, OutOfRange
from .geometry import PathProjection, wrap_angle


@dataclass(frozen=True)
class Waypoint:
    """One timestamped tracking target on a path."""

    t_stamp: float
    x: float
    y: float
    yaw: float
    speed: float  # m/s, >= 0

    def __post_init__(self):
        for name in ("t_stamp", "x", "y", "yaw", "speed"):
            if not math.isfinite(getattr(self, name)):
                raise NonFiniteInput(f"Waypoint.{name} is not finite")
        if self.speed < 0.0:
            raise OutOfRange("Waypoint.speed must be >= 0")


@dataclass(frozen=True)
class StanleyGains:
    k_a: float = 0.05  # s^2/m, yaw-rate damping on the heading term
    k_e: float = 2.0   # 1/s, cross-track stiffness
    k_y: float = 0.1   # s, yaw-rate tracking damping
    k_s: float = 0.1   # m/s, softening speed in the cross-track term


@dataclass(frozen=True)
class LongitudinalGains:
    kp: float = 2.0
    ki: float = 0.1
    kd: float = 0.05
    k_ff: float = 1.0
    integrator_limit: float = 1.0  # clamp on the accumulated error, m*s


@dataclass(frozen=True)
class ThrottleTriple:
    gas: float       # [0, 1]
    brake: float     # [0, 1]
    handbrake: int   # 0 or 1


def stanley_law(psi_e: float, y_e: float, yaw_rate: float, yaw_rate_d: float,
                v: float, gains: StanleyGains) -> float:
    """The raw steering law on explicit error inputs, unclamped."""
    heading_term = psi_e - gains.k_a * v * yaw_rate
    cross_term = math.atan(gains.k_e * y_e / (gains.k_s + v))
    damping = gains.k_y * (yaw_rate - yaw_rate_d)
    return heading_term + cross_term - damping


def stanley_steer(state: VehicleState, proj: PathProjection, desired: Waypoint,
                  gains: StanleyGains, max_steer: float) -> float:
    """Steering command toward the projected path point.

    Lateral control keys off the path geometry at the projection; the
    waypoint argument fixes the longitudinal target and is consumed by
    the longitudinal regulator.
    """
    psi_e = wrap_angle(proj.path_yaw - state.yaw)
    y_e = -proj.lateral_error
    yaw_rate_d = proj.curvature * state.v
    delta = stanley_law(psi_e, y_e, state.yaw_rate, yaw_rate_d, state.v, gains)
    return min(max(delta, -max_steer), max_steer)


class LongitudinalController:
    """PI-D regulator with feedforward on the speed deficit.

    Holds one vehicle's integrator and previous error, so each vehicle
    needs its own instance. The along-track error is the projection of
    (waypoint - vehicle) onto the local path tangent, positive when the
    target is ahead.
    """

    def __init__(self, gains: LongitudinalGains = LongitudinalGains()):
        self.gains = gains
        self.integral = 0.0
        self._prev_error = None

    def reset(self):
        self.integral = 0.0
        self._prev_error = None

    def longitudinal_command(self, state: VehicleState, proj: PathProjection,
                             desired: Waypoint, dt: float) -> float:
        if not (math.isfinite(dt) and dt > 0.0):
            raise OutOfRange(f"dt must be positive and finite, got {dt!r}")
        tx, ty = math.cos(proj.path_yaw), math.sin(proj.path_yaw)
        e = (desired.x - state.x) * tx + (desired.y - state.y) * ty
        g = self.gains
        limit = abs(g.integrator_limit)
        self.integral = min(max(self.integral + e * dt, -limit), limit)
        de = 0.0 if self._prev_error is None else (e - self._prev_error) / dt
        self._prev_error = e
        u = g.kp * e + g.ki * self.integral + g.kd * de + g.k_ff * (desired.speed - state.v)
        return min(max(u, -1.0), 1.0)


def throttle_map(u_d: float) -> ThrottleTriple:
    """Split a normalized drive level into gas/brake/handbrake.

    Handbrake engages exactly when u_d <= -0.5 and then suppresses both
    pedals; otherwise at most one pedal is active.
    """
    if not math.isfinite(u_d):
        raise NonFiniteInput("u_d is not finite")
    if not (-1.0 <= u_d <= 1.0):
        raise OutOfRange(f"u_d must lie in [-1, 1], got {u_d!r}")
    h = 1 if u_d <= -0.5 else 0
    brake = max(0.0, -u_d) * (1 - h)
    gas = max(0.0, u_d) * (1 - h)
    return ThrottleTriple(gas=gas, brake=brake, handbrake=h)


class VehicleController:
    """One vehicle's tracking stack: steering plus pedals from a waypoint."""

    def __init__(self, stanley: StanleyGains, longitudinal: LongitudinalGains,
                 max_steer: float):
        self.stanley = stanley
        self.max_steer = max_steer
        self.longitudinal = LongitudinalController(longitudinal)

    def reset(self):
        self.longitudinal.reset()

    def command(self, state: VehicleState, proj: PathProjection,
                desired: Waypoint, dt: float) -> tuple[ActuatorInput, float]:
        """Actuator command and the underlying drive level u_d."""
        steer = stanley_steer(state, proj, desired, self.stanley, self.max_steer)
        u_d = self.longitudinal.longitudinal_command(state, proj, desired, dt)
        triple = throttle_map(u_d)
        u = ActuatorInput(steer=steer, gas=triple.gas, brake=triple.brake,
                          handbrake=triple.handbrake)
        return u, u_d
