"""Vehicle dynamics tests.

The terminal-speed expectation is frozen from a bisection oracle on the
force balance, independent of the integrator.
"""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavsim.dynamics import ActuatorInput, VehicleState, default_params, step
from cavsim.errors import InvariantViolation, NonFiniteInput, OutOfRange


def coast_params(scale=1.0):
    """Frictionless variant for exact-arithmetic checks."""
    p = default_params(scale)
    return type(p)(
        mass=p.mass, wheelbase=p.wheelbase, length=p.length,
        max_steer=p.max_steer, max_drive_force=p.max_drive_force,
        max_brake_force=p.max_brake_force, handbrake_decel=p.handbrake_decel,
        drag_coeff=0.0, rolling_resist=0.0, scale=p.scale,
    )


def at_rest(v=0.0):
    return VehicleState(x=0.0, y=0.0, yaw=0.0, v=v, yaw_rate=0.0, t=0.0)


IDLE = ActuatorInput(steer=0.0, gas=0.0, brake=0.0, handbrake=0)


def terminal_speed_oracle(params, gas, lo=0.0, hi=200.0):
    """Bisection on gas*F_drive = rolling + drag*v^2."""
    def residual(v):
        return gas * params.max_drive_force - params.rolling_resist - params.drag_coeff * v * v
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if residual(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestDefaults:
    def test_full_scale(self):
        p = default_params(1)
        assert p.wheelbase == 2.7
        assert p.length == 4.5

    def test_testbed_scale(self):
        p = default_params(25)
        assert p.wheelbase == pytest.approx(0.108)
        assert p.length == pytest.approx(0.18)
        assert p.mass == pytest.approx(60.0)

    def test_bad_scale(self):
        with pytest.raises(OutOfRange):
            default_params(0)


class TestActuatorInput:
    def test_mutual_exclusion(self):
        with pytest.raises(InvariantViolation):
            ActuatorInput(steer=0.0, gas=0.5, brake=0.5, handbrake=0)

    def test_range_checks(self):
        with pytest.raises(InvariantViolation):
            ActuatorInput(steer=0.0, gas=1.5, brake=0.0, handbrake=0)
        with pytest.raises(InvariantViolation):
            ActuatorInput(steer=0.0, gas=0.0, brake=0.0, handbrake=2)
        with pytest.raises(NonFiniteInput):
            ActuatorInput(steer=float("nan"), gas=0.0, brake=0.0, handbrake=0)


class TestStep:
    def test_straight_advance_exact(self):
        # Zero curvature: yaw untouched, x advances v*dt with no friction.
        s1 = step(at_rest(v=1.0), IDLE, coast_params(), 0.01)
        assert s1.yaw == 0.0
        assert s1.x == pytest.approx(0.01, abs=1e-15)
        assert s1.v == 1.0

    def test_coasting_speed_strictly_decreases(self):
        params = default_params(1)
        s = at_rest(v=5.0)
        for _ in range(100):
            s1 = step(s, IDLE, params, 0.01)
            assert s1.v < s.v or (s.v == 0.0 and s1.v == 0.0)
            s = s1

    def test_rest_is_equilibrium(self):
        s1 = step(at_rest(), IDLE, default_params(1), 0.01)
        assert s1.v == 0.0 and s1.x == 0.0 and s1.y == 0.0

    def test_brake_clamps_at_zero_and_releases(self):
        params = default_params(1)
        s = at_rest(v=0.5)
        hard_brake = ActuatorInput(steer=0.0, gas=0.0, brake=1.0, handbrake=0)
        for _ in range(200):
            s = step(s, hard_brake, params, 0.01)
        assert s.v == 0.0
        throttle = ActuatorInput(steer=0.0, gas=0.5, brake=0.0, handbrake=0)
        s = step(s, throttle, params, 0.01)
        assert s.v > 0.0

    @given(st.floats(0.0, 1.0), st.floats(0.0, 30.0))
    @settings(max_examples=100)
    def test_handbrake_never_accelerates(self, gas, v0):
        params = default_params(1)
        u = ActuatorInput(steer=0.0, gas=gas, brake=0.0, handbrake=1)
        s1 = step(at_rest(v=v0), u, params, 0.01)
        assert s1.v <= v0

    def test_handbrake_stops_from_low_speed(self):
        params = default_params(25)
        s = at_rest(v=0.3)
        u = ActuatorInput(steer=0.0, gas=0.0, brake=0.0, handbrake=1)
        for _ in range(200):
            s = step(s, u, params, 0.01)
        assert s.v == 0.0

    def test_steer_clamped(self):
        params = default_params(1)
        u = ActuatorInput(steer=10.0, gas=0.0, brake=0.0, handbrake=0)
        s1 = step(at_rest(v=10.0), u, params, 0.01)
        assert s1.yaw_rate == pytest.approx(s1.v * math.tan(params.max_steer) / params.wheelbase)

    def test_yaw_rate_formula(self):
        params = default_params(1)
        u = ActuatorInput(steer=0.2, gas=0.0, brake=0.0, handbrake=0)
        s1 = step(at_rest(v=10.0), u, coast_params(), 0.01)
        assert s1.yaw_rate == pytest.approx(s1.v * math.tan(0.2) / params.wheelbase)

    def test_non_finite_state_rejected(self):
        bad = VehicleState(x=float("inf"), y=0.0, yaw=0.0, v=0.0, yaw_rate=0.0, t=0.0)
        with pytest.raises(NonFiniteInput):
            step(bad, IDLE, default_params(1), 0.01)

    def test_bad_dt_rejected(self):
        with pytest.raises(OutOfRange):
            step(at_rest(), IDLE, default_params(1), 0.0)

    def test_deterministic(self):
        params = default_params(25)
        def run():
            s = at_rest(v=0.1)
            out = []
            for i in range(500):
                u = ActuatorInput(steer=0.1 * math.sin(i * 0.05), gas=0.3, brake=0.0, handbrake=0)
                s = step(s, u, params, 0.01)
                out.append((s.x, s.y, s.yaw, s.v))
            return out
        assert run() == run()


class TestTerminalSpeed:
    def test_converges_to_force_balance(self):
        params = default_params(1)
        gas = 0.1
        v_star = terminal_speed_oracle(params, gas)
        u = ActuatorInput(steer=0.0, gas=gas, brake=0.0, handbrake=0)
        s = at_rest(v=10.0)
        for _ in range(60000):
            s = step(s, u, params, 0.01)
        assert s.v == pytest.approx(v_star, rel=0.01)


class TestScaleInvariance:
    def test_nondimensional_trajectories_agree(self):
        # Identical control history at scale 1 and scale 25; positions and
        # speeds must match within 1e-9 relative once renormalized.
        n = 25.0
        pf, pt = default_params(1), default_params(25)
        sf = at_rest(v=5.0)
        st_ = at_rest(v=5.0 / n)
        for i in range(2000):
            steer = 0.3 * math.sin(i * 0.01)
            gas, brake = (0.4, 0.0) if i % 400 < 300 else (0.0, 0.6)
            uf = ActuatorInput(steer=steer, gas=gas, brake=brake, handbrake=0)
            sf = step(sf, uf, pf, 0.01)
            st_ = step(st_, uf, pt, 0.01)
        ref = max(abs(sf.x), abs(sf.y), 1e-3)
        assert abs(sf.x - n * st_.x) / ref < 1e-9
        assert abs(sf.y - n * st_.y) / ref < 1e-9
        assert abs(sf.v - n * st_.v) / max(sf.v, 1e-9) < 1e-9
        assert abs(sf.yaw - st_.yaw) < 1e-9
