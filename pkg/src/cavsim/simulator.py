"""Vehicle simulator: controller plus physics behind the wire protocol.

The mainframe plans; this side tracks. Each registered vehicle owns a
controller instance and an integrator state, and advances in fixed
physics substeps between planner ticks. VehicleRuntime is the whole
per-vehicle execution, and the in-process harness drives the very same
class directly, so a networked run and an in-process run integrate
identical arithmetic in identical order.

SimulatorServer wraps the runtimes with the two transport endpoints:
init and waypoint commands arrive by datagram, session setup and tick
triggers on the stream connection, and every physics substep publishes
one transform per vehicle back to all subscribers.
"""

from __future__ import annotations

import queue
import threading
import time
from dataclasses import dataclass
from typing import Optional

from .bridge import CommandServer, StreamServer
from .control import (LongitudinalGains, StanleyGains, ThrottleTriple,
                      VehicleController, Waypoint, throttle_map)
from .dynamics import ActuatorInput, VehicleParams, VehicleState, step
from .errors import CavsimError
from .geometry import Path, build_path, project
from .protocol import (ActuatorReport, ErrorReply, InitMessage, ResetSignal,
                       SessionSetup, TickDone, TickTrigger, TransformReport,
                       WaypointCommand, transform_for)

#: Default grace for late waypoints before a tick integrates without them.
WAYPOINT_TIMEOUT = 0.05


@dataclass(frozen=True)
class SubstepResult:
    """State after one physics substep plus the inputs that produced it."""

    state: VehicleState
    u: ActuatorInput
    u_d: float


class VehicleRuntime:
    """One vehicle's controller and physics, stepped in substeps.

    The runtime keeps tracking its last waypoint until a newer one
    arrives. Waypoints are absolute poses, so running a tick on a stale
    waypoint parks the vehicle at the old target instead of drifting,
    which is what makes lossy command delivery survivable.
    """

    def __init__(self, vehicle_id: int, path: Path, params: VehicleParams,
                 stanley: StanleyGains, longitudinal: LongitudinalGains,
                 state: VehicleState, hint_s: Optional[float] = None):
        self.vehicle_id = vehicle_id
        self.path = path
        self.params = params
        self.controller = VehicleController(stanley, longitudinal, params.max_steer)
        self.state = state
        self.hint_s = hint_s
        self.waypoint: Optional[Waypoint] = None
        self.manual: Optional[tuple[float, float]] = None  # (steer frac, throttle)

    def apply_waypoint(self, wp: Waypoint):
        self.waypoint = wp

    def set_manual(self, steer: float, throttle: float):
        self.manual = (steer, throttle)

    def release_manual(self):
        """Drop the manual override and rebase tracking on the current pose.

        The integrator restarts from zero and the projection hint moves to
        wherever the operator actually left the vehicle, so the resumed
        planner sees a fresh controller rather than one mid-windup.
        """
        self.manual = None
        self.controller.reset()
        proj = project(self.path, self.state.x, self.state.y, hint_s=None)
        self.hint_s = proj.s

    def substep(self, dt: float) -> SubstepResult:
        if self.manual is not None:
            steer_frac, throttle = self.manual
            steer = steer_frac * self.params.max_steer
            triple = throttle_map(throttle)
            u = ActuatorInput(steer=steer, gas=triple.gas, brake=triple.brake,
                              handbrake=triple.handbrake)
            u_d = throttle
        elif self.waypoint is None:
            # Nothing commanded yet: coast on resistive forces alone.
            u = ActuatorInput(steer=0.0, gas=0.0, brake=0.0, handbrake=0)
            u_d = 0.0
        else:
            proj = project(self.path, self.state.x, self.state.y,
                           hint_s=self.hint_s)
            self.hint_s = proj.s
            u, u_d = self.controller.command(self.state, proj, self.waypoint, dt)
        self.state = step(self.state, u, self.params, dt)
        return SubstepResult(state=self.state, u=u, u_d=u_d)

    def run_tick(self, substeps: int, dt: float) -> list[SubstepResult]:
        return [self.substep(dt) for _ in range(substeps)]


def _params_from_prefab(block) -> VehicleParams:
    fields = ("mass", "wheelbase", "length", "max_steer", "max_drive_force",
              "max_brake_force", "handbrake_decel", "drag_coeff",
              "rolling_resist", "scale")
    missing = [f for f in fields if f not in block]
    if missing:
        raise CavsimError(f"prefab is missing {', '.join(missing)}")
    return VehicleParams(**{f: float(block[f]) for f in fields})


def prefab_from_params(params: VehicleParams) -> dict[str, float]:
    """Flat wire form of a parameter block, inverse of the init path."""
    return {
        "mass": params.mass,
        "wheelbase": params.wheelbase,
        "length": params.length,
        "max_steer": params.max_steer,
        "max_drive_force": params.max_drive_force,
        "max_brake_force": params.max_brake_force,
        "handbrake_decel": params.handbrake_decel,
        "drag_coeff": params.drag_coeff,
        "rolling_resist": params.rolling_resist,
        "scale": params.scale,
    }


def gains_to_params(stanley: StanleyGains, longitudinal: LongitudinalGains,
                    path_index: int, path_s: float) -> dict[str, float]:
    """controller_params payload for an init message."""
    return {
        "k_a": stanley.k_a, "k_e": stanley.k_e, "k_y": stanley.k_y,
        "k_s": stanley.k_s,
        "kp": longitudinal.kp, "ki": longitudinal.ki, "kd": longitudinal.kd,
        "k_ff": longitudinal.k_ff,
        "integrator_limit": longitudinal.integrator_limit,
        "path": float(path_index),
        "path_s": path_s,
    }


def runtime_from_init(msg: InitMessage, paths: list[Path],
                      params: VehicleParams) -> VehicleRuntime:
    """Build the runtime an init message describes.

    Shared by the networked simulator and the in-process harness: both
    construct vehicles through the same init payload, so gain routing
    cannot drift between modes.
    """
    cp = msg.controller_params
    stanley = StanleyGains(
        k_a=cp.get("k_a", StanleyGains.k_a),
        k_e=cp.get("k_e", StanleyGains.k_e),
        k_y=cp.get("k_y", StanleyGains.k_y),
        k_s=cp.get("k_s", StanleyGains.k_s),
    )
    longitudinal = LongitudinalGains(
        kp=cp.get("kp", LongitudinalGains.kp),
        ki=cp.get("ki", LongitudinalGains.ki),
        kd=cp.get("kd", LongitudinalGains.kd),
        k_ff=cp.get("k_ff", LongitudinalGains.k_ff),
        integrator_limit=cp.get("integrator_limit",
                                LongitudinalGains.integrator_limit),
    )
    path_index = int(cp.get("path", 0))
    if not (0 <= path_index < len(paths)):
        raise CavsimError(f"init references path index {path_index} "
                          f"but the session has {len(paths)} paths")
    x, y, yaw, v = msg.initial_state
    state = VehicleState(x=x, y=y, yaw=yaw, v=v, yaw_rate=0.0, t=0.0)
    return VehicleRuntime(
        vehicle_id=msg.vehicle_id,
        path=paths[path_index],
        params=params,
        stanley=stanley,
        longitudinal=longitudinal,
        state=state,
        hint_s=cp.get("path_s"),
    )


class SimulatorServer:
    """Standalone simulator process core.

    start() binds the two channels and spins the control loop; the loop
    applies init/waypoint datagrams at tick boundaries, waits briefly
    for the waypoints a tick trigger declares, integrates the substeps,
    and publishes transforms, actuator echoes and a tick_done marker.
    """

    def __init__(self, cmd_port: int = 9870, stream_port: int = 9871,
                 host: str = "127.0.0.1",
                 waypoint_timeout: float = WAYPOINT_TIMEOUT):
        self._commands: "queue.Queue" = queue.Queue()
        self._control: "queue.Queue" = queue.Queue()
        self.command_server = CommandServer(cmd_port, self._commands.put, host)
        self.stream_server = StreamServer(
            stream_port,
            lambda msg, reply: self._control.put((msg, reply)),
            host,
        )
        self._waypoint_timeout = waypoint_timeout
        self.session: Optional[SessionSetup] = None
        self.paths: list[Path] = []
        self.vehicles: dict[int, VehicleRuntime] = {}
        self.rejected_inits = 0
        self._last_sent: dict[int, float] = {}
        self._running = False
        self._thread: Optional[threading.Thread] = None

    @property
    def cmd_port(self) -> int:
        return self.command_server.port

    @property
    def stream_port(self) -> int:
        return self.stream_server.port

    def start(self):
        self.command_server.start()
        self.stream_server.start()
        self._running = True
        self._thread = threading.Thread(target=self._loop, daemon=True,
                                        name="simulator")
        self._thread.start()

    def stop(self):
        self._running = False
        if self._thread is not None:
            self._thread.join(timeout=2.0)
            self._thread = None
        self.stream_server.stop()
        self.command_server.stop()

    def join(self):
        """Block until stopped; the CLI front end parks here."""
        while self._running:
            time.sleep(0.2)

    # -- control loop -------------------------------------------------

    def _loop(self):
        while self._running:
            try:
                msg, reply = self._control.get(timeout=0.1)
            except queue.Empty:
                self._drain_commands()
                continue
            try:
                if isinstance(msg, SessionSetup):
                    self._configure(msg)
                elif isinstance(msg, TickTrigger):
                    if self.session is None:
                        reply(ErrorReply(message="tick before session setup"))
                    else:
                        self._execute_tick(msg)
                elif isinstance(msg, ResetSignal):
                    self._reset()
                else:
                    reply(ErrorReply(
                        message=f"unexpected message on the stream channel: "
                                f"{type(msg).__name__}"))
            except CavsimError as e:
                reply(ErrorReply(message=str(e)))

    def _configure(self, session: SessionSetup):
        # build first: a bad path must not leave a half-applied session
        paths = [build_path(pg.segments, path_id=i)
                 for i, pg in enumerate(session.paths)]
        self.session = session
        self.paths = paths
        self.vehicles.clear()
        self._last_sent.clear()
        self.command_server.reset_stale_tracking()

    def _reset(self):
        self.vehicles.clear()
        self._last_sent.clear()
        self.command_server.reset_stale_tracking()

    def _drain_commands(self):
        while True:
            try:
                msg = self._commands.get_nowait()
            except queue.Empty:
                return
            self._apply_command(msg)

    def _apply_command(self, msg):
        if isinstance(msg, InitMessage):
            self._handle_init(msg)
        elif isinstance(msg, WaypointCommand):
            rt = self.vehicles.get(msg.vehicle_id)
            if rt is not None:
                rt.apply_waypoint(Waypoint(t_stamp=msg.t_stamp, x=msg.x,
                                           y=msg.y, yaw=msg.yaw,
                                           speed=msg.speed))

    def _handle_init(self, msg: InitMessage):
        if self.session is None or msg.algorithm != "stanley":
            self.rejected_inits += 1
            return
        prefab = self.session.prefabs.get(msg.appearance)
        if prefab is None:
            self.rejected_inits += 1
            return
        try:
            rt = runtime_from_init(msg, self.paths, _params_from_prefab(prefab))
        except CavsimError:
            self.rejected_inits += 1
            return
        fresh = msg.vehicle_id not in self.vehicles
        self.vehicles[msg.vehicle_id] = rt
        if fresh:
            # Announce the spawn so the mainframe can stop re-sending init.
            self._publish_transform(rt)

    def _publish_transform(self, rt: VehicleRuntime):
        s = rt.state
        last = self._last_sent.get(rt.vehicle_id)
        if last is not None and s.t <= last:
            return
        self._last_sent[rt.vehicle_id] = s.t
        self.stream_server.broadcast(
            transform_for(rt.vehicle_id, s.t, s.x, s.y, s.yaw))

    def _execute_tick(self, trigger: TickTrigger):
        self._drain_commands()
        deadline = time.monotonic() + self._waypoint_timeout
        while not self._expected_ready(trigger.expected):
            remaining = deadline - time.monotonic()
            if remaining <= 0.0:
                break
            try:
                msg = self._commands.get(timeout=min(0.005, remaining))
            except queue.Empty:
                continue
            self._apply_command(msg)

        session = self.session
        ordered = [self.vehicles[vid] for vid in sorted(self.vehicles)]
        finals: dict[int, SubstepResult] = {}
        for _ in range(session.substeps):
            for rt in ordered:
                finals[rt.vehicle_id] = rt.substep(session.physics_dt)
                self._publish_transform(rt)
        for rt in ordered:
            res = finals[rt.vehicle_id]
            self.stream_server.broadcast(ActuatorReport(
                vehicle_id=rt.vehicle_id,
                t_stamp=res.state.t,
                v=res.state.v,
                u_d=res.u_d,
                steer=res.u.steer,
                gas=res.u.gas,
                brake=res.u.brake,
                handbrake=res.u.handbrake,
            ))
        self.stream_server.broadcast(TickDone(t=trigger.t))

    def _expected_ready(self, expected) -> bool:
        for vid, stamp in expected:
            rt = self.vehicles.get(vid)
            if rt is None or rt.waypoint is None or rt.waypoint.t_stamp < stamp:
                return False
        return True
