"""Experiment orchestration: planner ticks against simulated vehicles.

The mainframe side of a run. Every planner tick it snapshots the
vehicle states, updates the yield bookkeeping, plans one IDM step per
vehicle, emits waypoints, and hands the physics to either an in-process
VehicleRuntime per vehicle or a separate simulator process over the
wire. Both execution modes drive the same runtime class with the same
message payloads, and the logged yaw passes through the quaternion
encoding in both, so a loss-free networked run writes byte-identical
logs to an in-process run of the same scenario.

Collision monitoring runs on planner states every tick: same-path
bumper gaps must stay positive, and bodies on merging paths must not
overlap once the overlap reaches the shared lane. A violation aborts
the run with CollisionDetected.
"""

from __future__ import annotations

import math
import os
import re
import threading
import time
from dataclasses import dataclass
from random import Random
from typing import Mapping, Optional

from .analysis import LogRecord, LogWriter
from .bridge import CommandClient, StreamClient, StreamServer
from .errors import (CavsimError, CollisionDetected, InvariantViolation,
                     OutOfRange, SimulatorUnreachable)
from .geometry import pose_at, project, sample_polyline
from .planner import PlannerState, find_predecessor, idm_accel, plan_step, update_yield
from .planner import emit_waypoint as _emit_waypoint
from .protocol import (ActuatorReport, ErrorReply, InitMessage, PathGeometry,
                       ResetSignal, SceneFrame, ScenePoly, SceneVehicle,
                       SessionSetup, TelemetryRow, TickDone, TickTrigger,
                       TransformReport, WaypointCommand, quaternion_to_yaw,
                       yaw_to_quaternion)
from .scenario import ScenarioConfig, VehicleSpec, spawn_vehicles
from .simulator import VehicleRuntime, gains_to_params, prefab_from_params, runtime_from_init

#: Speed below which a vehicle with a leader counts as queued, at the
#: reference 1:25 scale; scaled by 25/scale for other scales.
STOP_SPEED_DESK = 0.01


@dataclass(frozen=True)
class ExperimentStatus:
    """Coarse run state for operator consoles and scripts."""

    state: str                    # idle | running | paused | complete
    clock: float                  # s, last completed tick
    vehicles: Mapping[int, str]   # id -> queued | driving | yielding | complete


class _Slot:
    """Mutable per-vehicle bookkeeping inside an experiment."""

    def __init__(self, spec: VehicleSpec, path, path_index: int,
                 planner: PlannerState, init: InitMessage,
                 runtime: Optional[VehicleRuntime]):
        self.spec = spec
        self.path = path
        self.path_index = path_index
        self.planner = planner
        self.init = init
        self.runtime = runtime
        self.active = True
        self.manual: Optional[tuple[float, float]] = None
        self.leader_kind: Optional[str] = None  # None | "real" | "virtual"
        self.status = "driving"
        self.latest: Optional[LogRecord] = None


def _logged_yaw(yaw: float) -> float:
    # Yaw reaches the log through its quaternion encoding in both
    # execution modes; round-tripping here keeps them byte-identical.
    return quaternion_to_yaw(yaw_to_quaternion(yaw))


class Experiment:
    """One scenario wired up and ready to run.

    mode "in_process" executes controller and physics in this process;
    "networked" talks to a simulator over the command/stream channels.
    run() blocks until the scenario completes and returns the records of
    that run; start_background()/pause()/resume()/reset() expose the
    same loop to an operator gateway. command_loss injects Bernoulli
    datagram loss on the outgoing command channel for robustness tests.
    """

    def __init__(self, config: ScenarioConfig, mode: str = "in_process",
                 log_dir: Optional[str] = None, sim_host: str = "127.0.0.1",
                 cmd_port: int = 9870, stream_port: int = 9871,
                 realtime: bool = False, command_loss: float = 0.0,
                 loss_seed: int = 0, stop_speed: Optional[float] = None):
        if mode not in ("in_process", "networked"):
            raise InvariantViolation(f"unknown mode {mode!r}")
        if not (0.0 <= command_loss < 1.0):
            raise InvariantViolation("command_loss must lie in [0, 1)")
        self.config = config
        self.mode = mode
        self.log_dir = log_dir
        self.sim_host = sim_host
        self.cmd_port = cmd_port
        self.stream_port = stream_port
        self.realtime = realtime
        self.command_loss = command_loss
        self._loss_rng = Random(loss_seed)
        self.stop_speed = (STOP_SPEED_DESK * 25.0 / config.scale
                           if stop_speed is None else stop_speed)

        self._path_order = config.path_order()
        self._paths = [config.paths[pid] for pid in self._path_order]
        self._merge_map = config.merge_map()
        self._rules = config.yield_rules
        self._specs = {s.vehicle_id: s for s in config.vehicles}
        self._check_prefabs()

        self._lock = threading.Lock()
        self._state = "idle"
        self._tick = 0
        self._ticks_total = int(round(config.duration / config.planner_dt))
        self._slots: dict[int, _Slot] = {}
        self._pause_requested = False
        self._reset_requested = False
        self._stop_requested = False
        self._control: list[tuple] = []
        self._writer: Optional[LogWriter] = None
        self._records: list[LogRecord] = []
        self._records_expected = 0
        self._stream: Optional[StreamClient] = None
        self._cmd: Optional[CommandClient] = None
        self._thread: Optional[threading.Thread] = None
        self.error: Optional[CavsimError] = None
        self.run_index = 0
        self._setup()

    # -- construction -------------------------------------------------

    def _check_prefabs(self):
        seen: dict[str, object] = {}
        for spec in self.config.vehicles:
            prev = seen.get(spec.appearance)
            if prev is not None and prev != spec.params:
                raise InvariantViolation(
                    f"appearance {spec.appearance!r} is used with two "
                    f"different vehicle parameter blocks")
            seen[spec.appearance] = spec.params

    def _setup(self):
        initial = spawn_vehicles(self.config)
        slots: dict[int, _Slot] = {}
        for st in initial:
            spec = self._specs[st.vehicle_id]
            path = self.config.paths[spec.path_id]
            index = self._path_order.index(spec.path_id)
            raw = st.p - path.merge_offset
            pose = pose_at(path, raw)
            init = InitMessage(
                vehicle_id=st.vehicle_id,
                algorithm="stanley",
                controller_params=gains_to_params(
                    spec.stanley, spec.longitudinal, index, raw),
                initial_state=(pose.x, pose.y, pose.yaw, st.v),
                appearance=spec.appearance,
            )
            runtime = (runtime_from_init(init, self._paths, spec.params)
                       if self.mode == "in_process" else None)
            slot = _Slot(spec, path, index, st, init, runtime)
            slot.latest = LogRecord(
                t=0.0, vehicle_id=st.vehicle_id, p=st.p, x=pose.x, y=pose.y,
                yaw=_logged_yaw(pose.yaw), v=st.v, u_d=0.0, steer=0.0,
                gas=0.0, brake=0.0, handbrake=0,
            )
            slots[st.vehicle_id] = slot
        with self._lock:
            self._slots = slots
            self._tick = 0
            self._records = []
            self._records_expected = 0

    def _open_writer(self):
        if self.log_dir is None:
            self._writer = None
            return
        os.makedirs(self.log_dir, exist_ok=True)
        taken = [
            int(m.group(1))
            for name in os.listdir(self.log_dir)
            if (m := re.fullmatch(r"run-(\d+)\.csv", name))
        ]
        self.run_index = max(taken, default=0) + 1
        self.log_path = os.path.join(self.log_dir, f"run-{self.run_index:03d}.csv")
        self._writer = LogWriter(open(self.log_path, "w", encoding="utf-8",
                                      newline=""))

    # -- public control surface ---------------------------------------

    @property
    def state(self) -> str:
        with self._lock:
            return self._state

    @property
    def clock(self) -> float:
        with self._lock:
            return self._tick * self.config.planner_dt

    def status(self) -> ExperimentStatus:
        with self._lock:
            return ExperimentStatus(
                state=self._state,
                clock=self._tick * self.config.planner_dt,
                vehicles={vid: slot.status
                          for vid, slot in sorted(self._slots.items())},
            )

    def telemetry(self) -> tuple[float, str, list[TelemetryRow]]:
        """Latest per-vehicle log values for a console, plus the clock."""
        with self._lock:
            rows = []
            for vid in sorted(self._slots):
                slot = self._slots[vid]
                rec = slot.latest
                rows.append(TelemetryRow(
                    vehicle_id=vid, status=slot.status, p=rec.p, x=rec.x,
                    y=rec.y, yaw=rec.yaw, v=rec.v, u_d=rec.u_d,
                    steer=rec.steer, gas=rec.gas, brake=rec.brake,
                    handbrake=rec.handbrake,
                ))
            return self._tick * self.config.planner_dt, self._state, rows

    def scene(self) -> SceneFrame:
        polys = tuple(
            ScenePoly(path_id=pid, points=tuple(sample_polyline(self.config.paths[pid])))
            for pid in self._path_order
        )
        vehicles = tuple(
            SceneVehicle(vehicle_id=vid, appearance=slot.spec.appearance,
                         length=slot.spec.params.length)
            for vid, slot in sorted(self._slots.items())
        )
        return SceneFrame(paths=polys, vehicles=vehicles)

    def pause(self):
        self._pause_requested = True

    def resume(self):
        self._pause_requested = False

    def reset(self):
        """Roll back to the initial state; a running loop restarts at t=0."""
        if self.state == "running" or self.state == "paused":
            self._reset_requested = True
            self._pause_requested = False
        else:
            self._setup()
            with self._lock:
                self._state = "idle"
                self.error = None

    def stop(self):
        self._stop_requested = True
        self._pause_requested = False

    def manual_drive(self, vehicle_id: int, steer: float, throttle: float):
        """Hand one vehicle to the operator from the next planner tick on."""
        if self.mode != "in_process":
            raise InvariantViolation("manual drive requires in_process mode")
        if not (-1.0 <= steer <= 1.0 and -1.0 <= throttle <= 1.0):
            raise InvariantViolation("manual axes must lie in [-1, 1]")
        with self._lock:
            slot = self._slots.get(vehicle_id)
            if slot is None:
                raise InvariantViolation(f"unknown vehicle {vehicle_id}")
            if not slot.active:
                raise InvariantViolation(f"vehicle {vehicle_id} already completed")
            self._control.append(("manual", vehicle_id, steer, throttle))

    def release_manual(self, vehicle_id: int):
        with self._lock:
            if vehicle_id not in self._slots:
                raise InvariantViolation(f"unknown vehicle {vehicle_id}")
            self._control.append(("release", vehicle_id))

    def start_background(self) -> threading.Thread:
        """run() on a daemon thread; collisions land in self.error."""
        if self.state not in ("idle", "complete"):
            raise InvariantViolation(f"cannot start while {self.state}")

        def _target():
            try:
                self.run()
            except CavsimError as e:
                self.error = e

        self._thread = threading.Thread(target=_target, daemon=True,
                                        name="experiment")
        self._thread.start()
        return self._thread

    def join(self, timeout: Optional[float] = None):
        if self._thread is not None:
            self._thread.join(timeout)

    # -- the run loop --------------------------------------------------

    def run(self) -> list[LogRecord]:
        """Execute the scenario once; blocks until complete.

        Returns this run's records. Raises CollisionDetected on a
        monitor abort (partial logs are flushed first) and
        SimulatorUnreachable when networked transport fails.
        """
        self._setup()
        self._stop_requested = False
        self._reset_requested = False
        self.error = None
        self._open_writer()
        if self.mode == "networked":
            self._net_open()
        try:
            self._loop()
        except CavsimError:
            # a dead loop must not keep reporting "running" to consoles
            with self._lock:
                self._state = "failed"
            raise
        finally:
            if self._writer is not None:
                self._writer.close()
                self._writer = None
            self._net_close()
        if self._records_expected != len(self._records):
            raise InvariantViolation(
                f"log reconciliation failed: expected {self._records_expected} "
                f"records, wrote {len(self._records)}")
        return list(self._records)

    def repeat(self) -> list[LogRecord]:
        """Fresh run of the same scenario; logs rotate to a new file."""
        if self.state in ("running", "paused"):
            raise InvariantViolation("cannot repeat while a run is active")
        return self.run()

    def _loop(self):
        dt = self.config.planner_dt
        with self._lock:
            self._state = "running"
        wall0 = time.monotonic()
        while True:
            if self._stop_requested:
                break
            if self._reset_requested:
                self._reset_requested = False
                if self._writer is not None:
                    self._writer.close()
                self._setup()
                self._open_writer()
                if self.mode == "networked":
                    self._net_reset()
                with self._lock:
                    self._state = "running"
                wall0 = time.monotonic()
                continue
            if self._pause_requested:
                with self._lock:
                    self._state = "paused"
                pause_start = time.monotonic()
                while self._pause_requested and not (self._stop_requested
                                                     or self._reset_requested):
                    time.sleep(0.005)
                wall0 += time.monotonic() - pause_start
                with self._lock:
                    self._state = "running"
                continue
            with self._lock:
                done = (self._tick >= self._ticks_total
                        or not any(s.active for s in self._slots.values()))
            if done:
                break
            self._apply_control()
            self._do_tick()
            with self._lock:
                t_now = self._tick * dt
            if self.realtime:
                lag = wall0 + t_now - time.monotonic()
                if lag > 0:
                    time.sleep(lag)
        with self._lock:
            self._state = "complete"
            for slot in self._slots.values():
                if not slot.active:
                    slot.status = "complete"

    def _apply_control(self):
        with self._lock:
            pending, self._control = self._control, []
        for op in pending:
            slot = self._slots.get(op[1])
            if slot is None or not slot.active or slot.runtime is None:
                continue
            if op[0] == "manual":
                _, vid, steer, throttle = op
                slot.manual = (steer, throttle)
                slot.runtime.set_manual(steer, throttle)
            elif op[0] == "release" and slot.manual is not None:
                slot.manual = None
                slot.runtime.release_manual()
                self._sync_from_physics(slot)

    def _sync_from_physics(self, slot: _Slot):
        st = slot.runtime.state
        proj = project(slot.path, st.x, st.y, hint_s=slot.runtime.hint_s)
        slot.planner = PlannerState(
            vehicle_id=slot.planner.vehicle_id,
            path_id=slot.planner.path_id,
            p=proj.s + slot.path.merge_offset,
            v=st.v,
            vehicle_length=slot.planner.vehicle_length,
        )

    def _do_tick(self):
        dt = self.config.planner_dt
        t_tick = self._tick * dt
        t_next = (self._tick + 1) * dt
        active = [self._slots[vid] for vid in sorted(self._slots)
                  if self._slots[vid].active]

        # Manual vehicles stay visible to the planner at their true pose.
        for slot in active:
            if slot.manual is not None:
                self._sync_from_physics(slot)

        snapshot = [slot.planner for slot in active]
        virtuals = [update_yield(rule, snapshot) for rule in self._rules]
        planned: dict[int, PlannerState] = {}
        for slot in active:
            vid = slot.planner.vehicle_id
            if slot.manual is not None:
                slot.leader_kind = None
                planned[vid] = slot.planner
                continue
            pred = find_predecessor(slot.planner, snapshot, virtuals,
                                    self._merge_map)
            if pred is None:
                slot.leader_kind = None
                u = idm_accel(slot.planner.v, math.inf, 0.0, slot.spec.idm)
            else:
                leader, gap, dv = pred
                slot.leader_kind = ("real" if isinstance(leader, PlannerState)
                                    else "virtual")
                u = idm_accel(slot.planner.v, gap, dv, slot.spec.idm)
            planned[vid] = plan_step(slot.planner, u, dt, slot.spec.idm)

        self._check_collisions(planned, active, t_next)

        waypoints: dict[int, object] = {}
        for slot in active:
            vid = slot.planner.vehicle_id
            slot.planner = planned[vid]
            if slot.manual is not None:
                continue
            try:
                waypoints[vid] = _emit_waypoint(slot.planner, slot.path, t_next)
            except OutOfRange:
                slot.active = False
                with self._lock:
                    slot.status = "complete"

        stepping = [slot for slot in active if slot.active]
        if self.mode == "in_process":
            finals = self._tick_in_process(stepping, waypoints)
        else:
            finals = self._tick_networked(stepping, waypoints, t_tick, t_next)

        with self._lock:
            for slot in stepping:
                vid = slot.planner.vehicle_id
                rec = finals[vid]
                rec = LogRecord(t=t_next, vehicle_id=vid, p=slot.planner.p,
                                x=rec.x, y=rec.y, yaw=rec.yaw, v=rec.v,
                                u_d=rec.u_d, steer=rec.steer, gas=rec.gas,
                                brake=rec.brake, handbrake=rec.handbrake)
                self._records.append(rec)
                self._records_expected += 1
                if self._writer is not None:
                    self._writer.write(rec)
                slot.latest = rec
                slot.status = self._status_of(slot, rec)
            # Clock and rows advance together: telemetry() must never pair
            # tick t+1 rows with a clock still reading t.
            self._tick += 1

    def _status_of(self, slot: _Slot, rec: LogRecord) -> str:
        if not slot.active:
            return "complete"
        if slot.leader_kind == "virtual":
            return "yielding"
        if slot.leader_kind == "real" and rec.v < self.stop_speed:
            return "queued"
        return "driving"

    def _check_collisions(self, planned, active, t: float):
        slots = sorted(active, key=lambda s: s.planner.vehicle_id)
        states = [planned[s.planner.vehicle_id] for s in slots]
        for i in range(len(states)):
            for j in range(i + 1, len(states)):
                a, b = states[i], states[j]
                if a.path_id == b.path_id:
                    lead, tail = (a, b) if a.p >= b.p else (b, a)
                    gap = lead.p - tail.p - lead.vehicle_length
                    if gap <= 0.0:
                        raise CollisionDetected(
                            t, tuple(sorted((a.vehicle_id, b.vehicle_id))))
                else:
                    merge = self._merge_map.merge_start(a.path_id, b.path_id)
                    if merge is None:
                        continue
                    overlap_hi = min(a.p, b.p)
                    overlap_lo = max(a.p - a.vehicle_length,
                                     b.p - b.vehicle_length)
                    shared_from = merge - min(a.vehicle_length,
                                              b.vehicle_length)
                    if overlap_hi >= overlap_lo and overlap_hi > shared_from:
                        raise CollisionDetected(
                            t, tuple(sorted((a.vehicle_id, b.vehicle_id))))

    # -- in-process execution ------------------------------------------

    def _tick_in_process(self, stepping, waypoints) -> dict[int, LogRecord]:
        for slot in stepping:
            vid = slot.planner.vehicle_id
            if vid in waypoints:
                slot.runtime.apply_waypoint(waypoints[vid])
        finals = {}
        for _ in range(self.config.substeps):
            for slot in stepping:
                finals[slot.planner.vehicle_id] = slot.runtime.substep(
                    self.config.physics_dt)
        out = {}
        for slot in stepping:
            vid = slot.planner.vehicle_id
            res = finals[vid]
            st = res.state
            out[vid] = LogRecord(
                t=0.0, vehicle_id=vid, p=0.0, x=st.x, y=st.y,
                yaw=_logged_yaw(st.yaw), v=st.v, u_d=res.u_d,
                steer=res.u.steer, gas=res.u.gas, brake=res.u.brake,
                handbrake=res.u.handbrake,
            )
        return out

    # -- networked execution -------------------------------------------

    def _net_open(self):
        try:
            self._stream = StreamClient(self.sim_host, self.stream_port,
                                        timeout=1.0)
        except OSError as e:
            raise SimulatorUnreachable(
                f"cannot connect to simulator stream at "
                f"{self.sim_host}:{self.stream_port}: {e}") from None
        self._cmd = CommandClient(self.sim_host, self.cmd_port)
        self._net_session()

    def _net_session(self):
        config = self.config
        session = SessionSetup(
            scale=config.scale,
            physics_dt=config.physics_dt,
            substeps=config.substeps,
            paths=tuple(PathGeometry(path_id=pid,
                                     segments=config.paths[pid].segments)
                        for pid in self._path_order),
            prefabs={slot.spec.appearance: prefab_from_params(slot.spec.params)
                     for slot in self._slots.values()},
        )
        self._stream.send(session)
        self._net_handshake()

    def _net_reset(self):
        self._stream.send(ResetSignal())
        self._net_handshake()

    def _net_handshake(self):
        """Announce every vehicle until its transform comes back."""
        pending = set(self._slots)
        deadline = time.monotonic() + 5.0
        self._stream.settimeout(0.05)
        while pending:
            if time.monotonic() > deadline:
                raise SimulatorUnreachable(
                    f"simulator never acknowledged vehicles {sorted(pending)}")
            for vid in sorted(pending):
                self._send_datagram(self._slots[vid].init)
            burst = time.monotonic() + 0.2
            while pending and time.monotonic() < burst:
                msg = self._stream.recv()
                if isinstance(msg, TransformReport) and msg.vehicle_id in pending:
                    pending.discard(msg.vehicle_id)

    def _net_close(self):
        if self._stream is not None:
            self._stream.close()
            self._stream = None
        if self._cmd is not None:
            self._cmd.close()
            self._cmd = None

    def _send_datagram(self, message):
        if self.command_loss > 0.0 and self._loss_rng.random() < self.command_loss:
            return
        self._cmd.send(message)

    def _tick_networked(self, stepping, waypoints, t_tick, t_next):
        for vid in sorted(waypoints):
            wp = waypoints[vid]
            self._send_datagram(WaypointCommand(
                vehicle_id=vid, t_stamp=wp.t_stamp, x=wp.x, y=wp.y,
                yaw=wp.yaw, speed=wp.speed))
        self._stream.send(TickTrigger(
            t=t_tick,
            expected=tuple((vid, t_next) for vid in sorted(waypoints)),
        ))
        transforms: dict[int, TransformReport] = {}
        reports: dict[int, ActuatorReport] = {}
        deadline = time.monotonic() + 10.0
        self._stream.settimeout(0.5)
        while True:
            msg = self._stream.recv()
            if msg is None:
                if time.monotonic() > deadline:
                    raise SimulatorUnreachable(
                        f"no tick completion from simulator for t={t_tick}")
                continue
            if isinstance(msg, TransformReport):
                transforms[msg.vehicle_id] = msg
            elif isinstance(msg, ActuatorReport):
                reports[msg.vehicle_id] = msg
            elif isinstance(msg, TickDone) and msg.t == t_tick:
                break
        out = {}
        for slot in stepping:
            vid = slot.planner.vehicle_id
            tr = transforms.get(vid)
            act = reports.get(vid)
            if tr is None or act is None:
                raise SimulatorUnreachable(
                    f"simulator reported no state for vehicle {vid} at t={t_next}")
            out[vid] = LogRecord(
                t=0.0, vehicle_id=vid, p=0.0,
                x=tr.position[0], y=tr.position[1],
                yaw=quaternion_to_yaw(tr.rotation),
                v=act.v, u_d=act.u_d, steer=act.steer, gas=act.gas,
                brake=act.brake, handbrake=act.handbrake,
            )
        return out


class LogReplayer:
    """Plays a recorded run back for consoles and stream subscribers.

    Groups records by tick and advances through them at wall-clock pace
    (scaled by speed), so an attached console renders the run exactly as
    the live values were logged. With a stream_port the recorded poses
    also go out as transform reports on a stream channel, one group per
    tick, which lets transform consumers watch a replay like a live
    simulator. Replay knows nothing beyond the log: the scene carries no
    track geometry, only the vehicles.
    """

    def __init__(self, records: list[LogRecord], speed: float = 1.0,
                 stream_port: Optional[int] = None, host: str = "127.0.0.1"):
        if not records:
            raise InvariantViolation("replay needs at least one record")
        if not (speed > 0.0 and math.isfinite(speed)):
            raise InvariantViolation(f"replay speed must be positive, got {speed!r}")
        self.speed = speed
        groups: dict[float, list[LogRecord]] = {}
        for rec in records:
            groups.setdefault(rec.t, []).append(rec)
        self._groups = sorted(groups.items())
        self._last_t = {rec.vehicle_id: rec.t for rec in records}
        self._lock = threading.Lock()
        self._latest: dict[int, LogRecord] = {}
        self._clock = 0.0
        self._state = "idle"
        self._restart = False
        self._stop = False
        self._thread: Optional[threading.Thread] = None
        self._stream: Optional[StreamServer] = None
        if stream_port is not None:
            self._stream = StreamServer(stream_port, self._reject_control,
                                        host=host)
            self._stream.start()

    @staticmethod
    def _reject_control(message, reply):
        reply(ErrorReply(message="replay stream is read-only"))

    @property
    def stream_port(self) -> Optional[int]:
        return self._stream.port if self._stream is not None else None

    @property
    def tick_groups(self) -> int:
        return len(self._groups)

    def scene(self) -> SceneFrame:
        vehicles = tuple(
            SceneVehicle(vehicle_id=vid, appearance="replay", length=0.0)
            for vid in sorted(self._last_t)
        )
        return SceneFrame(paths=(), vehicles=vehicles)

    def telemetry(self) -> tuple[float, str, list[TelemetryRow]]:
        with self._lock:
            rows = []
            for vid in sorted(self._latest):
                rec = self._latest[vid]
                status = ("complete"
                          if self._clock >= self._last_t[vid] else "driving")
                rows.append(TelemetryRow(
                    vehicle_id=vid, status=status, p=rec.p, x=rec.x, y=rec.y,
                    yaw=rec.yaw, v=rec.v, u_d=rec.u_d, steer=rec.steer,
                    gas=rec.gas, brake=rec.brake, handbrake=rec.handbrake,
                ))
            return self._clock, self._state, rows

    @property
    def state(self) -> str:
        with self._lock:
            return self._state

    @property
    def clock(self) -> float:
        with self._lock:
            return self._clock

    def replay_restart(self):
        self._restart = True

    def start_background(self) -> threading.Thread:
        self._thread = threading.Thread(target=self._run, daemon=True,
                                        name="replay")
        self._thread.start()
        return self._thread

    def stop(self):
        self._stop = True
        if self._stream is not None:
            self._stream.stop()

    def join(self, timeout: Optional[float] = None):
        if self._thread is not None:
            self._thread.join(timeout)

    def _run(self):
        while not self._stop:
            self._restart = False
            with self._lock:
                self._state = "running"
                self._latest = {}
                self._clock = 0.0
            t0 = self._groups[0][0]
            wall0 = time.monotonic()
            for t, recs in self._groups:
                if self._stop or self._restart:
                    break
                lag = wall0 + (t - t0) / self.speed - time.monotonic()
                if lag > 0:
                    time.sleep(lag)
                with self._lock:
                    self._clock = t
                    for rec in recs:
                        self._latest[rec.vehicle_id] = rec
                if self._stream is not None:
                    for rec in recs:
                        self._stream.broadcast(TransformReport(
                            vehicle_id=rec.vehicle_id, t_stamp=rec.t,
                            position=(rec.x, rec.y, 0.0),
                            rotation=yaw_to_quaternion(rec.yaw)))
            if self._restart:
                continue
            with self._lock:
                self._state = "complete"
            return
