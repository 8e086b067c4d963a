"""Operator gateway over real sockets: handshake, framing, the
scene-then-state contract, command dispatch, and error replies."""

import base64
import os
import socket
import time

import pytest

from cavsim.errors import BindFailure
from cavsim.gateway import (OP_CLOSE, OP_PING, OP_PONG, OP_TEXT,
                            OperatorGateway, accept_key, encode_frame,
                            pop_frame)
from cavsim.harness import Experiment
from cavsim.protocol import (ErrorReply, ManualDrive, PauseCommand,
                             ReplayCommand, SceneFrame, StartCommand,
                             StateFrame, decode, encode)
from cavsim.scenario import parse_scenario


def small_config(tmp_path, duration=1.0):
    (tmp_path / "track.path").write_text("LINE 0.0 0.0 10.0 0.0\n")
    text = f"""
scale: 25
physics_dt: 0.01
planner_dt: 0.1
duration: {duration}
paths:
  track: track.path
idm:
  desk: {{u_max: 0.06, u_min: -0.12, v_max: 0.3, s_0: 0.09, T: 1.0}}
vehicles:
  - {{id: 1, path: track, p: 1.0, v: 0.3, idm: desk}}
"""
    return parse_scenario(text, base_dir=str(tmp_path), default_name="ui")


def wait_for(predicate, timeout=5.0, interval=0.01):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return True
        time.sleep(interval)
    return predicate()


class WSProbe:
    """Minimal masked client speaking just enough of the protocol."""

    def __init__(self, port, path="/"):
        self.sock = socket.create_connection(("127.0.0.1", port), timeout=5.0)
        key = base64.b64encode(os.urandom(16)).decode("ascii")
        request = (
            f"GET {path} HTTP/1.1\r\n"
            f"Host: 127.0.0.1:{port}\r\n"
            "Upgrade: websocket\r\n"
            "Connection: Upgrade\r\n"
            f"Sec-WebSocket-Key: {key}\r\n"
            "Sec-WebSocket-Version: 13\r\n"
            "\r\n"
        )
        self.sock.sendall(request.encode("ascii"))
        raw = bytearray()
        while b"\r\n\r\n" not in raw:
            chunk = self.sock.recv(4096)
            if not chunk:
                raise AssertionError("connection closed during handshake")
            raw += chunk
        head, _, rest = bytes(raw).partition(b"\r\n\r\n")
        self.response = head.decode("latin-1")
        self.buf = bytearray(rest)
        self.sent_key = key

    def send_frame(self, opcode, payload):
        self.sock.sendall(encode_frame(opcode, payload, mask=True))

    def send_message(self, message):
        self.send_frame(OP_TEXT, encode(message))

    def recv_frame(self, timeout=3.0):
        self.sock.settimeout(timeout)
        while True:
            frame = pop_frame(self.buf)
            if frame is not None:
                return frame
            try:
                data = self.sock.recv(65536)
            except socket.timeout:
                return None
            if not data:
                return None
            self.buf += data

    def recv_until(self, predicate, timeout=5.0):
        """Decoded text messages until one satisfies the predicate."""
        deadline = time.monotonic() + timeout
        seen = []
        while time.monotonic() < deadline:
            frame = self.recv_frame(timeout=0.5)
            if frame is None:
                continue
            opcode, _, payload = frame
            if opcode != OP_TEXT:
                continue
            message = decode(payload)
            seen.append(message)
            if predicate(message):
                return message, seen
        raise AssertionError(f"no matching message, saw {seen!r}")

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass


class TestFraming:
    def test_accept_key_reference_vector(self):
        # the sample handshake pair from the protocol specification
        assert (accept_key("dGhlIHNhbXBsZSBub25jZQ==")
                == "s3pPLMBiTxaQ9kYGzzhZRbK+xOo=")

    @pytest.mark.parametrize("size", [0, 5, 125, 126, 200, 65535, 65536, 70000])
    def test_frame_round_trip_all_length_classes(self, size):
        payload = bytes(i % 251 for i in range(size))
        for mask in (False, True):
            buf = bytearray(encode_frame(OP_TEXT, payload, mask=mask))
            opcode, fin, out = pop_frame(buf)
            assert (opcode, fin) == (OP_TEXT, True)
            assert out == payload
            assert buf == bytearray()  # fully consumed

    def test_pop_frame_waits_for_complete_frame(self):
        whole = encode_frame(OP_TEXT, b"hello state frame")
        buf = bytearray()
        for cut in range(len(whole) - 1):
            buf = bytearray(whole[: cut + 1])
            assert pop_frame(buf) is None
        buf = bytearray(whole)
        assert pop_frame(buf) == (OP_TEXT, True, b"hello state frame")

    def test_pop_frame_consumes_only_one(self):
        buf = bytearray(encode_frame(OP_TEXT, b"one")
                        + encode_frame(OP_TEXT, b"two"))
        assert pop_frame(buf)[2] == b"one"
        assert pop_frame(buf)[2] == b"two"
        assert pop_frame(buf) is None


class TestGateway:
    def setup_method(self):
        self.exp = None
        self.gateway = None
        self.probes = []

    def teardown_method(self):
        for probe in self.probes:
            probe.close()
        if self.gateway is not None:
            self.gateway.stop()
        if self.exp is not None:
            self.exp.stop()
            self.exp.join(5.0)

    def serve(self, tmp_path, duration=1.0, realtime=True, frame_hz=20.0):
        self.exp = Experiment(small_config(tmp_path, duration),
                              realtime=realtime)
        self.gateway = OperatorGateway(self.exp, port=0, frame_hz=frame_hz)
        self.gateway.start()
        return self.gateway

    def connect(self):
        probe = WSProbe(self.gateway.port)
        self.probes.append(probe)
        return probe

    def test_handshake_and_scene_first(self, tmp_path):
        self.serve(tmp_path)
        probe = self.connect()
        status = probe.response.splitlines()[0]
        assert "101" in status
        accept = [line.split(":", 1)[1].strip()
                  for line in probe.response.splitlines()
                  if line.lower().startswith("sec-websocket-accept")]
        assert accept == [accept_key(probe.sent_key)]
        opcode, _, payload = probe.recv_frame()
        assert opcode == OP_TEXT
        scene = decode(payload)
        assert isinstance(scene, SceneFrame)
        assert [v.vehicle_id for v in scene.vehicles] == [1]
        assert len(scene.paths) == 1
        assert wait_for(lambda: self.gateway.client_count == 1)

    def test_handshake_refused_without_upgrade(self, tmp_path):
        self.serve(tmp_path)
        sock = socket.create_connection(("127.0.0.1", self.gateway.port),
                                        timeout=3.0)
        sock.sendall(b"GET / HTTP/1.1\r\nHost: x\r\n\r\n")
        reply = sock.recv(4096)
        assert reply.startswith(b"HTTP/1.1 400")
        sock.close()
        assert self.gateway.client_count == 0

    def test_state_frames_flow_at_rate(self, tmp_path):
        self.serve(tmp_path, frame_hz=20.0)
        probe = self.connect()
        t0 = time.monotonic()
        count = 0
        states = set()
        while time.monotonic() - t0 < 0.55:
            frame = probe.recv_frame(timeout=0.5)
            if frame is None:
                continue
            message = decode(frame[2])
            if isinstance(message, StateFrame):
                count += 1
                states.add(message.state)
                assert [v.vehicle_id for v in message.vehicles] == [1]
        # contract floor is 10 Hz; at 20 Hz over 0.55 s allow jitter
        assert count >= 6
        assert states == {"idle"}

    def test_start_runs_experiment_to_completion(self, tmp_path):
        self.serve(tmp_path, duration=0.5)
        probe = self.connect()
        probe.send_message(StartCommand())
        message, _ = probe.recv_until(
            lambda m: isinstance(m, StateFrame) and m.state == "complete",
            timeout=8.0)
        assert message.clock == pytest.approx(0.5)
        assert self.exp.error is None

    def test_pause_and_resume_via_commands(self, tmp_path):
        self.serve(tmp_path, duration=2.0)
        probe = self.connect()
        probe.send_message(StartCommand())
        probe.recv_until(
            lambda m: isinstance(m, StateFrame) and m.state == "running")
        probe.send_message(PauseCommand())
        paused, _ = probe.recv_until(
            lambda m: isinstance(m, StateFrame) and m.state == "paused")
        time.sleep(0.3)
        later, _ = probe.recv_until(lambda m: isinstance(m, StateFrame))
        assert later.state == "paused"
        assert later.clock == paused.clock  # frozen while paused
        probe.send_message(StartCommand())  # start while paused resumes
        probe.recv_until(
            lambda m: isinstance(m, StateFrame) and m.state == "running")

    def test_manual_drive_held_stops_vehicle(self, tmp_path):
        self.serve(tmp_path, duration=30.0)
        probe = self.connect()
        probe.send_message(StartCommand())
        probe.recv_until(
            lambda m: isinstance(m, StateFrame) and m.state == "running")
        probe.send_message(ManualDrive(vehicle_id=1, steer=0.0, throttle=-1.0))
        message, _ = probe.recv_until(
            lambda m: isinstance(m, StateFrame) and m.vehicles
            and m.vehicles[0].handbrake == 1 and m.vehicles[0].v < 0.005,
            timeout=8.0)
        assert message.vehicles[0].u_d == -1.0

    def test_invalid_commands_answered_never_fatal(self, tmp_path):
        self.serve(tmp_path)
        probe = self.connect()
        # garbage payload
        probe.send_frame(OP_TEXT, b"{broken")
        message, _ = probe.recv_until(lambda m: isinstance(m, ErrorReply))
        # well-formed command for a vehicle that does not exist
        probe.send_message(ManualDrive(vehicle_id=42, steer=0.0, throttle=0.0))
        message, _ = probe.recv_until(lambda m: isinstance(m, ErrorReply))
        assert "42" in message.message
        # command the source cannot perform: experiments do not replay
        probe.send_message(ReplayCommand())
        message, _ = probe.recv_until(lambda m: isinstance(m, ErrorReply))
        assert "not available" in message.message
        # a telemetry message is not a command at all
        probe.send_frame(OP_TEXT, encode(ErrorReply(message="echo?")))
        message, _ = probe.recv_until(lambda m: isinstance(m, ErrorReply)
                                      and "not an operator command" in m.message)
        # connection still serves state frames after all of that
        probe.recv_until(lambda m: isinstance(m, StateFrame))
        assert self.gateway.client_count == 1

    def test_ping_answered_with_pong(self, tmp_path):
        self.serve(tmp_path)
        probe = self.connect()
        probe.send_frame(OP_PING, b"heartbeat")
        deadline = time.monotonic() + 3.0
        while time.monotonic() < deadline:
            frame = probe.recv_frame(timeout=0.5)
            if frame and frame[0] == OP_PONG:
                assert frame[2] == b"heartbeat"
                break
        else:
            raise AssertionError("no pong")

    def test_close_frame_ends_connection(self, tmp_path):
        self.serve(tmp_path)
        probe = self.connect()
        assert wait_for(lambda: self.gateway.client_count == 1)
        probe.send_frame(OP_CLOSE, b"")
        deadline = time.monotonic() + 3.0
        saw_close = False
        while time.monotonic() < deadline:
            frame = probe.recv_frame(timeout=0.5)
            if frame is None:
                break
            if frame[0] == OP_CLOSE:
                saw_close = True
                break
        assert saw_close
        assert wait_for(lambda: self.gateway.client_count == 0)

    def test_two_clients_both_served(self, tmp_path):
        self.serve(tmp_path)
        a = self.connect()
        b = self.connect()
        assert wait_for(lambda: self.gateway.client_count == 2)
        a.recv_until(lambda m: isinstance(m, StateFrame))
        b.recv_until(lambda m: isinstance(m, StateFrame))

    def test_port_already_bound(self, tmp_path):
        self.serve(tmp_path)
        with pytest.raises(BindFailure):
            OperatorGateway(self.exp, port=self.gateway.port)
