"""Datagram command channel and stream broadcast channel.

The command channel is UDP: one encoded message per datagram, decoded
and delivered to a sink in arrival order, with a stale-drop rule for
waypoints and counters instead of crashes for malformed input.

The stream channel is TCP with newline-delimited messages. It fans out
simulation output to every subscriber through a bounded per-subscriber
egress buffer (slow readers get disconnected, the simulation never
blocks) and accepts inbound control messages, attributed to the
connection that sent them.
"""

from __future__ import annotations

import select
import socket
import threading
from typing import Callable, Optional

from .errors import BindFailure, CavsimError, MalformedMessage, RangeError, UnknownType
from .protocol import WaypointCommand, decode, encode

_DECODE_ERRORS = (MalformedMessage, UnknownType, RangeError)


class CommandServer:
    """UDP ingress for init and waypoint commands."""

    def __init__(self, port: int, sink: Callable, host: str = "127.0.0.1"):
        self._sink = sink
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        try:
            self._sock.bind((host, port))
        except OSError as e:
            self._sock.close()
            raise BindFailure(f"cannot bind udp {host}:{port}: {e}")
        self._sock.settimeout(0.1)
        self.malformed_count = 0
        self.stale_count = 0
        self.delivered_count = 0
        self._last_stamp: dict[int, float] = {}
        self._running = False
        self._thread: Optional[threading.Thread] = None

    @property
    def port(self) -> int:
        return self._sock.getsockname()[1]

    def start(self):
        self._running = True
        self._thread = threading.Thread(target=self._serve, daemon=True,
                                        name="command-server")
        self._thread.start()

    def stop(self):
        self._running = False
        if self._thread is not None:
            self._thread.join(timeout=2.0)
            self._thread = None
        self._sock.close()

    def reset_stale_tracking(self):
        self._last_stamp.clear()

    def _serve(self):
        while self._running:
            try:
                data, _ = self._sock.recvfrom(65536)
            except socket.timeout:
                continue
            except OSError:
                return
            try:
                message = decode(data)
            except _DECODE_ERRORS:
                self.malformed_count += 1
                continue
            if isinstance(message, WaypointCommand):
                last = self._last_stamp.get(message.vehicle_id)
                if last is not None and message.t_stamp < last:
                    self.stale_count += 1
                    continue
                self._last_stamp[message.vehicle_id] = message.t_stamp
            self.delivered_count += 1
            self._sink(message)


class CommandClient:
    """Fire-and-forget datagram sender for the command channel."""

    def __init__(self, host: str, port: int):
        self._addr = (host, port)
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)

    def send(self, message):
        self._sock.sendto(encode(message), self._addr)

    def close(self):
        self._sock.close()


class _Subscriber:
    def __init__(self, sock, addr):
        self.sock = sock
        self.addr = addr
        self.outbuf = bytearray()
        self.inbuf = bytearray()
        self.is_controller = False


class StreamServer:
    """TCP fan-out of simulator output plus inbound session control.

    control_sink(message, reply) is called for each decoded inbound
    message, on the service thread; reply(message) queues a response to
    that subscriber only. The first connection to send a session message
    becomes the controller; control messages from anyone else are
    answered with an error reply and dropped before the sink.
    """

    MAX_EGRESS = 1 << 20  # bytes per subscriber before disconnect

    def __init__(self, port: int, control_sink: Callable = None,
                 host: str = "127.0.0.1"):
        self._control_sink = control_sink
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            self._listener.bind((host, port))
        except OSError as e:
            self._listener.close()
            raise BindFailure(f"cannot bind tcp {host}:{port}: {e}")
        self._listener.listen(8)
        self._listener.setblocking(False)
        self._subs: list[_Subscriber] = []
        self._lock = threading.Lock()
        self._wake_r, self._wake_w = socket.socketpair()
        self._wake_r.setblocking(False)
        self._controller: Optional[_Subscriber] = None
        self._running = False
        self._thread: Optional[threading.Thread] = None

    @property
    def port(self) -> int:
        return self._listener.getsockname()[1]

    @property
    def subscriber_count(self) -> int:
        with self._lock:
            return len(self._subs)

    def start(self):
        self._running = True
        self._thread = threading.Thread(target=self._serve, daemon=True,
                                        name="stream-server")
        self._thread.start()

    def stop(self):
        self._running = False
        self._wake()
        if self._thread is not None:
            self._thread.join(timeout=2.0)
            self._thread = None
        with self._lock:
            for sub in self._subs:
                sub.sock.close()
            self._subs.clear()
        self._listener.close()
        self._wake_r.close()
        self._wake_w.close()

    def broadcast(self, message):
        """Queue one message to every connected subscriber."""
        data = encode(message)
        with self._lock:
            for sub in self._subs:
                sub.outbuf += data
        self._wake()

    def _send_to(self, sub, message):
        with self._lock:
            sub.outbuf += encode(message)
        self._wake()

    def _wake(self):
        try:
            self._wake_w.send(b"x")
        except OSError:
            pass

    def _drop(self, sub):
        with self._lock:
            if sub in self._subs:
                self._subs.remove(sub)
        if self._controller is sub:
            self._controller = None
        sub.sock.close()

    def _serve(self):
        while self._running:
            with self._lock:
                readers = [self._listener, self._wake_r] + [s.sock for s in self._subs]
                writers = [s.sock for s in self._subs if s.outbuf]
                by_sock = {s.sock: s for s in self._subs}
            try:
                rd, wr, _ = select.select(readers, writers, [], 0.1)
            except OSError:
                continue
            for sock in rd:
                if sock is self._wake_r:
                    try:
                        self._wake_r.recv(4096)
                    except OSError:
                        pass
                    continue
                if sock is self._listener:
                    try:
                        conn, addr = self._listener.accept()
                    except OSError:
                        continue
                    conn.setblocking(False)
                    with self._lock:
                        self._subs.append(_Subscriber(conn, addr))
                    continue
                sub = by_sock.get(sock)
                if sub is None:
                    continue
                try:
                    data = sock.recv(65536)
                except (BlockingIOError, InterruptedError):
                    continue
                except OSError:
                    self._drop(sub)
                    continue
                if not data:
                    self._drop(sub)
                    continue
                sub.inbuf += data
                self._consume_control(sub)
            for sock in wr:
                sub = by_sock.get(sock)
                if sub is None:
                    continue
                with self._lock:
                    pending = bytes(sub.outbuf)
                if not pending:
                    continue
                try:
                    n = sock.send(pending)
                except (BlockingIOError, InterruptedError):
                    continue
                except OSError:
                    self._drop(sub)
                    continue
                with self._lock:
                    del sub.outbuf[:n]
            with self._lock:
                over = [s for s in self._subs if len(s.outbuf) > self.MAX_EGRESS]
            for sub in over:
                self._drop(sub)

    def _consume_control(self, sub):
        from .protocol import ErrorReply, ResetSignal, SessionSetup, TickTrigger

        while True:
            nl = sub.inbuf.find(b"\n")
            if nl < 0:
                return
            line = bytes(sub.inbuf[: nl + 1])
            del sub.inbuf[: nl + 1]
            if not line.strip():
                continue
            try:
                message = decode(line)
            except _DECODE_ERRORS as e:
                self._send_to(sub, ErrorReply(message=str(e)))
                continue
            if isinstance(message, SessionSetup) and self._controller is None:
                self._controller = sub
                sub.is_controller = True
            if isinstance(message, (SessionSetup, TickTrigger, ResetSignal)):
                if self._controller is None:
                    self._send_to(sub, ErrorReply(
                        message="no session is open on this channel"))
                    continue
                if sub is not self._controller:
                    self._send_to(sub, ErrorReply(
                        message="control is held by another connection"))
                    continue
            if self._control_sink is not None:
                self._control_sink(message, lambda m, s=sub: self._send_to(s, m))


class StreamClient:
    """Blocking stream-channel client used by the harness and tests."""

    def __init__(self, host: str, port: int, timeout: float = 5.0):
        self._sock = socket.create_connection((host, port), timeout=timeout)
        self._sock.settimeout(timeout)
        self._buf = bytearray()

    def settimeout(self, timeout: float):
        self._sock.settimeout(timeout)

    def send(self, message):
        self._sock.sendall(encode(message))

    def recv(self):
        """Next message, or None on orderly close / timeout."""
        while True:
            nl = self._buf.find(b"\n")
            if nl >= 0:
                line = bytes(self._buf[: nl + 1])
                del self._buf[: nl + 1]
                if not line.strip():
                    continue
                return decode(line)
            try:
                data = self._sock.recv(65536)
            except socket.timeout:
                return None
            except OSError:
                return None
            if not data:
                return None
            self._buf += data

    def close(self):
        try:
            self._sock.close()
        except OSError:
            pass
