"""Operator gateway: the WebSocket face of a running experiment.

Serves consoles over plain RFC 6455 frames (no external dependencies;
the handshake and framing are small enough to carry here). On connect a
client receives one scene message, then a steady stream of state frames
at the configured rate, 20 Hz by default. Inbound messages are the
operator commands; anything invalid earns an error reply on the same
connection and never disturbs the experiment.

Payloads inside text frames use the exact canonical message encoding of
the other channels, trailing newline included, so every endpoint of the
system shares one codec.
"""

from __future__ import annotations

import base64
import hashlib
import socket
import struct
import threading
import time
from typing import Optional

from .errors import BindFailure, CavsimError, MalformedMessage, RangeError, UnknownType
from .protocol import (ErrorReply, ManualDrive, PauseCommand, ReleaseManual,
                       ReplayCommand, ResetSignal, StartCommand, StateFrame,
                       decode, encode)

_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

OP_CONT = 0x0
OP_TEXT = 0x1
OP_BINARY = 0x2
OP_CLOSE = 0x8
OP_PING = 0x9
OP_PONG = 0xA


def accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key + _WS_GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


def encode_frame(opcode: int, payload: bytes, mask: bool = False) -> bytes:
    """One complete frame, FIN set. Servers send unmasked."""
    head = bytearray([0x80 | (opcode & 0x0F)])
    n = len(payload)
    mask_bit = 0x80 if mask else 0
    if n < 126:
        head.append(mask_bit | n)
    elif n < (1 << 16):
        head.append(mask_bit | 126)
        head += struct.pack(">H", n)
    else:
        head.append(mask_bit | 127)
        head += struct.pack(">Q", n)
    if mask:
        key = struct.pack(">I", int(time.monotonic_ns()) & 0xFFFFFFFF)
        head += key
        payload = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
    return bytes(head) + payload


def pop_frame(buf: bytearray) -> Optional[tuple[int, bool, bytes]]:
    """Consume one frame from buf: (opcode, fin, payload), or None if short."""
    if len(buf) < 2:
        return None
    fin = bool(buf[0] & 0x80)
    opcode = buf[0] & 0x0F
    masked = bool(buf[1] & 0x80)
    n = buf[1] & 0x7F
    pos = 2
    if n == 126:
        if len(buf) < pos + 2:
            return None
        n = struct.unpack_from(">H", buf, pos)[0]
        pos += 2
    elif n == 127:
        if len(buf) < pos + 8:
            return None
        n = struct.unpack_from(">Q", buf, pos)[0]
        pos += 8
    key = None
    if masked:
        if len(buf) < pos + 4:
            return None
        key = bytes(buf[pos:pos + 4])
        pos += 4
    if len(buf) < pos + n:
        return None
    payload = bytes(buf[pos:pos + n])
    del buf[:pos + n]
    if key is not None:
        payload = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
    return opcode, fin, payload


class _Client:
    def __init__(self, sock):
        self.sock = sock
        self.write_lock = threading.Lock()
        self.open = True

    def send_frame(self, opcode: int, payload: bytes):
        frame = encode_frame(opcode, payload)
        with self.write_lock:
            self.sock.sendall(frame)

    def send_message(self, message):
        self.send_frame(OP_TEXT, encode(message))


class OperatorGateway:
    """WebSocket server bound to one telemetry source.

    The source is an Experiment or a LogReplayer: anything offering
    scene() and telemetry(). Control commands map onto the source's
    methods when present; a source without a capability answers with an
    error reply instead of dropping the connection.
    """

    def __init__(self, source, port: int = 9880, host: str = "127.0.0.1",
                 frame_hz: float = 20.0):
        self.source = source
        self.frame_interval = 1.0 / frame_hz
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            self._listener.bind((host, port))
        except OSError as e:
            self._listener.close()
            raise BindFailure(f"cannot bind gateway {host}:{port}: {e}")
        self._listener.listen(8)
        self._listener.settimeout(0.2)
        self._clients: list[_Client] = []
        self._lock = threading.Lock()
        self._running = False
        self._threads: list[threading.Thread] = []

    @property
    def port(self) -> int:
        return self._listener.getsockname()[1]

    def start(self):
        self._running = True
        for target, name in ((self._accept_loop, "gateway-accept"),
                             (self._broadcast_loop, "gateway-frames")):
            th = threading.Thread(target=target, daemon=True, name=name)
            th.start()
            self._threads.append(th)

    def stop(self):
        self._running = False
        for th in self._threads:
            th.join(timeout=2.0)
        self._threads.clear()
        with self._lock:
            clients, self._clients = self._clients, []
        for client in clients:
            try:
                client.sock.close()
            except OSError:
                pass
        self._listener.close()

    @property
    def client_count(self) -> int:
        with self._lock:
            return len(self._clients)

    # -- connection handling -------------------------------------------

    def _accept_loop(self):
        while self._running:
            try:
                sock, _ = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            th = threading.Thread(target=self._serve_client, args=(sock,),
                                  daemon=True, name="gateway-client")
            th.start()

    def _serve_client(self, sock):
        sock.settimeout(5.0)
        try:
            if not self._handshake(sock):
                sock.close()
                return
        except OSError:
            sock.close()
            return
        client = _Client(sock)
        try:
            client.send_message(self.source.scene())
        except OSError:
            sock.close()
            return
        with self._lock:
            self._clients.append(client)
        sock.settimeout(0.2)
        buf = bytearray()
        fragments: Optional[tuple[int, bytearray]] = None
        try:
            while self._running and client.open:
                try:
                    data = sock.recv(65536)
                except socket.timeout:
                    continue
                except OSError:
                    break
                if not data:
                    break
                buf += data
                while (frame := pop_frame(buf)) is not None:
                    opcode, fin, payload = frame
                    if opcode == OP_PING:
                        client.send_frame(OP_PONG, payload)
                        continue
                    if opcode == OP_CLOSE:
                        client.send_frame(OP_CLOSE, payload[:2])
                        client.open = False
                        break
                    if opcode == OP_PONG:
                        continue
                    if opcode == OP_CONT:
                        if fragments is None:
                            continue
                        fragments[1].extend(payload)
                        if not fin:
                            continue
                        opcode, payload = fragments[0], bytes(fragments[1])
                        fragments = None
                    elif not fin:
                        fragments = (opcode, bytearray(payload))
                        continue
                    if opcode == OP_TEXT:
                        self._handle_command(client, payload)
        finally:
            with self._lock:
                if client in self._clients:
                    self._clients.remove(client)
            try:
                sock.close()
            except OSError:
                pass

    def _handshake(self, sock) -> bool:
        data = bytearray()
        while b"\r\n\r\n" not in data:
            chunk = sock.recv(4096)
            if not chunk or len(data) > 65536:
                return False
            data += chunk
        head = data.split(b"\r\n\r\n", 1)[0].decode("latin-1")
        lines = head.split("\r\n")
        headers = {}
        for line in lines[1:]:
            if ":" in line:
                name, value = line.split(":", 1)
                headers[name.strip().lower()] = value.strip()
        key = headers.get("sec-websocket-key")
        if key is None or "websocket" not in headers.get("upgrade", "").lower():
            sock.sendall(b"HTTP/1.1 400 Bad Request\r\n\r\n")
            return False
        response = (
            "HTTP/1.1 101 Switching Protocols\r\n"
            "Upgrade: websocket\r\n"
            "Connection: Upgrade\r\n"
            f"Sec-WebSocket-Accept: {accept_key(key)}\r\n"
            "\r\n"
        )
        sock.sendall(response.encode("ascii"))
        return True

    # -- command dispatch ----------------------------------------------

    def _handle_command(self, client: _Client, payload: bytes):
        try:
            message = decode(payload)
        except (MalformedMessage, UnknownType, RangeError) as e:
            self._reply_error(client, str(e))
            return
        try:
            self._dispatch(message)
        except CavsimError as e:
            self._reply_error(client, str(e))
        except AttributeError:
            self._reply_error(
                client, f"{type(message).__name__} is not available here")

    def _dispatch(self, message):
        source = self.source
        if isinstance(message, StartCommand):
            if getattr(source, "state", None) == "paused":
                source.resume()
            else:
                source.start_background()
        elif isinstance(message, PauseCommand):
            source.pause()
        elif isinstance(message, ResetSignal):
            source.reset()
        elif isinstance(message, ReplayCommand):
            source.replay_restart()
        elif isinstance(message, ManualDrive):
            source.manual_drive(message.vehicle_id, message.steer,
                                message.throttle)
        elif isinstance(message, ReleaseManual):
            source.release_manual(message.vehicle_id)
        else:
            raise CavsimError(
                f"{type(message).__name__} is not an operator command")

    def _reply_error(self, client: _Client, text: str):
        try:
            client.send_message(ErrorReply(message=text))
        except OSError:
            pass

    # -- state frames ---------------------------------------------------

    def _broadcast_loop(self):
        while self._running:
            started = time.monotonic()
            clock, state, rows = self.source.telemetry()
            frame = StateFrame(clock=clock, state=state, vehicles=tuple(rows))
            data = encode_frame(OP_TEXT, encode(frame))
            with self._lock:
                clients = list(self._clients)
            for client in clients:
                try:
                    with client.write_lock:
                        client.sock.sendall(data)
                except OSError:
                    client.open = False
            lag = self.frame_interval - (time.monotonic() - started)
            if lag > 0:
                time.sleep(lag)
