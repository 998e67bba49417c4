"""Bridge server: one listening socket, many clients, one gating state.

Every client speaks NDJSON lines, either over raw TCP or inside WebSocket
text frames (browsers cannot open raw sockets). Incoming landmark frames are
classified server-side per connection; gesture events and direct sends funnel
through the shared BridgeState, and emitted commands are broadcast to every
client. Telemetry lines from the actuator are re-broadcast to the others.
"""

from __future__ import annotations

import json
import logging
import os
import socket
import threading
import time
from typing import Optional

from . import wsproto
from .bridge import BridgeState, Command, CommandKind, encode
from .classifier import ClassifierConfig, Gesture, GestureClassifier, GestureEvent
from .landmarks import ParseError, SchemaError, StreamOrderError, parse_frame

log = logging.getLogger(__name__)

DEFAULT_PORT = 9000
PORT_ENV_VAR = "PAWCTL_BRIDGE_PORT"


def default_port() -> int:
    return int(os.environ.get(PORT_ENV_VAR, DEFAULT_PORT))


class _Client:
    def __init__(self, sock: socket.socket, addr):
        self.sock = sock
        self.addr = addr
        self.ws = False
        self.classifier: Optional[GestureClassifier] = None
        self._send_lock = threading.Lock()

    def send_line(self, line: str) -> None:
        data = wsproto.encode_text(line) if self.ws else (line + "\n").encode("utf-8")
        with self._send_lock:
            self.sock.sendall(data)


class BridgeServer:
    """Threaded NDJSON command bridge; port 0 binds an ephemeral test port."""

    def __init__(self, host: str = "127.0.0.1", port: Optional[int] = None,
                 classifier_config: Optional[ClassifierConfig] = None,
                 cooldown_ms: int = 1000):
        self.host = host
        self.port = port if port is not None else default_port()
        self.classifier_config = classifier_config or ClassifierConfig()
        self.state = BridgeState(cooldown_ms=cooldown_ms)
        self.bad_lines = 0
        self._clients: list = []
        self._clients_lock = threading.Lock()
        self._listener: Optional[socket.socket] = None
        self._threads: list = []
        self._running = False
        self._t0 = time.monotonic()

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> None:
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((self.host, self.port))
        self.port = self._listener.getsockname()[1]
        self._listener.listen(16)
        self._running = True
        self._t0 = time.monotonic()
        accept_thread = threading.Thread(target=self._accept_loop,
                                         name="bridge-accept", daemon=True)
        accept_thread.start()
        self._threads.append(accept_thread)
        log.info("bridge listening on %s:%d", self.host, self.port)

    def stop(self) -> None:
        self._running = False
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
        with self._clients_lock:
            clients = list(self._clients)
        for client in clients:
            try:
                client.sock.close()
            except OSError:
                pass

    def serve_forever(self) -> None:
        self.start()
        try:
            while self._running:
                time.sleep(0.2)
        except KeyboardInterrupt:
            pass
        finally:
            self.stop()

    def now_ms(self) -> int:
        return int((time.monotonic() - self._t0) * 1000.0)

    # -- connection handling ---------------------------------------------------

    def _accept_loop(self) -> None:
        while self._running:
            try:
                sock, addr = self._listener.accept()
            except OSError:
                return
            client = _Client(sock, addr)
            with self._clients_lock:
                self._clients.append(client)
            thread = threading.Thread(target=self._serve_client, args=(client,),
                                      name=f"bridge-client-{addr}", daemon=True)
            thread.start()
            self._threads.append(thread)

    def _drop(self, client: _Client) -> None:
        with self._clients_lock:
            if client in self._clients:
                self._clients.remove(client)
        try:
            client.sock.close()
        except OSError:
            pass

    def _serve_client(self, client: _Client) -> None:
        try:
            first = client.sock.recv(4096)
            if not first:
                return
            if wsproto.looks_like_http(first):
                self._serve_ws(client, first)
            else:
                self._serve_raw(client, first)
        except (OSError, ConnectionError):
            pass
        finally:
            self._drop(client)

    def _serve_raw(self, client: _Client, first: bytes) -> None:
        buffer = b""
        chunk = first
        while chunk:
            buffer += chunk
            while b"\n" in buffer:
                line, buffer = buffer.split(b"\n", 1)
                self._handle_line(client, line.decode("utf-8", errors="replace"))
            chunk = client.sock.recv(4096)

    def _serve_ws(self, client: _Client, first: bytes) -> None:
        data = first
        while b"\r\n\r\n" not in data:
            chunk = client.sock.recv(4096)
            if not chunk:
                return
            data += chunk
        head, rest = data.split(b"\r\n\r\n", 1)
        headers = wsproto.parse_upgrade_request(head + b"\r\n\r\n")
        client.sock.sendall(wsproto.handshake_response(headers))
        client.ws = True

        parser = wsproto.FrameParser()
        pending = rest
        text = ""
        while True:
            for opcode, payload in parser.feed(pending):
                if opcode == wsproto.OP_CLOSE:
                    try:
                        client.sock.sendall(wsproto.encode_close())
                    except OSError:
                        pass
                    return
                if opcode == wsproto.OP_PING:
                    client.sock.sendall(wsproto.encode_pong(payload))
                    continue
                if opcode in (wsproto.OP_TEXT, wsproto.OP_BINARY):
                    text += payload.decode("utf-8", errors="replace")
                    while "\n" in text:
                        line, text = text.split("\n", 1)
                        self._handle_line(client, line)
                    if text:
                        self._handle_line(client, text)
                        text = ""
            pending = client.sock.recv(4096)
            if not pending:
                return

    # -- protocol ---------------------------------------------------------------

    def _handle_line(self, client: _Client, line: str) -> None:
        line = line.strip()
        if not line:
            return
        if line == "STATUS":
            client.send_line(json.dumps(self._status(), separators=(",", ":")))
            return
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            self.bad_lines += 1
            return
        if not isinstance(obj, dict):
            self.bad_lines += 1
            return

        if "send" in obj:
            self._handle_send(obj["send"])
        elif "gesture" in obj:
            self._handle_gesture(obj)
        elif "telemetry" in obj:
            self._broadcast(line, exclude=client)
        elif "hand" in obj or "face" in obj:
            self._handle_frame(client, line)
        else:
            self.bad_lines += 1

    def _status(self) -> dict:
        last = self.state.last_command
        return {"last_cmd": last.kind.value if last else None,
                "uptime_ms": self.now_ms()}

    def _handle_send(self, kind_name) -> None:
        try:
            kind = CommandKind(kind_name)
        except ValueError:
            self.bad_lines += 1
            return
        command = self.state.emit_direct(kind, self.now_ms())
        if command is not None:
            self._broadcast_command(command)

    def _handle_gesture(self, obj: dict) -> None:
        try:
            gesture = Gesture(obj["gesture"])
        except (ValueError, KeyError):
            self.bad_lines += 1
            return
        event = GestureEvent(gesture=gesture, t_ms=self.now_ms(),
                             confidence=float(obj.get("confidence", 1.0)))
        command = self.state.gate(event)
        if command is not None:
            self._broadcast_command(command)

    def _handle_frame(self, client: _Client, line: str) -> None:
        if client.classifier is None:
            client.classifier = GestureClassifier(self.classifier_config)
        try:
            frame = parse_frame(line)
            events = client.classifier.feed(frame)
        except (ParseError, SchemaError, StreamOrderError):
            self.bad_lines += 1
            return
        for event in events:
            # Gate on server receive time so cooldowns are comparable across
            # sources; the event keeps its stream timestamp upstream.
            command = self.state.gate(GestureEvent(gesture=event.gesture,
                                                   t_ms=self.now_ms(),
                                                   confidence=event.confidence))
            if command is not None:
                self._broadcast_command(command)

    def _broadcast_command(self, command: Command) -> None:
        self._broadcast(encode(command).decode("utf-8").rstrip("\n"))

    def _broadcast(self, line: str, exclude: Optional[_Client] = None) -> None:
        with self._clients_lock:
            clients = list(self._clients)
        for client in clients:
            if client is exclude:
                continue
            try:
                client.send_line(line)
            except (OSError, ConnectionError):
                self._drop(client)


def send_command(kind: str, host: str = "127.0.0.1", port: Optional[int] = None,
                 timeout: float = 2.0) -> Optional[dict]:
    """One-shot direct injection used by the `bridge send` CLI; returns the
    broadcast command record if it comes back within the timeout."""
    port = port if port is not None else default_port()
    with socket.create_connection((host, port), timeout=timeout) as sock:
        sock.sendall((json.dumps({"send": kind}) + "\n").encode("utf-8"))
        sock.settimeout(timeout)
        try:
            data = sock.recv(4096)
        except socket.timeout:
            return None
    for line in data.decode("utf-8", errors="replace").splitlines():
        if line.strip():
            return json.loads(line)
    return None


def query_status(host: str = "127.0.0.1", port: Optional[int] = None,
                 timeout: float = 2.0) -> dict:
    port = port if port is not None else default_port()
    with socket.create_connection((host, port), timeout=timeout) as sock:
        sock.sendall(b"STATUS\n")
        sock.settimeout(timeout)
        data = sock.recv(4096)
    return json.loads(data.decode("utf-8").splitlines()[0])
