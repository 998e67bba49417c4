"""Gesture-to-command mapping, duplicate gating, and NDJSON wire framing.

Commands travel as one JSON object per line, e.g.
``{"seq":3,"t_ms":1200,"cmd":"MOVE_FWD"}``. Line framing over a buffered
splitter makes the decoder immune to TCP packet concatenation and arbitrary
split points.
"""

from __future__ import annotations

import enum
import json
import threading
from dataclasses import dataclass
from typing import Optional

from .classifier import Gesture, GestureEvent


class CommandKind(enum.Enum):
    MOVE_FWD = "MOVE_FWD"
    MOVE_BWD = "MOVE_BWD"
    SPEED_UP = "SPEED_UP"
    SPEED_DOWN = "SPEED_DOWN"
    STOP = "STOP"
    STAND = "STAND"
    SIT = "SIT"
    GESTURE_G1 = "GESTURE_G1"
    GESTURE_G2 = "GESTURE_G2"
    GESTURE_G3 = "GESTURE_G3"
    GESTURE_G4 = "GESTURE_G4"
    GESTURE_G5 = "GESTURE_G5"


class ControlPath(enum.Enum):
    HIGH_LEVEL = "high"
    LOW_LEVEL = "low"


GESTURE_COMMANDS = {
    Gesture.OPEN_PALM: CommandKind.MOVE_FWD,
    Gesture.FIST: CommandKind.MOVE_BWD,
    Gesture.THUMB_UP: CommandKind.SPEED_UP,
    Gesture.THUMB_DOWN: CommandKind.SPEED_DOWN,
    Gesture.POINTING_UP: CommandKind.STOP,
    Gesture.NOD: CommandKind.STAND,
    Gesture.SHAKE: CommandKind.SIT,
}


def map_gesture(gesture: Gesture) -> CommandKind:
    return GESTURE_COMMANDS[gesture]


def route(kind: CommandKind) -> ControlPath:
    """Gesture playback goes to the low-level controller, everything else high-level."""
    if kind.value.startswith("GESTURE_"):
        return ControlPath.LOW_LEVEL
    return ControlPath.HIGH_LEVEL


@dataclass(frozen=True)
class Command:
    kind: CommandKind
    seq: int
    t_ms: int


class FrameError(ValueError):
    """Line on the command wire that does not decode to a command."""


def encode(cmd: Command) -> bytes:
    line = json.dumps({"seq": cmd.seq, "t_ms": cmd.t_ms, "cmd": cmd.kind.value},
                      separators=(",", ":"))
    return line.encode("utf-8") + b"\n"


def parse_command_line(line) -> Command:
    if isinstance(line, bytes):
        try:
            line = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FrameError(f"undecodable bytes: {exc}") from exc
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise FrameError(f"invalid JSON: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise FrameError("command line must be a JSON object")
    try:
        kind = CommandKind(obj["cmd"])
        seq = obj["seq"]
        t_ms = obj["t_ms"]
    except (KeyError, ValueError) as exc:
        raise FrameError(f"not a command record: {exc}") from exc
    if not isinstance(seq, int) or not isinstance(t_ms, int):
        raise FrameError("seq and t_ms must be integers")
    return Command(kind=kind, seq=seq, t_ms=t_ms)


class FrameDecoder:
    """Streaming line-framed decoder tolerant of arbitrary byte splits.

    Malformed lines are skipped and counted; the connection-level caller can
    keep feeding bytes.
    """

    def __init__(self):
        self._buffer = b""
        self.errors = 0

    @property
    def remainder(self) -> bytes:
        return self._buffer

    def feed(self, data: bytes) -> list:
        self._buffer += data
        commands = []
        while True:
            idx = self._buffer.find(b"\n")
            if idx < 0:
                break
            line, self._buffer = self._buffer[:idx], self._buffer[idx + 1:]
            if not line.strip():
                continue
            try:
                commands.append(parse_command_line(line))
            except FrameError:
                self.errors += 1
        return commands


def decode(buffer: bytes):
    """Decode every complete command line in buffer; return (commands, remainder)."""
    decoder = FrameDecoder()
    commands = decoder.feed(buffer)
    return commands, decoder.remainder


class BridgeState:
    """Serialized gating state: last gesture, per-kind emit times, sequence counter.

    All emission paths funnel through this object under one lock, so the
    observable command order is a single linearization and the per-kind
    cooldown holds across every source.
    """

    def __init__(self, cooldown_ms: int = 1000):
        self.cooldown_ms = cooldown_ms
        self.last_gesture: Optional[Gesture] = None
        self.last_emit_ms: dict = {}
        self.last_command: Optional[Command] = None
        self._seq = 0
        self._lock = threading.Lock()

    def _cooldown_ok(self, kind: CommandKind, t_ms: int) -> bool:
        last = self.last_emit_ms.get(kind)
        return last is None or t_ms - last >= self.cooldown_ms

    def _emit(self, kind: CommandKind, t_ms: int) -> Command:
        self._seq += 1
        cmd = Command(kind=kind, seq=self._seq, t_ms=t_ms)
        self.last_emit_ms[kind] = t_ms
        self.last_command = cmd
        return cmd

    def gate(self, event: GestureEvent) -> Optional[Command]:
        """Emit iff the gesture changed and the mapped command is off cooldown.

        Both records update only on emission, so a cooldown-suppressed change
        does not overwrite the last-gesture record.
        """
        with self._lock:
            if event.gesture == self.last_gesture:
                return None
            kind = map_gesture(event.gesture)
            if not self._cooldown_ok(kind, event.t_ms):
                return None
            self.last_gesture = event.gesture
            return self._emit(kind, event.t_ms)

    def emit_direct(self, kind: CommandKind, t_ms: int) -> Optional[Command]:
        """Deliberate injection (console buttons, `bridge send`): no change rule,
        but the per-kind cooldown still applies."""
        with self._lock:
            if not self._cooldown_ok(kind, t_ms):
                return None
            return self._emit(kind, t_ms)


def gate_emit(state: BridgeState, event: GestureEvent) -> Optional[Command]:
    return state.gate(event)
