import random

import pytest

from pawctl.bridge import (
    BridgeState,
    Command,
    CommandKind,
    ControlPath,
    FrameDecoder,
    FrameError,
    decode,
    encode,
    gate_emit,
    map_gesture,
    parse_command_line,
    route,
)
from pawctl.classifier import Gesture, GestureEvent


class TestMapping:
    @pytest.mark.parametrize("gesture,kind", [
        (Gesture.OPEN_PALM, CommandKind.MOVE_FWD),
        (Gesture.FIST, CommandKind.MOVE_BWD),
        (Gesture.THUMB_UP, CommandKind.SPEED_UP),
        (Gesture.THUMB_DOWN, CommandKind.SPEED_DOWN),
        (Gesture.POINTING_UP, CommandKind.STOP),
        (Gesture.NOD, CommandKind.STAND),
        (Gesture.SHAKE, CommandKind.SIT),
    ])
    def test_table(self, gesture, kind):
        assert map_gesture(gesture) is kind

    def test_every_gesture_mapped(self):
        for gesture in Gesture:
            assert map_gesture(gesture) in CommandKind


class TestRoute:
    def test_posture_is_high_level(self):
        assert route(CommandKind.STAND) is ControlPath.HIGH_LEVEL
        assert route(CommandKind.STOP) is ControlPath.HIGH_LEVEL

    def test_gestures_are_low_level(self):
        for kind in CommandKind:
            expected = ControlPath.LOW_LEVEL if kind.value.startswith("GESTURE_") \
                else ControlPath.HIGH_LEVEL
            assert route(kind) is expected


def _ev(gesture, t_ms):
    return GestureEvent(gesture=gesture, t_ms=t_ms)


class TestGateEmit:
    def test_fresh_state_emits(self):
        state = BridgeState()
        cmd = gate_emit(state, _ev(Gesture.OPEN_PALM, 0))
        assert cmd is not None and cmd.kind is CommandKind.MOVE_FWD and cmd.seq == 1

    def test_unchanged_gesture_suppressed(self):
        state = BridgeState()
        assert gate_emit(state, _ev(Gesture.OPEN_PALM, 0)) is not None
        assert gate_emit(state, _ev(Gesture.OPEN_PALM, 500)) is None

    def test_cooldown_trace(self):
        # palm@0 emits, fist@300 emits, palm@600 blocked by cooldown (and the
        # last-gesture record stays fist), palm@1100 emits again.
        state = BridgeState()
        assert gate_emit(state, _ev(Gesture.OPEN_PALM, 0)).kind is CommandKind.MOVE_FWD
        assert gate_emit(state, _ev(Gesture.FIST, 300)).kind is CommandKind.MOVE_BWD
        assert gate_emit(state, _ev(Gesture.OPEN_PALM, 600)) is None
        cmd = gate_emit(state, _ev(Gesture.OPEN_PALM, 1100))
        assert cmd is not None and cmd.kind is CommandKind.MOVE_FWD

    def test_per_kind_cooldown_invariant(self):
        rng = random.Random(13)
        state = BridgeState()
        gestures = list(Gesture)
        emitted = []
        t = 0
        for _ in range(2000):
            t += rng.randrange(20, 400)
            cmd = gate_emit(state, _ev(rng.choice(gestures), t))
            if cmd is not None:
                emitted.append(cmd)
        last_by_kind = {}
        for cmd in emitted:
            if cmd.kind in last_by_kind:
                assert cmd.t_ms - last_by_kind[cmd.kind] >= 1000
            last_by_kind[cmd.kind] = cmd.t_ms

    def test_no_consecutive_equal_gestures(self):
        rng = random.Random(29)
        state = BridgeState()
        emitted = []
        t = 0
        for _ in range(2000):
            t += rng.randrange(20, 400)
            cmd = gate_emit(state, _ev(rng.choice(list(Gesture)), t))
            if cmd is not None:
                emitted.append(cmd.kind)
        for a, b in zip(emitted, emitted[1:]):
            assert a is not b

    def test_seq_gapless_and_increasing(self):
        rng = random.Random(31)
        state = BridgeState()
        seqs = []
        t = 0
        for _ in range(500):
            t += rng.randrange(50, 1500)
            cmd = gate_emit(state, _ev(rng.choice(list(Gesture)), t))
            if cmd is not None:
                seqs.append(cmd.seq)
        assert seqs == list(range(1, len(seqs) + 1))

    def test_direct_send_honors_cooldown(self):
        state = BridgeState()
        assert state.emit_direct(CommandKind.GESTURE_G1, 0) is not None
        assert state.emit_direct(CommandKind.GESTURE_G1, 500) is None
        assert state.emit_direct(CommandKind.GESTURE_G1, 1000) is not None


class TestFraming:
    def test_encode_format(self):
        cmd = Command(kind=CommandKind.MOVE_FWD, seq=1, t_ms=7)
        assert encode(cmd) == b'{"seq":1,"t_ms":7,"cmd":"MOVE_FWD"}\n'

    def test_concatenation_decodes(self):
        c1 = Command(kind=CommandKind.MOVE_FWD, seq=1, t_ms=0)
        c2 = Command(kind=CommandKind.SIT, seq=2, t_ms=50)
        cmds, rest = decode(encode(c1) + encode(c2))
        assert cmds == [c1, c2] and rest == b""

    def test_streaming_split(self):
        c1 = Command(kind=CommandKind.STOP, seq=3, t_ms=123)
        data = encode(c1)
        half = len(data) // 2
        cmds, rest = decode(data[:half])
        assert cmds == [] and rest == data[:half]
        cmds, rest = decode(rest + data[half:])
        assert cmds == [c1] and rest == b""

    def test_malformed_line_skipped_and_counted(self):
        c = Command(kind=CommandKind.STAND, seq=9, t_ms=1)
        decoder = FrameDecoder()
        got = decoder.feed(b'{"seq": "oops"}\n' + encode(c))
        assert got == [c]
        assert decoder.errors == 1

    def test_parse_rejects_garbage(self):
        with pytest.raises(FrameError):
            parse_command_line(b"\xff\xfe")
        with pytest.raises(FrameError):
            parse_command_line('{"cmd": "NOT_A_COMMAND", "seq": 1, "t_ms": 2}')

    def test_fuzz_round_trip(self):
        rng = random.Random(99)
        kinds = list(CommandKind)
        for _ in range(200):
            cmds = [Command(kind=rng.choice(kinds), seq=i + 1,
                            t_ms=rng.randrange(0, 100000))
                    for i in range(rng.randrange(1, 20))]
            blob = b"".join(encode(c) for c in cmds)
            decoder = FrameDecoder()
            got = []
            i = 0
            while i < len(blob):
                j = i + rng.randrange(1, 9)
                got += decoder.feed(blob[i:j])
                i = j
            assert got == cmds
            assert decoder.remainder == b""
            assert decoder.errors == 0
