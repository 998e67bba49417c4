import json
import math

import numpy as np
import pytest

from pawctl.landmarks import (
    AngleUndefinedError,
    DegenerateHandError,
    FaceFrame,
    HandFrame,
    Landmark,
    ParseError,
    SchemaError,
    StreamOrderError,
    bbox_normalize,
    internal_angle,
    parse_frame,
    read_frames,
    serialize_frame,
)


def _hand_record(t_ms=0, n=21):
    points = [[0.3 + 0.01 * i, 0.5 + 0.005 * i, 0.0] for i in range(n)]
    return json.dumps({"t_ms": t_ms, "hand": points})


def _angle_oracle(a, b, c):
    # Independent check: plain dot-product angle on raw tuples.
    u = (a[0] - b[0], a[1] - b[1])
    v = (c[0] - b[0], c[1] - b[1])
    cos = (u[0] * v[0] + u[1] * v[1]) / (math.hypot(*u) * math.hypot(*v))
    return math.degrees(math.acos(max(-1.0, min(1.0, cos))))


class TestParseFrame:
    def test_hand_round_trip(self):
        frame = parse_frame(_hand_record(t_ms=0))
        assert isinstance(frame, HandFrame)
        assert frame.t_ms == 0
        assert len(frame.points) == 21
        assert parse_frame(serialize_frame(frame)) == frame

    def test_wrong_landmark_count(self):
        with pytest.raises(SchemaError):
            parse_frame(_hand_record(n=20))

    def test_face_frame(self):
        frame = parse_frame('{"t_ms": 33, "face": {"nose": [0.5, 0.4], "jaw": [0.5, 0.6]}}')
        assert isinstance(frame, FaceFrame)
        assert frame.nose == Landmark(0.5, 0.4)
        assert frame.jaw == Landmark(0.5, 0.6)
        assert parse_frame(serialize_frame(frame)) == frame

    def test_both_channels(self):
        record = json.loads(_hand_record(t_ms=5))
        record["face"] = {"nose": [0.5, 0.4], "jaw": [0.5, 0.6]}
        frame = parse_frame(json.dumps(record))
        assert isinstance(frame, tuple) and len(frame) == 2
        assert parse_frame(serialize_frame(frame)) == frame

    def test_malformed_json(self):
        with pytest.raises(ParseError) as err:
            parse_frame("{not json", line_no=7)
        assert err.value.line_no == 7

    def test_unknown_fields_ignored(self):
        record = json.loads(_hand_record())
        record["extra"] = {"anything": 1}
        assert isinstance(parse_frame(json.dumps(record)), HandFrame)

    def test_out_of_range_rejected(self):
        record = json.loads(_hand_record())
        record["hand"][3][0] = 1.6
        with pytest.raises(SchemaError):
            parse_frame(json.dumps(record))

    def test_non_finite_rejected(self):
        record = json.loads(_hand_record())
        record["hand"][0][1] = float("nan")
        with pytest.raises(SchemaError):
            parse_frame(json.dumps(record))

    def test_empty_record_rejected(self):
        with pytest.raises(SchemaError):
            parse_frame('{"t_ms": 0}')

    def test_round_trip_property(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            t = int(rng.integers(0, 10_000))
            pts = rng.uniform(0.0, 1.0, size=(21, 3)).round(6)
            frame = parse_frame(json.dumps({"t_ms": t, "hand": pts.tolist()}))
            assert parse_frame(serialize_frame(frame)) == frame


class TestReadFrames:
    def test_stream_order_enforced(self, tmp_path):
        path = tmp_path / "clip.ndjson"
        path.write_text(_hand_record(t_ms=10) + "\n" + _hand_record(t_ms=10) + "\n")
        with pytest.raises(StreamOrderError):
            list(read_frames(path))

    def test_line_numbers_in_errors(self, tmp_path):
        path = tmp_path / "clip.ndjson"
        path.write_text(_hand_record(t_ms=0) + "\nnot json\n")
        with pytest.raises(ParseError) as err:
            list(read_frames(path))
        assert err.value.line_no == 2


class TestBboxNormalize:
    def _hand(self, xs, ys):
        pts = tuple(Landmark(x, y) for x, y in zip(xs, ys))
        return HandFrame(t_ms=0, points=pts)

    def _spread_hand(self, x_lo, x_hi):
        xs = list(np.linspace(x_lo, x_hi, 21))
        ys = list(np.linspace(0.3, 0.6, 21))
        return self._hand(xs, ys)

    def test_rescales_span_to_unit(self):
        norm = bbox_normalize(self._spread_hand(0.2, 0.4))
        xs = [p.x for p in norm.points]
        assert max(xs) - min(xs) == pytest.approx(1.0, abs=1e-12)
        assert min(xs) == pytest.approx(0.0, abs=1e-12)
        assert norm.bbox_width == pytest.approx(0.2)

    def test_unit_width_hand_unchanged(self):
        hand = self._spread_hand(0.0, 1.0)
        norm = bbox_normalize(hand)
        for before, after in zip(hand.points, norm.points):
            assert after.x == pytest.approx(before.x, abs=1e-12)

    def test_distance_ratio(self):
        # Two points 0.03 apart in a 0.2-wide hand span 0.15 hand-widths.
        xs = [0.2] + [0.23] + list(np.linspace(0.2, 0.4, 19))
        ys = [0.5] * 21
        norm = bbox_normalize(self._hand(xs, ys))
        d = abs(norm.points[0].x - norm.points[1].x)
        assert d == pytest.approx(0.03 / 0.2, abs=1e-12)

    def test_aspect_preserved(self):
        hand = self._spread_hand(0.2, 0.4)
        norm = bbox_normalize(hand)
        for before, after in zip(hand.points, norm.points):
            pass
        # y distances scale by the same 1/width factor as x distances
        dy_raw = hand.points[5].y - hand.points[0].y
        dy_norm = norm.points[5].y - norm.points[0].y
        assert dy_norm == pytest.approx(dy_raw / 0.2, abs=1e-12)

    def test_degenerate_bbox(self):
        with pytest.raises(DegenerateHandError):
            bbox_normalize(self._hand([0.5] * 21, list(np.linspace(0, 1, 21))))

    def test_idempotent(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            pts = rng.uniform(0.1, 0.9, size=(21, 2))
            hand = HandFrame(t_ms=0, points=tuple(Landmark(x, y) for x, y in pts))
            once = bbox_normalize(hand)
            twice = bbox_normalize(once)
            for a, b in zip(once.points, twice.points):
                assert abs(a.x - b.x) < 1e-9 and abs(a.y - b.y) < 1e-9


class TestInternalAngle:
    def test_collinear(self):
        assert internal_angle(Landmark(0, 0), Landmark(1, 0), Landmark(2, 0)) \
            == pytest.approx(180.0)

    def test_right_angle(self):
        assert internal_angle(Landmark(0, 0), Landmark(1, 0), Landmark(1, 1)) \
            == pytest.approx(90.0)

    def test_120_degrees(self):
        a, b, c = (0, 0), (1, 0), (1.5, 0.866)
        got = internal_angle(Landmark(*a), Landmark(*b), Landmark(*c))
        assert got == pytest.approx(_angle_oracle(a, b, c), abs=1e-12)
        assert got == pytest.approx(120.0, abs=0.05)

    def test_symmetry(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            a, b, c = (Landmark(*p) for p in rng.uniform(0, 1, size=(3, 2)))
            assert internal_angle(a, b, c) == pytest.approx(internal_angle(c, b, a),
                                                            abs=1e-12)

    def test_coincident_points(self):
        with pytest.raises(AngleUndefinedError):
            internal_angle(Landmark(1, 1), Landmark(1, 1), Landmark(0, 0))
