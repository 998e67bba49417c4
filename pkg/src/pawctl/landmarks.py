"""Timestamped hand/face landmark streams.

Frames arrive as NDJSON, one record per line:

    {"t_ms": 0, "hand": [[x, y, z] * 21], "face": {"nose": [x, y], "jaw": [x, y]}}

Coordinates are normalized image coordinates with the origin at the top-left
corner and y increasing downward, so "above" means smaller y. Replay corpora
and live console connections share this schema; a corpus is laid out as
``corpus/<gesture_label>/<clip>.ndjson``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional, Sequence, Union

HAND_POINTS = 21

# Standard 21-point hand layout.
WRIST = 0
THUMB_MCP, THUMB_IP, THUMB_TIP = 2, 3, 4
FINGER_NAMES = ("thumb", "index", "middle", "ring", "pinky")
FINGER_MCP = (THUMB_MCP, 5, 9, 13, 17)
FINGER_PIP = (THUMB_IP, 6, 10, 14, 18)
FINGER_TIP = (THUMB_TIP, 8, 12, 16, 20)
PALM_LANDMARKS = (0, 5, 9, 13, 17)

# Tracker jitter tolerance: replay landmarks may overshoot the image a little,
# anything further out is rejected as garbage.
COORD_MIN = -0.5
COORD_MAX = 1.5

MIN_BBOX_WIDTH = 1e-4


class ParseError(ValueError):
    """Malformed NDJSON record."""

    def __init__(self, message: str, line_no: Optional[int] = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class SchemaError(ValueError):
    """Record parsed as JSON but violates the frame schema."""


class DegenerateHandError(ValueError):
    """Hand bounding box too narrow to normalize."""


class AngleUndefinedError(ValueError):
    """Angle requested at coincident points."""


class StreamOrderError(ValueError):
    """Timestamps not strictly increasing within a stream."""


@dataclass(frozen=True)
class Landmark:
    x: float
    y: float
    z: Optional[float] = None


@dataclass(frozen=True)
class HandFrame:
    """One sample of the 21-point hand layout."""

    t_ms: int
    points: tuple  # 21 Landmarks

    def __post_init__(self):
        if len(self.points) != HAND_POINTS:
            raise SchemaError(f"hand frame needs {HAND_POINTS} points, got {len(self.points)}")


@dataclass(frozen=True)
class FaceFrame:
    """Nose tip and jaw reference point; the only face signals consumed."""

    t_ms: int
    nose: Landmark
    jaw: Landmark


@dataclass(frozen=True)
class NormalizedHand:
    """Hand rescaled so the bounding-box width equals 1 (distances are in hand-widths)."""

    points: tuple
    bbox_width: float


Frame = Union[HandFrame, FaceFrame, tuple]


def _check_coord(value, what: str) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise SchemaError(f"{what} must be a number, got {value!r}")
    v = float(value)
    if not math.isfinite(v):
        raise SchemaError(f"{what} is not finite")
    return v


def _landmark_from(seq, what: str) -> Landmark:
    if not isinstance(seq, (list, tuple)) or len(seq) not in (2, 3):
        raise SchemaError(f"{what} must be [x, y] or [x, y, z]")
    x = _check_coord(seq[0], f"{what}.x")
    y = _check_coord(seq[1], f"{what}.y")
    if not (COORD_MIN <= x <= COORD_MAX and COORD_MIN <= y <= COORD_MAX):
        raise SchemaError(f"{what} outside jitter tolerance [{COORD_MIN}, {COORD_MAX}]")
    z = None
    if len(seq) == 3 and seq[2] is not None:
        z = _check_coord(seq[2], f"{what}.z")
    return Landmark(x, y, z)


def parse_frame(line: str, line_no: Optional[int] = None) -> Frame:
    """Parse one NDJSON record into a HandFrame, FaceFrame, or both.

    Unknown fields are ignored. Raises ParseError for broken JSON and
    SchemaError for structurally wrong records.
    """
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line_no) from exc
    if not isinstance(obj, dict):
        raise SchemaError("frame record must be a JSON object")
    t_ms = obj.get("t_ms")
    if not isinstance(t_ms, int) or isinstance(t_ms, bool):
        raise SchemaError("t_ms must be an integer millisecond timestamp")

    hand = None
    if obj.get("hand") is not None:
        raw = obj["hand"]
        if not isinstance(raw, list):
            raise SchemaError("hand must be a list of landmarks")
        if len(raw) != HAND_POINTS:
            raise SchemaError(f"hand needs {HAND_POINTS} landmarks, got {len(raw)}")
        points = tuple(_landmark_from(p, f"hand[{i}]") for i, p in enumerate(raw))
        hand = HandFrame(t_ms=t_ms, points=points)

    face = None
    if obj.get("face") is not None:
        raw = obj["face"]
        if not isinstance(raw, dict) or "nose" not in raw or "jaw" not in raw:
            raise SchemaError("face must carry nose and jaw landmarks")
        face = FaceFrame(
            t_ms=t_ms,
            nose=_landmark_from(raw["nose"], "face.nose"),
            jaw=_landmark_from(raw["jaw"], "face.jaw"),
        )

    if hand is not None and face is not None:
        return (hand, face)
    if hand is not None:
        return hand
    if face is not None:
        return face
    raise SchemaError("frame carries neither hand nor face")


def _landmark_list(pt: Landmark):
    if pt.z is None:
        return [pt.x, pt.y]
    return [pt.x, pt.y, pt.z]


def serialize_frame(frame: Frame) -> str:
    """Inverse of parse_frame for valid frames (round-trip identity)."""
    if isinstance(frame, tuple):
        hand, face = frame
        obj = {"t_ms": hand.t_ms, "hand": [_landmark_list(p) for p in hand.points],
               "face": {"nose": _landmark_list(face.nose), "jaw": _landmark_list(face.jaw)}}
    elif isinstance(frame, HandFrame):
        obj = {"t_ms": frame.t_ms, "hand": [_landmark_list(p) for p in frame.points]}
    elif isinstance(frame, FaceFrame):
        obj = {"t_ms": frame.t_ms,
               "face": {"nose": _landmark_list(frame.nose), "jaw": _landmark_list(frame.jaw)}}
    else:
        raise TypeError(f"not a frame: {frame!r}")
    return json.dumps(obj, separators=(",", ":"))


def frame_t_ms(frame: Frame) -> int:
    return frame[0].t_ms if isinstance(frame, tuple) else frame.t_ms


def subframes(frame: Frame):
    """Flatten a parsed record into its hand/face components, hand first."""
    return list(frame) if isinstance(frame, tuple) else [frame]


def read_frames(path, enforce_order: bool = True) -> Iterator[Frame]:
    """Stream frames from an NDJSON replay file.

    Blank lines are skipped; timestamps must be strictly increasing unless
    enforce_order is off.
    """
    last_t = None
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            frame = parse_frame(line, line_no)
            t = frame_t_ms(frame)
            if enforce_order and last_t is not None and t <= last_t:
                raise StreamOrderError(f"line {line_no}: t_ms {t} not after {last_t}")
            last_t = t
            yield frame


def iter_corpus(corpus_dir) -> Iterator[tuple]:
    """Yield (label, clip_path) pairs for a corpus/<label>/<clip>.ndjson tree."""
    root = Path(corpus_dir)
    for label_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for clip in sorted(label_dir.glob("*.ndjson")):
            yield label_dir.name, clip


def bbox_normalize(hand) -> NormalizedHand:
    """Rescale a hand so its bounding-box width is 1, shifting the box to the origin.

    All pairwise distances end up expressed in hand-widths, which is what the
    classifier thresholds assume. Idempotent within float precision.
    """
    points = hand.points if isinstance(hand, (HandFrame, NormalizedHand)) else tuple(hand)
    xs = [p.x for p in points]
    ys = [p.y for p in points]
    width = max(xs) - min(xs)
    if width <= MIN_BBOX_WIDTH:
        raise DegenerateHandError(f"hand bbox width {width:.2e} below {MIN_BBOX_WIDTH}")
    scale = 1.0 / width
    x0, y0 = min(xs), min(ys)
    rescaled = tuple(
        Landmark((p.x - x0) * scale, (p.y - y0) * scale, p.z) for p in points
    )
    return NormalizedHand(points=rescaled, bbox_width=width)


def internal_angle(a: Landmark, b: Landmark, c: Landmark) -> float:
    """Internal angle at b of the 2-D triangle a-b-c, in degrees [0, 180]."""
    ux, uy = a.x - b.x, a.y - b.y
    vx, vy = c.x - b.x, c.y - b.y
    nu = math.hypot(ux, uy)
    nv = math.hypot(vx, vy)
    if nu < 1e-12 or nv < 1e-12:
        raise AngleUndefinedError("angle undefined at coincident points")
    cos = (ux * vx + uy * vy) / (nu * nv)
    return math.degrees(math.acos(max(-1.0, min(1.0, cos))))
