"""Rule-based hand/head gesture detection with temporal smoothing.

Hand rules run on bbox-normalized landmarks, so every distance threshold is
expressed in hand-widths and detection is scale and translation invariant.
Head rules watch a short window of exponentially smoothed nose/jaw motion and
count qualified velocity sign changes. A debouncer emits an event only once a
classification has been stable for a few frames and differs from the last
emitted gesture.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .landmarks import (
    FINGER_MCP,
    FINGER_PIP,
    FINGER_TIP,
    PALM_LANDMARKS,
    AngleUndefinedError,
    DegenerateHandError,
    FaceFrame,
    HandFrame,
    NormalizedHand,
    StreamOrderError,
    bbox_normalize,
    internal_angle,
    subframes,
)


class Gesture(enum.Enum):
    OPEN_PALM = "open_palm"
    FIST = "fist"
    THUMB_UP = "thumb_up"
    THUMB_DOWN = "thumb_down"
    POINTING_UP = "pointing_up"
    NOD = "nod"
    SHAKE = "shake"


HAND_GESTURES = (Gesture.OPEN_PALM, Gesture.FIST, Gesture.THUMB_UP,
                 Gesture.THUMB_DOWN, Gesture.POINTING_UP)
HEAD_GESTURES = (Gesture.NOD, Gesture.SHAKE)


@dataclass
class ClassifierConfig:
    """Detection thresholds. Distances are in hand-widths, angles in degrees."""

    spacing_min: float = 0.03        # adjacent fingertip x-spacing, open palm
    palm_dist_max: float = 0.15      # fingertip-to-palm-center distance, fist
    thumb_delta: float = 0.05        # tip-vs-MCP vertical margin, thumb up/down
    flex_angle: float = 160.0        # PIP angle below which a finger is flexed
    thumb_extend_dist: float = 0.25  # thumb-tip-to-palm-center distance for "extended"
    nose_threshold: float = 0.015    # nod amplitude, normalized image units
    jaw_threshold: float = 0.02      # shake amplitude, normalized image units
    window_ms: int = 400
    ema_alpha: float = 0.6
    min_sign_changes: int = 2
    stable_frames: int = 3           # consecutive frames before a classification is emitted

    def __post_init__(self):
        for name in ("spacing_min", "palm_dist_max", "thumb_delta", "flex_angle",
                     "thumb_extend_dist", "nose_threshold", "jaw_threshold", "window_ms"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.ema_alpha <= 1.0:
            raise ValueError("ema_alpha must be in (0, 1]")
        if self.min_sign_changes < 1 or self.stable_frames < 1:
            raise ValueError("min_sign_changes and stable_frames must be >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> "ClassifierConfig":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass(frozen=True)
class GestureEvent:
    gesture: Gesture
    t_ms: int
    confidence: float = 1.0

    def to_dict(self) -> dict:
        return {"gesture": self.gesture.value, "t_ms": self.t_ms,
                "confidence": self.confidence}


@dataclass(frozen=True)
class FingerState:
    """Per-finger extension summary derived from one normalized hand."""

    name: str
    extended: bool
    pip_angle: float
    tip_y: float
    mcp_y: float


def ema(prev: float, sample: float, alpha: float) -> float:
    """One exponential-smoothing step: alpha*sample + (1-alpha)*prev."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must be in (0, 1]")
    return alpha * sample + (1.0 - alpha) * prev


def palm_center(points) -> tuple:
    xs = [points[i].x for i in PALM_LANDMARKS]
    ys = [points[i].y for i in PALM_LANDMARKS]
    return sum(xs) / len(xs), sum(ys) / len(ys)


def _dist(p, center) -> float:
    return math.hypot(p.x - center[0], p.y - center[1])


def _joint_angle(points, finger: int) -> float:
    # Coincident joints mean a fully collapsed finger; treat as flexed.
    try:
        return internal_angle(points[FINGER_MCP[finger]], points[FINGER_PIP[finger]],
                              points[FINGER_TIP[finger]])
    except AngleUndefinedError:
        return 0.0


def finger_states(hand: NormalizedHand, cfg: ClassifierConfig):
    """Extension state of all five fingers (thumb first).

    A non-thumb finger is extended when its tip is above the PIP joint and the
    PIP internal angle is at least the flex threshold; the thumb counts as
    extended when its tip is displaced from the palm center beyond threshold.
    """
    pts = hand.points
    center = palm_center(pts)
    states = []
    for i, name in enumerate(("thumb", "index", "middle", "ring", "pinky")):
        angle = _joint_angle(pts, i)
        tip_y = pts[FINGER_TIP[i]].y
        mcp_y = pts[FINGER_MCP[i]].y
        if i == 0:
            extended = _dist(pts[FINGER_TIP[0]], center) > cfg.thumb_extend_dist
        else:
            pip_y = pts[FINGER_PIP[i]].y
            extended = tip_y < pip_y and angle >= cfg.flex_angle
        states.append(FingerState(name, extended, angle, tip_y, mcp_y))
    return tuple(states)


def _others_flexed(states, cfg) -> bool:
    # "others flexed" in the thumb/pointing rows: the four fingers are bent.
    return all(s.pip_angle < cfg.flex_angle for s in states[1:])


def rule_fist(states, pts, cfg) -> bool:
    if not _others_flexed(states, cfg) or states[0].extended:
        return False
    center = palm_center(pts)
    return all(_dist(pts[t], center) < cfg.palm_dist_max for t in FINGER_TIP[1:])


def rule_thumb_up(states, cfg) -> bool:
    thumb = states[0]
    if thumb.mcp_y - thumb.tip_y <= cfg.thumb_delta:
        return False
    if not _others_flexed(states, cfg):
        return False
    return all(thumb.tip_y < s.tip_y for s in states[1:])


def rule_thumb_down(states, cfg) -> bool:
    thumb = states[0]
    if thumb.tip_y - thumb.mcp_y <= cfg.thumb_delta:
        return False
    if not _others_flexed(states, cfg):
        return False
    return all(thumb.tip_y > s.tip_y for s in states[1:])


def rule_pointing_up(states, cfg) -> bool:
    index = states[1]
    if not index.extended or index.mcp_y - index.tip_y <= cfg.thumb_delta:
        return False
    if states[0].extended:
        return False
    if any(s.pip_angle >= cfg.flex_angle for s in states[2:]):
        return False
    return all(index.tip_y < s.tip_y for s in (states[0],) + tuple(states[2:]))


def rule_open_palm(states, pts, cfg) -> bool:
    if not all(s.extended for s in states[1:]) or not states[0].extended:
        return False
    tip_xs = [pts[t].x for t in FINGER_TIP[1:]]
    return all(abs(b - a) > cfg.spacing_min for a, b in zip(tip_xs, tip_xs[1:]))


def classify_hand(hand: NormalizedHand, cfg: ClassifierConfig) -> Optional[Gesture]:
    """Evaluate the hand rules most-specific first and return the match, if any."""
    states = finger_states(hand, cfg)
    pts = hand.points
    if rule_fist(states, pts, cfg):
        return Gesture.FIST
    if rule_thumb_up(states, cfg):
        return Gesture.THUMB_UP
    if rule_thumb_down(states, cfg):
        return Gesture.THUMB_DOWN
    if rule_pointing_up(states, cfg):
        return Gesture.POINTING_UP
    if rule_open_palm(states, pts, cfg):
        return Gesture.OPEN_PALM
    return None


def qualified_sign_changes(values, threshold: float) -> int:
    """Count velocity sign changes whose peak-to-peak swing between
    consecutive extrema exceeds threshold.

    Extrema are tracked with hysteresis at the threshold resolution: a
    reversal is confirmed only once the signal has moved more than threshold
    away from the running extremum, so sub-threshold jitter neither fabricates
    sign changes nor fragments a genuine swing.
    """
    if not values:
        return 0
    count = 0
    direction = 0
    extreme = values[0]
    for v in values[1:]:
        if direction == 0:
            if abs(v - extreme) > threshold:
                direction = 1 if v > extreme else -1
                extreme = v
            continue
        if direction > 0:
            if v > extreme:
                extreme = v
            elif extreme - v > threshold:
                count += 1
                direction = -1
                extreme = v
        else:
            if v < extreme:
                extreme = v
            elif v - extreme > threshold:
                count += 1
                direction = 1
                extreme = v
    return count


class HeadTracker:
    """Windowed nod/shake detector over smoothed nose-y and jaw-x signals.

    Keeps roughly window_ms of samples (at most one frame beyond, so the
    boundary difference is still observable) and recomputes the sign-change
    counts from the window contents on every update.
    """

    def __init__(self):
        self.window = deque()  # (t_ms, nose_y_smoothed, jaw_x_smoothed)
        self._ema_nose: Optional[float] = None
        self._ema_jaw: Optional[float] = None
        self._last_t: Optional[int] = None
        self.sign_changes_pitch = 0
        self.sign_changes_yaw = 0

    def update(self, frame: FaceFrame, cfg: ClassifierConfig) -> Optional[Gesture]:
        if self._last_t is not None and frame.t_ms <= self._last_t:
            raise StreamOrderError(f"face frame t_ms {frame.t_ms} not after {self._last_t}")
        self._last_t = frame.t_ms

        if self._ema_nose is None:
            self._ema_nose = frame.nose.y
            self._ema_jaw = frame.jaw.x
        else:
            self._ema_nose = ema(self._ema_nose, frame.nose.y, cfg.ema_alpha)
            self._ema_jaw = ema(self._ema_jaw, frame.jaw.x, cfg.ema_alpha)
        self.window.append((frame.t_ms, self._ema_nose, self._ema_jaw))
        while len(self.window) >= 2 and self.window[1][0] <= frame.t_ms - cfg.window_ms:
            self.window.popleft()

        nose = [w[1] for w in self.window]
        jaw = [w[2] for w in self.window]
        self.sign_changes_pitch = qualified_sign_changes(nose, cfg.nose_threshold)
        self.sign_changes_yaw = qualified_sign_changes(jaw, cfg.jaw_threshold)

        # Nod wins ties: the pitch channel has the tighter threshold.
        if self.sign_changes_pitch >= cfg.min_sign_changes:
            return Gesture.NOD
        if self.sign_changes_yaw >= cfg.min_sign_changes:
            return Gesture.SHAKE
        return None


def update_head(tracker: HeadTracker, frame: FaceFrame, cfg: ClassifierConfig):
    return tracker.update(frame, cfg)


class _EmittedRef:
    """Shared record of the last emitted gesture across debounce channels."""

    __slots__ = ("gesture",)

    def __init__(self):
        self.gesture: Optional[Gesture] = None


class Debouncer:
    """Run-length stability filter plus change-only emission."""

    def __init__(self, stable_frames: int = 3, emitted: Optional[_EmittedRef] = None):
        self.stable_frames = stable_frames
        self._emitted = emitted if emitted is not None else _EmittedRef()
        self._run: Optional[Gesture] = None
        self._run_len = 0

    @property
    def last_emitted(self) -> Optional[Gesture]:
        return self._emitted.gesture

    def feed(self, raw: Optional[Gesture], t_ms: int) -> Optional[GestureEvent]:
        if raw != self._run:
            self._run = raw
            self._run_len = 0
        self._run_len += 1
        if raw is None or self._run_len != self.stable_frames:
            return None
        if raw == self._emitted.gesture:
            return None
        self._emitted.gesture = raw
        return GestureEvent(gesture=raw, t_ms=t_ms)


def debounce(raw_stream, cfg: ClassifierConfig):
    """Apply the debouncer to an iterable of (raw_gesture, t_ms) pairs."""
    deb = Debouncer(cfg.stable_frames)
    events = []
    for raw, t_ms in raw_stream:
        ev = deb.feed(raw, t_ms)
        if ev is not None:
            events.append(ev)
    return events


class GestureClassifier:
    """Frame-in, event-out classifier for one input stream.

    Hand and head channels keep independent stability runs but share the
    last-emitted record, so the global event stream never repeats a gesture
    until a different one has been emitted.
    """

    def __init__(self, cfg: Optional[ClassifierConfig] = None):
        self.cfg = cfg if cfg is not None else ClassifierConfig()
        self.head = HeadTracker()
        self._emitted = _EmittedRef()
        self._hand_deb = Debouncer(self.cfg.stable_frames, self._emitted)
        self._head_deb = Debouncer(self.cfg.stable_frames, self._emitted)

    def classify_frame(self, frame) -> Optional[Gesture]:
        """Raw per-frame classification without debouncing."""
        if isinstance(frame, HandFrame):
            try:
                return classify_hand(bbox_normalize(frame), self.cfg)
            except DegenerateHandError:
                return None
        if isinstance(frame, FaceFrame):
            return self.head.update(frame, self.cfg)
        raise TypeError(f"not a frame: {frame!r}")

    def feed(self, frame) -> list:
        """Consume one parsed record and return any emitted events."""
        events = []
        for sub in subframes(frame):
            raw = self.classify_frame(sub)
            deb = self._hand_deb if isinstance(sub, HandFrame) else self._head_deb
            ev = deb.feed(raw, sub.t_ms)
            if ev is not None:
                events.append(ev)
        return events
