"""Synthetic labeled landmark corpus: generation, perturbation, evaluation.

Clips are deterministic given a seed. Each hand clip is a base geometry for
its gesture with a per-clip similarity transform (scale, rotation,
translation), per-clip landmark placement jitter, and small per-frame jitter.
Head clips are nose/jaw sinusoids with amplitudes comfortably above or below
the detection thresholds.

Clip-level prediction is the majority vote over raw per-frame
classifications, which is what the accuracy report measures. Event debouncing
is exercised separately by the live pipeline.
"""

from __future__ import annotations

import json
import math
import time
from collections import Counter
from pathlib import Path
from typing import Optional

import numpy as np

from .classifier import ClassifierConfig, Gesture, GestureClassifier
from .landmarks import FaceFrame, HandFrame, Landmark, iter_corpus, read_frames

HAND_LABELS = ("open_palm", "fist", "thumb_up", "thumb_down", "pointing_up")
HEAD_LABELS = ("nod", "shake")

FPS = 30
FRAME_MS = 33


def _chain(mcp, direction_deg, seg_lengths):
    """Straight finger chain from the MCP joint: [mcp, pip, dip, tip]."""
    a = math.radians(direction_deg)
    d = np.array([math.cos(a), math.sin(a)])
    pts = [np.asarray(mcp, dtype=float)]
    for seg in seg_lengths:
        pts.append(pts[-1] + seg * d)
    return pts


def _curled_finger(mcp, palm_center, rise, tip_offset):
    """Flexed finger: PIP straight up from the MCP, tip folded near the palm
    center, DIP between with a slight outward bulge."""
    mcp = np.asarray(mcp, dtype=float)
    pip = mcp + np.array([0.0, -rise])
    tip = np.asarray(palm_center, dtype=float) + np.asarray(tip_offset, dtype=float)
    dip = pip + 0.6 * (tip - pip) + np.array([0.012, -0.004])
    return [mcp, pip, dip, tip]


def _assemble(wrist, thumb, index, middle, ring, pinky) -> np.ndarray:
    pts = [np.asarray(wrist, dtype=float)]
    pts.extend(np.asarray(p, dtype=float) for p in thumb)
    for finger in (index, middle, ring, pinky):
        pts.extend(np.asarray(p, dtype=float) for p in finger)
    out = np.vstack(pts)
    assert out.shape == (21, 2)
    return out


def _base_open_palm() -> np.ndarray:
    thumb = [(0.445, 0.705), (0.395, 0.670), (0.350, 0.635), (0.305, 0.600)]
    index = _chain((0.425, 0.575), -93.0, (0.095, 0.085, 0.080))
    middle = _chain((0.475, 0.565), -90.0, (0.102, 0.090, 0.088))
    ring = _chain((0.525, 0.570), -87.0, (0.095, 0.085, 0.080))
    pinky = _chain((0.575, 0.585), -80.0, (0.080, 0.070, 0.060))
    return _assemble((0.50, 0.74), thumb, index, middle, ring, pinky)


def _base_fist() -> np.ndarray:
    center = (0.502, 0.587)
    thumb = [(0.430, 0.670), (0.385, 0.630), (0.430, 0.602), (0.478, 0.595)]
    index = _curled_finger((0.390, 0.555), center, 0.078, (-0.010, -0.007))
    middle = _curled_finger((0.465, 0.545), center, 0.080, (-0.002, 0.007))
    ring = _curled_finger((0.540, 0.550), center, 0.078, (0.010, -0.005))
    pinky = _curled_finger((0.615, 0.565), center, 0.070, (0.010, 0.008))
    return _assemble((0.50, 0.72), thumb, index, middle, ring, pinky)


def _side_fist_fingers():
    """Sideways fist (for thumb gestures): finger chains fold back toward the palm."""
    fingers = []
    for mcp_y in (0.500, 0.555, 0.610, 0.660):
        mcp = np.array([0.455, mcp_y])
        pip = mcp + np.array([-0.068, 0.005])
        dip = pip + np.array([0.012, 0.025])
        tip = dip + np.array([0.063, -0.002])
        fingers.append([mcp, pip, dip, tip])
    return fingers


def _base_thumb_up() -> np.ndarray:
    index, middle, ring, pinky = _side_fist_fingers()
    thumb = [(0.500, 0.520), (0.475, 0.460), (0.468, 0.400), (0.462, 0.345)]
    return _assemble((0.560, 0.660), thumb, index, middle, ring, pinky)


def _base_thumb_down() -> np.ndarray:
    pts = _base_thumb_up().copy()
    pts[:, 1] = 1.04 - pts[:, 1]  # vertical reflection keeps the flex angles
    return pts


def _base_pointing_up() -> np.ndarray:
    center = (0.503, 0.584)
    thumb = [(0.445, 0.665), (0.410, 0.630), (0.448, 0.607), (0.483, 0.603)]
    index = _chain((0.400, 0.545), -91.0, (0.098, 0.088, 0.084))
    middle = _curled_finger((0.470, 0.540), center, 0.075, (-0.006, 0.006))
    ring = _curled_finger((0.540, 0.548), center, 0.078, (0.007, -0.006))
    pinky = _curled_finger((0.605, 0.565), center, 0.070, (0.012, 0.008))
    return _assemble((0.50, 0.72), thumb, index, middle, ring, pinky)


_BASE_HANDS = {
    "open_palm": _base_open_palm,
    "fist": _base_fist,
    "thumb_up": _base_thumb_up,
    "thumb_down": _base_thumb_down,
    "pointing_up": _base_pointing_up,
}


def synth_hand(label: str, rng: np.random.Generator) -> np.ndarray:
    """Base geometry for a gesture with a per-clip similarity transform."""
    pts = _BASE_HANDS[label]().copy()
    centroid = pts.mean(axis=0)
    scale = rng.uniform(0.85, 1.20)
    angle = rng.uniform(-0.05, 0.05)
    shift = rng.uniform(-0.08, 0.08, size=2)
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    pts = (pts - centroid) @ rot.T * scale + centroid + shift
    pts += rng.normal(0.0, 0.003, size=pts.shape)
    return pts


def hand_clip_frames(label: str, rng: np.random.Generator,
                     n_frames: Optional[int] = None) -> list:
    """Frame dicts for one hand clip at 30 fps."""
    n = n_frames if n_frames is not None else int(rng.integers(26, 36))
    base = synth_hand(label, rng)
    z = rng.normal(0.0, 0.02, size=(21, 1))
    frames = []
    for i in range(n):
        pts = base + rng.normal(0.0, 0.0015, size=base.shape)
        hand = np.hstack([pts, z])
        frames.append({"t_ms": i * FRAME_MS, "hand": [[round(float(v), 6) for v in p]
                                                      for p in hand]})
    return frames


def head_clip_frames(label: str, rng: np.random.Generator,
                     n_frames: Optional[int] = None) -> list:
    """Nose/jaw sinusoid clip; the moving channel's amplitude clears its
    threshold with margin, the quiet channel only carries jitter."""
    n = n_frames if n_frames is not None else int(rng.integers(48, 62))
    period_ms = rng.uniform(220.0, 300.0)
    phase = rng.uniform(0.0, 2.0 * math.pi)
    nose0 = rng.uniform(0.38, 0.44)
    jaw0 = rng.uniform(0.47, 0.53)
    if label == "nod":
        nose_amp, jaw_amp = rng.uniform(0.032, 0.045), 0.0
    else:
        nose_amp, jaw_amp = 0.0, rng.uniform(0.035, 0.050)
    frames = []
    for i in range(n):
        t = i * FRAME_MS
        osc = math.sin(2.0 * math.pi * t / period_ms + phase)
        nose_y = nose0 + nose_amp * osc + rng.normal(0.0, 0.0008)
        jaw_x = jaw0 + jaw_amp * osc + rng.normal(0.0, 0.0008)
        frames.append({"t_ms": t,
                       "face": {"nose": [round(0.5 + rng.normal(0.0, 0.0008), 6),
                                         round(nose_y, 6)],
                                "jaw": [round(jaw_x, 6),
                                        round(0.62 + rng.normal(0.0, 0.0008), 6)]}})
    return frames


def generate_corpus(root, clips_per_hand: int = 25, clips_per_head: int = 5,
                    seed: int = 7) -> int:
    """Write the labeled corpus tree; returns the number of clips written."""
    root = Path(root)
    rng = np.random.default_rng(seed)
    n_written = 0
    for label in HAND_LABELS:
        directory = root / label
        directory.mkdir(parents=True, exist_ok=True)
        for k in range(clips_per_hand):
            frames = hand_clip_frames(label, rng)
            path = directory / f"clip_{k:03d}.ndjson"
            path.write_text("\n".join(json.dumps(f, separators=(",", ":"))
                                      for f in frames) + "\n")
            n_written += 1
    for label in HEAD_LABELS:
        directory = root / label
        directory.mkdir(parents=True, exist_ok=True)
        for k in range(clips_per_head):
            frames = head_clip_frames(label, rng)
            path = directory / f"clip_{k:03d}.ndjson"
            path.write_text("\n".join(json.dumps(f, separators=(",", ":"))
                                      for f in frames) + "\n")
            n_written += 1
    return n_written


def _perturb_landmark(pt: Landmark, rng: np.random.Generator, sigma: float) -> Landmark:
    return Landmark(pt.x + rng.normal(0.0, sigma), pt.y + rng.normal(0.0, sigma), pt.z)


def perturb_frame(frame, rng: np.random.Generator, sigma: float):
    """Zero-mean landmark noise on every coordinate of a frame."""
    if isinstance(frame, tuple):
        return tuple(perturb_frame(f, rng, sigma) for f in frame)
    if isinstance(frame, HandFrame):
        return HandFrame(t_ms=frame.t_ms,
                         points=tuple(_perturb_landmark(p, rng, sigma)
                                      for p in frame.points))
    return FaceFrame(t_ms=frame.t_ms,
                     nose=_perturb_landmark(frame.nose, rng, sigma),
                     jaw=_perturb_landmark(frame.jaw, rng, sigma))


def predict_clip(frames, cfg: ClassifierConfig):
    """Clip-level prediction from raw per-frame classifications.

    Hand gestures are decided by majority vote. When both head gestures fire
    somewhere in a clip, the channels are disambiguated by their aggregate
    qualifying sign-change counts over the whole clip, which integrates far
    more evidence than any single 400 ms window.

    Returns (label or None, channel, classify_seconds)."""
    clf = GestureClassifier(cfg)
    votes = Counter()
    order = {}
    channel = "hand"
    elapsed = 0.0
    pitch_total = 0
    yaw_total = 0
    for frame in frames:
        t0 = time.perf_counter()
        for sub in (frame if isinstance(frame, tuple) else (frame,)):
            raw = clf.classify_frame(sub)
            if isinstance(sub, FaceFrame):
                channel = "head"
                pitch_total += clf.head.sign_changes_pitch
                yaw_total += clf.head.sign_changes_yaw
            if raw is not None:
                votes[raw] += 1
                order.setdefault(raw, len(order))
        elapsed += time.perf_counter() - t0
    if not votes:
        return None, channel, elapsed
    if Gesture.NOD in votes and Gesture.SHAKE in votes:
        head_pick = Gesture.NOD if pitch_total >= yaw_total else Gesture.SHAKE
        votes[head_pick] += votes.pop(
            Gesture.SHAKE if head_pick is Gesture.NOD else Gesture.NOD)
    top = max(votes.items(), key=lambda kv: (kv[1], -order[kv[0]]))
    return top[0].value, channel, elapsed


def evaluate_corpus(corpus_dir, cfg: Optional[ClassifierConfig] = None,
                    noise_sigma: float = 0.0, seed: int = 0) -> dict:
    """Classify every clip in the corpus and report per-channel accuracy,
    a confusion matrix, and classifier-only latency."""
    cfg = cfg if cfg is not None else ClassifierConfig()
    rng = np.random.default_rng(seed)
    confusion: dict = {}
    totals = {"hand": [0, 0], "head": [0, 0]}  # [correct, total]
    total_time = 0.0
    n_frames = 0
    for label, clip_path in iter_corpus(corpus_dir):
        frames = list(read_frames(clip_path))
        if noise_sigma > 0.0:
            frames = [perturb_frame(f, rng, noise_sigma) for f in frames]
        predicted, channel, elapsed = predict_clip(frames, cfg)
        total_time += elapsed
        n_frames += len(frames)
        confusion.setdefault(label, Counter())[predicted or "none"] += 1
        bucket = totals["head" if label in HEAD_LABELS else "hand"]
        bucket[0] += int(predicted == label)
        bucket[1] += 1
    report = {
        "noise_sigma": noise_sigma,
        "confusion": {k: dict(v) for k, v in confusion.items()},
        "latency_ms_per_frame": 1000.0 * total_time / max(1, n_frames),
    }
    for channel, (correct, total) in totals.items():
        report[channel] = {"correct": correct, "total": total,
                           "accuracy": correct / total if total else None}
    return report
