"""Composition of the five expressive gestures from trained stage checkpoints.

G1 holds the three-leg lift (attract attention), G2 holds the forward
extension (go left), G3 is G2 mirrored left-right (go right), G4 alternates
lift and rest poses (waiting), and G5 swings the lifted leg between the lift
and extension targets (waving). All trajectories are desired joint targets at
the control rate with per-step phase labels; execution goes through the
actuator's schedule pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from .quadruped import RobotGeometry
from .rewards import FL, RewardConfig
from .training import Checkpoint

GESTURE_KINDS = ("G1", "G2", "G3", "G4", "G5")

# Stage checkpoints each gesture is composed from.
REQUIRED_STAGES = {"G1": (2,), "G2": (3,), "G3": (3,), "G4": (1, 2), "G5": (2, 3)}


class CheckpointError(ValueError):
    """Required stage checkpoint missing or untrained."""


@dataclass
class GestureParams:
    rate_hz: float = 20.0
    settle_s: float = 1.0
    return_s: float = 1.0
    hold_s: float = 3.0          # active hold for G1/G2/G3
    lift_hold_s: float = 0.5     # G4 per-phase holds
    rest_hold_s: float = 0.5
    transition_s: float = 0.5    # G4 between-pose ramps
    cycles_g4: int = 15
    cycles_g5: int = 31
    cycle_s_g5: float = 1.2
    intro_hold_s: float = 0.5    # G5 lift hold before the swing


@dataclass
class PoseTrajectory:
    """Desired joint targets at a fixed rate with per-step phase labels."""

    targets: np.ndarray  # N x 12
    labels: list
    rate_hz: float

    def __len__(self):
        return len(self.targets)

    def phase_runs(self) -> list:
        """Contiguous (label, length) runs, for counting gesture phases."""
        runs = []
        for label in self.labels:
            if runs and runs[-1][0] == label:
                runs[-1][1] += 1
            else:
                runs.append([label, 1])
        return [(label, n) for label, n in runs]


def mirror_joints(q) -> np.ndarray:
    """Reflect a joint vector left-right: swap each left/right leg pair and
    negate the hip abductions. An involution."""
    q = np.asarray(q, dtype=float)
    out = np.empty_like(q)
    for left, right in ((0, 1), (2, 3)):
        out[3 * left:3 * left + 3] = q[3 * right:3 * right + 3]
        out[3 * right:3 * right + 3] = q[3 * left:3 * left + 3]
    out[0::3] = -out[0::3]
    return out


def mirror_trajectory(traj: PoseTrajectory) -> PoseTrajectory:
    mirrored = np.array([mirror_joints(row) for row in traj.targets])
    return PoseTrajectory(targets=mirrored, labels=list(traj.labels), rate_hz=traj.rate_hz)


def _steps(seconds: float, rate: float) -> int:
    return max(1, int(round(seconds * rate)))


def _ramp(a: np.ndarray, b: np.ndarray, steps: int) -> np.ndarray:
    w = (np.arange(steps) + 1.0) / steps
    return a[None, :] + w[:, None] * (b - a)[None, :]


def _segment(rows, label):
    return rows, [label] * len(rows)


def _require(checkpoints: Dict[int, Checkpoint], kind: str) -> None:
    for stage in REQUIRED_STAGES[kind]:
        ck = checkpoints.get(stage)
        if ck is None:
            raise CheckpointError(f"{kind} needs a trained stage {stage} checkpoint")


def _stage_pose(checkpoints, stage: int, geom: RobotGeometry) -> np.ndarray:
    return geom.q_nominal + np.asarray(checkpoints[stage].dq, dtype=float)


def compose_gesture(kind: str, checkpoints: Dict[int, Checkpoint],
                    geom: RobotGeometry,
                    params: Optional[GestureParams] = None) -> PoseTrajectory:
    """Build the desired 20 Hz trajectory for one gesture."""
    if kind not in GESTURE_KINDS:
        raise ValueError(f"unknown gesture kind {kind!r}")
    params = params if params is not None else GestureParams()
    _require(checkpoints, kind)
    rate = params.rate_hz
    nominal = geom.q_nominal

    if kind == "G3":
        return mirror_trajectory(compose_gesture("G2", checkpoints, geom, params))

    blocks = []

    def add(rows, label):
        if len(rows):
            blocks.append((np.asarray(rows, dtype=float), [label] * len(rows)))

    if kind in ("G1", "G2"):
        pose = _stage_pose(checkpoints, 2 if kind == "G1" else 3, geom)
        add(_ramp(nominal, pose, _steps(params.settle_s, rate)), "settle")
        add(np.repeat(pose[None, :], _steps(params.hold_s, rate), axis=0), "active")
        add(_ramp(pose, nominal, _steps(params.return_s, rate)), "return")

    elif kind == "G4":
        lift = _stage_pose(checkpoints, 2, geom)
        rest = _stage_pose(checkpoints, 1, geom)
        add(_ramp(nominal, lift, _steps(params.settle_s, rate)), "settle")
        ramp_steps = _steps(params.transition_s, rate)
        current = lift
        for cycle in range(params.cycles_g4):
            if cycle > 0:
                add(_ramp(current, lift, ramp_steps), "lift")
            add(np.repeat(lift[None, :], _steps(params.lift_hold_s, rate), axis=0), "lift")
            add(_ramp(lift, rest, ramp_steps), "rest")
            add(np.repeat(rest[None, :], _steps(params.rest_hold_s, rate), axis=0), "rest")
            current = rest
        add(_ramp(rest, nominal, _steps(params.return_s, rate)), "return")

    elif kind == "G5":
        lift = _stage_pose(checkpoints, 2, geom)
        extend = _stage_pose(checkpoints, 3, geom)
        # Support legs hold the extension stance; only the FL triple swings.
        base = extend.copy()
        base[0:3] = lift[0:3]
        swing_from = base
        swing_to = extend
        add(_ramp(nominal, swing_from, _steps(params.settle_s, rate)), "settle")
        add(np.repeat(swing_from[None, :], _steps(params.intro_hold_s, rate), axis=0),
            "active")
        cycle_steps = _steps(params.cycle_s_g5, rate)
        rows = []
        for cycle in range(params.cycles_g5):
            for i in range(cycle_steps):
                # Raised-cosine weight: 0 -> 1 -> 0 per cycle, so every cycle
                # starts and ends at the lift pose.
                w = 0.5 * (1.0 - math.cos(2.0 * math.pi * (i + 1.0) / cycle_steps))
                rows.append(swing_from + w * (swing_to - swing_from))
        add(np.asarray(rows), "active")
        add(_ramp(swing_from, nominal, _steps(params.return_s, rate)), "return")

    targets = np.vstack([b[0] for b in blocks])
    labels = [lab for b in blocks for lab in b[1]]
    return PoseTrajectory(targets=targets, labels=labels, rate_hz=rate)


def gesture_library(checkpoints: Dict[int, Checkpoint], geom: RobotGeometry,
                    schedule=None, params: Optional[GestureParams] = None) -> dict:
    """Scheduled (clamped + smoothed) trajectories keyed by GESTURE_G* command."""
    from .actuator import GestureSchedule, run_schedule

    schedule = schedule if schedule is not None else GestureSchedule()
    library = {}
    for kind in GESTURE_KINDS:
        try:
            traj = compose_gesture(kind, checkpoints, geom, params)
        except CheckpointError:
            continue
        executed = run_schedule(traj.targets, schedule, geom.q_nominal, labels=traj.labels)
        library[f"GESTURE_{kind}"] = executed
    return library


def replay_states(traj, geom: RobotGeometry, cfg: RewardConfig) -> list:
    """Solve the resting state of every step, synthesizing the FL air-time
    clock from the contact sequence (reset on contact)."""
    from .quadruped import simulate_pose
    from .rewards import contact_mask

    targets = traj.targets if hasattr(traj, "targets") else np.asarray(traj)
    dt = 1.0 / (traj.rate_hz if hasattr(traj, "rate_hz") else 20.0)
    states = []
    t_air = 0.0
    for q in targets:
        state = simulate_pose(q - geom.q_nominal, geom)
        if contact_mask(state, cfg.contact_height_tol)[FL]:
            t_air = 0.0
        else:
            t_air += dt
        state.t_air = t_air
        states.append(state)
    return states
