"""Mock quadruped endpoint: posture and locomotion commands on the high-level
path, scheduled joint trajectories on the low-level path.

Semantics mirror the safety contract of the real control stack: any new
continuous motion halts the previous one, posture transitions are exclusive
critical sections, low-level execution is delta-clamped and smoothed, and a
safety check can terminate gesture playback.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .bridge import Command, CommandKind, route, ControlPath
from .quadruped import NUM_JOINTS, RobotGeometry, UnstablePoseError, simulate_pose
from .rewards import QuadState, roll_pitch


class Posture(Enum):
    STANDING = "standing"
    SITTING = "sitting"
    TRANSITIONING = "transitioning"


class BusyError(RuntimeError):
    """Command rejected because an exclusive transition is in progress."""


class TrajectoryError(ValueError):
    """Joint trajectory contains non-finite values."""


@dataclass
class SafetyLimits:
    max_tilt_rad: float = 0.4
    height_min: float = 0.15
    height_max: float = 0.45


@dataclass(frozen=True)
class Verdict:
    ok: bool
    reason: Optional[str] = None


def safety_check(body: QuadState, limits: SafetyLimits,
                 self_collision: bool = False) -> Verdict:
    """Terminate when tilt or base height leaves bounds, or on self-collision."""
    roll, pitch = roll_pitch(body.quat)
    if abs(roll) > limits.max_tilt_rad:
        return Verdict(False, "roll")
    if abs(pitch) > limits.max_tilt_rad:
        return Verdict(False, "pitch")
    h = float(body.p[2])
    if not limits.height_min <= h <= limits.height_max:
        return Verdict(False, "height")
    if self_collision:
        return Verdict(False, "self_collision")
    return Verdict(True)


@dataclass
class GestureSchedule:
    """Settle-active-return execution profile for low-level trajectories."""

    settle_s: float = 1.0
    return_s: float = 1.0
    rate_hz: float = 20.0
    delta_clamp: float = 0.05   # max per-step joint delta (rad)
    smooth_alpha: float = 0.35  # EMA applied to the desired targets


@dataclass
class ExecutedTrajectory:
    """Clamped, smoothed joint targets with per-step phase labels."""

    targets: np.ndarray  # N x 12
    labels: list
    rate_hz: float

    def __len__(self):
        return len(self.targets)


def _interp(a: np.ndarray, b: np.ndarray, steps: int) -> np.ndarray:
    if steps <= 0:
        return np.empty((0, NUM_JOINTS))
    w = (np.arange(steps) + 1.0) / steps
    return a[None, :] + w[:, None] * (b - a)[None, :]


def run_schedule(trajectory, schedule: GestureSchedule, nominal,
                 labels=None) -> ExecutedTrajectory:
    """Execute a desired joint trajectory through the smoothing/clamp pipeline.

    Without labels the trajectory is treated as the active phase and wrapped
    with settle/return interpolations from/to the nominal pose. Per-joint
    steps never exceed delta_clamp, so the output is Lipschitz by
    construction.
    """
    desired = np.asarray(trajectory, dtype=float)
    if desired.ndim == 1:
        desired = desired[None, :]
    if desired.shape[1] != NUM_JOINTS:
        raise TrajectoryError(f"trajectory must be Nx{NUM_JOINTS}")
    if not np.all(np.isfinite(desired)):
        raise TrajectoryError("trajectory contains non-finite joint targets")
    nominal = np.asarray(nominal, dtype=float)

    if labels is None:
        settle_steps = int(round(schedule.settle_s * schedule.rate_hz))
        return_steps = int(round(schedule.return_s * schedule.rate_hz))
        settle = _interp(nominal, desired[0], settle_steps)
        ret = _interp(desired[-1], nominal, return_steps)
        full = np.vstack([settle, desired, ret])
        labels = (["settle"] * settle_steps + ["active"] * len(desired)
                  + ["return"] * return_steps)
    else:
        full = desired
        labels = list(labels)
        if len(labels) != len(full):
            raise TrajectoryError("labels length must match the trajectory")

    out = np.empty_like(full)
    position = nominal.copy()
    smoothed = nominal.copy()
    alpha = schedule.smooth_alpha
    for i, target in enumerate(full):
        smoothed = alpha * target + (1.0 - alpha) * smoothed
        position = position + np.clip(smoothed - position,
                                      -schedule.delta_clamp, schedule.delta_clamp)
        out[i] = position
    return ExecutedTrajectory(targets=out, labels=labels, rate_hz=schedule.rate_hz)


def _crouch_joints(geom: RobotGeometry, height: float) -> np.ndarray:
    """Symmetric crouch pose at the requested base height."""
    thigh = math.acos(height / (geom.thigh_len + geom.calf_len))
    q = np.zeros(NUM_JOINTS)
    q[1::3] = thigh
    q[2::3] = -2.0 * thigh
    return q


@dataclass
class ActuatorState:
    posture: Posture
    active_motion: Optional[str]
    speed_level: int
    body: QuadState


class Actuator:
    """Single-writer actuation loop; commands arrive through apply_command,
    the tick loop is the only mutator of the body state."""

    SPEED_MS = 0.1     # m/s per speed level for kinematic locomotion
    SIT_HEIGHT = 0.16  # m

    def __init__(self, geom: Optional[RobotGeometry] = None,
                 schedule: Optional[GestureSchedule] = None,
                 limits: Optional[SafetyLimits] = None,
                 gesture_library: Optional[dict] = None,
                 transition_s: float = 1.0):
        self.geom = geom if geom is not None else RobotGeometry()
        self.schedule = schedule if schedule is not None else GestureSchedule()
        self.limits = limits if limits is not None else SafetyLimits()
        self.gesture_library = gesture_library if gesture_library is not None else {}
        self.transition_s = transition_s

        self._lock = threading.Lock()
        self.posture = Posture.STANDING
        self.active_motion: Optional[str] = None
        self.speed_level = 1
        self.t_ms = 0
        self.events: list = []        # (event, detail) log for transition auditing
        self.safety_trips: list = []

        self._q = self.geom.q_nominal.copy()
        self._travel = np.zeros(3)
        self._transition = None       # (target posture, path, index)
        self._gesture = None          # (ExecutedTrajectory, index)
        self.body = self._solve_body()

    # -- command path ------------------------------------------------------

    def apply_command(self, cmd) -> None:
        kind = cmd.kind if isinstance(cmd, Command) else cmd
        with self._lock:
            if kind in (CommandKind.STAND, CommandKind.SIT):
                self._apply_posture(kind)
            elif kind in (CommandKind.MOVE_FWD, CommandKind.MOVE_BWD):
                if self.posture is Posture.TRANSITIONING:
                    raise BusyError(f"{kind.value} rejected: posture transition in progress")
                if self.posture is not Posture.STANDING:
                    raise BusyError(f"{kind.value} rejected: not standing")
                self._halt_motion()
                self.active_motion = kind.value
            elif kind is CommandKind.STOP:
                self._halt_motion()
            elif kind is CommandKind.SPEED_UP:
                self.speed_level = min(5, self.speed_level + 1)
            elif kind is CommandKind.SPEED_DOWN:
                self.speed_level = max(0, self.speed_level - 1)
            elif route(kind) is ControlPath.LOW_LEVEL:
                if self.posture is Posture.TRANSITIONING:
                    raise BusyError(f"{kind.value} rejected: posture transition in progress")
                try:
                    traj = self.gesture_library[kind.value]
                except KeyError:
                    from .gestures import CheckpointError
                    raise CheckpointError(f"no trajectory loaded for {kind.value}")
                self._halt_motion()
                self.active_motion = kind.value
                self._gesture = [traj, 0]
            else:
                raise ValueError(f"unhandled command kind {kind}")

    def _apply_posture(self, kind: CommandKind) -> None:
        target = Posture.STANDING if kind is CommandKind.STAND else Posture.SITTING
        if self.posture is Posture.TRANSITIONING:
            raise BusyError(f"{kind.value} rejected: posture transition in progress")
        if self.posture is target:
            return
        self._halt_motion()
        goal_q = (self.geom.q_nominal if target is Posture.STANDING
                  else _crouch_joints(self.geom, self.SIT_HEIGHT))
        steps = max(1, int(round(self.transition_s * self.schedule.rate_hz)))
        path = _interp(self._q, goal_q, steps)
        self.posture = Posture.TRANSITIONING
        self._transition = [target, path, 0]
        self.events.append(("transition_start", target.value))

    def _halt_motion(self) -> None:
        self.active_motion = None
        self._gesture = None

    # -- actuation loop ----------------------------------------------------

    def _solve_body(self) -> QuadState:
        state = simulate_pose(self._q - self.geom.q_nominal, self.geom)
        if np.any(self._travel):
            state = replace(state, p=state.p + self._travel,
                            foot_pos_world=state.foot_pos_world + self._travel[None, :])
        return state

    def tick(self) -> dict:
        """Advance one control step and return the telemetry sample."""
        with self._lock:
            dt = 1.0 / self.schedule.rate_hz
            self.t_ms += int(round(1000.0 * dt))
            phase = None

            if self._transition is not None:
                target, path, i = self._transition
                self._q = path[i]
                self._transition[2] = i + 1
                if i + 1 >= len(path):
                    self.posture = target
                    self._transition = None
                    self.events.append(("transition_end", target.value))
                self.body = self._solve_body()
            elif self._gesture is not None:
                traj, i = self._gesture
                self._q = traj.targets[i]
                phase = traj.labels[i]
                self._gesture[1] = i + 1
                try:
                    self.body = self._solve_body()
                    verdict = safety_check(self.body, self.limits)
                except UnstablePoseError:
                    verdict = Verdict(False, "unstable")
                if not verdict.ok:
                    self.safety_trips.append((self.t_ms, verdict.reason))
                    self._halt_motion()
                    self._q = self.geom.q_nominal.copy()
                    self.body = self._solve_body()
                elif i + 1 >= len(traj):
                    self._halt_motion()
            elif self.active_motion in (CommandKind.MOVE_FWD.value,
                                        CommandKind.MOVE_BWD.value):
                sign = 1.0 if self.active_motion == CommandKind.MOVE_FWD.value else -1.0
                self._travel[0] += sign * self.speed_level * self.SPEED_MS * dt
                self.body = self._solve_body()

            return self.telemetry(phase)

    def telemetry(self, phase: Optional[str] = None) -> dict:
        roll, pitch = roll_pitch(self.body.quat)
        return {
            "t_ms": self.t_ms,
            "posture": self.posture.value,
            "h": float(self.body.p[2]),
            "roll": roll,
            "pitch": pitch,
            "feet_fz": self.body.F_z.tolist(),
            "active": self.active_motion,
            "phase": phase,
            "speed_level": self.speed_level,
        }

    def snapshot(self) -> ActuatorState:
        with self._lock:
            return ActuatorState(posture=self.posture, active_motion=self.active_motion,
                                 speed_level=self.speed_level, body=self.body)
