"""Curriculum reward terms, stability gating, and trajectory metrics.

Stage 1 rewards a preparatory four-leg stance that unloads the front-left leg
onto the FR/RL/RR tripod; stage 2 adds the leg-lift terms behind a stability
gate; stage 3 swaps the clearance hinge for a height-target kernel and adds
the forward-extension kernel. Every kernel is a pure function of the state
snapshot and the config, so trajectory scoring parallelizes trivially.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

# Leg order everywhere: FL, FR, RL, RR; joints per leg: hip abduction, thigh, calf.
LEG_NAMES = ("FL", "FR", "RL", "RR")
FL, FR, RL, RR = range(4)
SUPPORT_TRIPOD = (FR, RL, RR)
JOINTS_PER_LEG = 3
NUM_JOINTS = 12


class NoContactError(ValueError):
    """Center of pressure undefined: no vertical force anywhere."""


class DegenerateSupportError(ValueError):
    """Support polygon has (near) zero area."""


class EmptyTrajectoryError(ValueError):
    """Metrics requested for an empty trajectory."""


def _vec(x, n, name) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.shape != (n,):
        raise ValueError(f"{name} must have shape ({n},), got {a.shape}")
    return a


@dataclass
class QuadState:
    """One quadruped snapshot: base pose/velocities, joints, feet, contact forces."""

    p: np.ndarray                # base position, world (m)
    quat: np.ndarray             # base orientation, unit quaternion (w, x, y, z)
    v: np.ndarray                # base linear velocity (m/s)
    w: np.ndarray                # base angular velocity (rad/s)
    q: np.ndarray                # 12 joint positions (rad)
    qd: np.ndarray               # 12 joint velocities (rad/s)
    last_action: np.ndarray      # last commanded joint targets (rad)
    foot_pos_world: np.ndarray   # 4x3 (m), ground plane at z=0
    foot_pos_body: np.ndarray    # 4x3 (m)
    F_z: np.ndarray              # vertical ground-reaction force per foot (N)
    t_air: float = 0.0           # cumulative FL off-ground time (s), reset on contact

    def __post_init__(self):
        self.p = _vec(self.p, 3, "p")
        self.quat = _vec(self.quat, 4, "quat")
        self.v = _vec(self.v, 3, "v")
        self.w = _vec(self.w, 3, "w")
        self.q = _vec(self.q, NUM_JOINTS, "q")
        self.qd = _vec(self.qd, NUM_JOINTS, "qd")
        self.last_action = _vec(self.last_action, NUM_JOINTS, "last_action")
        self.foot_pos_world = np.asarray(self.foot_pos_world, dtype=float).reshape(4, 3)
        self.foot_pos_body = np.asarray(self.foot_pos_body, dtype=float).reshape(4, 3)
        self.F_z = _vec(self.F_z, 4, "F_z")
        if abs(np.linalg.norm(self.quat) - 1.0) > 1e-6:
            raise ValueError("quat must be normalized to 1e-6")
        if np.any(self.F_z < -1e-9):
            raise ValueError("F_z must be non-negative")
        self.F_z = np.maximum(self.F_z, 0.0)

    def to_dict(self) -> dict:
        return {
            "t_air": self.t_air,
            "p": self.p.tolist(), "quat": self.quat.tolist(),
            "v": self.v.tolist(), "w": self.w.tolist(),
            "q": self.q.tolist(), "qd": self.qd.tolist(),
            "last_action": self.last_action.tolist(),
            "foot_pos_world": self.foot_pos_world.tolist(),
            "foot_pos_body": self.foot_pos_body.tolist(),
            "F_z": self.F_z.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "QuadState":
        kwargs = {k: data[k] for k in ("p", "quat", "v", "w", "q", "qd", "last_action",
                                       "foot_pos_world", "foot_pos_body", "F_z")}
        return cls(t_air=float(data.get("t_air", 0.0)), **kwargs)


@dataclass
class RewardConfig:
    """Gains, targets, and thresholds for all reward stages.

    Gain units: k_support/k_no_contact are 1/N, k_height_target/k_extend/
    k_base_height are 1/m^2, k_orient is 1/rad^2.
    """

    k_distribute: float = 5.0
    k_cop: float = 50.0
    k_unload: float = 10.0
    k_support: float = 0.5
    k_no_contact: float = 0.5
    k_height_target: float = 200.0
    k_extend: float = 100.0
    k_orient: float = 8.0
    k_base_height: float = 800.0

    # Targets. The share targets are replaced at startup by the static
    # equilibrium solver (see training.configure_targets) instead of being
    # hand-picked: stage 1 aims at the preparatory four-leg stance's tripod
    # shares, the lifted stages at the tripod-centroid shares.
    support_share_target: tuple = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)
    stage1_share_target: tuple = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)
    fl_unload_target: float = 0.05       # target FL force fraction
    clearance_target: float = 0.05       # stage-2 relative foot height (m)
    foot_height_target: float = 0.08     # stage-3 world foot height (m)
    extend_forward_offset: float = 0.15  # forward shift of the stage-3 XY target (m)
    extend_target_xy: tuple = (0.34, 0.145)  # body frame; nominal FL stance + offset
    air_time_target: float = 0.5         # s
    dt: float = 0.05                     # control step, 20 Hz
    base_height_target: float = 0.300    # m

    # Thresholds.
    support_force_min: float = 10.0      # N, minimum per-support-foot force
    contact_force_eps: float = 5.0       # N, near-zero contact threshold
    cop_margin: float = 0.03             # m, CoP safety margin inside the polygon
    contact_height_tol: float = 0.003    # m, geometric contact tolerance

    # Regularization.
    torque_weight: float = 1e-4
    default_pose_weight: float = 0.02
    velocity_weight: float = 0.01
    pd_gain: float = 20.0                # torque proxy gain (N*m/rad)
    q_default: Optional[tuple] = None    # default joint configuration (12,)

    # Stage-3 success needs a joint-space extension target (FL thigh, calf).
    fl_extension_joints: Optional[tuple] = None

    # "margin" rewards the CoP for staying at least cop_margin inside the
    # polygon; "literal" penalizes distance from the nearest edge as printed.
    cop_rule: str = "margin"

    def __post_init__(self):
        for name in ("support_share_target", "stage1_share_target"):
            alpha = np.asarray(getattr(self, name), dtype=float)
            if alpha.shape != (3,) or np.any(alpha <= 0) or abs(alpha.sum() - 1.0) > 1e-9:
                raise ValueError(f"{name} must be a positive 3-simplex point")
        if abs(self.dt - 0.05) > 1e-12:
            raise ValueError("dt is pinned to 0.05 s (20 Hz control loop)")
        for name in ("k_distribute", "k_cop", "k_unload", "k_support", "k_no_contact",
                     "k_height_target", "k_extend", "k_orient", "k_base_height"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.cop_rule not in ("margin", "literal"):
            raise ValueError("cop_rule must be 'margin' or 'literal'")

    @classmethod
    def from_dict(cls, data: dict) -> "RewardConfig":
        known = {k: (tuple(v) if isinstance(v, list) else v)
                 for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass
class RewardBreakdown:
    """Per-term reward values plus the gate and regularization that combine them.

    total == sum(ungated terms) + gate * sum(gated terms) + regularization,
    recomputable exactly from the stored entries.
    """

    stage: int
    terms: dict
    gated: frozenset
    gate: float
    regularization: float
    total: float

    def recompute_total(self) -> float:
        ungated = sum(v for k, v in self.terms.items() if k not in self.gated)
        gated = sum(v for k, v in self.terms.items() if k in self.gated)
        return ungated + self.gate * gated + self.regularization

    def to_dict(self) -> dict:
        return {"stage": self.stage, "terms": dict(self.terms),
                "gated": sorted(self.gated), "gate": self.gate,
                "regularization": self.regularization, "total": self.total}


@dataclass
class TrajectoryMetrics:
    episode_s: float
    mean_height_m: float
    height_mae_m: float
    roll_rms_deg: float
    contact_fraction: tuple            # per foot, F_z above the contact threshold
    tripod_contact_fraction: float     # all three support feet in contact
    lift_success_rate: float
    mean_force_fractions: tuple
    final_fl_joint_error: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "episode_s": self.episode_s,
            "mean_height_m": self.mean_height_m,
            "height_mae_m": self.height_mae_m,
            "roll_rms_deg": self.roll_rms_deg,
            "contact_fraction": list(self.contact_fraction),
            "tripod_contact_fraction": self.tripod_contact_fraction,
            "lift_success_rate": self.lift_success_rate,
            "mean_force_fractions": list(self.mean_force_fractions),
            "final_fl_joint_error": self.final_fl_joint_error,
        }


def roll_pitch(quat) -> tuple:
    """Roll and pitch (rad) of a (w, x, y, z) quaternion, ZYX convention."""
    w, x, y, z = np.asarray(quat, dtype=float)
    roll = math.atan2(2.0 * (w * x + y * z), 1.0 - 2.0 * (x * x + y * y))
    pitch = math.asin(max(-1.0, min(1.0, 2.0 * (w * y - z * x))))
    return roll, pitch


def quat_from_roll_pitch(roll: float, pitch: float) -> np.ndarray:
    """Quaternion (w, x, y, z) for Ry(pitch) * Rx(roll), no yaw."""
    cr, sr = math.cos(roll / 2.0), math.sin(roll / 2.0)
    cp, sp = math.cos(pitch / 2.0), math.sin(pitch / 2.0)
    return np.array([cp * cr, cp * sr, sp * cr, -sp * sr])


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def contact_mask(state: QuadState, tol: float = 0.003) -> np.ndarray:
    """Feet geometrically on the ground (world z within tol)."""
    return state.foot_pos_world[:, 2] <= tol


def cop(F_z, foot_pos_world) -> np.ndarray:
    """Center of pressure: force-weighted mean of foot ground positions (x, y)."""
    F = np.asarray(F_z, dtype=float)
    pts = np.asarray(foot_pos_world, dtype=float)
    total = F.sum()
    if total <= 0.0:
        raise NoContactError("all vertical forces are zero")
    return (F[:, None] * pts[:, :2]).sum(axis=0) / total


def _convex_hull_xy(points) -> list:
    """Andrew monotone chain; returns the hull counter-clockwise as tuples."""
    pts = sorted((float(p[0]), float(p[1])) for p in points)
    pts = [pts[0]] + [p for a, p in zip(pts, pts[1:]) if p != a]
    if len(pts) < 3:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def _polygon_area(hull) -> float:
    total = 0.0
    n = len(hull)
    for i in range(n):
        ax, ay = hull[i]
        bx, by = hull[(i + 1) % n]
        total += ax * by - ay * bx
    return 0.5 * abs(total)


def edge_margin(point, support_feet) -> float:
    """Signed distance from point to the nearest support-polygon edge line.

    Positive inside the polygon, zero on an edge, negative outside.
    """
    pts = np.asarray(support_feet, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise DegenerateSupportError("support polygon needs at least 3 feet")
    hull = _convex_hull_xy(pts[:, :2])
    if len(hull) < 3 or _polygon_area(hull) <= 1e-6:
        raise DegenerateSupportError("support polygon area below 1e-6 m^2")
    px, py = float(point[0]), float(point[1])
    margin = math.inf
    n = len(hull)
    for i in range(n):
        ax, ay = hull[i]
        bx, by = hull[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        # CCW hull: positive cross product means the point is on the inner side.
        m = (ex * (py - ay) - ey * (px - ax)) / math.hypot(ex, ey)
        if m < margin:
            margin = m
    return margin


def _share_kernel(alpha, target, gain: float) -> float:
    a = np.asarray(alpha, dtype=float)
    t = np.asarray(target, dtype=float)
    return math.exp(-gain * float(np.abs(a - t).sum()))


def r_distribute(alpha, cfg: RewardConfig) -> float:
    """Tripod force-share kernel: exp(-k * L1(alpha - alpha_target))."""
    return _share_kernel(alpha, cfg.support_share_target, cfg.k_distribute)


def r_cop(margin: float, cfg: RewardConfig) -> float:
    """CoP containment kernel over the signed inside-margin.

    Margin reading: full reward once the CoP sits at least cop_margin inside
    the polygon, exponential decay as it approaches or exits the boundary.
    The literal reading penalizes unsigned distance from the nearest edge
    beyond the margin instead.
    """
    if cfg.cop_rule == "literal":
        violation = max(0.0, abs(margin) - cfg.cop_margin)
    else:
        violation = max(0.0, cfg.cop_margin - margin)
    return math.exp(-cfg.k_cop * violation)


def r_unload(phi_fl: float, cfg: RewardConfig) -> float:
    """FL unloading hinge kernel: saturated at 1 once the fraction reaches target."""
    return math.exp(-cfg.k_unload * max(0.0, phi_fl - cfg.fl_unload_target))


def r_support(forces, cfg: RewardConfig) -> float:
    """Product of logistic floors keeping every support foot above F_min."""
    out = 1.0
    for f in np.asarray(forces, dtype=float):
        out *= sigmoid(cfg.k_support * (f - cfg.support_force_min))
    return out


def r_no_contact(f_fl: float, cfg: RewardConfig) -> float:
    """Rewards near-zero force on the lifted foot."""
    return sigmoid(cfg.k_no_contact * (cfg.contact_force_eps - f_fl))


def r_clearance(z_rel: float, cfg: RewardConfig) -> float:
    """Linear hinge above the relative clearance target."""
    return max(0.0, z_rel - cfg.clearance_target)


def r_air_time(t_air: float, cfg: RewardConfig) -> float:
    """Saturating ramp once cumulative air time passes the target."""
    return min(1.0, max(0.0, t_air - cfg.air_time_target) / cfg.dt)


def r_clearance_target(z: float, cfg: RewardConfig) -> float:
    """Stage-3 world-height kernel."""
    err = z - cfg.foot_height_target
    return math.exp(-cfg.k_height_target * err * err)


def r_extend(p_xy, cfg: RewardConfig) -> float:
    """Stage-3 forward-reach kernel on the body-frame foot XY position."""
    d = np.asarray(p_xy, dtype=float) - np.asarray(cfg.extend_target_xy, dtype=float)
    return math.exp(-cfg.k_extend * float(d @ d))


def _cop_margin(state: QuadState, cfg: RewardConfig) -> Optional[float]:
    """Signed CoP margin over the geometric contact polygon; None when undefined."""
    mask = contact_mask(state, cfg.contact_height_tol)
    if mask.sum() < 3:
        return None
    try:
        c = cop(state.F_z, state.foot_pos_world)
        return edge_margin(c, state.foot_pos_world[mask])
    except (NoContactError, DegenerateSupportError):
        return None


def stability_gate(state: QuadState, cfg: RewardConfig) -> float:
    """Orientation kernel times CoP kernel; zero when the CoP is undefined."""
    roll, pitch = roll_pitch(state.quat)
    orient = math.exp(-cfg.k_orient * (roll * roll + pitch * pitch))
    margin = _cop_margin(state, cfg)
    if margin is None:
        return 0.0
    return orient * r_cop(margin, cfg)


def _regularization(state: QuadState, cfg: RewardConfig) -> float:
    tau = cfg.pd_gain * (state.last_action - state.q)
    reg = -cfg.torque_weight * float(tau @ tau)
    if cfg.q_default is not None:
        dq = state.q - np.asarray(cfg.q_default, dtype=float)
        reg -= cfg.default_pose_weight * float(dq @ dq)
    return reg


def stage_reward(stage: int, state: QuadState, cfg: RewardConfig) -> RewardBreakdown:
    """Score one state under the stage's reward composition.

    A state with the wrong contact topology is not an error: the contact term
    and the force-dependent kernels simply score low, and the breakdown shows
    where.
    """
    if stage not in (1, 2, 3):
        raise ValueError(f"stage must be 1, 2, or 3, got {stage}")

    roll, pitch = roll_pitch(state.quat)
    height = float(state.p[2])
    mask = contact_mask(state, cfg.contact_height_tol)
    total_force = float(state.F_z.sum())
    tripod_forces = state.F_z[list(SUPPORT_TRIPOD)]
    tripod_sum = float(tripod_forces.sum())

    h_err = height - cfg.base_height_target
    orient_kernel = math.exp(-cfg.k_orient * (roll * roll + pitch * pitch))
    terms = {
        "base_height": 0.5 * math.exp(-cfg.k_base_height * h_err * h_err),
        "base_orientation": 0.5 * orient_kernel,
        "base_velocity": -cfg.velocity_weight * float(state.v @ state.v + state.w @ state.w),
    }
    # Required topology: all four feet down in stage 1, tripod down afterwards.
    if stage == 1:
        terms["contact"] = 1.0 if bool(mask.all()) else 0.0
    else:
        terms["contact"] = 1.0 if bool(mask[list(SUPPORT_TRIPOD)].all()) else 0.0

    share_target = cfg.stage1_share_target if stage == 1 else cfg.support_share_target
    terms["distribute"] = (_share_kernel(tripod_forces / tripod_sum, share_target,
                                         cfg.k_distribute) if tripod_sum > 0 else 0.0)
    margin = _cop_margin(state, cfg)
    terms["cop"] = r_cop(margin, cfg) if margin is not None else 0.0
    gate = orient_kernel * terms["cop"] if margin is not None else 0.0

    gated: set = set()
    if stage == 1:
        phi_fl = state.F_z[FL] / total_force if total_force > 0 else 0.0
        terms["unload"] = r_unload(phi_fl, cfg)
    else:
        terms["support"] = r_support(tripod_forces, cfg)
        terms["no_contact"] = r_no_contact(float(state.F_z[FL]), cfg)
        terms["air_time"] = r_air_time(state.t_air, cfg)
        gated.update(("no_contact", "air_time"))
        z_fl = float(state.foot_pos_world[FL, 2])
        if stage == 2:
            terms["clearance"] = r_clearance(z_fl, cfg)
            gated.add("clearance")
        else:
            terms["clearance_target"] = r_clearance_target(z_fl, cfg)
            terms["extend"] = r_extend(state.foot_pos_body[FL, :2], cfg)
            gated.update(("clearance_target", "extend"))

    regularization = _regularization(state, cfg)
    ungated_sum = sum(v for k, v in terms.items() if k not in gated)
    gated_sum = sum(v for k, v in terms.items() if k in gated)
    total = ungated_sum + gate * gated_sum + regularization
    return RewardBreakdown(stage=stage, terms=terms, gated=frozenset(gated),
                           gate=gate, regularization=regularization, total=total)


def evaluate_metrics(trajectory: Sequence[QuadState], cfg: RewardConfig,
                     active=None) -> TrajectoryMetrics:
    """Aggregate stability and lift metrics over a fixed-rate trajectory.

    `active` optionally masks the steps belonging to the gesture's active
    phase; the lift success rate is computed over those steps only.
    """
    states = list(trajectory)
    if not states:
        raise EmptyTrajectoryError("empty trajectory")
    n = len(states)
    if active is None:
        active_mask = np.ones(n, dtype=bool)
    else:
        active_mask = np.asarray(active, dtype=bool)
        if active_mask.shape != (n,):
            raise ValueError("active mask length must match the trajectory")

    heights = np.array([s.p[2] for s in states])
    rolls = np.array([roll_pitch(s.quat)[0] for s in states])
    forces = np.array([s.F_z for s in states])
    z_fl = np.array([s.foot_pos_world[FL, 2] for s in states])
    gates = np.array([stability_gate(s, cfg) for s in states])

    contact = forces > cfg.contact_force_eps
    row_sums = forces.sum(axis=1)
    fractions = np.divide(forces, row_sums[:, None],
                          out=np.zeros_like(forces), where=row_sums[:, None] > 0)

    lift_ok = (forces[:, FL] < cfg.contact_force_eps) \
        & (z_fl > 0.5 * cfg.clearance_target) & (gates > 0.5)
    n_active = int(active_mask.sum())
    lift_rate = float(lift_ok[active_mask].mean()) if n_active else 0.0

    final_err = None
    if cfg.fl_extension_joints is not None:
        thigh_t, calf_t = cfg.fl_extension_joints
        q_last = states[-1].q
        final_err = float(max(abs(q_last[1] - thigh_t), abs(q_last[2] - calf_t)))

    return TrajectoryMetrics(
        episode_s=n * cfg.dt,
        mean_height_m=float(heights.mean()),
        height_mae_m=float(np.abs(heights - cfg.base_height_target).mean()),
        roll_rms_deg=math.degrees(math.sqrt(float((rolls ** 2).mean()))),
        contact_fraction=tuple(contact.mean(axis=0).tolist()),
        tripod_contact_fraction=float(contact[:, list(SUPPORT_TRIPOD)].all(axis=1).mean()),
        lift_success_rate=lift_rate,
        mean_force_fractions=tuple(fractions.mean(axis=0).tolist()),
        final_fl_joint_error=final_err,
    )


# Bounds for the stage-1 "all stability metrics in bounds" clause; the later
# stages pin their own thresholds explicitly.
STAGE1_PHI_TOL = 0.03
HEIGHT_MAE_MAX = 0.02
STAGE1_ROLL_RMS_MAX_DEG = 15.0
TRIPOD_CONTACT_MIN = 0.95
STAGE2_LIFT_RATE_MIN = 0.95
STAGE3_JOINT_ERR_MAX = 0.1


def success_criterion(stage: int, metrics: TrajectoryMetrics, cfg: RewardConfig) -> bool:
    if stage == 1:
        phi_ok = abs(metrics.mean_force_fractions[FL] - cfg.fl_unload_target) <= STAGE1_PHI_TOL
        return (phi_ok
                and metrics.height_mae_m < HEIGHT_MAE_MAX
                and metrics.tripod_contact_fraction >= TRIPOD_CONTACT_MIN
                and metrics.roll_rms_deg <= STAGE1_ROLL_RMS_MAX_DEG)
    if stage == 2:
        return (metrics.lift_success_rate > STAGE2_LIFT_RATE_MIN
                and metrics.height_mae_m < HEIGHT_MAE_MAX)
    if stage == 3:
        return (metrics.lift_success_rate > STAGE2_LIFT_RATE_MIN
                and metrics.height_mae_m < HEIGHT_MAE_MAX
                and metrics.final_fl_joint_error is not None
                and metrics.final_fl_joint_error < STAGE3_JOINT_ERR_MAX)
    raise ValueError(f"stage must be 1, 2, or 3, got {stage}")
