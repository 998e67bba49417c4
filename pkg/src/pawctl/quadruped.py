"""Quasi-static quadruped model: leg kinematics, static force distribution,
and pose-to-state solving against a flat ground plane.

The model carries no momentum: a pose is a set of joint offsets from nominal,
the base rests on whichever feet form a stable support plane, and contact
forces come from static equilibrium (minimum-norm when four feet share the
load). That keeps every oracle exact while still exercising the full reward
stack.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from .rewards import (
    FL,
    NUM_JOINTS,
    DegenerateSupportError,
    QuadState,
    _convex_hull_xy,
    _polygon_area,
    quat_from_roll_pitch,
)

HIP, THIGH, CALF = range(3)

# Joint offsets are boxed to keep the chain away from fold-over configurations.
ACTION_BOX = 0.8

CONTACT_TOL = 0.003  # m; feet within this of the ground count as contact


class InfeasibleError(ValueError):
    """No non-negative static force distribution exists."""


class UnstablePoseError(ValueError):
    """No support set keeps the body at rest (fewer than 3 feet, or tipping)."""


@dataclass
class RobotGeometry:
    """Desk-scale stand-in for a small quadruped platform."""

    body_length: float = 0.38   # hip-to-hip, longitudinal (m)
    body_width: float = 0.29    # hip-to-hip, lateral (m)
    thigh_len: float = 0.213
    calf_len: float = 0.213
    mass: float = 12.0          # kg, point mass at the base origin
    g: float = 9.81
    stand_height: float = 0.300  # nominal base height (m)

    @cached_property
    def hip_offsets(self) -> np.ndarray:
        """Hip positions in the body frame (x forward, y left, z up): FL, FR, RL, RR."""
        hx, hy = self.body_length / 2.0, self.body_width / 2.0
        return np.array([[hx, hy, 0.0], [hx, -hy, 0.0],
                         [-hx, hy, 0.0], [-hx, -hy, 0.0]])

    @cached_property
    def q_nominal(self) -> np.ndarray:
        """Joint angles of the nominal stand: feet under the hips at stand_height.

        With equal thigh/calf lengths, a symmetric bend (calf = -2*thigh)
        keeps the foot directly below the hip.
        """
        reach = self.thigh_len + self.calf_len
        if not 0.0 < self.stand_height < reach:
            raise ValueError("stand_height must be below full leg extension")
        thigh = math.acos(self.stand_height / reach)
        q = np.zeros(NUM_JOINTS)
        q[THIGH::3] = thigh
        q[CALF::3] = -2.0 * thigh
        return q

    def content_hash(self) -> str:
        payload = json.dumps({
            "body_length": self.body_length, "body_width": self.body_width,
            "thigh_len": self.thigh_len, "calf_len": self.calf_len,
            "mass": self.mass, "g": self.g, "stand_height": self.stand_height,
        }, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:12]


@dataclass
class PosePolicy:
    """Static pose policy: 12 joint offsets from the nominal stand."""

    dq: np.ndarray
    stage_id: int = 0
    parent_checkpoint: Optional[str] = None

    def __post_init__(self):
        self.dq = np.asarray(self.dq, dtype=float)
        if self.dq.shape != (NUM_JOINTS,):
            raise ValueError(f"dq must have shape ({NUM_JOINTS},)")
        if np.any(np.abs(self.dq) > ACTION_BOX + 1e-12):
            raise ValueError(f"joint offsets exceed the +-{ACTION_BOX} rad actuation box")


def leg_fk(geom: RobotGeometry, leg: int, q_leg) -> np.ndarray:
    """Foot position of one leg in the body frame.

    Hip abduction rolls the sagittal plane about body-x; thigh and calf form a
    planar two-link chain in that plane, angles measured from straight down.
    """
    abd, thigh, calf = float(q_leg[0]), float(q_leg[1]), float(q_leg[2])
    x = geom.thigh_len * math.sin(thigh) + geom.calf_len * math.sin(thigh + calf)
    z = -geom.thigh_len * math.cos(thigh) - geom.calf_len * math.cos(thigh + calf)
    sa, ca = math.sin(abd), math.cos(abd)
    return geom.hip_offsets[leg] + np.array([x, -sa * z, ca * z])


def fk_all(geom: RobotGeometry, q) -> np.ndarray:
    """Body-frame positions of all four feet for a 12-joint vector."""
    q = np.asarray(q, dtype=float)
    return np.array([leg_fk(geom, leg, q[3 * leg:3 * leg + 3]) for leg in range(4)])


def fl_extension_ik(geom: RobotGeometry, target_xz) -> tuple:
    """FL thigh/calf angles placing the foot at (dx, dz) from the hip, knee back."""
    dx, dz = float(target_xz[0]), float(target_xz[1])
    t, c = geom.thigh_len, geom.calf_len
    r2 = dx * dx + dz * dz
    cos_calf = (r2 - t * t - c * c) / (2.0 * t * c)
    if not -1.0 <= cos_calf <= 1.0:
        raise ValueError(f"extension target at {math.sqrt(r2):.3f} m is out of reach")
    calf = -math.acos(cos_calf)
    gamma = math.atan2(dx, -dz)
    thigh = gamma - math.atan2(c * math.sin(calf), t + c * math.cos(calf))
    return thigh, calf


def static_forces(contact_feet, com_xy, mass: float, g: float = 9.81) -> np.ndarray:
    """Vertical contact forces balancing gravity about the CoM ground projection.

    Three feet give the unique solution; four or more are resolved as the
    minimum-norm solution of the equilibrium system. Raises InfeasibleError
    when balance would need a foot to pull on the ground (CoM outside the
    support polygon, or beyond the min-norm feasible region).
    """
    pts = np.asarray(contact_feet, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise DegenerateSupportError("need at least 3 contact feet")
    xy = pts[:, :2]
    hull = _convex_hull_xy(xy)
    if len(hull) < 3 or _polygon_area(hull) <= 1e-6:
        raise DegenerateSupportError("support polygon area below 1e-6 m^2")

    cx, cy = float(com_xy[0]), float(com_xy[1])
    weight = mass * g
    # Rows: sum F = W, zero moment about the CoM in x and y.
    A = np.vstack([np.ones(len(xy)), xy[:, 0] - cx, xy[:, 1] - cy])
    b = np.array([weight, 0.0, 0.0])
    try:
        if len(xy) == 3:
            F = np.linalg.solve(A, b)
        else:
            F = A.T @ np.linalg.solve(A @ A.T, b)
    except np.linalg.LinAlgError as exc:
        raise DegenerateSupportError(f"singular equilibrium system: {exc}") from exc
    if F.min() < -1e-9:
        raise InfeasibleError(
            f"CoM ({cx:.3f}, {cy:.3f}) needs a negative contact force {F.min():.3e}")
    return np.maximum(F, 0.0)


def _fit_plane(pts: np.ndarray):
    """Least-squares plane z = a*x + b*y + c through >= 3 points."""
    M = np.column_stack([pts[:, 0], pts[:, 1], np.ones(len(pts))])
    if len(pts) == 3:
        coeffs = np.linalg.solve(M, pts[:, 2])
    else:
        coeffs = np.linalg.solve(M.T @ M, M.T @ pts[:, 2])
    residuals = pts[:, 2] - M @ coeffs
    return coeffs, residuals


def _tilt_rotation(a: float, b: float):
    """Rotation Ry(pitch)Rx(roll) aligning the plane normal (-a, -b, 1) with world up."""
    n = np.array([-a, -b, 1.0])
    n /= np.linalg.norm(n)
    roll = math.atan2(n[1], n[2])
    pitch = math.atan2(-n[0], math.hypot(n[1], n[2]))
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    return ry @ rx, roll, pitch


# Support candidates in fixed evaluation order: all four feet first, then the
# tripods ordered by which foot is airborne (FL-up is the common case).
_SUPPORT_CANDIDATES = ((0, 1, 2, 3), (1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2))


def simulate_pose(policy, geom: RobotGeometry, *, t_air: float = 0.0,
                  contact_tol: float = CONTACT_TOL) -> QuadState:
    """Solve the resting state of a pose against the flat ground plane.

    The base orientation and height come from the support plane of the lowest
    feet (least-squares fit when all four are near-coplanar); remaining feet
    must clear that plane. Contact forces come from static equilibrium with
    the point-mass CoM at the base origin.
    """
    dq = policy.dq if isinstance(policy, PosePolicy) else np.asarray(policy, dtype=float)
    q = geom.q_nominal + np.clip(dq, -ACTION_BOX, ACTION_BOX)
    feet_body = fk_all(geom, q)

    for support in _SUPPORT_CANDIDATES:
        pts = feet_body[list(support)]
        try:
            coeffs, residuals = _fit_plane(pts)
        except np.linalg.LinAlgError:
            continue
        if np.max(np.abs(residuals)) > contact_tol:
            continue
        rest = [i for i in range(4) if i not in support]
        plane_z = feet_body[:, 0] * coeffs[0] + feet_body[:, 1] * coeffs[1] + coeffs[2]
        if any(feet_body[i, 2] - plane_z[i] < -contact_tol for i in rest):
            continue

        R, roll, pitch = _tilt_rotation(coeffs[0], coeffs[1])
        world = feet_body @ R.T
        height = -float(world[list(support), 2].mean())
        world = world + np.array([0.0, 0.0, height])
        contacts = world[:, 2] <= contact_tol
        if contacts.sum() < 3:
            continue
        try:
            contact_forces = static_forces(world[contacts], (0.0, 0.0), geom.mass, geom.g)
        except (InfeasibleError, DegenerateSupportError):
            continue
        F_z = np.zeros(4)
        F_z[contacts] = contact_forces
        return QuadState(
            p=np.array([0.0, 0.0, height]),
            quat=quat_from_roll_pitch(roll, pitch),
            v=np.zeros(3), w=np.zeros(3),
            q=q, qd=np.zeros(NUM_JOINTS), last_action=q.copy(),
            foot_pos_world=world, foot_pos_body=feet_body,
            F_z=F_z, t_air=float(t_air),
        )
    raise UnstablePoseError("no support set keeps the body at rest")


def preparatory_com_xy(geom: RobotGeometry, phi_fl: float,
                       tol: float = 1e-12) -> np.ndarray:
    """CoM ground position giving the FL foot the fraction phi_fl of the weight
    in the nominal four-leg stance, searched along the symmetric rear-right
    diagonal by bisection against the equilibrium solver."""
    feet = fk_all(geom, geom.q_nominal)[:, :2]
    direction = -np.array([1.0, geom.body_width / geom.body_length])
    direction /= np.linalg.norm(direction)

    def fl_fraction(t: float) -> float:
        try:
            F = static_forces(feet, t * direction, geom.mass, geom.g)
        except InfeasibleError:
            return -1.0  # overshot: FL would need to pull on the ground
        return float(F[FL] / F.sum())

    lo, hi = 0.0, 0.05
    while fl_fraction(hi) > phi_fl:
        hi *= 1.5
        if hi > 1.0:
            raise InfeasibleError("unload target unreachable inside the stance")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if fl_fraction(mid) > phi_fl:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi) * direction


def tripod_alpha_star(geom: RobotGeometry) -> tuple:
    """Equilibrium force shares of the nominal support tripod, CoM at its centroid.

    Computed from the solver rather than hand-picked. The centroid anchor is
    the stance the tripod is built to operate at; anchoring at the body
    center instead is degenerate (it lies on the FR-RL support edge and gives
    a zero share).
    """
    feet = fk_all(geom, geom.q_nominal)[1:, :2]
    F = static_forces(feet, feet.mean(axis=0), geom.mass, geom.g)
    return tuple((F / F.sum()).tolist())


def preparatory_alpha_star(geom: RobotGeometry, phi_fl: float) -> tuple:
    """Tripod force shares of the preparatory four-leg stance (FL at phi_fl).

    The stage-1 distribute target: what the four-leg stance delivers once the
    FL fraction reaches its unload target, so the distribute and unload
    kernels improve together along the weight-shift path instead of fighting.
    """
    feet = fk_all(geom, geom.q_nominal)[:, :2]
    com = preparatory_com_xy(geom, phi_fl)
    F = static_forces(feet, com, geom.mass, geom.g)
    tripod = F[1:]
    return tuple((tripod / tripod.sum()).tolist())
