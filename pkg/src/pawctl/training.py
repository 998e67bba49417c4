"""Derivative-free pose search over the quasi-static model.

Each curriculum stage runs a cross-entropy loop: sample joint offsets around
the current mean, score each sample as a scheduled transition episode (ramp
from the stage's initial stance through the deployment clamp/smoothing
pipeline, then hold), refit mean and spread on the elites, and decay the
exploration noise. Later stages initialize from the previous stage's
checkpoint, and their episodes start from that stance, which is the transfer
mechanism the staged reward design relies on.

Episodes enforce quasi-static contact consistency: a foot may leave the
ground only while it carries less than the minimum support force (contact
forces must evolve continuously, so separating a loaded foot is a dynamic
jump, not a quasi-static motion), and feet in contact must not skate
sideways. Breaking either rule terminates the episode, which is how the
model reproduces the hazard that makes direct training of the lift fail on
the real system.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .quadruped import (
    ACTION_BOX,
    NUM_JOINTS,
    PosePolicy,
    RobotGeometry,
    UnstablePoseError,
    fk_all,
    fl_extension_ik,
    preparatory_alpha_star,
    simulate_pose,
    tripod_alpha_star,
)
from .rewards import (
    FL,
    RewardConfig,
    contact_mask,
    evaluate_metrics,
    stage_reward,
    success_criterion,
)


class CurriculumError(ValueError):
    """Stage started without a passing checkpoint from the previous stage."""


class TrainingDivergedError(RuntimeError):
    """Every sample failed to stand for too many consecutive iterations."""


@dataclass
class StageSpec:
    """Budget and sampler settings for one curriculum stage."""

    stage: int
    max_iterations: int = 60
    population: int = 64
    elite_fraction: float = 0.25
    noise_decay: float = 0.95
    init_std: float = 0.10
    extra_noise: float = 0.04
    settle_s: float = 1.0        # episode ramp toward the sampled pose
    hold_s: float = 1.0          # episode hold at the sampled pose
    stop_on_success: bool = True

    def __post_init__(self):
        if self.stage not in (1, 2, 3):
            raise ValueError("stage must be 1, 2, or 3")
        if not 0.0 < self.elite_fraction <= 1.0:
            raise ValueError("elite_fraction must be in (0, 1]")


def default_stage_specs() -> list:
    return [StageSpec(stage=1), StageSpec(stage=2, max_iterations=40),
            StageSpec(stage=3)]


def configure_targets(cfg: RewardConfig, geom: RobotGeometry) -> RewardConfig:
    """Derive the pose-dependent targets from the model instead of hard-coding.

    The share targets come from the equilibrium solver (stage 1: preparatory
    four-leg stance; lifted stages: tripod centroid), the extension XY target
    from the nominal FL stance plus the forward offset, and the joint-space
    extension target from leg IK at the stage-3 foot target."""
    alpha_star = tripod_alpha_star(geom)
    stage1_star = preparatory_alpha_star(geom, cfg.fl_unload_target)
    fl_xy = fk_all(geom, geom.q_nominal)[FL, :2]
    target_xy = (float(fl_xy[0] + cfg.extend_forward_offset), float(fl_xy[1]))
    hip = geom.hip_offsets[FL]
    dx = target_xy[0] - hip[0]
    dz = (cfg.foot_height_target - geom.stand_height) - hip[2]
    thigh, calf = fl_extension_ik(geom, (dx, dz))
    return replace(
        cfg,
        support_share_target=alpha_star,
        stage1_share_target=stage1_star,
        extend_target_xy=target_xy,
        fl_extension_joints=(thigh, calf),
        q_default=tuple(geom.q_nominal.tolist()),
        base_height_target=geom.stand_height,
    )


# Feet in contact must not skate: squared slip speed (m/s)^2 is charged per
# step after removing the common translation (a body shift over planted feet
# is slip-free).
SLIP_WEIGHT = 20.0


@dataclass
class EpisodeResult:
    """One scheduled transition episode: ramp to the pose, then hold."""

    objective: float              # mean step reward over the full budget
    states: list                  # states up to termination
    steps_total: int
    terminated: Optional[str]     # None when the episode completed

    @property
    def completed(self) -> bool:
        return self.terminated is None


def transition_episode(init_dq, target_dq, stage: int, geom: RobotGeometry,
                       cfg: RewardConfig, *, settle_s: float = 1.0,
                       hold_s: float = 1.0,
                       slip_weight: float = SLIP_WEIGHT) -> EpisodeResult:
    """Ramp from the initial stance to the target pose through the deployment
    schedule pipeline and hold it, scoring the stage reward per step.

    Terminates (no further reward) on safety violations, loss of support, a
    foot separating while loaded beyond the minimum support force, or
    excessive contact slip. Deterministic.
    """
    from .actuator import GestureSchedule, SafetyLimits, run_schedule, safety_check

    schedule = GestureSchedule(settle_s=settle_s, return_s=0.0)
    limits = SafetyLimits()
    init_q = geom.q_nominal + np.asarray(init_dq, dtype=float)
    target_q = geom.q_nominal + np.asarray(target_dq, dtype=float)
    hold_steps = max(1, int(round(hold_s * schedule.rate_hz)))
    executed = run_schedule(np.repeat(target_q[None, :], hold_steps, axis=0),
                            schedule, init_q)
    dt = 1.0 / schedule.rate_hz

    states: list = []
    total = 0.0
    terminated = None
    t_air = 0.0
    try:
        prev = simulate_pose(init_q - geom.q_nominal, geom)
    except UnstablePoseError:
        return EpisodeResult(objective=0.0, states=[],
                             steps_total=len(executed.targets), terminated="tipped")
    prev_contacts = contact_mask(prev, cfg.contact_height_tol)
    for q in executed.targets:
        try:
            state = simulate_pose(q - geom.q_nominal, geom)
        except UnstablePoseError:
            terminated = "tipped"
            break
        contacts = contact_mask(state, cfg.contact_height_tol)

        separated = prev_contacts & ~contacts
        if np.any(separated) and prev.F_z[separated].max() > cfg.support_force_min:
            terminated = "loaded_separation"
            break

        slip_penalty = 0.0
        common = prev_contacts & contacts
        if common.sum() >= 2:
            delta = state.foot_pos_world[common, :2] - prev.foot_pos_world[common, :2]
            residual = delta - delta.mean(axis=0)
            slip_penalty = slip_weight * float((residual ** 2).sum()) / (dt * dt)

        verdict = safety_check(state, limits)
        if not verdict.ok:
            terminated = verdict.reason
            break

        t_air = 0.0 if contacts[FL] else t_air + dt
        state.t_air = t_air
        total += stage_reward(stage, state, cfg).total - slip_penalty
        states.append(state)
        prev, prev_contacts = state, contacts

    steps_total = len(executed.targets)
    return EpisodeResult(objective=total / steps_total, states=states,
                         steps_total=steps_total, terminated=terminated)


def hold_trajectory(policy, geom: RobotGeometry, cfg: RewardConfig,
                    duration_s: float = 30.0) -> list:
    """Replay a pose held for duration_s at the control rate, with the FL
    air-time clock accumulating while the foot is off the ground."""
    base = simulate_pose(policy, geom)
    airborne = not contact_mask(base)[FL]
    steps = int(round(duration_s / cfg.dt))
    states = []
    for k in range(steps):
        t_air = (k + 1) * cfg.dt if airborne else 0.0
        states.append(replace(base, t_air=t_air))
    return states


def evaluate_policy(policy, stage: int, geom: RobotGeometry, cfg: RewardConfig,
                    duration_s: float = 30.0):
    """Metrics and pass/fail of a policy on a held replay."""
    traj = hold_trajectory(policy, geom, cfg, duration_s)
    metrics = evaluate_metrics(traj, cfg)
    return metrics, success_criterion(stage, metrics, cfg)


@dataclass
class TrainingCurve:
    mean: list = field(default_factory=list)
    best: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"mean": self.mean, "best": self.best}


@dataclass
class Checkpoint:
    """Trained stage result with lineage back through the curriculum."""

    stage: int
    dq: np.ndarray
    seed: int
    geometry_hash: str
    parent: Optional[str]
    passed: bool
    curve: TrainingCurve

    def __post_init__(self):
        self.dq = np.asarray(self.dq, dtype=float)

    def policy(self) -> PosePolicy:
        return PosePolicy(dq=self.dq, stage_id=self.stage, parent_checkpoint=self.parent)

    def to_dict(self) -> dict:
        return {"stage": self.stage, "dq": self.dq.tolist(), "seed": self.seed,
                "geometry_hash": self.geometry_hash, "parent": self.parent,
                "passed": self.passed, "curve": self.curve.to_dict()}

    def content_hash(self) -> str:
        import hashlib
        payload = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:12]

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "Checkpoint":
        data = json.loads(Path(path).read_text())
        curve = TrainingCurve(**data.get("curve", {}))
        return cls(stage=data["stage"], dq=np.asarray(data["dq"], dtype=float),
                   seed=data["seed"], geometry_hash=data["geometry_hash"],
                   parent=data.get("parent"), passed=data["passed"], curve=curve)


_FAIL_REWARD = -1e6
_MAX_FAILED_ITERS = 10


def optimize_stage(spec: StageSpec, init: PosePolicy, seed: int,
                   geom: RobotGeometry, cfg: RewardConfig):
    """Cross-entropy search for the stage's best pose offsets.

    Deterministic for a fixed seed: samples, elite selection, and reduction
    are all ordered by sample index.
    """
    rng = np.random.default_rng([seed, spec.stage])
    mean = init.dq.copy()
    std = np.full(NUM_JOINTS, spec.init_std)
    n_elite = max(1, int(round(spec.population * spec.elite_fraction)))

    best_dq = mean.copy()
    best_reward = -math.inf
    curve = TrainingCurve()
    failed_streak = 0

    for iteration in range(spec.max_iterations):
        samples = rng.normal(mean, std, size=(spec.population, NUM_JOINTS))
        samples = np.clip(samples, -ACTION_BOX, ACTION_BOX)
        rewards = np.full(spec.population, _FAIL_REWARD)
        completed = np.zeros(spec.population, dtype=bool)
        for i in range(spec.population):
            episode = transition_episode(init.dq, samples[i], spec.stage, geom, cfg,
                                         settle_s=spec.settle_s, hold_s=spec.hold_s)
            if episode.states:
                rewards[i] = episode.objective
                completed[i] = episode.completed

        valid = completed
        if not valid.any():
            failed_streak += 1
            if failed_streak >= _MAX_FAILED_ITERS:
                raise TrainingDivergedError(
                    f"stage {spec.stage}: no sample survived for {failed_streak} iterations")
            std = std * spec.noise_decay + 1e-3
            continue
        failed_streak = 0

        # Rank on the partial objective (surviving longer scores higher), but
        # only a sample whose whole episode completed can become the policy.
        order = np.argsort(-rewards, kind="stable")
        elites = samples[order[:n_elite]]
        completed_idx = np.flatnonzero(completed)
        top = completed_idx[np.argmax(rewards[completed_idx])]
        if rewards[top] > best_reward:
            best_reward = float(rewards[top])
            best_dq = samples[top].copy()

        mean = elites.mean(axis=0)
        std = elites.std(axis=0) + spec.extra_noise * spec.noise_decay ** iteration
        std = np.maximum(std, 1e-3)

        curve.mean.append(float(rewards[completed].mean()))
        curve.best.append(best_reward)

        if spec.stop_on_success:
            best_policy = PosePolicy(dq=best_dq, stage_id=spec.stage)
            _, passed = evaluate_policy(best_policy, spec.stage, geom, cfg,
                                        duration_s=2.0)
            if passed:
                break

    policy = PosePolicy(dq=best_dq, stage_id=spec.stage,
                        parent_checkpoint=init.parent_checkpoint)
    return policy, curve


def train_stage(spec: StageSpec, seed: int, geom: RobotGeometry, cfg: RewardConfig,
                parent: Optional[Checkpoint] = None,
                no_curriculum: bool = False) -> Checkpoint:
    """Train one stage, enforcing checkpoint lineage unless disabled."""
    if spec.stage > 1 and not no_curriculum:
        if parent is None or parent.stage != spec.stage - 1:
            raise CurriculumError(
                f"stage {spec.stage} needs a stage {spec.stage - 1} checkpoint")
        if not parent.passed:
            raise CurriculumError(
                f"stage {spec.stage - 1} checkpoint did not pass its success criterion")
    if parent is not None and parent.geometry_hash != geom.content_hash():
        raise CurriculumError("checkpoint was trained on a different geometry")

    init_dq = parent.dq if parent is not None else np.zeros(NUM_JOINTS)
    init = PosePolicy(dq=init_dq, stage_id=spec.stage,
                      parent_checkpoint=parent.content_hash() if parent else None)
    policy, curve = optimize_stage(spec, init, seed, geom, cfg)
    _, passed = evaluate_policy(policy, spec.stage, geom, cfg)
    return Checkpoint(stage=spec.stage, dq=policy.dq, seed=seed,
                      geometry_hash=geom.content_hash(),
                      parent=init.parent_checkpoint, passed=passed, curve=curve)


def run_curriculum(geom: RobotGeometry, cfg: RewardConfig, seed: int,
                   specs: Optional[list] = None) -> list:
    """Train stages 1..3 in order, chaining checkpoints."""
    specs = specs if specs is not None else default_stage_specs()
    cfg = configure_targets(cfg, geom)
    checkpoints = []
    parent = None
    for spec in specs:
        ck = train_stage(spec, seed, geom, cfg, parent=parent)
        checkpoints.append(ck)
        parent = ck
    return checkpoints


def _branch_report(policy, init_dq, stage: int, geom: RobotGeometry,
                   cfg: RewardConfig, curve: TrainingCurve,
                   duration_s: float = 30.0) -> dict:
    """Deploy one branch's policy as a full episode: ramp from the branch's
    initial stance, hold for the remaining time, terminate on violations."""
    episode = transition_episode(init_dq, policy.dq, stage, geom, cfg,
                                 settle_s=1.0, hold_s=duration_s - 1.0)
    states = episode.states
    if states:
        metrics = evaluate_metrics(states, cfg)
        mean_contacts = float(np.mean([contact_mask(s).sum() for s in states]))
        report = metrics.to_dict()
    else:
        metrics = None
        mean_contacts = 0.0
        report = {"lift_success_rate": 0.0}
    report.update({
        "episode_s": len(states) * cfg.dt,
        "completed": episode.completed,
        "terminated_reason": episode.terminated,
        "mean_ground_contacts": mean_contacts,
        "success": bool(episode.completed and metrics is not None
                        and success_criterion(stage, metrics, cfg)),
        "final_reward_curve": curve.to_dict(),
        "dq": policy.dq.tolist(),
    })
    return report


def run_ablation(geom: RobotGeometry, cfg: RewardConfig, seed: int,
                 specs: Optional[list] = None, no_curriculum: bool = False) -> dict:
    """Train the leg-lift task with and without the stage-1 warm start.

    Both branches get the same stage-2 budget and seed; the curriculum branch
    additionally runs stage 1 first. Divergence of the direct branch is a
    reported outcome, not a failure.
    """
    specs = specs if specs is not None else default_stage_specs()
    cfg = configure_targets(cfg, geom)
    spec1 = next(s for s in specs if s.stage == 1)
    spec2 = next(s for s in specs if s.stage == 2)

    if no_curriculum:
        curriculum_ck = train_stage(spec2, seed, geom, cfg, no_curriculum=True)
        curriculum_init = np.zeros(NUM_JOINTS)
    else:
        stage1_ck = train_stage(spec1, seed, geom, cfg)
        curriculum_ck = train_stage(spec2, seed, geom, cfg, parent=stage1_ck)
        curriculum_init = stage1_ck.dq

    try:
        direct_ck = train_stage(spec2, seed, geom, cfg, no_curriculum=True)
        direct = _branch_report(direct_ck.policy(), np.zeros(NUM_JOINTS), 2,
                                geom, cfg, direct_ck.curve)
    except TrainingDivergedError as exc:
        direct = {"diverged": True, "reason": str(exc), "success": False,
                  "lift_success_rate": 0.0}

    report = {
        "seed": seed,
        "curriculum": _branch_report(curriculum_ck.policy(), curriculum_init, 2,
                                     geom, cfg, curriculum_ck.curve),
        "direct": direct,
    }
    return report
