"""TOML configuration: one file configures every subsystem.

Sections (all optional, all fields defaulted):

    [classifier]  detection thresholds
    [reward]      gains, targets, thresholds, regularization weights
    [geometry]    robot link lengths, mass, nominal height
    [bridge]      port, cooldown_ms
    [actuator]    schedule (clamp, smoothing, settle/return), safety limits
    [training]    shared stage budget overrides, plus [training.stage1..3]
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .actuator import GestureSchedule, SafetyLimits
from .classifier import ClassifierConfig
from .quadruped import RobotGeometry
from .rewards import RewardConfig
from .training import StageSpec, default_stage_specs


def _build(cls, data: dict):
    known = {f.name for f in fields(cls)}
    kwargs = {k: (tuple(v) if isinstance(v, list) else v)
              for k, v in data.items() if k in known}
    return cls(**kwargs)


@dataclass
class BridgeConfig:
    port: int = 9000
    cooldown_ms: int = 1000


@dataclass
class AppConfig:
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    geometry: RobotGeometry = field(default_factory=RobotGeometry)
    bridge: BridgeConfig = field(default_factory=BridgeConfig)
    schedule: GestureSchedule = field(default_factory=GestureSchedule)
    limits: SafetyLimits = field(default_factory=SafetyLimits)
    training: dict = field(default_factory=dict)

    def stage_specs(self) -> list:
        specs = []
        shared = {k: v for k, v in self.training.items() if not isinstance(v, dict)}
        for spec in default_stage_specs():
            overrides = dict(shared)
            overrides.update(self.training.get(f"stage{spec.stage}", {}))
            known = {f.name for f in fields(StageSpec)}
            for key, value in overrides.items():
                if key in known and key != "stage":
                    setattr(spec, key, value)
            specs.append(spec)
        return specs


def load_config(path: Optional[str] = None) -> AppConfig:
    if path is None:
        return AppConfig()
    raw = tomllib.loads(Path(path).read_text())
    actuator = raw.get("actuator", {})
    return AppConfig(
        classifier=_build(ClassifierConfig, raw.get("classifier", {})),
        reward=_build(RewardConfig, raw.get("reward", {})),
        geometry=_build(RobotGeometry, raw.get("geometry", {})),
        bridge=_build(BridgeConfig, raw.get("bridge", {})),
        schedule=_build(GestureSchedule, actuator.get("schedule", actuator)),
        limits=_build(SafetyLimits, actuator.get("limits", actuator)),
        training=raw.get("training", {}),
    )
