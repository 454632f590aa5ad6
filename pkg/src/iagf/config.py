"""Single configuration file covering every tunable in the simulator.

The file is plain YAML mirroring the dataclass tree below; any subset of keys
may be given and the rest fall back to defaults. See ``SimConfig.default()``
for the baseline and ``docs/config.md`` for the documented schema.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml


@dataclass
class ArmConfig:
    link_lengths: list = field(default_factory=lambda: [0.4, 0.4])
    base: list = field(default_factory=lambda: [0.0, 0.0])
    ik_lambda: float = 0.05
    ik_tol: float = 1e-4


@dataclass
class ImpedanceConfig:
    mass: float = 2.0
    stiffness: float = 150.0
    damping: float = 25.0
    v_max: float = 0.5
    dt: float = 0.01


@dataclass
class GuidanceConfig:
    K_p: float = 80.0
    K_d: float = 10.0
    d1: float = 2.0
    alpha: float = 4.0
    f_max: float = 30.0
    C_th: float = 0.4
    m_th: float = 0.08
    m_crit: float = 0.03
    v_h_min: float = 1e-4
    confidence_hysteresis: float = 0.0


@dataclass
class InferenceConfig:
    gamma: float = 0.5
    beta_max: float = 0.6
    eps_p: float = 1e-4
    step_max: float = 0.01
    policy_gain: float = 1.0
    history: int = 6


@dataclass
class WorkspaceConfig:
    start: list = field(default_factory=lambda: [0.0, 0.35])
    goals: dict = field(
        default_factory=lambda: {
            "A": [-0.52, 0.52],
            "B": [0.0, 0.74],
            "C": [0.52, 0.52],
        }
    )
    scenarios: dict = field(
        default_factory=lambda: {
            "s1": ["B"],
            "s2": ["A", "C"],
            "s3": ["A", "B", "A"],
        }
    )
    line_point: list = field(default_factory=lambda: [-0.25, 0.0])
    line_normal: list = field(default_factory=lambda: [1.0, 0.0])
    line_hysteresis: float = 0.01


@dataclass
class OperatorConfig:
    noise_bearing_deg: float = 10.0
    noise_additive_m: float = 0.0
    gain: float = 1.0


@dataclass
class EpisodeConfig:
    r_grasp: float = 0.02
    t_hold: float = 0.5
    t_max: float = 60.0
    r_align: float = 0.05


@dataclass
class ServiceConfig:
    frame_hz: float = 50.0
    input_staleness: float = 0.3
    port: int = 8765


@dataclass
class SimConfig:
    arm: ArmConfig = field(default_factory=ArmConfig)
    impedance: ImpedanceConfig = field(default_factory=ImpedanceConfig)
    guidance: GuidanceConfig = field(default_factory=GuidanceConfig)
    inference: InferenceConfig = field(default_factory=InferenceConfig)
    workspace: WorkspaceConfig = field(default_factory=WorkspaceConfig)
    operator: OperatorConfig = field(default_factory=OperatorConfig)
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    service: ServiceConfig = field(default_factory=ServiceConfig)

    @staticmethod
    def default() -> "SimConfig":
        return SimConfig()

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @staticmethod
    def from_dict(data: dict) -> "SimConfig":
        cfg = SimConfig()
        for section_name, section_value in (data or {}).items():
            if not hasattr(cfg, section_name):
                raise KeyError(f"unknown config section {section_name!r}")
            section = getattr(cfg, section_name)
            for key, value in (section_value or {}).items():
                if not hasattr(section, key):
                    raise KeyError(f"unknown config key {section_name}.{key}")
                setattr(section, key, value)
        cfg.validate()
        return cfg

    @staticmethod
    def load(path: str | Path) -> "SimConfig":
        with open(path) as f:
            return SimConfig.from_dict(yaml.safe_load(f))

    def save(self, path: str | Path) -> None:
        with open(path, "w") as f:
            yaml.safe_dump(self.to_dict(), f, sort_keys=True)

    def validate(self) -> None:
        if self.impedance.dt <= 0.0 or self.impedance.dt > 0.02:
            raise ValueError("impedance.dt must be in (0, 0.02]")
        if not 0.0 < self.guidance.C_th < 1.0:
            raise ValueError("guidance.C_th must lie in (0, 1)")
        if not self.guidance.m_th > self.guidance.m_crit > 0.0:
            raise ValueError("need guidance.m_th > guidance.m_crit > 0")
        if len(self.workspace.goals) < 1:
            raise ValueError("workspace needs goals")
        for name, seq in self.workspace.scenarios.items():
            missing = [g for g in seq if g not in self.workspace.goals]
            if missing:
                raise ValueError(f"scenario {name} references unknown goals {missing}")
        reach = float(sum(self.arm.link_lengths))
        for gid, pos in self.workspace.goals.items():
            if float(np.hypot(*pos)) >= reach:
                raise ValueError(f"goal {gid} outside the reachable workspace")

    def goal_sequence(self, scenario: str) -> list:
        try:
            return list(self.workspace.scenarios[scenario])
        except KeyError:
            raise KeyError(f"unknown scenario {scenario!r}") from None


def packaged_config(name: str) -> Path:
    """Path of a configuration file shipped with the package."""
    p = Path(__file__).parent / "configs" / f"{name}.yaml"
    if not p.exists():
        raise FileNotFoundError(p)
    return p
