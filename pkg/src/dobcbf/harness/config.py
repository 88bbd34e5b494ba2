"""Experiment configuration: one JSON file, fully overridable by CLI flags.

The config is the canonical record of a run; it is echoed verbatim into every
report so results are reproducible from (config, seed) alone.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..errors import ConfigError

PLANTS = ("unicycle", "quadrotor")
FILTERS = ("dob_cbf", "nominal_cbf", "off")
BOUND_MODES = ("lemma", "empirical")
POLICY_KINDS = ("nominal_tracker", "noisy_explorer", "constant", "external")


@dataclass
class ExperimentConfig:
    plant: str = "unicycle"
    episodes: int = 200
    steps_per_episode: int = 800
    dt: float = 1e-3
    sample_period: float = 1e-2           # observer period T == control period
    observer_gain: float = 1.0
    beta_gains: list = field(default_factory=lambda: [6.0])
    beta_kind: str = "linear"
    policy: dict = field(default_factory=lambda: {
        "kind": "noisy_explorer", "amplitude": 0.5, "decay_episodes": 0})
    disturbance: dict = field(default_factory=lambda: {"kind": "default", "scale": 1.0})
    seed: int = 12345
    filter: str = "dob_cbf"
    bound_mode: str = "lemma"
    empirical_safety_factor: float = 2.0
    calibration_episodes: int = 3
    grid_points_per_dim: int = 33
    block_size: int = 50
    workers: int = 1
    output_dir: str = "runs/latest"
    log_transitions: bool = False
    plots: bool = True

    def validate(self) -> "ExperimentConfig":
        if self.plant not in PLANTS:
            raise ConfigError(f"plant: must be one of {PLANTS}, got {self.plant!r}")
        if self.episodes < 0:
            raise ConfigError("episodes: must be nonnegative")
        if self.steps_per_episode <= 0:
            raise ConfigError("steps_per_episode: must be positive")
        for name in ("dt", "sample_period", "observer_gain",
                     "empirical_safety_factor"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name}: must be positive")
        ratio = self.sample_period / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ConfigError("sample_period: must be an integer multiple of dt")
        if self.filter not in FILTERS:
            raise ConfigError(f"filter: must be one of {FILTERS}, got {self.filter!r}")
        if self.bound_mode not in BOUND_MODES:
            raise ConfigError(f"bound_mode: must be one of {BOUND_MODES}")
        if not self.beta_gains or any(g <= 0 for g in self.beta_gains):
            raise ConfigError("beta_gains: every gain must be positive")
        if self.beta_kind not in ("linear", "cubic"):
            raise ConfigError("beta_kind: must be 'linear' or 'cubic'")
        kind = self.policy.get("kind")
        if kind not in POLICY_KINDS:
            raise ConfigError(f"policy.kind: must be one of {POLICY_KINDS}, got {kind!r}")
        if kind == "external" and not (self.policy.get("command")
                                       or self.policy.get("address")):
            raise ConfigError("policy: external kind needs 'command' or 'address'")
        if self.disturbance.get("kind") not in ("default", "off"):
            raise ConfigError("disturbance.kind: must be 'default' or 'off'")
        if self.block_size <= 0:
            raise ConfigError("block_size: must be positive")
        if self.workers < 1:
            raise ConfigError("workers: must be at least 1")
        if self.grid_points_per_dim < 2:
            raise ConfigError("grid_points_per_dim: must be at least 2")
        if self.calibration_episodes < 1:
            raise ConfigError("calibration_episodes: must be at least 1")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data).validate()


def default_config(plant: str) -> ExperimentConfig:
    """Pinned defaults per plant; the acceptance suite runs these."""
    if plant == "unicycle":
        return ExperimentConfig().validate()
    if plant == "quadrotor":
        return ExperimentConfig(
            plant="quadrotor",
            episodes=500,
            steps_per_episode=400,
            dt=1e-3,
            sample_period=1e-2,
            observer_gain=1.0,
            beta_gains=[10.0, 10.0],
            policy={"kind": "noisy_explorer", "amplitude": 0.05,
                    "decay_episodes": 0},
            bound_mode="empirical",
            block_size=500,
        ).validate()
    raise ConfigError(f"plant: unknown plant {plant!r}")


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    plant = data.get("plant", "unicycle")
    base = default_config(plant).to_dict()
    base.update(data)
    return ExperimentConfig.from_dict(base)


def apply_overrides(cfg: ExperimentConfig, overrides: dict) -> ExperimentConfig:
    """CLI flags win over file values; nested dicts merge shallowly."""
    data = cfg.to_dict()
    for key, value in overrides.items():
        if value is None:
            continue
        if isinstance(data.get(key), dict) and isinstance(value, dict):
            data[key] = {**data[key], **{k: v for k, v in value.items() if v is not None}}
        else:
            data[key] = value
    return ExperimentConfig.from_dict(data)
