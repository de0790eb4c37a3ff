"""Search hyperparameters.

Defaults follow the single configuration used for every experiment: no
roll-outs, 5% commitment threshold, UCB constant 0.4, widening
``ceil(1.0 * N**0.3)``, action mix (0.5, 0.2, 0.1, 0.2), angle step 0.2,
depth cap 20 and at most 500 Adam steps. The iteration budget is set per
experiment.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields

from .circuit import ActionDistribution
from .errors import ConfigurationError
from .qsim import NoiseModel


@dataclass(frozen=True)
class SearchConfig:
    iterations: int = 1000
    rollout_steps: int = 0
    commit_fraction: float = 0.05
    exploration: float = 0.4
    pw_coefficient: float = 1.0
    pw_exponent: float = 0.3
    p_add: float = 0.5
    p_swap: float = 0.2
    p_delete: float = 0.1
    p_change: float = 0.2
    angle_deviation: float = 0.2
    max_depth: int = 20
    max_cnots: int | None = None
    max_adam_steps: int = 500
    seed: int = 0
    noise_bitflip: float = 0.0
    noise_depolarizing: float = 0.0
    fixed_branching: int | None = None
    normalize_rewards: bool = False
    # fine-tuning
    learning_rate: float = 0.01
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    plateau_tol: float = 1e-9
    plateau_patience: int = 10

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigurationError("iterations must be >= 1")
        if self.rollout_steps < 0:
            raise ConfigurationError("rollout_steps must be >= 0")
        if not (0.0 < self.commit_fraction <= 1.0):
            raise ConfigurationError("commit_fraction must lie in (0, 1]")
        if self.exploration < 0.0:
            raise ConfigurationError("exploration must be >= 0")
        if self.pw_coefficient <= 0.0:
            raise ConfigurationError("pw_coefficient must be > 0")
        if not (0.0 < self.pw_exponent <= 1.0):
            raise ConfigurationError("pw_exponent must lie in (0, 1]")
        if self.max_depth < 1:
            raise ConfigurationError("max_depth must be >= 1")
        if self.max_cnots is not None and self.max_cnots < 0:
            raise ConfigurationError("max_cnots must be >= 0")
        if self.max_adam_steps < 0:
            raise ConfigurationError("max_adam_steps must be >= 0")
        if self.fixed_branching is not None and self.fixed_branching < 1:
            raise ConfigurationError("fixed_branching must be >= 1")
        if self.angle_deviation < 0.0:
            raise ConfigurationError("angle_deviation must be >= 0")
        self.action_distribution  # validates the probabilities
        self.noise  # validates the noise levels

    @property
    def action_distribution(self) -> ActionDistribution:
        return ActionDistribution(self.p_add, self.p_swap, self.p_delete, self.p_change)

    @property
    def noise(self) -> NoiseModel | None:
        model = NoiseModel(self.noise_bitflip, self.noise_depolarizing)
        return None if model.is_identity else model

    def replace(self, **changes) -> SearchConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> SearchConfig:
        known = {f.name: f for f in fields(cls)}
        unknown = set(data) - set(known)
        if unknown:
            raise ConfigurationError(f"unknown search settings: {sorted(unknown)}")
        return cls(**{k: coerce(known[k], v) for k, v in data.items()})


def coerce(f: dataclasses.Field, value):
    """Convert a textual or loosely-typed value to the field's declared type."""
    kind = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
    optional = "None" in kind
    empty = ("none", "null", "") + (("pw",) if f.name == "fixed_branching" else ())
    if value is None or (optional and isinstance(value, str) and value.lower() in empty):
        if not optional:
            raise ConfigurationError(f"{f.name} may not be empty")
        return None
    try:
        if kind.startswith("bool"):
            if isinstance(value, str):
                low = value.lower()
                if low not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(value)
                return low in ("true", "1", "yes")
            return bool(value)
        if kind.startswith("int"):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        if kind.startswith("float"):
            return float(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"invalid value {value!r} for {f.name} ({kind})") from None
    return value
