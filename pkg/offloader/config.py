"""Configuration dataclasses for trace generation, training and benchmarking."""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Type, TypeVar

try:  # tomllib is available from Python 3.11
    import tomllib  # type: ignore[attr-defined]
except ModuleNotFoundError:  # pragma: no cover - fallback for <3.11 environments
    tomllib = None  # type: ignore

from .errors import ConfigError
from .mdp import RewardParams

DEFAULT_BUDGET_FRACTIONS: Tuple[float, ...] = (0.10, 0.20, 0.50, 0.70, 1.0)

_T = TypeVar("_T")


def _build(cls: Type[_T], mapping: Dict[str, Any], section: str) -> _T:
    known = {f.name for f in fields(cls)}  # type: ignore[arg-type]
    unknown = sorted(set(mapping) - known)
    if unknown:
        raise ConfigError(f"Unknown keys in [{section}]: {', '.join(unknown)}")
    values = {k: tuple(v) if isinstance(v, list) else v for k, v in mapping.items()}
    return cls(**values)


@dataclass(slots=True)
class GenConfig:
    """Parameters of the synthetic coherent input stream."""

    T: int = 80
    num_identities: int = 20
    num_known: int = 10
    coherence_frac_min: float = 1 / 12
    coherence_frac_max: float = 1 / 10
    p_correct_known: float = 0.85
    conf_correct_mean: float = 0.90
    conf_correct_sd: float = 0.05
    conf_wrong_mean: float = 0.45
    conf_wrong_sd: float = 0.15
    phi_boundary_mean: float = 0.8
    phi_boundary_sd: float = 0.1
    phi_within_mean: float = 0.1
    phi_within_sd: float = 0.05
    cloud_conf: float = 1.0
    seed: int = 0

    def validate(self) -> None:
        if self.T < 1:
            raise ConfigError(f"T must be at least 1, got {self.T}")
        if not 0 < self.coherence_frac_min <= self.coherence_frac_max < 1:
            raise ConfigError(
                "coherence fractions must satisfy 0 < min <= max < 1, got "
                f"{self.coherence_frac_min}, {self.coherence_frac_max}"
            )
        if not 0.0 <= self.p_correct_known <= 1.0:
            raise ConfigError(f"p_correct_known must lie in [0, 1], got {self.p_correct_known}")
        if not 2 <= self.num_known <= self.num_identities:
            raise ConfigError(
                "num_known must be at least 2 and at most num_identities, got "
                f"{self.num_known} of {self.num_identities}"
            )
        if not 0.0 <= self.cloud_conf <= 1.0:
            raise ConfigError(f"cloud_conf must lie in [0, 1], got {self.cloud_conf}")
        for name in ("conf_correct_sd", "conf_wrong_sd", "phi_boundary_sd", "phi_within_sd"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")

    @property
    def interval_bounds(self) -> Tuple[int, int]:
        return math.ceil(self.T * self.coherence_frac_min), math.ceil(self.T * self.coherence_frac_max)


@dataclass(slots=True)
class TrainerConfig:
    """A2C hyperparameters and run bookkeeping."""

    actor_lr: float = 1e-4
    critic_lr: float = 5e-5
    minibatch_episodes: int = 20
    entropy_coeff: float = 0.01
    grad_clip_norm: float = 40.0
    gamma: float = 0.99
    episodes: int = 50_000
    budget_fractions: Tuple[float, ...] = DEFAULT_BUDGET_FRACTIONS
    rmsprop_decay: float = 0.99
    rmsprop_eps: float = 1e-5
    hidden_size: int = 64
    fc_size: int = 256
    phi_scale: Optional[float] = None
    phi_scale_sample: int = 200
    checkpoint_every: int = 5_000
    curve_window: int = 1_000
    log_every: int = 50
    seed: int = 0

    def validate(self) -> None:
        for name in ("actor_lr", "critic_lr", "grad_clip_norm", "rmsprop_eps"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.entropy_coeff < 0:
            raise ConfigError(f"entropy_coeff must be non-negative, got {self.entropy_coeff}")
        if self.minibatch_episodes < 1 or self.episodes < 1:
            raise ConfigError("minibatch_episodes and episodes must be at least 1")
        if not self.budget_fractions or any(not 0 <= f <= 1 for f in self.budget_fractions):
            raise ConfigError(f"budget_fractions must be non-empty values in [0, 1], got {self.budget_fractions}")
        if self.phi_scale is not None and self.phi_scale <= 0:
            raise ConfigError(f"phi_scale must be positive when set, got {self.phi_scale}")


@dataclass(slots=True)
class BenchConfig:
    """Dataset splits, the budget sweep and oracle verification settings."""

    train_count: int = 200
    train_seed_base: int = 1_000_000
    test_count: int = 100
    test_seed_base: int = 5_000
    budget_fractions: Tuple[float, ...] = DEFAULT_BUDGET_FRACTIONS
    trials: int = 4
    threshold_percentiles: Tuple[float, ...] = (10, 25, 50, 75, 90)
    all_robot_hold: int = 1
    oracle_max_horizon: int = 200
    oracle_check_instances: int = 200
    oracle_check_max_T: int = 8
    oracle_check_max_budget: int = 3

    def validate(self) -> None:
        if self.train_count < 1 or self.test_count < 1:
            raise ConfigError("train_count and test_count must be at least 1")
        if self.trials < 1:
            raise ConfigError(f"trials must be at least 1, got {self.trials}")
        if not self.budget_fractions or any(not 0 <= f <= 1 for f in self.budget_fractions):
            raise ConfigError(f"budget_fractions must be non-empty values in [0, 1], got {self.budget_fractions}")
        if any(not 0 <= q <= 100 for q in self.threshold_percentiles):
            raise ConfigError(f"threshold_percentiles must lie in [0, 100], got {self.threshold_percentiles}")
        if self.all_robot_hold < 1:
            raise ConfigError(f"all_robot_hold must be at least 1, got {self.all_robot_hold}")
        if self.oracle_check_max_T > 10:
            raise ConfigError("oracle_check_max_T cannot exceed the brute-force limit of 10")


@dataclass(slots=True)
class RunConfig:
    """Unified configuration for every command line operation."""

    generator: GenConfig = field(default_factory=GenConfig)
    reward: RewardParams = field(default_factory=RewardParams)
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    bench: BenchConfig = field(default_factory=BenchConfig)
    out_dir: str = "runs/default"
    seed: int = 0
    jobs: int = 0
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def resolved_jobs(self) -> int:
        """Worker count; 0 selects every available core."""

        return self.jobs if self.jobs > 0 else max(1, os.cpu_count() or 1)

    # --- seed ranges -----------------------------------------------------

    @property
    def train_seed_range(self) -> range:
        span = max(self.bench.train_count, self.trainer.episodes)
        return range(self.bench.train_seed_base, self.bench.train_seed_base + span)

    @property
    def test_seed_range(self) -> range:
        return range(self.bench.test_seed_base, self.bench.test_seed_base + self.bench.test_count)

    def validate(self) -> None:
        self.generator.validate()
        self.trainer.validate()
        self.bench.validate()
        try:
            self.reward.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.jobs < 0:
            raise ConfigError(f"jobs must be non-negative (0 = all cores), got {self.jobs}")
        train, test = self.train_seed_range, self.test_seed_range
        if train.start < test.stop and test.start < train.stop:
            raise ConfigError(
                f"Train seed range [{train.start}, {train.stop}) overlaps "
                f"test seed range [{test.start}, {test.stop})"
            )

    # --- serialisation ---------------------------------------------------

    def to_dict(self) -> Dict[str, Any]:
        """Return the configuration as a serialisable dictionary."""

        return asdict(self)

    @classmethod
    def from_mapping(cls, mapping: Dict[str, Any]) -> "RunConfig":
        """Create a :class:`RunConfig` from a raw mapping with optional sections."""

        sections = {
            "generator": GenConfig,
            "reward": RewardParams,
            "trainer": TrainerConfig,
            "bench": BenchConfig,
        }
        values: Dict[str, Any] = {}
        metadata: Dict[str, Any] = dict(mapping.get("metadata", {}))
        for key, value in mapping.items():
            if key in sections:
                if not isinstance(value, dict):
                    raise ConfigError(f"[{key}] must be a table/mapping")
                values[key] = _build(sections[key], value, key)
            elif key in {"out_dir", "seed", "jobs"}:
                values[key] = value
            elif key != "metadata":
                metadata[key] = value
        config = cls(**values)
        config.metadata = metadata
        return config

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        """Load configuration from a TOML or JSON document."""

        file_path = Path(path)
        if not file_path.exists():
            raise FileNotFoundError(f"Configuration file '{file_path}' does not exist")

        suffix = file_path.suffix.lower()
        if suffix in {".toml", ".tml"}:
            if tomllib is None:
                raise RuntimeError("tomllib is not available on this Python interpreter")
            with file_path.open("rb") as fp:
                raw_data = tomllib.load(fp)
        elif suffix == ".json":
            with file_path.open("r", encoding="utf-8") as fp:
                raw_data = json.load(fp)
        else:
            raise ConfigError("Unsupported configuration format. Use TOML or JSON.")

        if not isinstance(raw_data, dict):
            raise ConfigError("Configuration root must be a mapping/dictionary")

        return cls.from_mapping(raw_data)

    def copy(self, **updates: Any) -> "RunConfig":
        """Return a copy with overrides.

        Keys may address a section field with a dotted name, for example
        ``{"trainer.episodes": 500}``.
        """

        config = replace(
            self,
            generator=replace(self.generator),
            reward=replace(self.reward),
            trainer=replace(self.trainer),
            bench=replace(self.bench),
            metadata=dict(self.metadata),
        )
        for key, value in updates.items():
            section, _, name = key.partition(".")
            if name:
                target = getattr(config, section)
                if not hasattr(target, name):
                    raise ConfigError(f"Unknown configuration key '{key}'")
                setattr(target, name, value)
            elif hasattr(config, key):
                setattr(config, key, value)
            else:
                raise ConfigError(f"Unknown configuration key '{key}'")
        return config
