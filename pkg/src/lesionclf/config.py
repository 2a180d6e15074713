"""Flat ``key = value`` pipeline configuration.

Every tunable of the pipeline is a scalar, so the config file is plain
UTF-8 text with one assignment per line and ``#`` comments. Unknown keys
fail loudly to catch typos.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path

from .embedding import NORMALIZATION_MODES
from .errors import ConfigError
from .mlp import ACTIVATIONS, AdamHyper

SEED_ENV_VAR = "LESION_SEED"
DEFAULT_SEED = 42


@dataclass(frozen=True)
class PipelineConfig:
    crop_fraction: float = 0.875
    scale_min: float = 1.05
    scale_max: float = 1.25
    brightness_factor: float = 1.2
    augment_fraction: float = 0.2
    iterations: int = 4000
    batch_size: int = 32
    log_every: int = 10
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = DEFAULT_SEED
    normalization: str = "symmetric"
    hidden_activation: str = "relu"

    def __post_init__(self):
        def ensure(condition: bool, message: str):
            if not condition:
                raise ConfigError(message)

        ensure(0.0 < self.crop_fraction <= 1.0, f"crop_fraction must be in (0, 1], got {self.crop_fraction}")
        ensure(self.scale_min >= 1.0, f"scale_min must be >= 1, got {self.scale_min}")
        ensure(self.scale_max >= self.scale_min, "scale_max must be >= scale_min")
        ensure(self.brightness_factor > 0.0, "brightness_factor must be > 0")
        ensure(0.0 <= self.augment_fraction <= 1.0, f"augment_fraction must be in [0, 1], got {self.augment_fraction}")
        for name in ("iterations", "batch_size", "log_every"):
            ensure(getattr(self, name) >= 1, f"{name} must be >= 1, got {getattr(self, name)}")
        ensure(self.learning_rate > 0.0, "learning_rate must be > 0")
        for name in ("beta1", "beta2"):
            ensure(0.0 <= getattr(self, name) < 1.0, f"{name} must be in [0, 1)")
        ensure(self.epsilon > 0.0, "epsilon must be > 0")
        ensure(self.normalization in NORMALIZATION_MODES, f"normalization must be one of {NORMALIZATION_MODES}")
        ensure(self.hidden_activation in ACTIVATIONS, f"hidden_activation must be one of {ACTIVATIONS}")

    def adam_hyper(self) -> AdamHyper:
        return AdamHyper(
            learning_rate=self.learning_rate,
            beta1=self.beta1,
            beta2=self.beta2,
            epsilon=self.epsilon,
        )


def _parse_value(key: str, raw: str, target_type: type):
    try:
        if target_type is int:
            return int(raw, 0)
        if target_type is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"key {key!r}: cannot parse {raw!r} as {target_type.__name__}") from None


def parse_config(text: str) -> PipelineConfig:
    known = {f.name: f.type for f in fields(PipelineConfig)}
    types = {"int": int, "float": float, "str": str}
    values = {}
    for line_num, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_num}: expected 'key = value', got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in known:
            raise ConfigError(f"line {line_num}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {line_num}: duplicate key {key!r}")
        values[key] = _parse_value(key, raw, types[known[key]])
    return PipelineConfig(**values)


def format_config(config: PipelineConfig) -> str:
    lines = [f"{f.name} = {getattr(config, f.name)!r}" if isinstance(getattr(config, f.name), float)
             else f"{f.name} = {getattr(config, f.name)}"
             for f in fields(PipelineConfig)]
    return "\n".join(lines) + "\n"


def load_config(path: str | Path) -> PipelineConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def resolve_seed(flag_value: int | None, config: PipelineConfig) -> int:
    """Seed precedence: CLI flag > LESION_SEED env var > config > default."""
    if flag_value is not None:
        return flag_value
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env, 0)
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {env!r}") from None
    return config.seed
