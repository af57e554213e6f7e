"""Experiment configuration: strict JSON mapped onto frozen dataclasses.

Unknown keys anywhere are rejected, so a typo cannot silently fall back to a
default. Every section is optional; omitted fields keep their defaults.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field

from .acoustics import AcousticParams, OracleConfig
from .episodes import RewardConfig
from .training import TrainConfig

OUT_ENV = "SCENEPRIOR_OUT"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CorpusConfig:
    n_houses: int = 85
    size_range: tuple = (14, 22)
    region_count: tuple = (4, 7)
    objects_per_region: tuple = (2, 4)
    duplicate_penalty: float = 0.3
    extra_door_prob: float = 0.15


@dataclass(frozen=True)
class GenConfig:
    embed_dim: int = 300
    hidden: int = 128
    out_dim: int = 64
    layers: int = 3
    readout: str = "score_weighted"


@dataclass(frozen=True)
class MemoryConfig:
    capacity: int = 150
    d_model: int = 64


@dataclass(frozen=True)
class PolicyConfig:
    name: str = "knowledge"
    location_mode: str = "exponential"
    use_pipeline: bool = False


@dataclass(frozen=True)
class EpisodeConfig:
    per_split: int = 1000
    splits: tuple = ("SH/HS", "SH/US", "UH/HS", "UH/US")


@dataclass(frozen=True)
class PathConfig:
    out_dir: str = "out"
    corpus: str | None = None
    kg: str | None = None
    episodes: str | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    master_seed: int = 0
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    acoustics: AcousticParams = field(default_factory=AcousticParams)
    gen: GenConfig = field(default_factory=GenConfig)
    memory: MemoryConfig = field(default_factory=MemoryConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    rewards: RewardConfig = field(default_factory=RewardConfig)
    episodes: EpisodeConfig = field(default_factory=EpisodeConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    paths: PathConfig = field(default_factory=PathConfig)

    def validate(self) -> "ExperimentConfig":
        if self.corpus.n_houses < 5:
            raise ConfigError("corpus.n_houses must be >= 5")
        if self.episodes.per_split < 1:
            raise ConfigError("episodes.per_split must be >= 1")
        bad = set(self.episodes.splits) - {"SH/HS", "SH/US", "UH/HS", "UH/US"}
        if bad:
            raise ConfigError(f"unknown episode splits {sorted(bad)}")
        if self.policy.name not in ("random", "greedy", "knowledge"):
            raise ConfigError(f"unknown policy {self.policy.name!r}")
        if self.policy.location_mode not in ("exponential", "dynamic"):
            raise ConfigError(f"unknown location mode {self.policy.location_mode!r}")
        if self.gen.readout not in ("score_weighted", "mean"):
            raise ConfigError(f"unknown readout {self.gen.readout!r}")
        if min(self.gen.embed_dim, self.gen.hidden, self.gen.out_dim, self.gen.layers,
               self.memory.capacity, self.memory.d_model) < 1:
            raise ConfigError("GEN and memory sizes must be >= 1")
        for path in (self.paths.kg,):
            if path is not None and not os.path.exists(path):
                raise ConfigError(f"referenced file {path} does not exist")
        try:
            self.oracle.validate()
            self.acoustics.validate()
            self.train.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    def out_dir(self) -> str:
        return os.environ.get(OUT_ENV) or self.paths.out_dir


def _build(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    kwargs = {}
    for key, value in data.items():
        default = fields[key].default
        if default is dataclasses.MISSING and fields[key].default_factory is not dataclasses.MISSING:
            default = fields[key].default_factory()
        if dataclasses.is_dataclass(default):
            kwargs[key] = _build(type(default), value, f"{where}.{key}")
        elif isinstance(default, tuple):
            if not isinstance(value, list):
                raise ConfigError(f"{where}.{key}: expected a list")
            kwargs[key] = tuple(value)
        else:
            if isinstance(default, bool) and not isinstance(value, bool):
                raise ConfigError(f"{where}.{key}: expected true/false")
            if isinstance(default, (int, float)) and not isinstance(default, bool) and (
                    isinstance(value, bool) or not isinstance(value, (int, float))):
                raise ConfigError(f"{where}.{key}: expected a number")
            if isinstance(default, int) and not isinstance(default, bool) and not isinstance(value, int):
                raise ConfigError(f"{where}.{key}: expected an integer")
            if isinstance(default, str) and not isinstance(value, str):
                raise ConfigError(f"{where}.{key}: expected a string")
            kwargs[key] = value
    return cls(**kwargs)


def config_from_dict(data: dict) -> ExperimentConfig:
    return _build(ExperimentConfig, data, "config").validate()


def load_config(path: str | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig().validate()
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return config_from_dict(data)


def config_to_dict(cfg) -> dict:
    out = {}
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        out[f.name] = config_to_dict(v) if dataclasses.is_dataclass(v) else (list(v) if isinstance(v, tuple) else v)
    return out
