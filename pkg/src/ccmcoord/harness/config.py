"""Experiment configuration: strict JSON loading, defaults, overrides, digests."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..agents import LearnerConfig, ShapingConfig
from ..ccm import EmbeddingParams
from ..env import EnvConfig
from ..errors import ConfigError, InvalidInputError

OUTPUT_ROOT_ENV = "CCMCOORD_OUTPUT_ROOT"


@dataclass(frozen=True)
class CcmConfig:
    E: int = 3
    tau: int = 1
    theiler: int | None = None
    n_draws: int = 32

    def __post_init__(self):
        params = EmbeddingParams(self.E, self.tau, self.theiler)
        object.__setattr__(self, "theiler", params.theiler)
        if isinstance(self.n_draws, bool) or int(self.n_draws) != self.n_draws or self.n_draws < 1:
            raise InvalidInputError("n_draws must be a positive integer", field="n_draws")

    @property
    def params(self) -> EmbeddingParams:
        return EmbeddingParams(self.E, self.tau, self.theiler)


@dataclass(frozen=True)
class ExperimentConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    shaping: ShapingConfig = field(default_factory=ShapingConfig)
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    ccm: CcmConfig = field(default_factory=CcmConfig)
    episodes: int = 2000
    seeds: tuple[int, ...] = (1,)
    output_dir: str = "runs"
    prey: str = "scripted"

    def __post_init__(self):
        if isinstance(self.episodes, bool) or int(self.episodes) != self.episodes or self.episodes < 1:
            raise InvalidInputError("episodes must be a positive integer", field="episodes")
        seeds = tuple(self.seeds)
        if not seeds:
            raise InvalidInputError("seeds must be non-empty", field="seeds")
        if any(isinstance(s, bool) or not isinstance(s, int) or s < 0 for s in seeds):
            raise InvalidInputError("seeds must be non-negative integers", field="seeds")
        object.__setattr__(self, "seeds", seeds)
        if self.prey not in ("scripted", "learner"):
            raise InvalidInputError(f"prey must be 'scripted' or 'learner', got {self.prey!r}", field="prey")
        need = max(self.ccm.params.min_length(), self.shaping.ccm_L + self.ccm.params.span)
        if self.env.episode_length < need:
            raise InvalidInputError(
                f"episode_length {self.env.episode_length} too short for CCM settings: minimum is {need}",
                field="env.episode_length",
            )


_SECTIONS = {"env": EnvConfig, "shaping": ShapingConfig, "learner": LearnerConfig, "ccm": CcmConfig}


def _typecheck(path: str, value: Any, annotation: str) -> Any:
    """Reject JSON values of the wrong kind; ints are accepted where floats are."""
    if annotation == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}", field=path)
        return float(value)
    if annotation == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}", field=path)
        return value
    if annotation == "int | None":
        return None if value is None else _typecheck(path, value, "int")
    if annotation == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}", field=path)
        return value
    return value


def _build(cls, data: Any, prefix: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{prefix or 'config'}: expected an object", field=prefix)
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        path = f"{prefix}.{unknown[0]}" if prefix else unknown[0]
        raise ConfigError(f"unknown config key {path}", field=path)
    kwargs = {}
    for name, value in data.items():
        path = f"{prefix}.{name}" if prefix else name
        if cls is ExperimentConfig and name in _SECTIONS:
            kwargs[name] = _build(_SECTIONS[name], value, path)
        elif cls is ExperimentConfig and name == "seeds":
            if not isinstance(value, list):
                raise ConfigError(f"{path}: expected a list of integers", field=path)
            kwargs[name] = tuple(_typecheck(f"{path}[{i}]", v, "int") for i, v in enumerate(value))
        else:
            kwargs[name] = _typecheck(path, value, str(fields[name].type))
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except InvalidInputError as err:
        if err.field is None:
            path = prefix or "config"
        elif "." in err.field:
            path = err.field
        else:
            path = f"{prefix}.{err.field}" if prefix else err.field
        raise ConfigError(f"{path}: {err}", field=path) from None


def config_from_dict(data: dict) -> ExperimentConfig:
    return _build(ExperimentConfig, data, "")


def config_to_dict(config: ExperimentConfig) -> dict:
    d = dataclasses.asdict(config)
    d["seeds"] = list(config.seeds)
    return d


def load_config(path) -> ExperimentConfig:
    """Parse a JSON config; omitted fields take their defaults, unknown keys are errors."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as err:
        raise ConfigError(f"{p}: malformed JSON ({err})") from None
    return config_from_dict(data)


def save_config(config: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(config), indent=2, sort_keys=True) + "\n")


def _parse_scalar(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(config: ExperimentConfig, overrides: dict[str, Any]) -> ExperimentConfig:
    """Set dotted paths such as ``shaping.theta``; string values are parsed as JSON when possible."""
    data = config_to_dict(config)
    for dotted, value in overrides.items():
        if isinstance(value, str):
            value = _parse_scalar(value)
        node = data
        keys = dotted.split(".")
        for key in keys[:-1]:
            if not isinstance(node.get(key), dict):
                raise ConfigError(f"unknown config key {dotted}", field=dotted)
            node = node[key]
        if keys[-1] not in node:
            raise ConfigError(f"unknown config key {dotted}", field=dotted)
        node[keys[-1]] = value
    return config_from_dict(data)


def config_digest(config: ExperimentConfig) -> str:
    """SHA-256 over the canonical JSON of everything except ``output_dir`` and ``seeds``."""
    d = config_to_dict(config)
    d.pop("output_dir")
    d.pop("seeds")
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def resolve_output_dir(config: ExperimentConfig) -> Path:
    out = Path(config.output_dir)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not out.is_absolute():
        out = Path(root) / out
    return out
