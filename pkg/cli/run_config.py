"""
RunConfig: every module's settings, read from one flat key=value file with
dotted keys (model.channels=32, train.base_lr=1e-3, memory.policy=fixed-n:7).

Precedence: dataclass defaults < config file < --set overrides < dedicated flags.
"""
import dataclasses
import logging
import os
import typing
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional

from dotenv import dotenv_values

from backbone.config import BackboneConfig
from constants import (
    DEFAULT_EVERY_K,
    DEFAULT_MEMORY_FRAMES_N,
    DEFAULT_MEMORY_POLICY,
    MERGE_ARGMAX,
    MERGE_SOFT_AGGREGATION,
)
from data_synth.config import SynthConfig
from memory_manager.policy import MemoryPolicy, parse_policy
from pipeline.model import ModelConfig
from trainer.config import TrainConfig
from utils.errors import ConfigError, ContractError

BACKBONE_KEYS = ("stage_channels", "mask_encoder_channels", "stem_channels")


@dataclass
class MemoryConfig:
    policy: str = DEFAULT_MEMORY_POLICY
    merge: str = MERGE_SOFT_AGGREGATION

    def __post_init__(self):
        parse_policy(self.policy)
        if self.merge not in (MERGE_SOFT_AGGREGATION, MERGE_ARGMAX):
            raise ConfigError(f"MemoryConfig: unknown {self.merge=}")


@dataclass
class EvalConfig:
    # None selects ceil(0.8% of the image diagonal)
    tolerance_px: Optional[float] = None
    bench_every_k: int = DEFAULT_EVERY_K
    bench_fixed_n: int = DEFAULT_MEMORY_FRAMES_N


@dataclass
class RunSettings:
    seed: int = 0
    threads: int = 1
    debug_attention: bool = False

    def __post_init__(self):
        if self.threads < 1:
            raise ConfigError(f"RunSettings: {self.threads=} must be >= 1")
        if self.seed < 0:
            raise ConfigError(f"RunSettings: {self.seed=} must be non-negative")


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    memory: MemoryConfig = field(default_factory=MemoryConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    run: RunSettings = field(default_factory=RunSettings)

    @property
    def policy(self) -> MemoryPolicy:
        return parse_policy(self.memory.policy)


SECTIONS = {
    "model": ModelConfig,
    "memory": MemoryConfig,
    "train": TrainConfig,
    "synth": SynthConfig,
    "eval": EvalConfig,
    "run": RunSettings,
}


def _coerce(raw: Optional[str], annotation: Any, key: str) -> Any:
    if raw is None:
        raise ConfigError(f"_coerce: {key} has no value")
    text = raw.strip()
    origin = typing.get_origin(annotation)
    if origin is typing.Union:
        inner = [arg for arg in typing.get_args(annotation) if arg is not type(None)]
        if text.lower() in ("", "none", "null"):
            return None
        return _coerce(text, inner[0], key)
    try:
        if annotation is bool:
            lowered = text.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if annotation is int:
            return int(text)
        if annotation is float:
            return float(text)
        if annotation is str:
            return text
        if origin in (list, List):
            (item_type,) = typing.get_args(annotation)
            return [_coerce(item, item_type, key) for item in text.split(",") if item.strip()]
    except ValueError as exc:
        raise ConfigError(f"_coerce: {key}={raw!r} is not a valid {getattr(annotation, '__name__', annotation)}") from exc
    raise ConfigError(f"_coerce: {key} has an unsupported type {annotation}")


def _field_types(cls) -> Dict[str, Any]:
    hints = typing.get_type_hints(cls)
    return {f.name: hints[f.name] for f in dataclasses.fields(cls)}


def parse_overrides(items: Iterable[str]) -> Dict[str, str]:
    values = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"parse_overrides: {item!r} is not key=value")
        values[key.strip()] = value
    return values


def read_config_file(path: str) -> Dict[str, Optional[str]]:
    if not os.path.isfile(path):
        raise ConfigError(f"read_config_file: {path} does not exist")
    return dict(dotenv_values(path))


def build_run_config(values: Dict[str, Optional[str]]) -> RunConfig:
    """
    Unknown sections or keys raise ConfigError.
    """
    per_section: Dict[str, Dict[str, Any]] = {name: {} for name in SECTIONS}
    backbone: Dict[str, Any] = {}
    backbone_types = _field_types(BackboneConfig)
    for key, raw in values.items():
        section, _, name = key.partition(".")
        if section not in SECTIONS or not name:
            raise ConfigError(f"build_run_config: unknown key {key!r}, sections are {sorted(SECTIONS)}")
        if section == "model" and name in BACKBONE_KEYS:
            backbone[name] = _coerce(raw, backbone_types[name], key)
            continue
        types = _field_types(SECTIONS[section])
        if name not in types or name == "backbone":
            raise ConfigError(f"build_run_config: unknown key {key!r}")
        per_section[section][name] = _coerce(raw, types[name], key)
    try:
        if backbone:
            per_section["model"]["backbone"] = BackboneConfig(**backbone)
        config = RunConfig(**{name: SECTIONS[name](**kwargs) for name, kwargs in per_section.items()})
    except ContractError as exc:
        raise ConfigError(str(exc)) from exc
    logging.debug(f"build_run_config: {config=}")  # pylint: disable=W1203
    return config


def load_run_config(path: Optional[str] = None, overrides: Iterable[str] = ()) -> RunConfig:
    values: Dict[str, Optional[str]] = {}
    if path:
        values.update(read_config_file(path))
    values.update(parse_overrides(overrides))
    return build_run_config(values)
