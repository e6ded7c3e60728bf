"""YAML run configuration with strict key checking.

Sections map onto the module config types::

    sources:  {manifest, cities, airports, splits}
    sampler:  SamplerConfig fields
    channels: [image_rgb, roads, ...]
    model:    ModelConfig fields (in_channels is derived from channels)
    train:    TrainConfig fields
    eval:     {label, tile, stride, aggregate_factor}
    output:   {store, checkpoint, history, report_dir}
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .corpus import ChannelConfig
from .netzoo import ModelConfig
from .sampler import SamplerConfig
from .trainloop import TrainConfig

STORE_ENV = "CARBONLENS_CACHE"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SourcesConfig:
    manifest: str | None = None
    cities: str | None = None
    airports: str | None = None
    splits: str | None = None


@dataclass(frozen=True)
class EvalConfig:
    label: str = "MA-Net"
    tile: int = 1024
    stride: int = 512
    aggregate_factor: int = 10


@dataclass(frozen=True)
class OutputConfig:
    store: str | None = None
    checkpoint: str = "model.pt"
    history: str = "history.json"
    report_dir: str = "reports"


@dataclass(frozen=True)
class RunConfig:
    sources: SourcesConfig = field(default_factory=SourcesConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    channels: ChannelConfig = field(default_factory=ChannelConfig)
    model: ModelConfig = field(default_factory=lambda: ModelConfig(in_channels=6))
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    @property
    def store_root(self) -> Path:
        return Path(self.output.store or os.environ.get(STORE_ENV) or "carbonlens-store")


SECTIONS = {
    "sources": SourcesConfig,
    "sampler": SamplerConfig,
    "model": ModelConfig,
    "train": TrainConfig,
    "eval": EvalConfig,
    "output": OutputConfig,
}


def _build(section: str, cls, values: dict):
    if not isinstance(values, dict):
        raise ConfigError(f"section {section!r} must be a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown keys in section {section!r}: {unknown}")
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"section {section!r}: {exc}") from exc


def parse_config(doc: dict | None, overrides: dict | None = None) -> RunConfig:
    """Validate a config mapping; ``overrides`` is ``{section: {key: value}}`` and wins."""
    doc = dict(doc or {})
    for section, values in (overrides or {}).items():
        merged = dict(doc.get(section) or {})
        merged.update({k: v for k, v in values.items() if v is not None})
        doc[section] = merged
    unknown = sorted(set(doc) - set(SECTIONS) - {"channels"})
    if unknown:
        raise ConfigError(f"unknown config sections: {unknown}")

    try:
        channels = ChannelConfig(tuple(doc.get("channels") or ChannelConfig().channels))
    except ValueError as exc:
        raise ConfigError(f"section 'channels': {exc}") from exc
    built = {}
    for name, cls in SECTIONS.items():
        values = doc.get(name) or {}
        if not isinstance(values, dict):
            raise ConfigError(f"section {name!r} must be a mapping")
        values = dict(values)
        if name == "model":
            given = values.get("in_channels")
            if given is not None and given != channels.n_channels:
                raise ConfigError(
                    f"model.in_channels={given} but channels {list(channels.channels)} "
                    f"give {channels.n_channels}"
                )
            values["in_channels"] = channels.n_channels
        if name == "sampler" and "date_window" in values:
            values["date_window"] = tuple(values["date_window"])
        built[name] = _build(name, cls, values)
    return RunConfig(channels=channels, **built)


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    doc = {}
    if path is not None:
        text = Path(path).read_text()
        doc = yaml.safe_load(text) or {}
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
    return parse_config(doc, overrides)


def config_to_dict(cfg: RunConfig) -> dict:
    out = {}
    for name in SECTIONS:
        d = dataclasses.asdict(getattr(cfg, name))
        if name == "model":
            d["kind"] = cfg.model.kind.value
        if name == "sampler":
            d["date_window"] = list(cfg.sampler.date_window)
        out[name] = d
    out["channels"] = list(cfg.channels.channels)
    return out
