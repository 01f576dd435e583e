"""Pipeline configuration read from YAML with ``section.key=value`` overrides on top."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Optional

import yaml

from .dump import DEFAULT_DOWNSAMPLE_BASE, DEFAULT_MAX_PAGE_BYTES
from .extract import DEFAULT_MAX_WORDPIECES, DEFAULT_P_CUT
from .noising import DEFAULT_ALPHABET, DEFAULT_KEEP_PROB, OPS, SpellNoiseConfig


@dataclass
class IngestSettings:
    max_page_bytes: int = DEFAULT_MAX_PAGE_BYTES
    downsample_base: float = DEFAULT_DOWNSAMPLE_BASE


@dataclass
class ExtractSettings:
    p_cut: float = DEFAULT_P_CUT
    max_wordpieces: int = DEFAULT_MAX_WORDPIECES
    max_edit_distance: Optional[int] = None
    subword_model: Optional[str] = None


@dataclass
class NoiseSettings:
    rate: float = 0.003
    op_weights: Dict[str, float] = field(default_factory=lambda: {op: 0.25 for op in OPS})
    alphabet: str = DEFAULT_ALPHABET

    def build(self) -> SpellNoiseConfig:
        return SpellNoiseConfig(self.rate, dict(self.op_weights), self.alphabet)


def _rtt_noise() -> NoiseSettings:
    return NoiseSettings(rate=0.005, op_weights={"insertion": 1 / 3, "deletion": 1 / 3, "transposition": 1 / 3})


@dataclass
class RttSettings:
    bridge_lang: str = "ja"
    identity_fraction: float = 0.025
    noise: NoiseSettings = field(default_factory=_rtt_noise)
    edit_rules: Optional[str] = None
    provider: str = "mock"
    mock_table: Optional[str] = None
    endpoint: Optional[str] = None
    max_in_flight: int = 1


@dataclass
class DecodeSettings:
    beam: int = 4
    threshold: float = 1.0
    max_iter: int = 5


@dataclass
class PipelineConfig:
    global_seed: int = 0
    workers: int = 1
    ingest: IngestSettings = field(default_factory=IngestSettings)
    extract: ExtractSettings = field(default_factory=ExtractSettings)
    noise: NoiseSettings = field(default_factory=NoiseSettings)
    keep_prob: float = DEFAULT_KEEP_PROB
    rtt: RttSettings = field(default_factory=RttSettings)
    decode: DecodeSettings = field(default_factory=DecodeSettings)

    def validate(self) -> "PipelineConfig":
        probs = {
            "keep_prob": self.keep_prob,
            "extract.p_cut": self.extract.p_cut,
            "noise.rate": self.noise.rate,
            "rtt.identity_fraction": self.rtt.identity_fraction,
            "rtt.noise.rate": self.rtt.noise.rate,
        }
        for name, p in probs.items():
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name}={p} is not a probability")
        if not 0 <= self.global_seed < 2**64:
            raise ValueError("global_seed must be a non-negative 64-bit integer")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        self.noise.build()
        self.rtt.noise.build()
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        """sha256 over the canonical JSON form; equal digests mean equal outputs for equal inputs."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _build(cls, data: Dict[str, Any]):
    if not isinstance(data, dict):
        raise ValueError(f"expected a mapping for {cls.__name__}, got {data!r}")
    kwargs = {}
    fields = {f.name: f for f in dataclasses.fields(cls)}
    for key, value in data.items():
        if key not in fields:
            raise ValueError(f"unknown config key {key!r} in {cls.__name__}")
        default = getattr(cls(), key)
        if dataclasses.is_dataclass(default):
            kwargs[key] = _build(type(default), {**asdict(default), **value}) if isinstance(value, dict) else _build(type(default), value)
        else:
            kwargs[key] = value
    return cls(**kwargs)


def load_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> PipelineConfig:
    """Read YAML from ``path`` (if any), then apply dotted-key ``overrides``; overrides win."""
    data: Dict[str, Any] = {}
    if path:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    for dotted, value in (overrides or {}).items():
        node = data
        *parents, leaf = dotted.split(".")
        for p in parents:
            node = node.setdefault(p, {})
        node[leaf] = value
    return _build(PipelineConfig, data).validate()


def parse_override(item: str):
    key, sep, raw = item.partition("=")
    if not sep or not key:
        raise ValueError(f"override {item!r} is not of the form key=value")
    return key.strip(), yaml.safe_load(raw)
