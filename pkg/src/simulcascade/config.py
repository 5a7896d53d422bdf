"""Pipeline configuration: schema, presets and validation.

Config files are JSON objects::

    {
      "preset": "en-de-low",            # optional starting point
      "language_pair": "en-de",
      "regime": "low",
      "seed": 0,
      "frame_ms": 20,
      "segmenter": {"max_unvoiced_ms": 100, "voice_prob_threshold": 0.5, "max_segment_ms": 500},
      "stabilizer": {"cutoff_words": 8, "agreement": 2, "hop_ms": 200},
      "agent": {"min_chunk_words": 3, "strict_trigger": false, "memory": "source", "max_new_tokens": 64}
    }

Every key is optional; missing keys fall back to the preset (``en-de-low``
when none is named). Unknown keys are rejected.
"""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .agent import AgentConfig
from .core import DEFAULT_FRAME_MS, LANGUAGE_PAIRS, REGIME_THRESHOLDS_MS, LatencyRegimeConfig
from .segmenter import SegmenterConfig
from .stabilizer import StabilizerConfig

# Inference hyperparameters per language pair and latency regime (durations in ms).
PRESETS: dict[str, dict[str, Any]] = {
    "en-de-low": {
        "language_pair": "en-de",
        "regime": "low",
        "segmenter": {"max_unvoiced_ms": 100, "voice_prob_threshold": 0.5, "max_segment_ms": 500},
        "agent": {"min_chunk_words": 3},
    },
    "en-de-high": {
        "language_pair": "en-de",
        "regime": "high",
        "segmenter": {"max_unvoiced_ms": 100, "voice_prob_threshold": 0.3, "max_segment_ms": 1000},
        "agent": {"min_chunk_words": 7},
    },
    "en-zh-low": {
        "language_pair": "en-zh",
        "regime": "low",
        "segmenter": {"max_unvoiced_ms": 100, "voice_prob_threshold": 0.5, "max_segment_ms": 500},
        "agent": {"min_chunk_words": 5},
    },
    "en-zh-high": {
        "language_pair": "en-zh",
        "regime": "high",
        "segmenter": {"max_unvoiced_ms": 100, "voice_prob_threshold": 0.5, "max_segment_ms": 1500},
        "agent": {"min_chunk_words": 7},
    },
}

DEFAULTS: dict[str, Any] = {
    "language_pair": "en-de",
    "regime": "low",
    "seed": 0,
    "frame_ms": DEFAULT_FRAME_MS,
    "segmenter": {"max_unvoiced_ms": 100, "voice_prob_threshold": 0.5, "max_segment_ms": 500},
    "stabilizer": {"cutoff_words": 8, "agreement": 2, "hop_ms": 200},
    "agent": {"min_chunk_words": 3, "strict_trigger": False, "memory": "source", "max_new_tokens": 64},
}

# (type, check, message) per leaf
_INT, _FLOAT, _BOOL, _STR = "int", "float", "bool", "str"
SCHEMA: dict[str, Any] = {
    "preset": (_STR, lambda v: v in PRESETS, f"must be one of {sorted(PRESETS)}"),
    "language_pair": (_STR, lambda v: v in LANGUAGE_PAIRS, f"must be one of {list(LANGUAGE_PAIRS)}"),
    "regime": (_STR, lambda v: v in ("low", "high"), "must be 'low' or 'high'"),
    "threshold_ms": (_INT, lambda v: v > 0, "must be > 0"),
    "seed": (_INT, lambda v: True, ""),
    "frame_ms": (_INT, lambda v: v > 0, "must be > 0"),
    "segmenter": {
        "max_unvoiced_ms": (_INT, lambda v: v >= 0, "must be >= 0"),
        "voice_prob_threshold": (_FLOAT, lambda v: 0.0 <= v <= 1.0, "must be in [0, 1]"),
        "max_segment_ms": (_INT, lambda v: v > 0, "must be > 0"),
    },
    "stabilizer": {
        "cutoff_words": (_INT, lambda v: v >= 0, "must be >= 0"),
        "agreement": (_INT, lambda v: v >= 2, "must be >= 2"),
        "hop_ms": (_INT, lambda v: v > 0, "must be > 0"),
    },
    "agent": {
        "min_chunk_words": (_INT, lambda v: v >= 1, "must be >= 1"),
        "strict_trigger": (_BOOL, lambda v: True, ""),
        "memory": (_STR, lambda v: v in ("source", "target"), "must be 'source' or 'target'"),
        "max_new_tokens": (_INT, lambda v: v >= 1, "must be >= 1"),
    },
}


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("invalid config:\n  " + "\n  ".join(errors))


@dataclass(frozen=True)
class PipelineConfig:
    language_pair: str = "en-de"
    regime: LatencyRegimeConfig = field(default_factory=lambda: LatencyRegimeConfig.for_pair("en-de", "low"))
    seed: int = 0
    frame_ms: int = DEFAULT_FRAME_MS
    segmenter: SegmenterConfig = field(default_factory=SegmenterConfig)
    stabilizer: StabilizerConfig = field(default_factory=StabilizerConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)

    def to_dict(self) -> dict[str, Any]:
        agent = asdict(self.agent)
        agent.pop("language_pair")
        return {
            "language_pair": self.language_pair,
            "regime": self.regime.regime,
            "threshold_ms": self.regime.threshold_ms,
            "seed": self.seed,
            "frame_ms": self.frame_ms,
            "segmenter": asdict(self.segmenter),
            "stabilizer": asdict(self.stabilizer),
            "agent": agent,
        }

    def replace(self, **overrides: Any) -> "PipelineConfig":
        """Copy with flat overrides: mud_ms, vpt, msd_ms, mcs, seed."""
        raw = self.to_dict()
        names = {
            "mud_ms": ("segmenter", "max_unvoiced_ms"),
            "vpt": ("segmenter", "voice_prob_threshold"),
            "msd_ms": ("segmenter", "max_segment_ms"),
            "mcs": ("agent", "min_chunk_words"),
        }
        for key, value in overrides.items():
            if key in names:
                section, leaf = names[key]
                raw[section][leaf] = value
            else:
                raw[key] = value
        return validate_config(raw)


def _check_type(kind: str, value: Any) -> bool:
    if kind == _INT:
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == _FLOAT:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind == _BOOL:
        return isinstance(value, bool)
    return isinstance(value, str)


def _walk(raw: Mapping, schema: Mapping, path: str, errors: list[str]) -> None:
    for key, value in raw.items():
        where = f"{path}{key}"
        if key not in schema:
            errors.append(f"{where}: unknown key")
            continue
        rule = schema[key]
        if isinstance(rule, dict):
            if not isinstance(value, dict):
                errors.append(f"{where}: must be an object")
            else:
                _walk(value, rule, where + ".", errors)
            continue
        kind, check, message = rule
        if not _check_type(kind, value):
            errors.append(f"{where}: expected {kind}, got {type(value).__name__}")
        elif not check(value):
            errors.append(f"{where}: {message} (got {value!r})")


def _merge(base: dict, over: Mapping) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate_config(raw: Mapping[str, Any] | None = None) -> PipelineConfig:
    """Check a raw mapping against the schema and build a PipelineConfig.

    All problems are collected and raised together as one ConfigError whose
    messages are prefixed with dotted key paths.
    """
    raw = dict(raw or {})
    errors: list[str] = []
    _walk(raw, SCHEMA, "", errors)
    if errors:
        raise ConfigError(errors)

    merged = _merge(DEFAULTS, PRESETS[raw["preset"]]) if "preset" in raw else copy.deepcopy(DEFAULTS)
    merged = _merge(merged, {k: v for k, v in raw.items() if k != "preset"})

    pair, regime = merged["language_pair"], merged["regime"]
    expected = REGIME_THRESHOLDS_MS[(pair, regime)]
    if "threshold_ms" in merged and merged["threshold_ms"] != expected:
        errors.append(f"threshold_ms: {pair}/{regime} uses {expected} ms (got {merged['threshold_ms']})")
    seg = merged["segmenter"]
    if merged["frame_ms"] > seg["max_segment_ms"]:
        errors.append(f"segmenter.max_segment_ms: must be >= frame_ms ({merged['frame_ms']})")
    if errors:
        raise ConfigError(errors)

    return PipelineConfig(
        language_pair=pair,
        regime=LatencyRegimeConfig(pair, regime, expected),
        seed=merged["seed"],
        frame_ms=merged["frame_ms"],
        segmenter=SegmenterConfig(**seg),
        stabilizer=StabilizerConfig(**merged["stabilizer"]),
        agent=AgentConfig(language_pair=pair, **merged["agent"]),
    )


def preset(name: str, **overrides: Any) -> PipelineConfig:
    return validate_config({"preset": name, **overrides})


def load_config(path: str | Path) -> PipelineConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: not valid JSON ({exc})"]) from exc
    if not isinstance(raw, dict):
        raise ConfigError([f"{path}: top level must be an object"])
    return validate_config(raw)
