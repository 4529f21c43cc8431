"""Pipeline configuration and the two shipped presets.

Precedence when building a config: preset < JSON config file < CLI overrides.
"""
from __future__ import annotations

import copy
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from topicctl.cluster import ClusterConfig
from topicctl.embed import EmbedderConfig
from topicctl.errors import ConfigError
from topicctl.label import LabelerConfig
from topicctl.reduce import LayoutConfig
from topicctl.topics import VectorizerConfig

KEYWORD_METHODS = ("ctfidf", "centroid")


@dataclass
class PipelineConfig:
    input_dir: str | None = None
    output_dir: str = "out"
    stoplist_path: str | None = None
    chunk_sentences: int = 6
    speakers: list[str] | None = None
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)
    layout: LayoutConfig = field(default_factory=LayoutConfig)
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    vectorizer: VectorizerConfig = field(default_factory=VectorizerConfig)
    labeler: LabelerConfig = field(default_factory=LabelerConfig)
    top_k_keywords: int = 15
    representatives: int = 3
    keyword_method: str = "ctfidf"
    dedup_keywords: bool = False
    label_mode: str = "individual"
    # alias of cluster.min_cluster_size; must agree when both are set
    min_topic_size: int | None = None
    seed: int = 42

    def validate(self) -> None:
        if self.chunk_sentences < 1:
            raise ConfigError("chunk_sentences must be >= 1")
        if self.top_k_keywords < 1 or self.representatives < 1:
            raise ConfigError("top_k_keywords and representatives must be >= 1")
        if self.keyword_method not in KEYWORD_METHODS:
            raise ConfigError(f"keyword_method must be one of {KEYWORD_METHODS}")
        if self.label_mode not in ("individual", "global"):
            raise ConfigError("label_mode must be individual or global")
        if self.min_topic_size is not None and self.min_topic_size != self.cluster.min_cluster_size:
            raise ConfigError(
                f"min_topic_size={self.min_topic_size} conflicts with "
                f"cluster.min_cluster_size={self.cluster.min_cluster_size}"
            )
        self.embedder.validate()
        self.layout.validate()
        self.cluster.validate()
        self.vectorizer.validate()
        self.labeler.validate()

    def to_dict(self) -> dict:
        return json.loads(json.dumps(dataclasses.asdict(self)))


PRESETS: dict[str, dict[str, Any]] = {
    "individual": {
        "chunk_sentences": 6,
        "layout": {"n_neighbors": 15, "min_dist": 0.0, "n_components": 5, "metric": "cosine"},
        "cluster": {"min_cluster_size": 10, "selection": "eom"},
        "label_mode": "individual",
    },
    "global": {
        "chunk_sentences": 7,
        "layout": {"n_neighbors": 16, "min_dist": 0.2, "n_components": 4, "metric": "cosine"},
        "cluster": {"min_cluster_size": 11, "selection": "eom"},
        "label_mode": "global",
    },
}


def deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _build(cls, data: dict):
    if not isinstance(data, dict):
        raise ConfigError(f"{cls.__name__} section must be an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(fields)
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        sub = _NESTED.get((cls, name))
        if sub is not None:
            value = _build(sub, value)
        elif name == "ngram_range":
            value = tuple(value)
        kwargs[name] = value
    return cls(**kwargs)


_NESTED = {
    (PipelineConfig, "embedder"): EmbedderConfig,
    (PipelineConfig, "layout"): LayoutConfig,
    (PipelineConfig, "cluster"): ClusterConfig,
    (PipelineConfig, "vectorizer"): VectorizerConfig,
    (PipelineConfig, "labeler"): LabelerConfig,
}


def config_from_dict(data: dict) -> PipelineConfig:
    cfg = _build(PipelineConfig, data)
    cfg.layout.seed = cfg.seed
    return cfg


def load_config(
    preset: str | None = None,
    config_file: str | Path | None = None,
    overrides: dict | None = None,
) -> PipelineConfig:
    data: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        data = deep_merge(data, PRESETS[preset])
    if config_file is not None:
        path = Path(config_file)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = deep_merge(data, json.loads(path.read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    if overrides:
        data = deep_merge(data, overrides)
    cfg = config_from_dict(data)
    cfg.validate()
    return cfg
