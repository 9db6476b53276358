"""Run configuration: JSON file with environment-variable expansion,
overridable by CLI flags."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path

from .corpus import normalize_interval
from .errors import ConfigError


@dataclass
class PipelineConfig:
    manifest: str = ""
    text_dir: str = ""
    out_dir: str = "out"
    interval: str | None = None
    strategy: str = "split"
    k: int = 10
    runs: int = 1
    min_support: int = 1
    max_chunk_tokens: int = 100
    embedding_dim: int = 64
    seed: int = 0
    eq2_denominator: str = "retrieved"
    max_new_tokens: int = 512
    temperature: float = 0.0
    ground_truth: str | None = None
    generation_fixture: str | None = None
    human_scores: str | None = None
    auroc_source: str = "candidates"
    # Live endpoints; mocks are used when these are unset.
    embedding_url: str | None = None
    generation_url: str | None = None
    nli_url: str | None = None
    api_key: str | None = None

    def validate(self) -> None:
        if self.strategy not in ("base", "concat", "split"):
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.runs < 1:
            raise ConfigError(f"runs must be >= 1, got {self.runs}")
        if self.min_support < 1:
            raise ConfigError(f"min_support must be >= 1, got {self.min_support}")
        if self.eq2_denominator not in ("retrieved", "support"):
            raise ConfigError(f"unknown eq2_denominator {self.eq2_denominator!r}")
        if self.auroc_source not in ("candidates", "graph"):
            raise ConfigError(f"unknown auroc_source {self.auroc_source!r}")
        if not self.manifest or not Path(self.manifest).is_file():
            raise ConfigError(f"corpus manifest not found: {self.manifest!r}")
        if not self.text_dir or not Path(self.text_dir).is_dir():
            raise ConfigError(f"text directory not found: {self.text_dir!r}")
        if self.interval is not None:
            try:
                self.interval = normalize_interval(self.interval)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        for name in ("ground_truth", "generation_fixture", "human_scores"):
            value = getattr(self, name)
            if value is not None and not Path(value).is_file():
                raise ConfigError(f"{name} file not found: {value!r}")

    def to_json_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def load_config(path: str | Path | None, overrides: dict | None = None) -> PipelineConfig:
    """Build a config from an optional JSON file plus CLI overrides.

    String values from the file get environment variables expanded, so
    secrets can stay out of the file.
    """
    data: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must be a JSON object")

    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    data = {
        key: os.path.expandvars(value) if isinstance(value, str) else value
        for key, value in data.items()
    }
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return PipelineConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
