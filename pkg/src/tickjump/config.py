"""Declarative pipeline configuration.

One YAML document configures every stage; command-line flags override
single values.  Environment variables are expanded in path fields only,
so numeric parameters stay literal.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace
from datetime import date as Date
from pathlib import Path

import yaml

from .errors import ConfigError
from .jumptest import JumpTestConfig

_PATH_FIELDS = ("input_paths", "band_path", "output_dir", "scenario_path")


@dataclass(frozen=True)
class PipelineConfig:
    input_paths: tuple[str, ...] = ()
    band_path: str | None = None
    output_dir: str = "out"
    scenario_path: str | None = None

    k: int = 4
    preavg_const: float = 0.2
    variance_const: float = 0.2
    min_blocks: int = 30

    bar_width: int = 5
    fdr_q: float = 0.10
    subperiod_bounds: tuple[Date, Date] | None = None
    seed: int = 0
    threads: int = 1

    # simulator scenario parameters (plain mapping, validated on use)
    scenario: dict = field(default_factory=dict)

    def jump_config(self) -> JumpTestConfig:
        return JumpTestConfig(
            k=self.k,
            block_const=self.preavg_const,
            variance_const=self.variance_const,
            min_blocks=self.min_blocks,
        )

    def validate(self) -> None:
        if not 0.0 < self.fdr_q < 1.0:
            raise ConfigError(f"fdr_q = {self.fdr_q} outside (0, 1)")
        if self.k < 1:
            raise ConfigError(f"k = {self.k} must be >= 1")
        if self.preavg_const <= 0 or self.variance_const <= 0:
            raise ConfigError("pre-averaging constants must be positive")
        if self.bar_width < 1 or (24 * 60) % self.bar_width != 0:
            raise ConfigError(f"bar width {self.bar_width} must divide 24h")
        if self.threads < 1:
            raise ConfigError(f"threads = {self.threads} must be >= 1")
        if self.subperiod_bounds is not None:
            lo, hi = self.subperiod_bounds
            if not lo < hi:
                raise ConfigError("sub-period bounds must be increasing")
        for p in self.input_paths:
            if not Path(p).exists():
                raise ConfigError(f"input path not readable: {p}")
        if self.band_path and not Path(self.band_path).exists():
            raise ConfigError(f"band path not readable: {self.band_path}")


def _expand(value: str) -> str:
    return os.path.expanduser(os.path.expandvars(value))


def _parse_bounds(raw) -> tuple[Date, Date]:
    try:
        lo, hi = raw
        if not isinstance(lo, Date):
            lo = Date.fromisoformat(str(lo))
        if not isinstance(hi, Date):
            hi = Date.fromisoformat(str(hi))
        return lo, hi
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad sub-period bounds {raw!r}: {exc}") from exc


def load_config(path) -> PipelineConfig:
    """Read a YAML config file into a PipelineConfig."""
    try:
        raw = yaml.safe_load(Path(path).read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a mapping")
    return config_from_mapping(raw)


def config_from_mapping(raw: dict) -> PipelineConfig:
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    values = dict(raw)
    if "input_paths" in values:
        paths = values["input_paths"]
        if isinstance(paths, str):
            paths = [paths]
        values["input_paths"] = tuple(_expand(str(p)) for p in paths)
    for key in ("band_path", "output_dir", "scenario_path"):
        if values.get(key) is not None:
            values[key] = _expand(str(values[key]))
    if values.get("subperiod_bounds") is not None:
        values["subperiod_bounds"] = _parse_bounds(values["subperiod_bounds"])
    if "scenario" in values and not isinstance(values["scenario"], dict):
        raise ConfigError("scenario must be a mapping")
    try:
        cfg = PipelineConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def apply_overrides(cfg: PipelineConfig, **overrides) -> PipelineConfig:
    """Non-None keyword overrides win over file values."""
    updates = {k: v for k, v in overrides.items() if v is not None}
    if "input_paths" in updates:
        updates["input_paths"] = tuple(_expand(str(p)) for p in updates["input_paths"])
    if "output_dir" in updates:
        updates["output_dir"] = _expand(str(updates["output_dir"]))
    return replace(cfg, **updates) if updates else cfg
