"""Declarative conflation configuration (YAML or JSON)."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SourceConfig:
    path: str
    weight: float = 1.0
    bandwidth: float | None = None  # defaults to max_bandwidth
    note: str = ""


@dataclass(frozen=True)
class ConflationConfig:
    voxel_size: float = 0.5
    max_bandwidth: float = 5.0
    coarse_cell_factor: float = 4.0
    window_phi: int = 3
    rays_per_camera: int = 10_000
    adaptive_band: bool = True
    grid_padding: int = 1
    eps_skip: float = 1e-4
    sources: tuple[SourceConfig, ...] = ()
    output: str | None = None
    cameras_ply: str | None = None
    volume_dump: str | None = None
    threads: int | None = None
    seed: int = 0

    def validate(self, require_sources: bool = True) -> "ConflationConfig":
        if not self.voxel_size > 0:
            raise ConfigError(f"voxel_size must be > 0 (got {self.voxel_size})")
        if not self.max_bandwidth >= self.voxel_size:
            raise ConfigError(f"max_bandwidth ({self.max_bandwidth}) must be >= voxel_size ({self.voxel_size})")
        if not self.coarse_cell_factor > 0:
            raise ConfigError("coarse_cell_factor must be > 0")
        if self.window_phi < 1:
            raise ConfigError("window_phi must be >= 1")
        if self.rays_per_camera < 1:
            raise ConfigError("rays_per_camera must be >= 1")
        if self.grid_padding < 1:
            raise ConfigError("grid_padding must be >= 1")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if require_sources and not self.sources:
            raise ConfigError("config needs at least one source (sources: [] is empty)")
        for s in self.sources:
            if not s.weight > 0:
                raise ConfigError(f"source {s.path}: weight must be > 0")
            bw = self.bandwidth_of(s)
            if not bw > 0:
                raise ConfigError(f"source {s.path}: bandwidth must be > 0")
            if bw > self.max_bandwidth:
                raise ConfigError(f"source {s.path}: bandwidth {bw} exceeds max_bandwidth {self.max_bandwidth}")
        return self

    def bandwidth_of(self, source: SourceConfig) -> float:
        return self.max_bandwidth if source.bandwidth is None else source.bandwidth

    def with_overrides(self, **kwargs) -> "ConflationConfig":
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sources"] = [asdict(s) for s in self.sources]
        return d


def parse_config(data: dict, base_dir=None) -> ConflationConfig:
    """Build a config from a mapping; relative paths resolve against ``base_dir``."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    known = {f.name for f in fields(ConflationConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    data = dict(data)
    base = Path(base_dir) if base_dir is not None else None

    def resolve(p):
        if p is None or base is None or os.path.isabs(p):
            return p
        return str(base / p)

    sources = []
    for entry in data.pop("sources", None) or []:
        if isinstance(entry, str):
            entry = {"path": entry}
        if "path" not in entry:
            raise ConfigError(f"source entry lacks 'path': {entry}")
        try:
            src = SourceConfig(**entry)
        except TypeError as exc:
            raise ConfigError(f"bad source entry {entry}: {exc}") from exc
        sources.append(replace(src, path=resolve(src.path)))
    for key in ("output", "cameras_ply", "volume_dump"):
        if key in data:
            data[key] = resolve(data[key])
    try:
        cfg = ConflationConfig(sources=tuple(sources), **data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path) -> ConflationConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return parse_config(data or {}, base_dir=path.parent)


def save_config(config: ConflationConfig, path) -> None:
    path = Path(path)
    data = config.to_dict()
    with open(path, "w") as fh:
        if path.suffix == ".json":
            json.dump(data, fh, indent=2)
        else:
            yaml.safe_dump(data, fh, sort_keys=False)
