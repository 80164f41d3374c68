"""Run configuration: defaults, config-file parsing, flag precedence.

Precedence is flags over file values over built-in defaults. Config files
are flat ``key=value`` text or a JSON object with the same keys; CLI flags
mirror the keys 1:1 (``k_overlap`` <-> ``--k-overlap``). The resolved
configuration is echoed into the output directory and re-parses to an
identical RunConfig.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field

from .errors import ConfigError


@dataclass
class RunConfig:
    # ingestion
    input: str | None = None
    format: str = "text"              # text | binary
    label_col: str | None = None      # header name or 0-based index
    sidecar: str | None = None
    labels: str | None = None         # binary label file override
    standardize: str = "none"         # none | zscore
    # sub-clustering
    birch_threshold: str = "auto"     # positive number or "auto"
    birch_branching: int = 50
    anchors_target: str = "20,60"     # median per-class anchor band
    # embedding
    embed: str = "pca"                # pca | mds | external
    external_coords: str | None = None
    # relations
    k_overlap: int = 10
    k_prox: int = 5
    k_confusion: int = 10
    # geometry
    alpha_radius: str = "auto"        # positive number or "auto"
    lof_k: int = 20
    lof_threshold: float = 1.5
    smoothing_passes: int = 3
    virtual_cap: int = 20000
    # optimizer
    iterations: int = 1000
    lr: float = 0.05
    delta: float = 0.02
    stall_patience: int = 25
    damp_factor: float = 0.5
    inter_label_only: bool = True
    lazy: bool = False
    # rendering
    canvas: int = 1000
    palette: str | None = None        # comma-joined hex colors
    fill_opacity: float = 0.25
    stroke_frac: float = 0.008
    legend: bool = True
    # misc
    confusion: bool = False
    seed: int = 0
    threads: int = 0                  # 0 = machine parallelism
    out: str = "out"

    def validate(self) -> None:
        if self.format not in ("text", "binary"):
            raise ConfigError(f"format must be text or binary, got {self.format!r}")
        if self.standardize not in ("none", "zscore"):
            raise ConfigError(f"standardize must be none or zscore, "
                              f"got {self.standardize!r}")
        if self.embed not in ("pca", "mds", "external"):
            raise ConfigError(f"embed must be pca, mds or external, "
                              f"got {self.embed!r}")
        if self.embed == "external" and not self.external_coords:
            raise ConfigError("embed=external requires external_coords")
        parse_threshold(self.birch_threshold, "birch_threshold")
        parse_threshold(self.alpha_radius, "alpha_radius")
        parse_target_band(self.anchors_target)
        for name in ("k_overlap", "k_prox", "k_confusion", "iterations",
                     "birch_branching", "virtual_cap", "canvas",
                     "stall_patience"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not 0.0 < self.lr < 1.0:
            raise ConfigError("lr must be in (0, 1)")
        if self.delta < 0:
            raise ConfigError("delta must be >= 0")
        if not 0.0 < self.damp_factor < 1.0:
            raise ConfigError("damp_factor must be in (0, 1)")
        if not 0.0 <= self.fill_opacity <= 1.0:
            raise ConfigError("fill_opacity must be in [0, 1]")
        if self.stroke_frac <= 0:
            raise ConfigError("stroke_frac must be > 0")
        if self.lof_k < 2:
            raise ConfigError("lof_k must be >= 2")
        if self.lof_threshold <= 1:
            raise ConfigError("lof_threshold must be > 1")
        if self.smoothing_passes < 0:
            raise ConfigError("smoothing_passes must be >= 0")
        if self.threads < 0:
            raise ConfigError("threads must be >= 0")


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_BOOL_KEYS = {f.name for f in dataclasses.fields(RunConfig) if f.type == "bool"}


def parse_threshold(value, name: str) -> float | str:
    """'auto' or a positive number (accepted as str or number)."""
    if isinstance(value, str):
        if value == "auto":
            return "auto"
        try:
            value = float(value)
        except ValueError:
            raise ConfigError(f"{name} must be a positive number or 'auto', "
                              f"got {value!r}") from None
    if value <= 0:
        raise ConfigError(f"{name} must be > 0")
    return float(value)


def parse_target_band(value: str) -> tuple[int, int]:
    parts = str(value).split(",")
    if len(parts) != 2:
        raise ConfigError(f"anchors_target must be 'lo,hi', got {value!r}")
    try:
        lo, hi = int(parts[0]), int(parts[1])
    except ValueError:
        raise ConfigError(f"anchors_target must be 'lo,hi' integers, "
                          f"got {value!r}") from None
    if not 3 <= lo <= hi:
        raise ConfigError("anchors_target must satisfy 3 <= lo <= hi")
    return lo, hi


def _coerce(key: str, value):
    if key not in _FIELDS:
        raise ConfigError(f"unknown configuration key {key!r}")
    if value is None:
        return None
    ftype = _FIELDS[key].type
    try:
        if ftype == "bool":
            if isinstance(value, bool):
                return value
            s = str(value).strip().lower()
            if s in ("1", "true", "yes", "on"):
                return True
            if s in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if ftype == "int":
            return int(value)
        if ftype == "float":
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value {value!r} for key {key!r}") from None


def parse_config_file(path: str) -> dict:
    """Flat key=value lines or a JSON object; unknown keys rejected."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    values: dict = {}
    if path.endswith(".json"):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file is not valid JSON: {e}") from None
        if not isinstance(raw, dict):
            raise ConfigError("JSON config must be an object")
        items = raw.items()
    else:
        items = []
        for line_no, ln in enumerate(text.splitlines(), start=1):
            ln = ln.strip()
            if not ln or ln.startswith("#"):
                continue
            if "=" not in ln:
                raise ConfigError(f"config line {line_no} is not key=value: {ln!r}")
            k, v = ln.split("=", 1)
            items.append((k.strip(), v.strip()))
    for k, v in items:
        values[k] = _coerce(k, v)
    return values


def resolve_config(file_values: dict | None, flag_values: dict) -> RunConfig:
    """Flags override file values override defaults; result validated."""
    cfg = RunConfig()
    for source in (file_values or {}), flag_values:
        for k, v in source.items():
            if v is None:
                continue
            setattr(cfg, k, _coerce(k, v))
    cfg.validate()
    return cfg


def config_to_dict(cfg: RunConfig) -> dict:
    return dataclasses.asdict(cfg)


def write_config_echo(cfg: RunConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(config_to_dict(cfg), f, indent=2, sort_keys=True)
        f.write("\n")


def derive_seed(seed: int, *tags) -> int:
    """Stable per-module seed: sha256 over the global seed and a tag tuple."""
    payload = repr((int(seed),) + tuple(tags)).encode()
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "little")
