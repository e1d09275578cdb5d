"""Simulation configuration: defaults, file loading and validation.

Config files are YAML (JSON is accepted as a subset). Every key is
optional; an empty file gives the default scenario::

    area: [10000, 10000]      # m
    model: [fmm, rwp_free]    # or a single name; fmm | rwp_free | rwp_graph
    nodes: 30
    class_mix: {personal: 0.3333333333333333, public: 0.3333333333333333, ambulance: 0.3333333333333334}
    speed_range: [0, 10]      # m/s, every class unless class_speeds overrides it
    class_speeds: {}          # e.g. {ambulance: [5, 10]}
    pause_range: [10, 300]    # s
    duration: 3600            # s, warm-up included
    warmup: 60                # s
    dt: 1
    snapshot_interval: 1
    range: 250                # m
    sessions: {count: 20, packet_size: 512, rate: 4, max_packets: 6000}
    bandwidth: 2000000        # bit/s
    hop_latency: 0.002        # s
    seeds: [1]
    map: null                 # path; null -> bundled paper_city map
    table_source: bundled     # bundled | derived
    rules: null               # rule-table file overriding the bundled tables
    priorities: null          # priority file for table_source: derived
    p1: 0.6
    p2: 0.4
    time_centers: {Morning: 8, Noon: 12, Evening: 17}
    seconds_per_hour: 150

Relative paths resolve against the config file's directory.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError, RangeError, UnknownKeyError
from .mobility import DEFAULT_CLASSES, DEFAULT_TIME_CENTERS, MODELS


@dataclass(frozen=True)
class SessionSpec:
    count: int = 20
    packet_size: int = 512
    rate: float = 4.0
    max_packets: int = 6000


@dataclass(frozen=True)
class SimConfig:
    area: tuple[float, float] = (10000.0, 10000.0)
    models: tuple[str, ...] = ("fmm", "rwp_free")
    nodes: int = 30
    class_mix: dict[str, float] = field(default_factory=lambda: {c: 1 / 3 for c in DEFAULT_CLASSES})
    speed_range: tuple[float, float] = (0.0, 10.0)
    class_speeds: dict[str, tuple[float, float]] = field(default_factory=dict)
    pause_range: tuple[float, float] = (10.0, 300.0)
    duration: float = 3600.0
    warmup: float = 60.0
    dt: float = 1.0
    snapshot_interval: float = 1.0
    range: float = 250.0
    sessions: SessionSpec = SessionSpec()
    bandwidth: float = 2e6
    hop_latency: float = 0.002
    seeds: tuple[int, ...] = (1,)
    map: Path | None = None
    table_source: str = "bundled"
    rules: Path | None = None
    priorities: Path | None = None
    p1: float = 0.6
    p2: float = 0.4
    time_centers: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_TIME_CENTERS))
    seconds_per_hour: float = 150.0

    def __post_init__(self):
        validate(self)

    def with_overrides(self, **changes) -> "SimConfig":
        return replace(self, **changes)

    def speed_for(self, cls: str) -> tuple[float, float]:
        return self.class_speeds.get(cls, self.speed_range)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["model"] = list(d.pop("models"))
        for k in ("map", "rules", "priorities"):
            d[k] = None if d[k] is None else str(d[k])
        return d


def _require(cond: bool, key: str, message: str) -> None:
    if not cond:
        raise RangeError(message, key=key)


def _pair(value, key: str) -> tuple[float, float]:
    try:
        a, b = (float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError("expected a pair of numbers", key=key) from None
    _require(math.isfinite(a) and math.isfinite(b) and 0 <= a <= b, key, f"expected 0 <= min <= max, got {value}")
    return a, b


def validate(cfg: SimConfig) -> None:
    _require(all(v > 0 for v in cfg.area), "area", "area dimensions must be positive")
    for m in cfg.models:
        if m not in MODELS:
            raise UnknownKeyError(f"unknown model {m!r}; choose from {', '.join(MODELS)}", key="model")
    _require(len(cfg.models) > 0, "model", "at least one model is required")
    _require(isinstance(cfg.nodes, int) and cfg.nodes >= 2, "nodes", "need at least 2 nodes")
    _require(len(cfg.class_mix) > 0, "class_mix", "at least one class is required")
    for cls, p in cfg.class_mix.items():
        _require(p >= 0, f"class_mix.{cls}", "proportions must be non-negative")
    _require(math.isclose(sum(cfg.class_mix.values()), 1.0, abs_tol=1e-9), "class_mix", "proportions must sum to 1")
    for cls in cfg.class_speeds:
        if cls not in cfg.class_mix:
            raise UnknownKeyError(f"unknown class {cls!r}", key=f"class_speeds.{cls}")
    _require(cfg.pause_range[0] >= 0, "pause_range", "pause must be non-negative")
    _require(cfg.dt > 0, "dt", "dt must be positive")
    _require(cfg.warmup >= 0, "warmup", "warm-up must be non-negative")
    _require(cfg.duration > cfg.warmup, "duration", "duration must exceed warm-up")
    ratio = cfg.snapshot_interval / cfg.dt
    _require(ratio >= 1 and abs(ratio - round(ratio)) < 1e-9, "snapshot_interval", "must be a positive multiple of dt")
    _require(cfg.range > 0, "range", "range must be positive")
    s = cfg.sessions
    _require(s.count >= 0, "sessions.count", "must be non-negative")
    _require(s.packet_size > 0, "sessions.packet_size", "must be positive")
    _require(s.rate > 0, "sessions.rate", "must be positive")
    _require(s.max_packets >= 0, "sessions.max_packets", "must be non-negative")
    _require(cfg.bandwidth > 0, "bandwidth", "must be positive")
    _require(cfg.hop_latency >= 0, "hop_latency", "must be non-negative")
    _require(len(cfg.seeds) > 0, "seeds", "at least one seed is required")
    for i, seed in enumerate(cfg.seeds):
        _require(isinstance(seed, int) and seed >= 0, f"seeds[{i}]", "seeds must be non-negative integers")
    if cfg.table_source not in ("bundled", "derived"):
        raise UnknownKeyError(f"unknown table source {cfg.table_source!r}", key="table_source")
    _require(0 <= cfg.p1 <= 1, "p1", "must lie in [0, 1]")
    _require(0 <= cfg.p2 <= 1, "p2", "must lie in [0, 1]")
    _require(len(cfg.time_centers) > 0, "time_centers", "at least one time label is required")
    _require(cfg.seconds_per_hour > 0, "seconds_per_hour", "must be positive")
    for key in ("map", "rules", "priorities"):
        p = getattr(cfg, key)
        if p is not None and not Path(p).is_file():
            raise ConfigError(f"file not found: {p}", key=key)


_SCALARS = {
    "nodes": int,
    "duration": float,
    "warmup": float,
    "dt": float,
    "snapshot_interval": float,
    "range": float,
    "bandwidth": float,
    "hop_latency": float,
    "table_source": str,
    "p1": float,
    "p2": float,
    "seconds_per_hour": float,
}


def _convert(key: str, value, typ):
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", key=key)
        return value
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", key=key)
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"expected a string, got {value!r}", key=key)
    return value


def config_from_dict(raw: dict | None, base_dir: Path | None = None) -> SimConfig:
    raw = dict(raw or {})
    known = {f.name for f in fields(SimConfig)} - {"models"} | {"model"}
    for key in raw:
        if key not in known:
            raise UnknownKeyError("unknown configuration key", key=key)
    kw: dict[str, Any] = {}
    for key, typ in _SCALARS.items():
        if key in raw:
            kw[key] = _convert(key, raw[key], typ)
    if "area" in raw:
        kw["area"] = _pair(raw["area"], "area")
    if "speed_range" in raw:
        kw["speed_range"] = _pair(raw["speed_range"], "speed_range")
    if "pause_range" in raw:
        kw["pause_range"] = _pair(raw["pause_range"], "pause_range")
    if "model" in raw:
        models = raw["model"]
        kw["models"] = (models,) if isinstance(models, str) else tuple(models)
    if "class_mix" in raw:
        mix = raw["class_mix"]
        if not isinstance(mix, dict):
            raise ConfigError("expected a mapping of class to proportion", key="class_mix")
        kw["class_mix"] = {str(k): _convert(f"class_mix.{k}", v, float) for k, v in mix.items()}
    if "class_speeds" in raw:
        speeds = raw["class_speeds"] or {}
        if not isinstance(speeds, dict):
            raise ConfigError("expected a mapping of class to speed range", key="class_speeds")
        kw["class_speeds"] = {str(k): _pair(v, f"class_speeds.{k}") for k, v in speeds.items()}
    if "sessions" in raw:
        sess = raw["sessions"] or {}
        if not isinstance(sess, dict):
            raise ConfigError("expected a mapping", key="sessions")
        allowed = {f.name: f.type for f in fields(SessionSpec)}
        skw = {}
        for k, v in sess.items():
            if k not in allowed:
                raise UnknownKeyError("unknown configuration key", key=f"sessions.{k}")
            skw[k] = _convert(f"sessions.{k}", v, float if k == "rate" else int)
        kw["sessions"] = SessionSpec(**skw)
    if "seeds" in raw:
        seeds = raw["seeds"]
        seeds = [seeds] if isinstance(seeds, int) else seeds
        kw["seeds"] = tuple(_convert(f"seeds[{i}]", s, int) for i, s in enumerate(seeds))
    if "time_centers" in raw:
        tc = raw["time_centers"]
        if not isinstance(tc, dict):
            raise ConfigError("expected a mapping of label to hour", key="time_centers")
        kw["time_centers"] = {str(k): _convert(f"time_centers.{k}", v, float) for k, v in tc.items()}
    for key in ("map", "rules", "priorities"):
        if raw.get(key) is not None:
            p = Path(_convert(key, raw[key], str))
            if base_dir is not None and not p.is_absolute():
                p = base_dir / p
            kw[key] = p
    return SimConfig(**kw)


def load_config(path: str | Path | None = None) -> SimConfig:
    """Load a YAML/JSON config file; ``None`` returns the defaults."""
    if path is None:
        return SimConfig()
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config ({exc.strerror})", key=str(path)) from None
    try:
        raw = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigError(f"not valid YAML/JSON: {exc}", key=str(path)) from None
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError("top level must be a mapping", key=str(path))
    return config_from_dict(raw, path.parent)
