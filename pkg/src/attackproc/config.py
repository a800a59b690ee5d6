"""Analysis configuration: one JSON document, strict keys, stable hash."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Optional

from .forecast import FAMILIES
from .gof import DEFAULT_CRITICAL
from .ingest import AssemblyConfig
from .process import RESOLUTION_KINDS

ANALYSES = ("summary", "hurst", "poisson", "tails", "forecast")
CONFIG_ENV = "ATTACKPROC_CONFIG"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AssemblySection:
    flow_timeout: float = 60.0
    flow_lifetime: float = 300.0
    production_ports: tuple = ()
    honeypot_nets: tuple = ()

    def __post_init__(self):
        # both are sets semantically; keep a canonical order so equality matches the hash
        object.__setattr__(self, "production_ports", tuple(sorted(set(self.production_ports))))
        object.__setattr__(self, "honeypot_nets", tuple(sorted(set(self.honeypot_nets))))

    def build(self) -> AssemblyConfig:
        return AssemblyConfig(self.flow_timeout, self.flow_lifetime,
                              frozenset(self.production_ports), tuple(self.honeypot_nets))


@dataclass(frozen=True)
class LrdSection:
    band: tuple = (0.6, 1.0)


@dataclass(frozen=True)
class GofSection:
    critical: dict = field(default_factory=lambda: dict(DEFAULT_CRITICAL))


@dataclass(frozen=True)
class TailsSection:
    quantile: float = 0.90
    min_exceed: int = 50
    z: float = 1.645


@dataclass(frozen=True)
class ForecastSection:
    families: tuple = FAMILIES
    h: int = 1
    p: float = 0.5
    max_p: int = 4
    max_q: int = 4
    # restrict scoring to targets in the final last_k buckets; None runs every step
    last_k: Optional[int] = None
    min_train: int = 100

    @property
    def grid(self) -> tuple:
        return tuple((p, q) for p in range(self.max_p + 1) for q in range(self.max_q + 1))


@dataclass(frozen=True)
class AnalysisConfig:
    assembly: AssemblySection = AssemblySection()
    bucket: float = 3600.0
    resolutions: tuple = RESOLUTION_KINDS
    analyses: tuple = ANALYSES
    lrd: LrdSection = LrdSection()
    gof: GofSection = GofSection()
    tails: TailsSection = TailsSection()
    forecast: ForecastSection = ForecastSection()
    seed: int = 0

    def __post_init__(self):
        a = self.assembly
        if not 0 < a.flow_timeout <= a.flow_lifetime:
            raise ConfigError("assembly: need 0 < flow_timeout <= flow_lifetime")
        if self.bucket <= 0:
            raise ConfigError("bucket must be > 0")
        bad = set(self.resolutions) - set(RESOLUTION_KINDS)
        if bad or not self.resolutions:
            raise ConfigError(f"resolutions must be a non-empty subset of {RESOLUTION_KINDS}")
        if set(self.analyses) - set(ANALYSES):
            raise ConfigError(f"analyses must be a subset of {ANALYSES}")
        lo, hi = self.lrd.band
        if not lo < hi:
            raise ConfigError("lrd.band must be increasing")
        if set(self.gof.critical) - set(DEFAULT_CRITICAL):
            raise ConfigError(f"gof.critical keys must be among {sorted(DEFAULT_CRITICAL)}")
        if not 0 < self.tails.quantile < 1:
            raise ConfigError("tails.quantile must lie in (0, 1)")
        f = self.forecast
        if not f.families or set(f.families) - set(FAMILIES):
            raise ConfigError(f"forecast.families must be a non-empty subset of {FAMILIES}")
        if f.h < 1 or not 0 < f.p < 1 or f.max_p < 0 or f.max_q < 0:
            raise ConfigError("forecast: need h >= 1, 0 < p < 1 and nonnegative orders")
        if f.last_k is not None and f.last_k < 1:
            raise ConfigError("forecast.last_k must be >= 1 or null")

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["assembly"]["production_ports"] = sorted(self.assembly.production_ports)
        out["assembly"]["honeypot_nets"] = sorted(self.assembly.honeypot_nets)
        for key in ("resolutions", "analyses"):
            out[key] = list(out[key])
        out["lrd"]["band"] = list(self.lrd.band)
        out["forecast"]["families"] = list(self.forecast.families)
        out["gof"]["critical"] = {k: self.gof.critical[k] for k in sorted(self.gof.critical)}
        return out

    def hash(self) -> str:
        """SHA-256 of the canonical JSON form; equal for semantically equal configs."""
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    @classmethod
    def from_dict(cls, data: dict) -> "AnalysisConfig":
        return _build(cls, data, "")

    def override(self, **changes: Any) -> "AnalysisConfig":
        """Copy with top-level fields or dotted ``section.field`` keys replaced."""
        data = self.to_dict()
        for key, value in changes.items():
            if value is None:
                continue
            node = data
            *path, last = key.split(".")
            for part in path:
                node = node[part]
            node[last] = value
        return AnalysisConfig.from_dict(data)


_SECTIONS = {
    "assembly": AssemblySection,
    "lrd": LrdSection,
    "gof": GofSection,
    "tails": TailsSection,
    "forecast": ForecastSection,
}
_TUPLES = {"production_ports", "honeypot_nets", "resolutions", "analyses", "band", "families"}


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'}: expected an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown config key(s) {', '.join(where + k for k in unknown)}")
    kwargs = {}
    for key, value in data.items():
        if cls is AnalysisConfig and key in _SECTIONS:
            value = _build(_SECTIONS[key], value, f"{key}.")
        elif key in _TUPLES:
            if not isinstance(value, (list, tuple)):
                raise ConfigError(f"{where}{key}: expected a list")
            value = tuple(value)
        elif key == "critical":
            value = {k: float(v) for k, v in dict(value).items()}
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{where or 'config'}: {exc}") from exc


def load_config(path: Optional[str]) -> AnalysisConfig:
    if not path:
        return AnalysisConfig()
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return AnalysisConfig.from_dict(data)
