"""Attack processes: per-bucket attack counts and inter-arrival samples.

A process is observed at one of four resolutions: the whole network, one
victim IP, one (victim, port) pair, or the attacker level of one victim
(each attacker counted once, at its first attack).
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import EmptySelection, TooFewArrivals
from .ingest import FlowRecord

RESOLUTION_KINDS = ("NETWORK", "VICTIM", "PORT", "ATTACKER")
TIE_JITTER = 1e-6


@dataclass(frozen=True)
class Resolution:
    kind: str
    victim_ip: Optional[str] = None
    victim_port: Optional[int] = None

    def __post_init__(self):
        if self.kind not in RESOLUTION_KINDS:
            raise ValueError(f"unknown resolution kind {self.kind!r}")
        need_ip = self.kind != "NETWORK"
        need_port = self.kind == "PORT"
        if need_ip != (self.victim_ip is not None) or need_port != (self.victim_port is not None):
            raise ValueError(f"bad parameters for {self.kind} resolution")

    @classmethod
    def network(cls) -> "Resolution":
        return cls("NETWORK")

    @classmethod
    def victim(cls, ip: str) -> "Resolution":
        return cls("VICTIM", ip)

    @classmethod
    def port(cls, ip: str, port: int) -> "Resolution":
        return cls("PORT", ip, int(port))

    @classmethod
    def attacker(cls, ip: str) -> "Resolution":
        return cls("ATTACKER", ip)

    @property
    def id(self) -> str:
        if self.kind == "NETWORK":
            return "network"
        if self.kind == "PORT":
            return f"port:{self.victim_ip}:{self.victim_port}"
        return f"{self.kind.lower()}:{self.victim_ip}"

    @classmethod
    def parse(cls, text: str) -> "Resolution":
        """Inverse of ``id``: 'network', 'victim:IP', 'port:IP:PORT', 'attacker:IP'."""
        parts = text.split(":")
        kind = parts[0].upper()
        if kind == "NETWORK" and len(parts) == 1:
            return cls.network()
        if kind in ("VICTIM", "ATTACKER") and len(parts) == 2:
            return cls(kind, parts[1])
        if kind == "PORT" and len(parts) == 3:
            return cls.port(parts[1], int(parts[2]))
        raise ValueError(f"cannot parse resolution {text!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "victim_ip": self.victim_ip, "victim_port": self.victim_port}


@dataclass
class RateSeries:
    resolution: Resolution
    bucket: float
    origin: float
    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.size < 1:
            raise ValueError("a rate series needs at least one bucket")
        if (self.counts < 0).any():
            raise ValueError("counts must be nonnegative")

    def __len__(self) -> int:
        return self.counts.size

    def timestamps(self) -> np.ndarray:
        return self.origin + self.bucket * np.arange(self.counts.size)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bucket_index", "timestamp", "count"])
        for i, (ts, c) in enumerate(zip(self.timestamps(), self.counts)):
            w.writerow([i, repr(float(ts)), int(c)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "resolution": self.resolution.to_dict(),
            "id": self.resolution.id,
            "bucket": self.bucket,
            "origin": self.origin,
            "counts": [int(c) for c in self.counts],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict) -> "RateSeries":
        r = obj["resolution"]
        res = Resolution(r["kind"], r.get("victim_ip"), r.get("victim_port"))
        return cls(res, float(obj["bucket"]), float(obj["origin"]), obj["counts"])

    @classmethod
    def from_csv(cls, text: str, resolution: Resolution = Resolution("NETWORK"),
                 bucket: Optional[float] = None) -> "RateSeries":
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise EmptySelection("rate-series CSV has no rows")
        ts = [float(r["timestamp"]) for r in rows]
        if bucket is None:
            bucket = ts[1] - ts[0] if len(ts) > 1 else 3600.0
        return cls(resolution, float(bucket), ts[0], [int(r["count"]) for r in rows])


@dataclass
class InterArrivalSample:
    resolution: Resolution
    gaps: np.ndarray

    def to_csv(self) -> str:
        return "gap\n" + "".join(f"{g!r}\n" for g in map(float, self.gaps))


# ---------------------------------------------------------------------------


def derive_attacker_level(flows: Iterable[FlowRecord], victim_ip: str) -> list[FlowRecord]:
    """Earliest flow of every distinct attacker IP against ``victim_ip``."""
    first: dict = {}
    for f in sorted((f for f in flows if f.victim_ip == victim_ip), key=lambda f: (f.start, f.key)):
        first.setdefault(f.attacker_ip, f)
    return sorted(first.values(), key=lambda f: (f.start, f.key))


def select(flows: Iterable[FlowRecord], resolution: Resolution) -> list[FlowRecord]:
    """Flows contributing to the process at ``resolution``."""
    kind = resolution.kind
    if kind == "NETWORK":
        return list(flows)
    if kind == "VICTIM":
        return [f for f in flows if f.victim_ip == resolution.victim_ip]
    if kind == "PORT":
        return [f for f in flows
                if f.victim_ip == resolution.victim_ip and f.victim_port == resolution.victim_port]
    return derive_attacker_level(flows, resolution.victim_ip)


def default_span(flows: Sequence[FlowRecord], bucket: float = 3600.0) -> tuple[float, int]:
    """(origin, n_buckets) covering all flow starts, origin aligned to a bucket boundary."""
    if not flows:
        raise EmptySelection("no flows to span")
    starts = [f.start for f in flows]
    origin = math.floor(min(starts) / bucket) * bucket
    n = int(math.floor((max(starts) - origin) / bucket)) + 1
    return origin, n


def build_rate_series(flows: Sequence[FlowRecord], resolution: Resolution = Resolution("NETWORK"),
                      bucket: float = 3600.0, span: Optional[tuple[float, int]] = None) -> RateSeries:
    """Count flows per bucket by start time.

    ``span`` is ``(origin, n_buckets)``; by default it covers every flow in
    ``flows`` (not only the selected ones), so series built from the same
    flow set at different resolutions line up bucket for bucket.
    """
    flows = list(flows)
    if span is None:
        span = default_span(flows, bucket)
    origin, n = span
    chosen = select(flows, resolution)
    idx = np.array([math.floor((f.start - origin) / bucket) for f in chosen], dtype=np.int64)
    idx = idx[(idx >= 0) & (idx < n)]
    if idx.size == 0:
        raise EmptySelection(f"no flows match {resolution.id} in the analysis span")
    return RateSeries(resolution, float(bucket), float(origin), np.bincount(idx, minlength=n))


def jitter_ties(times: Sequence[float], eps: float = TIE_JITTER) -> np.ndarray:
    """Sorted copy of ``times`` where the k-th repeat of a value is shifted by k * eps."""
    t = np.sort(np.asarray(times, dtype=float))
    out = t.copy()
    k = 0
    for i in range(1, t.size):
        k = k + 1 if t[i] == t[i - 1] else 0
        out[i] = t[i] + k * eps
    return np.sort(out)


def inter_arrivals(flows: Sequence[FlowRecord], resolution: Resolution = Resolution("NETWORK"),
                   eps: float = TIE_JITTER) -> InterArrivalSample:
    chosen = select(flows, resolution)
    if len(chosen) < 2:
        raise TooFewArrivals(f"{resolution.id}: need at least 2 arrivals, got {len(chosen)}")
    return InterArrivalSample(resolution, np.diff(jitter_ties([f.start for f in chosen], eps)))


def resolutions_for(flows: Sequence[FlowRecord], kinds: Sequence[str] = RESOLUTION_KINDS) -> list[Resolution]:
    """Every resolution of the requested kinds present in ``flows``, sorted by id."""
    out = []
    if "NETWORK" in kinds:
        out.append(Resolution.network())
    victims = sorted({f.victim_ip for f in flows})
    if "VICTIM" in kinds:
        out.extend(Resolution.victim(v) for v in victims)
    if "PORT" in kinds:
        out.extend(Resolution.port(v, p) for v, p in sorted({(f.victim_ip, f.victim_port) for f in flows}))
    if "ATTACKER" in kinds:
        out.extend(Resolution.attacker(v) for v in victims)
    return sorted(out, key=lambda r: r.id)
