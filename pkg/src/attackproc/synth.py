"""Seeded ground-truth generators.

Every generator draws from ``numpy.random.Generator(PCG64(seed))`` so a given
``GeneratorSpec`` yields the same numbers on every platform numpy supports.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.signal import lfilter

from ._frac import fracdiff
from .errors import EmbeddingFailure

KINDS = (
    "WHITE_NOISE",
    "FGN",
    "FARIMA0",
    "AR1",
    "POISSON_PROCESS",
    "GPD_SAMPLE",
    "LEVEL_SHIFT",
    "TREND",
)


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    n: int
    seed: int = 0
    H: float = 0.5
    d: float = 0.0
    phi: float = 0.0
    lam: float = 1.0
    xi: float = 0.0
    beta: float = 1.0
    base: Optional["GeneratorSpec"] = None
    shift_sigmas: float = 0.0
    location_fraction: float = 0.5
    slope: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.kind == "FGN" and not 0.0 < self.H < 1.0:
            raise ValueError("H must lie in (0, 1)")
        if self.kind == "FARIMA0" and not -0.5 < self.d < 0.5:
            raise ValueError("d must lie in (-0.5, 0.5)")
        if self.kind == "AR1" and not abs(self.phi) < 1.0:
            raise ValueError("|phi| must be < 1")
        if self.kind == "POISSON_PROCESS" and self.lam <= 0:
            raise ValueError("lambda must be > 0")
        if self.kind == "GPD_SAMPLE" and self.beta <= 0:
            raise ValueError("beta must be > 0")
        if self.kind in ("LEVEL_SHIFT", "TREND") and self.base is None:
            raise ValueError(f"{self.kind} needs a base spec")
        if self.kind == "LEVEL_SHIFT" and not 0.0 <= self.location_fraction <= 1.0:
            raise ValueError("location_fraction must lie in [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "GeneratorSpec":
        data = dict(data)
        if data.get("base") is not None:
            data["base"] = cls.from_dict(data["base"])
        return cls(**data)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def fgn_autocovariance(H: float, lags) -> np.ndarray:
    """Exact autocovariance of unit-variance fractional Gaussian noise."""
    h = np.abs(np.asarray(lags, dtype=float))
    return 0.5 * (np.abs(h + 1) ** (2 * H) - 2 * h ** (2 * H) + np.abs(h - 1) ** (2 * H))


def fgn(n: int, H: float, rng: np.random.Generator) -> np.ndarray:
    """Fractional Gaussian noise by circulant embedding (Davies-Harte).

    The embedding length is doubled once if the circulant spectrum has a
    negative eigenvalue; a second failure raises ``EmbeddingFailure``.
    """
    m = max(n, 2)
    for _ in range(2):
        gamma = fgn_autocovariance(H, np.arange(m + 1))
        row = np.concatenate([gamma, gamma[-2:0:-1]])
        eig = np.fft.fft(row).real
        if eig.min() >= -1e-10 * eig.max():
            eig = np.clip(eig, 0.0, None)
            size = row.size
            z = rng.standard_normal(size) + 1j * rng.standard_normal(size)
            y = np.fft.fft(np.sqrt(eig / size) * z)
            return y.real[:n].copy()
        m *= 2
    raise EmbeddingFailure(f"circulant embedding not nonnegative for H={H}, n={n}")


def farima0(n: int, d: float, rng: np.random.Generator, burn: Optional[int] = None) -> np.ndarray:
    """FARIMA(0, d, 0) with unit innovations: (1 - B)^{-d} applied to white noise."""
    burn = n if burn is None else burn
    eps = rng.standard_normal(n + burn)
    return fracdiff(eps, -d)[burn:]


def ar1(n: int, phi: float, rng: np.random.Generator) -> np.ndarray:
    eps = rng.standard_normal(n)
    x0 = rng.standard_normal() / np.sqrt(1.0 - phi * phi)
    out, _ = lfilter([1.0], [1.0, -phi], eps, zi=[phi * x0])
    return out


def gpd_sample(n: int, xi: float, beta: float, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF draws from the generalized Pareto distribution."""
    u = rng.random(n)
    if abs(xi) < 1e-12:
        return -beta * np.log1p(-u)
    return beta * ((1.0 - u) ** (-xi) - 1.0) / xi


def poisson_arrivals(n: int, lam: float, rng: np.random.Generator) -> np.ndarray:
    """Arrival timestamps of a homogeneous Poisson process, first arrival at its first gap."""
    return np.cumsum(rng.exponential(1.0 / lam, n))


def generate(spec: GeneratorSpec) -> np.ndarray:
    """Draw the series (or arrival timestamps for POISSON_PROCESS) described by ``spec``."""
    rng = make_rng(spec.seed)
    kind = spec.kind
    if kind == "WHITE_NOISE":
        return rng.standard_normal(spec.n)
    if kind == "FGN":
        return fgn(spec.n, spec.H, rng)
    if kind == "FARIMA0":
        return farima0(spec.n, spec.d, rng)
    if kind == "AR1":
        return ar1(spec.n, spec.phi, rng)
    if kind == "POISSON_PROCESS":
        return poisson_arrivals(spec.n, spec.lam, rng)
    if kind == "GPD_SAMPLE":
        return gpd_sample(spec.n, spec.xi, spec.beta, rng)

    base = generate(_with_n(spec.base, spec.n))
    scale = base.std(ddof=1) if spec.n > 1 else 1.0
    if kind == "LEVEL_SHIFT":
        out = base.copy()
        out[int(spec.location_fraction * spec.n):] += spec.shift_sigmas * scale
        return out
    # TREND: slope is the total rise over the span, in units of the base SD
    t = np.arange(spec.n) / spec.n
    return base + spec.slope * scale * t


def _with_n(spec: GeneratorSpec, n: int) -> GeneratorSpec:
    d = spec.to_dict()
    d["n"] = n
    return GeneratorSpec.from_dict(d)
