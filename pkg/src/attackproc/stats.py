"""Descriptive statistics of attack-rate series and inter-arrival samples."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import EmptyInput, ZeroMean, ZeroVariance


@dataclass(frozen=True)
class SummaryStats:
    n: int
    min: float
    mean: float
    median: float
    variance: float
    max: float
    variance_defined: bool = True

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class AcfCurve:
    lags: np.ndarray
    rho: np.ndarray

    def to_dict(self) -> dict:
        return {"lags": [int(h) for h in self.lags], "rho": [float(r) for r in self.rho]}


def _values(values) -> np.ndarray:
    return np.asarray(getattr(values, "counts", values), dtype=float).ravel()


def summarize(values) -> SummaryStats:
    """Min, mean, median, sample variance (n - 1 denominator) and max.

    A single value has no sample variance; it is reported as 0 with
    ``variance_defined=False``.
    """
    x = _values(values)
    if x.size == 0:
        raise EmptyInput("cannot summarize an empty sample")
    var_ok = x.size >= 2
    return SummaryStats(
        n=int(x.size),
        min=float(x.min()),
        mean=float(x.mean()),
        median=float(np.median(x)),
        variance=float(x.var(ddof=1)) if var_ok else 0.0,
        max=float(x.max()),
        variance_defined=var_ok,
    )


def quartiles(values) -> dict:
    """Five-number summary (boxplot data)."""
    x = _values(values)
    if x.size == 0:
        raise EmptyInput("cannot summarize an empty sample")
    q = np.percentile(x, [0, 25, 50, 75, 100])
    return dict(zip(("min", "q1", "median", "q3", "max"), map(float, q)))


def acf(values, h_max: int) -> AcfCurve:
    """Sample autocorrelation at lags 1..h_max, normalized by the lag-0 sum of squares."""
    x = _values(values)
    if h_max < 1:
        raise ValueError("h_max must be >= 1")
    if x.size < h_max + 2:
        raise EmptyInput(f"need at least {h_max + 2} values for {h_max} lags")
    xc = x - x.mean()
    denom = float(xc @ xc)
    if denom <= 0 or np.ptp(x) == 0:
        raise ZeroVariance("autocorrelation undefined for a constant series")
    n = x.size
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(xc, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[: h_max + 1]
    rho = acov / acov[0]
    assert abs(rho[0] - 1.0) < 1e-12
    return AcfCurve(np.arange(1, h_max + 1), np.clip(rho[1:], -1.0, 1.0))


def dispersion_hint(series, threshold: float = 1.5) -> tuple[float, bool]:
    """Variance-to-mean ratio and whether it exceeds ``threshold``.

    Counts of a Poisson process have ratio 1; a much larger ratio hints at
    burstiness worth testing further.
    """
    x = _values(series)
    if x.size < 2:
        raise EmptyInput("need at least two counts")
    m = x.mean()
    if m <= 0:
        raise ZeroMean("dispersion undefined for zero-mean counts")
    ratio = float(x.var(ddof=1) / m)
    return ratio, ratio > threshold
