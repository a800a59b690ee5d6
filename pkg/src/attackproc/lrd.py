"""Hurst-parameter estimation and the spurious-LRD screen.

Six log-log regression estimators are provided (R/S, aggregated variance,
Peng's residual-variance method, periodogram, boxed periodogram and wavelet
energy).  ``hurst_all`` averages them and classifies the series as LRD,
spurious LRD or not LRD.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats as sps

from .errors import AnalysisError, TooShort, ZeroVariance

METHODS = ("RS", "AGV", "PENG", "PER", "BOX", "WAVE")
LRD_BAND = (0.6, 1.0)

# Daubechies filter with two vanishing moments (4 taps)
_S3 = math.sqrt(3.0)
DB4_LOWPASS = np.array([1 + _S3, 3 + _S3, 3 - _S3, 1 - _S3]) / (4 * math.sqrt(2.0))
DB4_HIGHPASS = np.array([(-1) ** k * DB4_LOWPASS[3 - k] for k in range(4)])


@dataclass
class HurstEstimate:
    method: str
    h_value: float
    slope: float
    intercept: float
    log_x: list = field(default_factory=list)
    log_y: list = field(default_factory=list)

    @property
    def beta(self) -> float:
        """Autocorrelation decay exponent, beta = 2 - 2H."""
        return 2.0 - 2.0 * self.h_value

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "h_value": self.h_value,
            "beta": self.beta,
            "slope": self.slope,
            "intercept": self.intercept,
            "regression_points": [[a, b] for a, b in zip(self.log_x, self.log_y)],
        }


@dataclass
class SpuriousScreen:
    changepoint_detected: bool
    changepoints: list
    trend_detected: bool
    h_after_changepoint: Optional[float]
    h_after_detrend: Optional[float]
    spurious: bool

    @property
    def h_after_adjustment(self) -> Optional[float]:
        vals = [v for v in (self.h_after_changepoint, self.h_after_detrend) if v is not None]
        return min(vals) if vals else None

    def to_dict(self) -> dict:
        return {
            "changepoint_detected": self.changepoint_detected,
            "changepoints": list(self.changepoints),
            "trend_detected": self.trend_detected,
            "h_after_changepoint": self.h_after_changepoint,
            "h_after_detrend": self.h_after_detrend,
            "h_after_adjustment": self.h_after_adjustment,
            "spurious": self.spurious,
        }


@dataclass
class HurstReport:
    estimates: dict  # method -> HurstEstimate
    errors: dict  # method -> message, for methods that could not run
    h_bar: float
    lrd_candidate: bool
    screen: Optional[SpuriousScreen]
    degraded: bool = False

    @property
    def spurious(self) -> bool:
        return bool(self.screen and self.screen.spurious)

    @property
    def verdict(self) -> str:
        return verdict_for(self.lrd_candidate, self.spurious)

    def to_dict(self) -> dict:
        methods = {}
        for m in METHODS:
            if m in self.estimates:
                methods[m] = self.estimates[m].to_dict()
            else:
                methods[m] = {"method": m, "unavailable": self.errors.get(m, "not run")}
        return {
            "methods": methods,
            "h_bar": self.h_bar,
            "lrd_candidate": self.lrd_candidate,
            "spurious": self.spurious,
            "verdict": self.verdict,
            "degraded": self.degraded,
            "screen": self.screen.to_dict() if self.screen else None,
        }


def verdict_for(lrd_candidate: bool, spurious: bool) -> str:
    if lrd_candidate and not spurious:
        return "LRD"
    if lrd_candidate and spurious:
        return "SPURIOUS_LRD"
    return "NOT_LRD"


# ---------------------------------------------------------------------------
# helpers


def _as_series(series, min_n: int) -> np.ndarray:
    x = np.asarray(getattr(series, "counts", series), dtype=float)
    if x.ndim != 1:
        raise ValueError("series must be one-dimensional")
    if x.size < min_n:
        raise TooShort(f"need at least {min_n} observations, got {x.size}")
    if np.ptp(x) == 0:
        raise ZeroVariance("series is constant")
    return x


def block_sizes(n: int, lo: int = 8, count: int = 20, hi_div: int = 4) -> np.ndarray:
    """About ``count`` log-spaced integer block sizes from ``lo`` to ``n // hi_div``."""
    hi = n // hi_div
    if hi < lo:
        return np.array([], dtype=int)
    return np.unique(np.round(np.geomspace(lo, hi, count)).astype(int))


def _fit(method: str, lx, ly, to_h: Callable[[float], float]) -> HurstEstimate:
    lx = np.asarray(lx, dtype=float)
    ly = np.asarray(ly, dtype=float)
    ok = np.isfinite(lx) & np.isfinite(ly)
    lx, ly = lx[ok], ly[ok]
    if lx.size < 4:
        raise TooShort(f"{method}: only {lx.size} regression points")
    slope, intercept = np.polyfit(lx, ly, 1)
    return HurstEstimate(method, float(to_h(slope)), float(slope), float(intercept),
                         lx.tolist(), ly.tolist())


def _blocks(x: np.ndarray, m: int) -> np.ndarray:
    k = x.size // m
    return x[: k * m].reshape(k, m)


# ---------------------------------------------------------------------------
# time-domain estimators


def hurst_rs(series, sizes: Optional[Sequence[int]] = None) -> HurstEstimate:
    """Rescaled-range estimate: slope of log E[R/S(m)] against log m."""
    x = _as_series(series, 64)
    sizes = block_sizes(x.size) if sizes is None else np.asarray(sizes)
    lx, ly = [], []
    for m in sizes:
        b = _blocks(x, int(m))
        y = np.cumsum(b, axis=1)
        t = np.arange(1, m + 1)
        dev = y - np.outer(y[:, -1], t / m)
        # Y_0 = 0 contributes a zero deviation to the range
        r = np.maximum(dev.max(axis=1), 0.0) - np.minimum(dev.min(axis=1), 0.0)
        s = b.std(axis=1)
        keep = s > 0
        if not keep.any():
            continue
        lx.append(math.log(m))
        ly.append(math.log(np.mean(r[keep] / s[keep])))
    return _fit("RS", lx, ly, lambda s: s)


def hurst_agv(series, sizes: Optional[Sequence[int]] = None) -> HurstEstimate:
    """Aggregated variance: Var(X^(m)) ~ m^(2H-2), so H = 1 + slope / 2."""
    x = _as_series(series, 64)
    # at least 16 blocks per size: with fewer, the sample variance of the
    # block means is biased low under strong dependence
    sizes = block_sizes(x.size, hi_div=16) if sizes is None else np.asarray(sizes)
    lx, ly = [], []
    for m in sizes:
        means = _blocks(x, int(m)).mean(axis=1)
        if means.size < 2:
            continue
        v = means.var(ddof=1)
        if v <= 0:
            continue
        lx.append(math.log(m))
        ly.append(math.log(v))
    return _fit("AGV", lx, ly, lambda s: 1.0 + s / 2.0)


def hurst_peng(series, sizes: Optional[Sequence[int]] = None) -> HurstEstimate:
    """Residual variance of in-block partial sums around a fitted line, ~ m^(2H)."""
    x = _as_series(series, 64)
    sizes = block_sizes(x.size) if sizes is None else np.asarray(sizes)
    lx, ly = [], []
    for m in sizes:
        y = np.cumsum(_blocks(x, int(m)), axis=1)
        i = np.arange(1, m + 1, dtype=float)
        ic = i - i.mean()
        yc = y - y.mean(axis=1, keepdims=True)
        slope = yc @ ic / (ic @ ic)
        resid = yc - np.outer(slope, ic)
        v = np.mean(resid.var(axis=1, ddof=1))
        if v <= 0:
            continue
        lx.append(math.log(m))
        ly.append(math.log(v))
    return _fit("PENG", lx, ly, lambda s: s / 2.0)


# ---------------------------------------------------------------------------
# frequency-domain estimators


def periodogram(series) -> tuple[np.ndarray, np.ndarray]:
    """Periodogram |sum x_j e^{i j lam}|^2 / (2 pi n) at lam_k = 2 pi k / n, k = 1..n//2."""
    x = np.asarray(getattr(series, "counts", series), dtype=float)
    n = x.size
    k = np.arange(1, n // 2 + 1)
    spec = np.fft.rfft(x - x.mean())[1 : n // 2 + 1]
    return 2 * np.pi * k / n, np.abs(spec) ** 2 / (2 * np.pi * n)


def parseval_variance(freqs: np.ndarray, power: np.ndarray, n: int) -> float:
    """Population variance recovered from the one-sided periodogram.

    Frequencies below Nyquist stand for a conjugate pair; the Nyquist bin of
    an even-length series is counted once.
    """
    weights = np.full(power.size, 2.0)
    if n % 2 == 0 and power.size:
        weights[-1] = 1.0
    return float(np.sum(weights * power) * 2 * np.pi / n)


def _low_band(n: int, fraction: float, minimum: int) -> int:
    return min(n // 2, max(minimum, int(math.floor(fraction * (n // 2)))))


def hurst_per(series, fraction: float = 0.1, minimum: int = 10) -> HurstEstimate:
    """Log-periodogram regression over the lowest frequencies; slope = 1 - 2H."""
    x = _as_series(series, 64)
    lam, power = periodogram(x)
    k = _low_band(x.size, fraction, minimum)
    lam, power = lam[:k], power[:k]
    ok = power > 0
    return _fit("PER", np.log(lam[ok]), np.log(power[ok]), lambda s: (1.0 - s) / 2.0)


def hurst_box(series, boxes: int = 60, fraction: float = 0.1, minimum: int = 10) -> HurstEstimate:
    """Periodogram regression on box-averaged points equally spaced in log frequency."""
    x = _as_series(series, 64)
    lam, power = periodogram(x)
    k = _low_band(x.size, fraction, minimum)
    lam, power = lam[:k], power[:k]
    ok = power > 0
    ll, lp = np.log(lam[ok]), np.log(power[ok])
    edges = np.linspace(ll[0], ll[-1], boxes + 1)
    idx = np.clip(np.searchsorted(edges, ll, side="right") - 1, 0, boxes - 1)
    counts = np.bincount(idx, minlength=boxes)
    used = counts > 0
    bx = np.bincount(idx, weights=ll, minlength=boxes)[used] / counts[used]
    by = np.bincount(idx, weights=lp, minlength=boxes)[used] / counts[used]
    return _fit("BOX", bx, by, lambda s: (1.0 - s) / 2.0)


# ---------------------------------------------------------------------------
# wavelet estimator


def dwt_details(x: np.ndarray, min_coeffs: int = 1) -> list[np.ndarray]:
    """Periodic DWT with the 4-tap Daubechies filter; detail coefficients per scale.

    Odd-length approximations drop their last sample before the next level.
    """
    out = []
    a = np.asarray(x, dtype=float)
    while a.size // 2 >= max(min_coeffs, 2):
        if a.size % 2:
            a = a[:-1]
        n = a.size
        idx = (2 * np.arange(n // 2)[:, None] + np.arange(4)[None, :]) % n
        seg = a[idx]
        out.append(seg @ DB4_HIGHPASS)
        a = seg @ DB4_LOWPASS
    return out


def hurst_wave(series, min_coeffs: int = 32, min_scales: int = 4) -> HurstEstimate:
    """Wavelet energy regression: log2 E_j ~ (2H - 1) j.

    Scales with at least ``min_coeffs`` coefficients are used; at least the
    ``min_scales`` finest scales always enter so short series still give four
    regression points.
    """
    x = _as_series(series, 256)
    details = dwt_details(x)
    used = [j for j, d in enumerate(details, start=1) if d.size >= min_coeffs]
    if len(used) < min_scales:
        used = list(range(1, min(min_scales, len(details)) + 1))
    lx = [float(j) for j in used]
    ly = [math.log2(np.mean(details[j - 1] ** 2)) for j in used]
    return _fit("WAVE", lx, ly, lambda s: (s + 1.0) / 2.0)


ESTIMATORS: dict[str, Callable[..., HurstEstimate]] = {
    "RS": hurst_rs,
    "AGV": hurst_agv,
    "PENG": hurst_peng,
    "PER": hurst_per,
    "BOX": hurst_box,
    "WAVE": hurst_wave,
}


def _run_all(x: np.ndarray) -> tuple[dict, dict]:
    est, err = {}, {}
    for name in METHODS:
        try:
            est[name] = ESTIMATORS[name](x)
        except AnalysisError as exc:
            err[name] = f"{type(exc).__name__}: {exc}"
    return est, err


def h_bar_of(x) -> Optional[float]:
    """Unweighted mean of the available estimator values (None if none ran)."""
    est, _ = _run_all(np.asarray(x, dtype=float))
    if not est:
        return None
    return float(np.mean([e.h_value for e in est.values()]))


# ---------------------------------------------------------------------------
# spurious-LRD screen


def noise_scale(x: np.ndarray) -> float:
    """Robust noise SD from first differences (MAD / 0.6745 / sqrt 2)."""
    dx = np.diff(x)
    mad = np.median(np.abs(dx - np.median(dx)))
    s = mad / (0.6744897501960817 * math.sqrt(2.0))
    if s <= 0:
        s = dx.std() / math.sqrt(2.0)
    return float(s)


def cusum_binary_segmentation(x, penalty_factor: float = 2.0, min_segment: int = 32) -> list[int]:
    """Mean change points by binary segmentation of the standardized CUSUM.

    A split is accepted while the maximal statistic exceeds
    ``penalty_factor * sigma * sqrt(2 log n)``.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    sigma = noise_scale(x)
    if sigma <= 0:
        return []
    threshold = penalty_factor * sigma * math.sqrt(2.0 * math.log(n))
    found: list[int] = []
    stack = [(0, n)]
    while stack:
        s, e = stack.pop()
        m = e - s
        if m < 2 * min_segment:
            continue
        seg = x[s:e]
        csum = np.cumsum(seg)
        k = np.arange(min_segment, m - min_segment + 1)
        stat = np.abs(csum[k - 1] - k / m * csum[-1]) * np.sqrt(m / (k * (m - k)))
        j = int(np.argmax(stat))
        if stat[j] > threshold:
            cp = s + int(k[j])
            found.append(cp)
            stack.append((s, cp))
            stack.append((cp, e))
    return sorted(found)


def remove_segment_means(x, changepoints: Sequence[int]) -> np.ndarray:
    x = np.asarray(x, dtype=float).copy()
    edges = [0, *changepoints, x.size]
    for a, b in zip(edges[:-1], edges[1:]):
        x[a:b] -= x[a:b].mean()
    return x


def detrend_poly(x, degree: int = 2) -> tuple[np.ndarray, float]:
    """Residuals of a polynomial trend in t/n and the F-test p-value of that trend."""
    x = np.asarray(x, dtype=float)
    n = x.size
    t = np.arange(n) / n
    design = np.vander(t, degree + 1)
    coef, *_ = np.linalg.lstsq(design, x, rcond=None)
    resid = x - design @ coef
    rss1 = resid @ resid
    rss0 = np.sum((x - x.mean()) ** 2)
    dof = n - degree - 1
    if rss1 <= 0:
        return resid, 0.0
    fstat = ((rss0 - rss1) / degree) / (rss1 / dof)
    return resid, float(sps.f.sf(fstat, degree, dof))


def spurious_screen(series, penalty_factor: float = 2.0, min_segment: int = 32,
                    trend_degree: int = 2, trend_alpha: float = 0.01,
                    h_threshold: float = LRD_BAND[0]) -> SpuriousScreen:
    """Check whether apparent LRD is explained by mean shifts or a smooth trend.

    Each detected non-stationarity is removed and the average Hurst value is
    re-estimated; the series is spurious when a removal drops it below
    ``h_threshold``.
    """
    x = np.asarray(getattr(series, "counts", series), dtype=float)
    cps = cusum_binary_segmentation(x, penalty_factor, min_segment)
    h_cp = h_bar_of(remove_segment_means(x, cps)) if cps else None
    resid, pval = detrend_poly(x, trend_degree)
    trend = pval < trend_alpha
    h_tr = h_bar_of(resid) if trend else None
    spurious = bool((cps and h_cp is not None and h_cp < h_threshold)
                    or (trend and h_tr is not None and h_tr < h_threshold))
    return SpuriousScreen(bool(cps), cps, bool(trend), h_cp, h_tr, spurious)


def hurst_all(series, band: tuple[float, float] = LRD_BAND,
              screen: Callable[..., SpuriousScreen] = spurious_screen) -> HurstReport:
    x = np.asarray(getattr(series, "counts", series), dtype=float)
    est, err = _run_all(x)
    if not est:
        raise AnalysisError("no Hurst estimator could run: " + "; ".join(err.values()))
    h_bar = float(np.mean([e.h_value for e in est.values()]))
    candidate = band[0] <= h_bar <= band[1]
    scr = screen(x) if candidate else None
    return HurstReport(est, err, h_bar, candidate, scr, degraded=len(est) < 4)
