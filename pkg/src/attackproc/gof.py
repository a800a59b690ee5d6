"""Exponential goodness-of-fit testing of attack inter-arrival times.

If attacks formed a homogeneous Poisson process the gaps between them would
be i.i.d. exponential.  The rate is fitted by maximum likelihood and the fit
is judged by the Kolmogorov-Smirnov, Cramer-von Mises and Anderson-Darling
statistics against fixed critical values.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NonPositiveGap

# 5% critical values for the exponential with estimated rate; the KS value is
# on the sqrt(n)-scaled statistic and is far below the usual tables
DEFAULT_CRITICAL = {"ks": 0.01, "cm": 0.22, "ad": 1.13}


@dataclass(frozen=True)
class ExponentialFit:
    lambda_hat: float
    n: int

    def cdf(self, x):
        return -np.expm1(-self.lambda_hat * np.asarray(x, dtype=float))

    def ppf(self, u):
        return -np.log1p(-np.asarray(u, dtype=float)) / self.lambda_hat


@dataclass
class GofReport:
    fit: ExponentialFit
    ks: float
    cm: float
    ad: float
    critical: dict = field(default_factory=lambda: dict(DEFAULT_CRITICAL))

    @property
    def reject(self) -> dict:
        return {name: getattr(self, name) > cv for name, cv in self.critical.items()}

    def to_dict(self) -> dict:
        return {
            "lambda_hat": self.fit.lambda_hat,
            "n": self.fit.n,
            "ks": self.ks,
            "cm": self.cm,
            "ad": "inf" if math.isinf(self.ad) else self.ad,
            "critical": dict(self.critical),
            "reject": self.reject,
        }


@dataclass(frozen=True)
class QqData:
    theoretical: np.ndarray
    empirical: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["theoretical", "empirical"])
        for a, b in zip(self.theoretical, self.empirical):
            w.writerow([repr(float(a)), repr(float(b))])
        return buf.getvalue()


def _gaps(gaps) -> np.ndarray:
    return np.asarray(getattr(gaps, "gaps", gaps), dtype=float).ravel()


def fit_exponential(gaps) -> ExponentialFit:
    """Closed-form MLE of the exponential rate, n / sum(gaps)."""
    x = _gaps(gaps)
    if x.size < 2:
        raise ValueError("need at least two gaps")
    if (x <= 0).any():
        raise NonPositiveGap("inter-arrival gaps must be strictly positive")
    return ExponentialFit(float(x.size / x.sum()), int(x.size))


def _ecdf_terms(sample, cdf):
    x = np.sort(np.asarray(sample, dtype=float))
    if x.size == 0:
        raise ValueError("empty sample")
    return x, x.size, np.asarray(cdf(x), dtype=float)


def ks_statistic(sample, cdf: Callable) -> float:
    """sqrt(n) * sup |F_n - F|, checking both one-sided limits at every sample point.

    Left limits are evaluated just below each point, so a step-function
    ``cdf`` (such as the sample's own ECDF) is handled exactly.
    """
    x, n, u = _ecdf_terms(sample, cdf)
    right = np.searchsorted(x, x, side="right") / n
    left = np.searchsorted(x, x, side="left") / n
    u_left = np.asarray(cdf(np.nextafter(x, -np.inf)), dtype=float)
    d = max(np.max(np.abs(right - u)), np.max(np.abs(left - u_left)))
    return float(math.sqrt(n) * d)


def cm_statistic(sample, cdf: Callable) -> float:
    """n * integral (F_n - F)^2 dF via 1/(12n) + sum (u_(i) - (2i-1)/(2n))^2."""
    _, n, u = _ecdf_terms(sample, cdf)
    i = np.arange(1, n + 1)
    return float(1.0 / (12 * n) + np.sum((u - (2 * i - 1) / (2 * n)) ** 2))


def ad_statistic(sample, cdf: Callable) -> float:
    """Anderson-Darling A^2; +inf when a transformed point is exactly 0 or 1."""
    _, n, u = _ecdf_terms(sample, cdf)
    if (u <= 0).any() or (u >= 1).any():
        return math.inf
    i = np.arange(1, n + 1)
    s = np.sum((2 * i - 1) * (np.log(u) + np.log1p(-u[::-1])))
    return float(-n - s / n)


def poisson_test(gaps, critical: dict | None = None) -> GofReport:
    """Fit an exponential to the gaps and evaluate KS, CM and AD against it."""
    x = _gaps(gaps)
    fit = fit_exponential(x)
    crit = dict(DEFAULT_CRITICAL)
    if critical:
        unknown = set(critical) - set(crit)
        if unknown:
            raise ValueError(f"unknown critical values {sorted(unknown)}")
        crit.update(critical)
    return GofReport(fit, ks_statistic(x, fit.cdf), cm_statistic(x, fit.cdf), ad_statistic(x, fit.cdf), crit)


def qq_exponential(gaps, fit: ExponentialFit | None = None) -> QqData:
    """Exponential quantiles at (i - 0.5)/n paired with the sorted gaps."""
    x = np.sort(_gaps(gaps))
    if fit is None:
        fit = fit_exponential(x)
    n = x.size
    probs = (np.arange(1, n + 1) - 0.5) / n
    return QqData(fit.ppf(probs), x)
