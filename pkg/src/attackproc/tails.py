"""Peaks-over-threshold tail analysis with the generalized Pareto distribution."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import TooFewExceedances

XI_ZERO = 1e-6
REGIMES = ("FINITE_VARIANCE", "INFINITE_VARIANCE", "INFINITE_MEAN", "NOT_HEAVY")


@dataclass(frozen=True)
class GpdFit:
    threshold: float
    n_exceed: int
    xi: float
    beta: float
    se_xi: float
    converged: bool
    loglik: float = float("nan")

    def to_dict(self) -> dict:
        out = asdict(self)
        for k, v in out.items():
            if isinstance(v, float) and not math.isfinite(v):
                out[k] = None
        return out


@dataclass(frozen=True)
class TailClassification:
    heavy: bool
    regime: str

    def to_dict(self) -> dict:
        return asdict(self)


def gpd_survival(y, xi: float, beta: float) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if abs(xi) < XI_ZERO:
        return np.exp(-y / beta)
    base = np.maximum(1.0 + xi * y / beta, 0.0)
    with np.errstate(divide="ignore"):
        return base ** (-1.0 / xi)


def gpd_loglik(y, xi: float, beta: float) -> float:
    """GPD log-likelihood of exceedances ``y``; -inf outside the support."""
    y = np.asarray(y, dtype=float)
    if beta <= 0:
        return -math.inf
    if abs(xi) < XI_ZERO:
        return float(-y.size * math.log(beta) - y.sum() / beta)
    z = 1.0 + xi * y / beta
    if (z <= 0).any():
        return -math.inf
    return float(-y.size * math.log(beta) - (1.0 + 1.0 / xi) * np.log(z).sum())


def pwm_start(y) -> tuple[float, float]:
    """Probability-weighted-moment estimates (xi, beta) of Hosking and Wallis."""
    y = np.sort(np.asarray(y, dtype=float))
    n = y.size
    a0 = y.mean()
    a1 = np.sum((n - np.arange(1, n + 1)) / (n - 1) * y) / n
    denom = a0 - 2 * a1
    if denom <= 0:
        return 0.0, float(a0)
    xi = 2.0 - a0 / denom
    beta = 2.0 * a0 * a1 / denom
    return float(xi), float(max(beta, 1e-12 * a0))


def _hessian(f, x, rel=1e-4):
    k = x.size
    hs = rel * np.maximum(1.0, np.abs(x))
    out = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            ei = np.zeros(k)
            ej = np.zeros(k)
            ei[i] = hs[i]
            ej[j] = hs[j]
            v = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4 * hs[i] * hs[j])
            out[i, j] = out[j, i] = v
    return out


def fit_gpd(values, threshold_quantile: float = 0.90, min_exceed: int = 50,
            restarts: int = 5, seed: int = 0) -> GpdFit:
    """Maximum-likelihood GPD fit to the exceedances over an empirical quantile.

    Nelder-Mead runs on (xi, log beta) from the PWM estimate and from
    ``restarts - 1`` seeded perturbations of it; the best optimum wins.  The
    standard error of xi comes from the numerically differentiated observed
    information in (xi, beta).
    """
    x = np.asarray(getattr(values, "counts", values), dtype=float).ravel()
    u = float(np.quantile(x, threshold_quantile))
    y = x[x > u] - u
    if y.size < min_exceed:
        raise TooFewExceedances(f"{y.size} exceedances above u={u:g}, need {min_exceed}")

    def nll(theta):
        ll = gpd_loglik(y, theta[0], math.exp(theta[1]))
        return -ll if math.isfinite(ll) else 1e300

    xi0, beta0 = pwm_start(y)
    # a start outside the support (xi < 0 with max(y) beyond -beta/xi) is pulled back
    if xi0 < 0 and y.max() >= -beta0 / xi0:
        beta0 = -xi0 * y.max() * 1.01
    rng = np.random.default_rng(seed)
    starts = [np.array([xi0, math.log(beta0)])]
    for _ in range(restarts - 1):
        starts.append(starts[0] + rng.normal(0.0, [0.1, 0.1]))
    best = None
    for s in starts:
        res = minimize(nll, s, method="Nelder-Mead",
                       options={"xatol": 1e-9, "fatol": 1e-11, "maxiter": 4000, "maxfev": 8000})
        if best is None or res.fun < best.fun:
            best = res
    xi, beta = float(best.x[0]), float(math.exp(best.x[1]))
    loglik = gpd_loglik(y, xi, beta)
    converged = bool(best.success and math.isfinite(loglik))

    def nll_plain(theta):
        ll = gpd_loglik(y, theta[0], theta[1])
        return -ll if math.isfinite(ll) else math.nan

    se = math.nan
    try:
        cov = np.linalg.inv(_hessian(nll_plain, np.array([xi, beta])))
        if np.isfinite(cov[0, 0]) and cov[0, 0] > 0:
            se = float(math.sqrt(cov[0, 0]))
    except np.linalg.LinAlgError:
        pass
    return GpdFit(u, int(y.size), xi, beta, se, converged, loglik)


def regime_for(xi: float) -> str:
    if xi <= 0:
        return "NOT_HEAVY"
    if xi <= 0.5:
        return "FINITE_VARIANCE"
    if xi < 1.0:
        return "INFINITE_VARIANCE"
    return "INFINITE_MEAN"


def classify_tail(fit: GpdFit, z: float = 1.645) -> TailClassification:
    """Heavy when the fit converged and xi > 0 is significant one-sided at level z."""
    se = fit.se_xi if math.isfinite(fit.se_xi) else math.inf
    heavy = bool(fit.converged and fit.xi > 0 and fit.xi - z * se > 0)
    return TailClassification(heavy, regime_for(fit.xi) if heavy else "NOT_HEAVY")
