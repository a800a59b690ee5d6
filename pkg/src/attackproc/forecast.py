"""Gray-box attack-rate prediction with ARMA and FARIMA families.

Models are fitted by conditional sum of squares (CSS): the series is
demeaned, fractionally differenced (FARIMA only) and passed through the
inverse ARMA filter with zero pre-sample values, giving one innovation per
observation.  The fitter is a Levenberg-Marquardt loop with analytic
Jacobians that rejects any step leaving the causal/invertible region.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import fft as sp_fft
from scipy.signal import lfilter

from ._frac import frac_weights, fracdiff
from .errors import AllDiverged, AnalysisError, NonConvergence, TooShort, ZeroDenominator, ZeroVariance

__all__ = [
    "ArmaModel", "FarimaModel", "StepRecord", "ForecastRun", "AccuracyReport",
    "fracdiff", "frac_weights", "css_residuals", "fit_arma", "fit_farima",
    "select_best", "forecast_h", "rolling_evaluate", "accuracy", "DEFAULT_GRID",
]

FAMILIES = ("ARMA", "FARIMA")
DEFAULT_GRID = tuple((p, q) for p in range(5) for q in range(5))
D_BOUND = 0.49
D_LOWER = -0.49
AR_MARGIN = 0.9999
ROOT_MARGIN = 0.9999
MAX_EVALS = 500
RESTARTS = 3
# selection skips fits whose MA part sits on the invertibility boundary or
# shares a near-common factor with the AR part
MA_BOUNDARY = 0.98
REDUNDANCY_TOL = 0.05


@dataclass
class ArmaModel:
    p: int
    q: int
    phi: np.ndarray
    theta: np.ndarray
    mean: float
    sigma2: float
    aic: float
    converged: bool
    n: int = 0
    evals: int = 0

    family = "ARMA"

    @property
    def d(self) -> float:
        return 0.0

    @property
    def n_params(self) -> int:
        return self.p + self.q + 1

    def params(self) -> np.ndarray:
        return np.concatenate([self.phi, self.theta])

    def to_dict(self) -> dict:
        return {
            "family": self.family, "p": self.p, "q": self.q, "d": self.d,
            "phi": [float(v) for v in self.phi], "theta": [float(v) for v in self.theta],
            "mean": self.mean, "sigma2": self.sigma2, "aic": self.aic,
            "converged": self.converged,
        }


@dataclass
class FarimaModel(ArmaModel):
    d_value: float = 0.0

    family = "FARIMA"

    @property
    def d(self) -> float:
        return self.d_value

    @property
    def n_params(self) -> int:
        return self.p + self.q + 2

    def params(self) -> np.ndarray:
        return np.concatenate([[self.d_value], self.phi, self.theta])


@dataclass
class AccuracyReport:
    pmad: float
    pmad_prime: float

    @property
    def oa(self) -> float:
        return 1.0 - self.pmad

    @property
    def ua(self) -> float:
        return 1.0 - self.pmad_prime

    def to_dict(self) -> dict:
        return {"pmad": self.pmad, "pmad_prime": self.pmad_prime, "oa": self.oa, "ua": self.ua}


@dataclass
class StepRecord:
    t: int  # number of observations used for fitting (1-based index of the last one)
    p: int
    q: int
    d: float
    predicted: float
    observed: float

    @property
    def error(self) -> float:
        return self.observed - self.predicted


@dataclass
class ForecastRun:
    family: str
    h: int
    start_fraction: float
    steps: list = field(default_factory=list)
    skipped: list = field(default_factory=list)  # (t, reason)
    metrics: Optional[AccuracyReport] = None

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "h": self.h,
            "start_fraction": self.start_fraction,
            "n_steps": len(self.steps),
            "skipped": [{"t": t, "reason": r} for t, r in self.skipped],
            "metrics": self.metrics.to_dict() if self.metrics else None,
        }

    def step_rows(self) -> list[dict]:
        return [
            {"t": s.t, "p": s.p, "q": s.q, "d": s.d, "Y": s.predicted, "X": s.observed, "e": s.error}
            for s in self.steps
        ]


# ---------------------------------------------------------------------------
# polynomial helpers


def _pacf_from_poly(coef: np.ndarray) -> np.ndarray:
    """Partial autocorrelations of the AR polynomial 1 - sum coef_j x^j (step-down recursion)."""
    a = np.asarray(coef, dtype=float).copy()
    p = a.size
    r = np.empty(p)
    for k in range(p - 1, -1, -1):
        rk = a[k]
        r[k] = rk
        if k == 0:
            break
        if abs(rk) >= 1.0:
            return np.full(p, np.inf)
        a = (a[:k] + rk * a[:k][::-1]) / (1.0 - rk * rk)
    return r


def is_stationary(coef: Sequence[float], margin: float = ROOT_MARGIN) -> bool:
    """True when all roots of 1 - sum coef_j x^j lie outside the unit circle."""
    coef = np.asarray(coef, dtype=float)
    if coef.size == 0:
        return True
    if not np.all(np.isfinite(coef)):
        return False
    return bool(np.all(np.abs(_pacf_from_poly(coef)) < margin))


def is_invertible(theta: Sequence[float], margin: float = ROOT_MARGIN) -> bool:
    """True when all roots of 1 + sum theta_j x^j lie outside the unit circle."""
    return is_stationary(-np.asarray(theta, dtype=float), margin)


def _feasible(d: float, phi: np.ndarray, theta: np.ndarray) -> bool:
    return D_LOWER <= d <= D_BOUND and is_stationary(phi, AR_MARGIN) and is_invertible(theta)


# ---------------------------------------------------------------------------
# CSS objective


def css_residuals(z, phi=(), theta=(), d: float = 0.0) -> np.ndarray:
    """Innovations of a zero-mean series under phi(B)(1-B)^d z = theta(B) e."""
    z = np.asarray(z, dtype=float)
    w = fracdiff(z, d) if d != 0.0 else z
    a = np.r_[1.0, -np.asarray(phi, dtype=float)]
    c = np.r_[1.0, np.asarray(theta, dtype=float)]
    return lfilter(a, c, w)


def _log_weights(n: int) -> np.ndarray:
    """Power series of log(1 - B) = -sum B^k / k, truncated to n terms."""
    out = np.zeros(n)
    out[1:] = -1.0 / np.arange(1, n)
    return out


def _lead1(coef, sign: float = 1.0) -> np.ndarray:
    """Polynomial coefficients [1, sign * coef...]."""
    out = np.empty(len(coef) + 1)
    out[0] = 1.0
    out[1:] = coef
    if sign != 1.0:
        out[1:] *= sign
    return out


def _shift(v: np.ndarray, j: int) -> np.ndarray:
    out = np.zeros_like(v)
    out[j:] = v[: v.size - j]
    return out


class _CssProblem:
    """CSS residuals and Jacobian for one (p, q) order on a fixed series.

    FARIMA evaluations reuse the transform of the series: each residual
    costs one weight transform and one inverse transform.
    """

    def __init__(self, z: np.ndarray, p: int, q: int, fractional: bool):
        self.z = z
        self.p, self.q = p, q
        self.fractional = fractional
        self.k = p + q + int(fractional)
        self.evals = 0
        n = z.size
        if fractional:
            self._nfft = sp_fft.next_fast_len(2 * n - 1, real=True)
            self._zf = sp_fft.rfft(z, self._nfft)
            self._logf = sp_fft.rfft(_log_weights(n), self._nfft)
        self._cache_d = None

    def split(self, x: np.ndarray):
        i = int(self.fractional)
        d = float(x[0]) if self.fractional else 0.0
        return d, x[i : i + self.p], x[i + self.p :]

    def _filtered(self, d: float) -> tuple[np.ndarray, np.ndarray]:
        if self._cache_d is not None and self._cache_d[0] == d:
            return self._cache_d[1], self._cache_d[2]
        n = self.z.size
        prod = self._zf * sp_fft.rfft(frac_weights(d, n), self._nfft)
        w = sp_fft.irfft(prod, self._nfft)[:n]
        self._cache_d = (d, w, prod)
        return w, prod

    def residuals(self, x):
        d, phi, theta = self.split(x)
        self.evals += 1
        w = self._filtered(d)[0] if self.fractional else self.z
        return lfilter(_lead1(phi, -1.0), _lead1(theta), w)

    def jacobian(self, x, e):
        d, phi, theta = self.split(x)
        n = self.z.size
        c = _lead1(theta)
        cols = []
        if self.fractional:
            w, prod = self._filtered(d)
            dw = sp_fft.irfft(prod * self._logf, self._nfft)[:n]
            cols.append(lfilter(_lead1(phi, -1.0), c, dw))
        else:
            w = self.z
        if self.p:
            u = lfilter([1.0], c, w)
            cols.extend(-_shift(u, j) for j in range(1, self.p + 1))
        if self.q:
            v = lfilter([1.0], c, e)
            cols.extend(-_shift(v, j) for j in range(1, self.q + 1))
        self.evals += 1
        return np.column_stack(cols)

    def feasible(self, x) -> bool:
        d, phi, theta = self.split(x)
        return _feasible(d, phi, theta)


def _levenberg_marquardt(prob: _CssProblem, x0: np.ndarray, max_evals: int = MAX_EVALS,
                         ftol: float = 1e-8, xtol: float = 1e-7):
    """Damped Gauss-Newton on the CSS; returns (x, rss, converged)."""
    x = np.asarray(x0, dtype=float).copy()
    if prob.k == 0:
        e = prob.residuals(x)
        return x, float(e @ e), True
    start = prob.evals
    e = prob.residuals(x)
    rss = float(e @ e)
    if not np.isfinite(rss):
        return x, rss, False
    lam = 1e-3
    jac = prob.jacobian(x, e)
    while prob.evals - start < max_evals:
        g = jac.T @ e
        a = jac.T @ jac
        diag = np.diag(a).copy()
        diag[diag <= 0] = 1e-12
        try:
            step = np.linalg.solve(a + lam * np.diag(diag), -g)
        except np.linalg.LinAlgError:
            lam *= 10.0
            if lam > 1e12:
                return x, rss, True
            continue
        cand = x + step
        if prob.feasible(cand):
            e_new = prob.residuals(cand)
            rss_new = float(e_new @ e_new)
        else:
            rss_new = math.inf
        if np.isfinite(rss_new) and rss_new < rss:
            small_f = (rss - rss_new) <= ftol * rss
            small_x = np.max(np.abs(step)) <= xtol * (1.0 + np.max(np.abs(x)))
            x, e, rss = cand, e_new, rss_new
            if small_f or small_x:
                return x, rss, True
            lam = max(lam / 10.0, 1e-12)
            jac = prob.jacobian(x, e)
        else:
            lam *= 10.0
            # no feasible descent direction left: a (possibly boundary) minimum
            if lam > 1e12:
                return x, rss, True
    return x, rss, False


# ---------------------------------------------------------------------------
# initial values


def _lagmat(v: np.ndarray, lags: int, start: int) -> np.ndarray:
    return np.column_stack([v[start - j : v.size - j] for j in range(1, lags + 1)])


def _shrink_feasible(d, phi, theta):
    for _ in range(60):
        if _feasible(d, phi, theta):
            return phi, theta
        phi, theta = phi * 0.9, theta * 0.9
    return np.zeros_like(phi), np.zeros_like(theta)


def hannan_rissanen(w: np.ndarray, p: int, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Two-stage regression starting values for (phi, theta) on a zero-mean series."""
    n = w.size
    if p + q == 0:
        return np.zeros(0), np.zeros(0)
    if q == 0:
        start = p
        X = _lagmat(w, p, start)
        coef, *_ = np.linalg.lstsq(X, w[start:], rcond=None)
        return coef, np.zeros(0)
    m = int(min(max(p + q + 2, round(10 * math.log10(n))), n // 4))
    X = _lagmat(w, m, m)
    ar_long, *_ = np.linalg.lstsq(X, w[m:], rcond=None)
    ehat = np.zeros(n)
    ehat[m:] = w[m:] - X @ ar_long
    start = m + q
    cols = []
    if p:
        cols.append(_lagmat(w, p, start))
    cols.append(_lagmat(ehat, q, start))
    coef, *_ = np.linalg.lstsq(np.column_stack(cols), w[start:], rcond=None)
    return coef[:p], coef[p:]


def _check_input(series, p: int, q: int) -> np.ndarray:
    x = np.asarray(getattr(series, "counts", series), dtype=float)
    need = 30 + 5 * (p + q)
    if x.size < need:
        raise TooShort(f"order ({p},{q}) needs n >= {need}, got {x.size}")
    if np.ptp(x) == 0:
        raise ZeroVariance("cannot fit a constant series")
    return x


def _finish(cls, prob: _CssProblem, x: np.ndarray, rss: float, converged: bool,
            mean: float, n: int, **extra):
    d, phi, theta = prob.split(x)
    sigma2 = rss / n
    k = prob.p + prob.q + 1 + int(prob.fractional)
    aic = n * math.log(sigma2) + 2 * k if sigma2 > 0 else -math.inf
    ok = converged and _feasible(d, phi, theta) and np.isfinite(aic)
    kwargs = dict(p=prob.p, q=prob.q, phi=np.array(phi), theta=np.array(theta), mean=mean,
                  sigma2=sigma2, aic=aic, converged=bool(ok), n=n, evals=prob.evals)
    if prob.fractional:
        kwargs["d_value"] = float(d)
    return cls(**kwargs)


def _run_starts(prob: _CssProblem, starts: Iterable[np.ndarray], exhaustive: bool):
    best = None
    for i, x0 in enumerate(starts):
        if i >= RESTARTS:
            break
        if not prob.feasible(x0):
            continue
        x, rss, conv = _levenberg_marquardt(prob, x0)
        if best is None or (conv and not best[2]) or (conv == best[2] and rss < best[1]):
            best = (x, rss, conv)
        if conv and not exhaustive:
            break
    return best


def fit_arma(series, p: int, q: int, warm: Optional[np.ndarray] = None,
             seed: int = 0) -> ArmaModel:
    """CSS fit of a demeaned ARMA(p, q).

    Returns a model with ``converged=False`` when every start exhausts its
    evaluation budget; callers decide whether that is fatal.
    """
    x = _check_input(series, p, q)
    mean = float(x.mean())
    z = x - mean
    prob = _CssProblem(z, p, q, fractional=False)

    def starts():
        if warm is not None and len(warm) == p + q:
            yield np.asarray(warm, dtype=float)
        phi0, th0 = _shrink_feasible(0.0, *hannan_rissanen(z, p, q))
        yield np.r_[phi0, th0]
        rng = np.random.default_rng(seed)
        yield np.r_[phi0, th0] * 0.5 + rng.normal(0, 0.05, p + q)

    best = _run_starts(prob, starts(), exhaustive=False)
    if best is None:
        best = (np.zeros(p + q), float(z @ z), False)
    return _finish(ArmaModel, prob, best[0], best[1], best[2], mean, x.size)


def _rough_d(z: np.ndarray) -> float:
    """Log-periodogram starting value for d, clipped inside the admissible band."""
    n = z.size
    m = max(4, int(math.sqrt(n)))
    m = min(m, n // 2)
    lam = 2 * np.pi * np.arange(1, m + 1) / n
    power = np.abs(np.fft.rfft(z)[1 : m + 1]) ** 2
    ok = power > 0
    if ok.sum() < 3:
        return 0.0
    slope = np.polyfit(np.log(lam[ok]), np.log(power[ok]), 1)[0]
    return float(np.clip(-slope / 2.0, -0.4, 0.4))


def fit_farima(series, p: int, q: int, warm: Optional[np.ndarray] = None,
               seed: int = 0) -> FarimaModel:
    """CSS fit of FARIMA(p, d, q) with d estimated jointly in [-0.49, 0.49]."""
    x = _check_input(series, p, q)
    mean = float(x.mean())
    z = x - mean
    prob = _CssProblem(z, p, q, fractional=True)

    def starts():
        if warm is not None and len(warm) == p + q + 1:
            yield np.asarray(warm, dtype=float)
        d0 = _rough_d(z)
        phi0, th0 = _shrink_feasible(d0, *hannan_rissanen(fracdiff(z, d0), p, q))
        yield np.r_[d0, phi0, th0]
        phi1, th1 = _shrink_feasible(0.0, *hannan_rissanen(z, p, q))
        yield np.r_[0.0, phi1, th1]

    best = _run_starts(prob, starts(), exhaustive=warm is None)
    if best is None:
        best = (np.zeros(p + q + 1), float(z @ z), False)
    return _finish(FarimaModel, prob, best[0], best[1], best[2], mean, x.size)


FITTERS = {"ARMA": fit_arma, "FARIMA": fit_farima}


def inverse_roots(coef: Sequence[float], sign: float) -> np.ndarray:
    """Inverse roots of 1 + sign * sum coef_j x^j."""
    coef = np.asarray(coef, dtype=float)
    if coef.size == 0:
        return np.zeros(0, dtype=complex)
    return np.roots(np.concatenate([[1.0], sign * coef]))


def is_admissible(model: ArmaModel, boundary: float = MA_BOUNDARY,
                  tol: float = REDUNDANCY_TOL) -> bool:
    """False for CSS fits that should not compete in order selection.

    With zero pre-sample values an MA root on the unit circle can soak up the
    start-up transient, and a cancelling AR/MA root pair fits noise without
    changing the model.  Both inflate the likelihood of overfit orders.
    """
    ma = inverse_roots(model.theta, 1.0)
    if ma.size and np.abs(ma).max() > boundary:
        return False
    if model.p and model.q:
        ar = inverse_roots(model.phi, -1.0)
        if np.min(np.abs(ar[:, None] - ma[None, :])) < tol:
            return False
    return True


def _rank(model: ArmaModel):
    return (model.aic, model.p + model.q, model.p)


def select_best(series, family: str, grid: Sequence[tuple[int, int]] = DEFAULT_GRID,
                warm: Optional[dict] = None, seed: int = 0) -> ArmaModel:
    """Minimum-AIC converged model over the (p, q) grid of one family.

    Candidates the series is too short for, and fits failing
    ``is_admissible``, are skipped.  ``warm`` maps
    (p, q) to parameter vectors and is updated in place, which makes
    consecutive rolling fits cheap.
    """
    if family not in FITTERS:
        raise ValueError(f"unknown family {family!r}")
    fitter = FITTERS[family]
    best = None
    for p, q in grid:
        try:
            model = fitter(series, p, q, warm=None if warm is None else warm.get((p, q)), seed=seed)
        except TooShort:
            continue
        if warm is not None:
            warm[(p, q)] = model.params() if model.converged else None
        if not model.converged or not is_admissible(model):
            continue
        if best is None or _rank(model) < _rank(best):
            best = model
    if best is None:
        raise AllDiverged(f"no {family} candidate converged")
    return best


# ---------------------------------------------------------------------------
# forecasting


def ar_infinity(model: ArmaModel, length: int) -> np.ndarray:
    """Coefficients c_0..c_{L-1} of phi(B)(1-B)^d / theta(B); c_0 = 1."""
    lead = np.convolve(np.r_[1.0, -model.phi], frac_weights(model.d, length))[:length]
    impulse = np.zeros(length)
    impulse[0] = 1.0
    return lfilter(lead, np.r_[1.0, model.theta], impulse)


def forecast_path(model: ArmaModel, history, h: int) -> np.ndarray:
    """Unfloored forecasts for steps 1..h after the end of ``history``."""
    x = np.asarray(getattr(history, "counts", history), dtype=float)
    z = x - model.mean
    out = np.empty(h)
    if isinstance(model, FarimaModel):
        length = min(z.size, 1000) + 1
        c = ar_infinity(model, length)
        buf = list(z[-(length - 1):]) if length > 1 else []
        for k in range(h):
            past = np.asarray(buf[::-1][: length - 1])
            nxt = -float(c[1 : past.size + 1] @ past)
            out[k] = nxt
            buf.append(nxt)
        return out + model.mean
    e = css_residuals(z, model.phi, model.theta)
    zs = list(z)
    es = list(e)
    for k in range(h):
        nxt = sum(model.phi[i] * zs[-1 - i] for i in range(model.p) if i < len(zs))
        nxt += sum(model.theta[j] * es[-1 - j] for j in range(model.q) if j < len(es))
        out[k] = nxt
        zs.append(nxt)
        es.append(0.0)
    return out + model.mean


def forecast_h(model: ArmaModel, history, h: int) -> float:
    """Predicted attack rate h steps after the end of ``history``, floored at zero."""
    if h < 1:
        raise ValueError("h must be >= 1")
    return max(0.0, float(forecast_path(model, history, h)[-1]))


# ---------------------------------------------------------------------------
# evaluation


def accuracy(observed, predicted) -> AccuracyReport:
    x = np.asarray(observed, dtype=float)
    y = np.asarray(predicted, dtype=float)
    if x.size != y.size or x.size < 1:
        raise ValueError("observed and predicted must have equal, nonzero length")
    total = x.sum()
    if total == 0:
        raise ZeroDenominator("sum of observed values is zero")
    e = x - y
    pmad = float(np.abs(e).sum() / total)
    under = e > 0
    if under.any():
        denom = x[under].sum()
        if denom == 0:
            raise ZeroDenominator("observed values at underestimated steps sum to zero")
        pmad_prime = float(e[under].sum() / denom)
    else:
        pmad_prime = 0.0
    return AccuracyReport(pmad, pmad_prime)


def _constant_model(family: str, mean: float, n: int) -> ArmaModel:
    empty = np.zeros(0)
    if family == "FARIMA":
        return FarimaModel(0, 0, empty, empty, mean, 0.0, -math.inf, True, n, 0, d_value=0.0)
    return ArmaModel(0, 0, empty, empty, mean, 0.0, -math.inf, True, n, 0)


def rolling_evaluate(series, family: str, h: int = 1, p_fraction: float = 0.5,
                     grid: Sequence[tuple[int, int]] = DEFAULT_GRID,
                     last_k: Optional[int] = None, min_train: int = 100,
                     seed: int = 0) -> ForecastRun:
    """Refit-and-predict loop over t = floor(n p) .. n - h.

    At each step the best model on X_1..X_t predicts X_{t+h}.  ``last_k``
    keeps only steps whose target lies in the final ``last_k`` observations.
    A constant training prefix is predicted by its value.
    """
    x = np.asarray(getattr(series, "counts", series), dtype=float)
    n = x.size
    t0 = int(math.floor(n * p_fraction))
    if t0 < min_train:
        raise TooShort(f"training prefix {t0} below the floor of {min_train}")
    if last_k is not None:
        t0 = max(t0, n - last_k - h + 1)
    run = ForecastRun(family, h, p_fraction)
    warm: dict = {}
    for t in range(t0, n - h + 1):
        train = x[:t]
        try:
            if np.ptp(train) == 0:
                model = _constant_model(family, float(train[0]), t)
            else:
                model = select_best(train, family, grid, warm=warm, seed=seed)
        except AllDiverged as exc:
            run.skipped.append((t, str(exc)))
            continue
        y = forecast_h(model, train, h)
        run.steps.append(StepRecord(t, model.p, model.q, model.d, y, float(x[t + h - 1])))
    if not run.steps:
        raise AllDiverged("every rolling step failed to fit")
    run.metrics = accuracy([s.observed for s in run.steps], [s.predicted for s in run.steps])
    return run
