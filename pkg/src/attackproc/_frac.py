"""Fractional differencing primitives shared by forecasting and simulation."""
from __future__ import annotations

import numpy as np
from scipy.signal import fftconvolve


def frac_weights(d: float, n: int) -> np.ndarray:
    """Binomial weights of (1 - B)^d up to lag n - 1."""
    w = np.empty(n)
    w[0] = 1.0
    if n > 1:
        k = np.arange(1, n)
        w[1:] = np.cumprod((k - 1 - d) / k)
    return w


def fracdiff(x, d: float) -> np.ndarray:
    """Apply (1 - B)^d to ``x``, truncated at the start of the series."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if d == 0.0:
        return x.copy()
    w = frac_weights(d, n)
    if n < 64:
        return np.convolve(x, w)[:n]
    return fftconvolve(x, w)[:n]
