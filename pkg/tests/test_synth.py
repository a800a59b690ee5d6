import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from attackproc._frac import frac_weights, fracdiff
from attackproc.synth import (
    GeneratorSpec,
    ar1,
    farima0,
    fgn,
    fgn_autocovariance,
    generate,
    gpd_sample,
    make_rng,
)


def test_frac_weights_hand():
    # (1-B)^0.5 = 1 - 0.5B - 0.125B^2 - 0.0625B^3
    assert frac_weights(0.5, 4) == pytest.approx([1, -0.5, -0.125, -0.0625])
    assert frac_weights(1.0, 4) == pytest.approx([1, -1, 0, 0])


def test_fracdiff_integer_order_is_differencing():
    x = make_rng(0).standard_normal(100)
    assert np.allclose(fracdiff(x, 1.0)[1:], np.diff(x))
    assert np.allclose(fracdiff(x, 0.0), x)


@settings(max_examples=100, deadline=None)
@given(st.floats(-0.49, 0.49), st.integers(0, 10_000), st.sampled_from([10, 63, 64, 500]))
def test_fracdiff_round_trip(d, seed, n):
    x = make_rng(seed).standard_normal(n)
    assert np.max(np.abs(fracdiff(fracdiff(x, d), -d) - x)) <= 1e-8


def test_fgn_autocovariance_h_half_is_white():
    assert fgn_autocovariance(0.5, np.arange(5)) == pytest.approx([1, 0, 0, 0, 0], abs=1e-12)


def test_fgn_lag1_correlation():
    H = 0.8
    rho = 0.5 * (2 ** (2 * H) - 2)
    xs = [fgn(4096, H, make_rng(s)) for s in range(20)]
    est = np.mean([np.corrcoef(x[:-1], x[1:])[0, 1] for x in xs])
    assert est == pytest.approx(rho, abs=0.03)
    assert np.mean([x.var() for x in xs]) == pytest.approx(1.0, abs=0.15)


def test_ar1_moments():
    x = ar1(20000, 0.6, make_rng(1))
    assert np.corrcoef(x[:-1], x[1:])[0, 1] == pytest.approx(0.6, abs=0.03)
    assert x.var() == pytest.approx(1 / (1 - 0.36), rel=0.1)


def test_farima_whitens():
    x = farima0(5000, 0.3, make_rng(2))
    e = fracdiff(x - x.mean(), 0.3)[200:]
    assert abs(np.corrcoef(e[:-1], e[1:])[0, 1]) < 0.05


def test_gpd_sample_survival():
    y = gpd_sample(50000, 0.5, 1.0, make_rng(3))
    assert (y >= 0).all()
    assert np.mean(y > 2.0) == pytest.approx((1 + 0.5 * 2) ** -2, abs=0.01)


def test_generate_deterministic_and_serializable():
    base = GeneratorSpec("FGN", 512, seed=4, H=0.7)
    spec = GeneratorSpec("LEVEL_SHIFT", 512, seed=4, base=base, shift_sigmas=5.0)
    assert np.array_equal(generate(spec), generate(GeneratorSpec.from_dict(spec.to_dict())))
    x = generate(spec)
    b = generate(base)
    assert np.allclose(x[256:] - b[256:], 5 * b.std(ddof=1)) and np.array_equal(x[:256], b[:256])


def test_trend_adds_ramp():
    base = GeneratorSpec("WHITE_NOISE", 100, seed=1)
    b = generate(base)
    x = generate(GeneratorSpec("TREND", 100, base=base, slope=2.0))
    assert np.allclose(x - b, 2.0 * b.std(ddof=1) * np.arange(100) / 100)


def test_poisson_arrivals_increasing():
    t = generate(GeneratorSpec("POISSON_PROCESS", 1000, seed=2, lam=4.0))
    assert (np.diff(t) > 0).all() and t.size == 1000


@pytest.mark.parametrize("kw", [
    dict(kind="NOPE", n=10), dict(kind="FGN", n=10, H=1.0), dict(kind="FARIMA0", n=10, d=0.5),
    dict(kind="AR1", n=10, phi=1.0), dict(kind="LEVEL_SHIFT", n=10), dict(kind="WHITE_NOISE", n=0),
])
def test_spec_validation(kw):
    with pytest.raises(ValueError):
        GeneratorSpec(**kw)


def test_white_noise_golden():
    # frozen once from PCG64(7); any change here breaks cross-run reproducibility
    x = generate(GeneratorSpec("WHITE_NOISE", 4, seed=7))
    assert x.tolist() == [0.0012301533574825742, 0.2987455375084699, -0.2741378553622176, -0.8905918387572742]


def test_fgn_autocovariance_matches_over_seeds():
    n, H = 2048, 0.75
    lags = np.arange(1, 6)
    est = np.zeros(5)
    for s in range(20):
        x = fgn(n, H, make_rng(s))
        x = x - x.mean()
        est += np.array([x[:-k] @ x[k:] / n for k in lags]) / 20
    assert np.all(np.abs(est - fgn_autocovariance(H, lags)) <= 4 / np.sqrt(n))


def test_gpd_survival_at_deciles():
    n, xi, beta = 20000, 0.4, 2.0
    y = gpd_sample(n, xi, beta, make_rng(9))
    for q in np.arange(0.1, 1.0, 0.1):
        pt = np.quantile(y, q)
        s = (1 + xi * pt / beta) ** (-1 / xi)
        assert abs(np.mean(y > pt) - s) <= 3 * np.sqrt(s * (1 - s) / n)


def test_poisson_mean_gap():
    t = generate(GeneratorSpec("POISSON_PROCESS", 10000, seed=3, lam=2.0))
    assert np.diff(np.r_[0.0, t]).mean() == pytest.approx(0.5, abs=0.02)
