import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from attackproc.errors import EmptyInput, ZeroMean, ZeroVariance
from attackproc.stats import acf, dispersion_hint, quartiles, summarize
from attackproc.synth import make_rng


def test_summarize_hand_example():
    s = summarize([1, 2, 3, 4, 5])
    assert (s.min, s.mean, s.median, s.variance, s.max) == (1, 3, 3, 2.5, 5)


def test_summarize_single_value():
    s = summarize([7])
    assert s.min == s.mean == s.median == s.max == 7
    assert s.variance == 0 and not s.variance_defined


def test_summarize_constant_and_even_median():
    assert summarize([2, 2, 2, 2]).variance == 0
    assert summarize([1, 2, 3, 10]).median == 2.5


def test_summarize_empty():
    with pytest.raises(EmptyInput):
        summarize([])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(-1000, 1000), min_size=1, max_size=30), st.randoms())
def test_summarize_permutation_invariant(xs, rnd):
    ys = list(xs)
    rnd.shuffle(ys)
    a, b = summarize(xs), summarize(ys)
    assert a.min == b.min and a.max == b.max and a.median == b.median
    assert a.mean == pytest.approx(b.mean) and a.variance == pytest.approx(b.variance)
    assert a.min <= a.median <= a.max and a.variance >= 0


def test_acf_hand_value():
    # deviations -1.5,-.5,.5,1.5: lag-1 products sum 1.25 over total 5
    assert acf([1, 2, 3, 4], 1).rho[0] == pytest.approx(0.25)


def test_acf_constant():
    with pytest.raises(ZeroVariance):
        acf([3, 3, 3, 3, 3], 2)


def test_acf_white_noise():
    x = make_rng(11).standard_normal(10000)
    assert abs(acf(x, 1).rho[0]) < 0.05


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=12, max_size=50), st.floats(0.1, 50), st.floats(-100, 100))
def test_acf_affine_invariant(xs, a, b):
    x = np.asarray(xs)
    if np.ptp(x) < 1e-3:
        return
    r1 = acf(x, 5).rho
    r2 = acf(a * x + b, 5).rho
    assert np.allclose(r1, r2, atol=1e-9)
    assert (np.abs(r1) <= 1).all()


def test_dispersion_poisson():
    x = make_rng(3).poisson(20, 5000)
    ratio, flag = dispersion_hint(x)
    assert ratio == pytest.approx(1, abs=0.1) and not flag


def test_dispersion_overdispersed():
    x = make_rng(4).negative_binomial(2, 2 / 12, 5000)  # mean 10, variance 60
    ratio, flag = dispersion_hint(x)
    assert ratio > 3.5 and flag


def test_dispersion_constant_and_zero():
    assert dispersion_hint([4, 4, 4]) == (0.0, False)
    with pytest.raises(ZeroMean):
        dispersion_hint([0, 0, 0])


def test_quartiles():
    q = quartiles([1, 2, 3, 4, 5])
    assert q == {"min": 1, "q1": 2, "median": 3, "q3": 4, "max": 5}
