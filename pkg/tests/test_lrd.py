import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from attackproc.errors import TooShort, ZeroVariance
from attackproc.lrd import (
    DB4_HIGHPASS,
    DB4_LOWPASS,
    ESTIMATORS,
    METHODS,
    HurstReport,
    SpuriousScreen,
    block_sizes,
    cusum_binary_segmentation,
    detrend_poly,
    dwt_details,
    hurst_agv,
    hurst_all,
    hurst_box,
    hurst_per,
    hurst_rs,
    hurst_wave,
    parseval_variance,
    periodogram,
    spurious_screen,
    verdict_for,
)
from attackproc.synth import GeneratorSpec, ar1, farima0, fgn, generate, make_rng


def white(seed, n=8192):
    return make_rng(seed).standard_normal(n)


# -- oracles for the building blocks -------------------------------------------


def test_periodogram_matches_direct_sum():
    x = make_rng(1).standard_normal(37)
    lam, power = periodogram(x)
    xc = x - x.mean()
    j = np.arange(1, x.size + 1)
    direct = [abs(np.sum(xc * np.exp(1j * j * l))) ** 2 / (2 * math.pi * x.size) for l in lam]
    assert lam[0] == pytest.approx(2 * math.pi / 37) and lam.size == 18
    assert power == pytest.approx(direct, rel=1e-10)


@pytest.mark.parametrize("n", [255, 256, 1000, 1001])
def test_parseval(n):
    x = make_rng(n).standard_normal(n) * 3 + 1
    lam, power = periodogram(x)
    assert parseval_variance(lam, power, n) == pytest.approx(x.var(), rel=1e-6)


def test_db4_filter_values():
    assert DB4_LOWPASS == pytest.approx([0.4829629131, 0.8365163037, 0.2241438680, -0.1294095226])
    assert DB4_LOWPASS @ DB4_LOWPASS == pytest.approx(1.0)
    assert DB4_LOWPASS.sum() == pytest.approx(math.sqrt(2))
    assert DB4_HIGHPASS.sum() == pytest.approx(0, abs=1e-12)
    assert DB4_HIGHPASS @ np.arange(4.0) == pytest.approx(0, abs=1e-12)  # two vanishing moments


def test_dwt_annihilates_linear_and_preserves_energy():
    d = dwt_details(np.arange(64.0) * 0.5 + 3)
    # periodic wrap breaks the ramp only in the last coefficient of each level
    assert np.allclose(d[0][:-1], 0, atol=1e-10)
    x = make_rng(2).standard_normal(256)
    details = dwt_details(x)
    energy = sum(np.sum(c**2) for c in details)
    assert energy <= x @ x + 1e-9
    assert [c.size for c in details] == [128, 64, 32, 16, 8, 4, 2]


def test_rs_single_block_by_hand():
    x = np.array([1.0, 3.0, 2.0, 6.0, 4.0, 8.0, 5.0, 7.0] * 10)
    est = hurst_rs(x, sizes=[8, 16, 20, 40])
    b = x[:8]
    y = np.cumsum(b)
    dev = y - np.arange(1, 9) * b.mean()
    r = max(dev.max(), 0) - min(dev.min(), 0)
    assert math.exp(est.log_y[0]) == pytest.approx(r / b.std())


def test_block_sizes_grid():
    s = block_sizes(8192)
    assert s[0] == 8 and s[-1] == 2048 and len(s) == 20
    assert np.all(np.diff(s) > 0)


# -- error handling and bookkeeping --------------------------------------------


@pytest.mark.parametrize("method", METHODS)
def test_constant_series(method):
    with pytest.raises(ZeroVariance):
        ESTIMATORS[method](np.full(1024, 3.0))


def test_wave_needs_256():
    with pytest.raises(TooShort):
        hurst_wave(white(0, 255))
    assert hurst_wave(white(0, 256)).log_x == [1, 2, 3, 4]


def test_estimate_bookkeeping():
    e = hurst_per(white(3))
    assert e.h_value == pytest.approx((1 - e.slope) / 2)
    assert e.beta == pytest.approx(2 - 2 * e.h_value)
    assert len(e.log_x) >= 4 and len(e.log_x) == len(e.log_y)


def test_values_outside_unit_interval_are_kept():
    walk = np.cumsum(white(4))
    assert hurst_per(walk).h_value > 1.0
    assert hurst_per(np.diff(white(5))).h_value < 0.1


@pytest.mark.parametrize("lrd,spur,verdict", [
    (True, False, "LRD"), (True, True, "SPURIOUS_LRD"), (False, False, "NOT_LRD"), (False, True, "NOT_LRD")])
def test_verdict_table(lrd, spur, verdict):
    assert verdict_for(lrd, spur) == verdict
    scr = SpuriousScreen(spur, [], False, None, None, spur)
    assert HurstReport({}, {}, 0.7, lrd, scr).verdict == verdict


def test_hurst_all_degraded_and_partial():
    rep = hurst_all(white(6, 200))
    assert "WAVE" in rep.errors and len(rep.estimates) == 5 and not rep.degraded
    d = rep.to_dict()
    assert d["methods"]["WAVE"]["unavailable"].startswith("TooShort")
    assert rep.h_bar == pytest.approx(np.mean([e.h_value for e in rep.estimates.values()]))


# -- invariance properties -----------------------------------------------------


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(1e-3, 1e3), st.floats(-1e3, 1e3), st.sampled_from(METHODS))
def test_affine_invariance(seed, a, b, method):
    x = make_rng(seed).standard_normal(1024)
    h1 = ESTIMATORS[method](x).h_value
    h2 = ESTIMATORS[method](a * x + b).h_value
    assert h2 == pytest.approx(h1, abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_reversal_invariance(seed):
    # reversal permutes whole blocks only when every block size divides n
    x = fgn(4096, 0.7, make_rng(seed))
    sizes = [2**k for k in range(3, 11)]
    assert hurst_agv(x[::-1], sizes).h_value == pytest.approx(hurst_agv(x, sizes).h_value, abs=1e-9)
    assert hurst_per(x[::-1]).h_value == pytest.approx(hurst_per(x).h_value, abs=1e-9)
    assert hurst_box(x[::-1]).h_value == pytest.approx(hurst_box(x).h_value, abs=1e-9)


# -- generator oracles ---------------------------------------------------------


@pytest.mark.parametrize("method", METHODS)
def test_white_noise_near_half(method):
    vals = [ESTIMATORS[method](white(s)).h_value for s in range(10)]
    assert 0.4 <= np.mean(vals) <= 0.6
    assert all(0.3 <= v <= 0.7 for v in vals)


def test_rs_fgn():
    vals = [hurst_rs(fgn(8192, 0.8, make_rng(s))).h_value for s in range(10)]
    assert all(0.68 <= v <= 0.92 for v in vals)


def test_agv_fgn_and_trend():
    vals = [hurst_agv(fgn(8192, 0.9, make_rng(s))).h_value for s in range(10)]
    assert 0.8 <= np.mean(vals) <= 1.0
    t = np.arange(8192) / 8192
    assert hurst_agv(t + 0.01 * white(7)).h_value > 0.9


def test_wave_fgn():
    vals = [hurst_wave(fgn(8192, 0.7, make_rng(s))).h_value for s in range(10)]
    assert all(0.6 <= v <= 0.8 for v in vals)


@pytest.mark.parametrize("method", ["PER", "BOX"])
def test_spectral_farima(method):
    vals = [ESTIMATORS[method](farima0(8192, 0.3, make_rng(s))).h_value for s in range(10)]
    assert np.mean(vals) == pytest.approx(0.8, abs=0.07)


# -- screen and verdicts --------------------------------------------------------


def test_cusum_finds_single_shift():
    x = white(8, 2000)
    x[1200:] += 3
    cps = cusum_binary_segmentation(x)
    assert len(cps) == 1 and abs(cps[0] - 1200) <= 10
    assert cusum_binary_segmentation(white(9, 2000)) == []


def test_detrend_poly_f_test():
    t = np.arange(1000) / 1000
    _, p_trend = detrend_poly(2 * t**2 + 0.1 * white(10, 1000))
    _, p_flat = detrend_poly(white(11, 1000))
    assert p_trend < 1e-10 and p_flat > 0.01


def test_verdicts_on_constructed_series():
    assert hurst_all(fgn(4096, 0.8, make_rng(12))).verdict == "LRD"
    assert hurst_all(white(13, 4096)).verdict == "NOT_LRD"
    base = GeneratorSpec("WHITE_NOISE", 4096, seed=14)
    shifted = generate(GeneratorSpec("LEVEL_SHIFT", 4096, seed=14, base=base, shift_sigmas=5.0))
    rep = hurst_all(shifted)
    assert rep.lrd_candidate and rep.verdict == "SPURIOUS_LRD"
    assert rep.screen.changepoint_detected and rep.screen.h_after_adjustment < 0.6


def test_screen_on_ar1_shift_and_ramp():
    x = ar1(4096, 0.4, make_rng(15))
    x[2048:] += 5 * x.std()
    assert spurious_screen(x).spurious
    ramp = np.linspace(0, 6, 4096) + white(16, 4096)
    scr = spurious_screen(ramp)
    assert scr.spurious and (scr.trend_detected or scr.changepoint_detected)


def test_screen_spurious_implies_detection():
    for s in range(5):
        scr = spurious_screen(fgn(2048, 0.8, make_rng(s)))
        assert not scr.spurious or scr.changepoint_detected or scr.trend_detected
