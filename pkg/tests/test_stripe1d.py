import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stripeform.kernel import ModelParams
from stripeform.stripe1d import (SCAN_FLOOR, c_series, c_series_derivatives, commensurate_widths,
                                 convexity_window, d2e_tau, de_tau, e_tau,
                                 e_tau_min_closed_form, h_box, h_interval, h_star,
                                 paired_sum, paired_sum_hurwitz)

LN2 = math.log(2)
P1 = ModelParams(1, 3.0, 0.0)


def richardson_paired(m, s, n=4000):
    """Partial sums of the paired series, extrapolated in 1/n."""
    k = np.arange(2 * n)
    terms = (2 * k + 1 + s) ** (-m) - (2 * k + 2 + s) ** (-m)
    a, b = terms[:n].sum(), terms.sum()
    order = m + 1  # tail ~ n^-m
    return (2 ** m * b - a) / (2 ** m - 1) if order else b


def test_c_series_examples():
    assert c_series(0.0, P1).value == pytest.approx(2 * LN2, rel=1e-13)
    assert c_series(0.0, ModelParams(2, 4.0, 0.0)).value == pytest.approx(4 / 3 * LN2, rel=1e-13)
    vals = [c_series(s, P1).value for s in (0, 1, 10, 100, 1e4)]
    assert all(a > b for a, b in zip(vals, vals[1:])) and vals[-1] < 1e-3


def test_c_series_against_richardson():
    for s in (0.0, 0.3, 2.0):
        assert paired_sum(1.0, s)[0] == pytest.approx(richardson_paired(1.0, s), rel=1e-7)


@pytest.mark.parametrize("m", [1.0, 1.5, 2.0, 3.7])
def test_paired_sum_against_hurwitz(m):
    s = np.array([0.0, 0.01, 0.5, 3.0, 40.0])
    val, _, bound = paired_sum(m, s)
    assert bound <= 1e-14
    assert np.allclose(val, paired_sum_hurwitz(m, s), rtol=1e-12, atol=1e-15)


def test_tail_bound_dominates_true_remainder():
    for tol in (1e-6, 1e-9, 1e-12):
        for s in (0.0, 0.7):
            val, K, bound = paired_sum(1.0, s, tol)
            long = paired_sum(1.0, s, tol / 1e3)[0]
            assert abs(val - long) <= bound + 1e-15
            assert bound <= tol


def test_series_value_fields():
    sv = c_series(0.2, ModelParams(1, 3.0, 0.1), tol=1e-10)
    assert sv.truncation_k >= 1 and 0 <= sv.tail_bound <= 1e-10


def test_c_series_errors():
    with pytest.raises(ValueError):
        c_series(0.0, P1, tol=0.0)
    with pytest.raises(ValueError):
        paired_sum(1.0, -1.0)


def test_e_tau_examples():
    h = 4 * LN2
    assert e_tau(h, P1) == pytest.approx(-1 / (8 * LN2), rel=1e-13)
    assert -1e-3 < e_tau(1e4, P1) < 0
    p = ModelParams(1, 3.0, 0.05)
    assert e_tau(2.0, p) == pytest.approx(-0.5 + c_series(0.05 / 2, p).value / 4, rel=1e-14)


@pytest.mark.parametrize("f", [e_tau, de_tau, d2e_tau])
def test_nonpositive_width_rejected(f):
    with pytest.raises(ValueError):
        f(0.0, P1)
    with pytest.raises(ValueError):
        f(np.array([1.0, -2.0]), P1)


def test_derivatives_at_closed_form_minimum():
    h = 4 * LN2
    assert abs(de_tau(h, P1)) < 1e-10
    expected = 2.0 ** -3 * (2 * LN2) ** -3
    assert d2e_tau(h, P1) == pytest.approx(expected, rel=1e-10)


@settings(max_examples=50, deadline=None)
@given(h=st.floats(1.0, 20.0), tau=st.floats(0.0, 0.2), which=st.sampled_from([(1, 3.0), (2, 4.0), (1, 4.5)]))
def test_derivatives_match_finite_differences(h, tau, which):
    params = ModelParams(which[0], which[1], tau)
    step = 1e-5
    fd1 = (e_tau(h + step, params) - e_tau(h - step, params)) / (2 * step)
    fd2 = (de_tau(h + step, params) - de_tau(h - step, params)) / (2 * step)
    assert abs(de_tau(h, params) - fd1) < 1e-6
    assert abs(d2e_tau(h, params) - fd2) < 1e-6


def test_h_star_examples():
    r = h_star(P1)
    assert r.h == pytest.approx(4 * LN2, abs=1e-8)
    assert r.energy == pytest.approx(-1 / (8 * LN2), abs=1e-10)
    r2 = h_star(ModelParams(2, 4.0, 0.0))
    assert r2.h == pytest.approx(8 / 3 * LN2, abs=1e-8)
    assert r.energy == pytest.approx(e_tau(r.h, P1), abs=1e-12)


@pytest.mark.parametrize("d, p", [(1, 3.0), (2, 4.0), (1, 5.0), (3, 5.5)])
def test_closed_form_minimum(d, p):
    params = ModelParams(d, p, 0.0)
    h0, e0 = e_tau_min_closed_form(params)
    r = h_star(params)
    assert r.h == pytest.approx(h0, rel=1e-10)
    assert r.energy == pytest.approx(e0, rel=1e-12)


@pytest.mark.parametrize("tau", [0.0, 1e-3, 0.01, 0.05, 0.2])
def test_stationarity_and_convexity_at_h_star(tau):
    params = ModelParams(1, 3.0, tau)
    r = h_star(params)
    assert abs(de_tau(r.h, params)) <= 1e-12
    assert d2e_tau(r.h, params) > 0
    grid = np.linspace(0.5 * r.h, 2 * r.h, 301)
    assert np.all(e_tau(grid, params) >= r.energy - 1e-14)


def test_h_star_continuous_as_tau_vanishes():
    h0 = h_star(P1).h
    gaps = [abs(h_star(P1.with_tau(t)).h - h0) for t in (0.1, 0.01, 0.001, 1e-4)]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))


def test_h_box_examples():
    hs = h_star(P1)
    r = h_box(2 * hs.h, P1)
    assert r.h == pytest.approx(hs.h, rel=1e-14) and len(r.multiplicity) == 1
    r = h_box(10.0, P1)
    ks = np.arange(1, 51)
    k_best = ks[np.argmin(e_tau(10.0 / (2 * ks), P1))]
    assert r.h == pytest.approx(10.0 / (2 * k_best), rel=1e-15)
    for h in r.multiplicity:
        k = 10.0 / (2 * h)
        assert abs(k - round(k)) < 1e-9
    assert r.energy == pytest.approx(e_tau(r.h, P1), abs=1e-12)
    assert h_interval(10.0, P1).h == r.h


def test_commensurate_widths_reach_floor():
    w = commensurate_widths(7.0)
    assert w[0] == 3.5 and w[-1] < SCAN_FLOOR <= w[-2]


def test_h_box_drift_bounded():
    params = ModelParams(1, 3.0, 0.01)
    hs = h_star(params).h
    drift = [abs(h_box(float(L), params).h - hs) * L for L in range(5, 400, 7)]
    assert max(drift) <= 2 * hs ** 2


def test_h_box_energy_along_multiples():
    params = ModelParams(1, 3.0, 0.01)
    hs = h_star(params)
    exact = [h_box(2 * hs.h * j, params).energy for j in (1, 2, 4, 8)]
    assert np.allclose(exact, hs.energy, rtol=0, atol=1e-12)
    lengths = [2 * hs.h * j * 1.013 for j in (2, 4, 8, 16, 32, 64)]
    gaps = np.array([h_box(L, params).energy - hs.energy for L in lengths])
    assert np.all(gaps >= 0)
    assert gaps[-1] < gaps[0]
    assert np.max(gaps * np.square(lengths)) < 10 * hs.h ** 2


def test_convexity_window_examples():
    w = convexity_window(P1, 0.02)
    assert w.c1bar < 4 * LN2 < w.c2bar and w.c3bar > 0
    grid = np.linspace(w.c1bar, w.c2bar, 500)
    assert np.all(d2e_tau(grid, P1) > 0)
    widths = [convexity_window(P1, e) for e in (1e-2, 1e-4, 1e-6)]
    spans = [x.c2bar - x.c1bar for x in widths]
    assert spans[0] > spans[1] > spans[2] and spans[2] < 0.05


def test_convexity_windows_nested():
    outer = convexity_window(P1, 1.5 * 0.01)
    for tau in (0.01, 0.005):
        inner = convexity_window(P1.with_tau(tau), 0.01)
        assert outer.c1bar <= inner.c1bar and inner.c2bar <= outer.c2bar


def test_convexity_window_errors():
    with pytest.raises(ValueError):
        convexity_window(P1, 0.0)
    with pytest.raises(ValueError):
        convexity_window(P1, 1.0)
