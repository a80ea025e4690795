import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stripeform.kernel import (ModelParams, c1_constant, first_moment_quadrature,
                               k1, k_tau, kernel_constants, kernel_mass,
                               khat_quadrature, khat_tau, radial_integral)


def test_params_derived_exponents():
    p = ModelParams(2, 5.0, 0.1)
    assert p.beta == 2.0 and p.q == 4.0
    assert p.beta == p.q - 2
    assert p.sigma == pytest.approx(0.1 ** 0.5)


@pytest.mark.parametrize("d, p, tau", [(1, 2.9, 0.1), (2, 3.5, 0.1), (1, 3.0, -1.0), (0, 3.0, 0.1)])
def test_params_rejected(d, p, tau):
    with pytest.raises(ValueError):
        ModelParams(d, p, tau)


def test_k1_examples():
    assert k1(np.zeros(2), 4) == 1.0
    assert k1(np.array([1.0, 0.0]), 4) == 1 / 16
    assert k1(np.array([0.5, 0.5]), 4) == 1 / 16


def test_k_tau_examples():
    assert k_tau(0.0, ModelParams(1, 3.0, 0.25)) == pytest.approx(64.0, rel=1e-14)
    assert k_tau(1.0, ModelParams(1, 3.0, 1.0)) == pytest.approx(1 / 8, rel=1e-15)
    p = ModelParams(2, 4.0, 0.1)
    z = np.array([0.3, 0.3])
    expected = 0.1 ** (-4 / 1) * (0.6 * 0.1 ** (-1) + 1) ** (-4)
    assert k_tau(z, p) == pytest.approx(expected, rel=1e-13)


def test_k_tau_rejects_zero_tau():
    with pytest.raises(ValueError, match="kernel undefined at tau=0"):
        k_tau(0.0, ModelParams(1, 3.0, 0.0))
    with pytest.raises(ValueError, match="kernel undefined at tau=0"):
        khat_tau(0.0, ModelParams(1, 3.0, 0.0))


@settings(max_examples=60, deadline=None)
@given(d=st.integers(1, 3), extra=st.floats(0.0, 3.0), tau=st.floats(1e-4, 2.0),
       z=st.lists(st.floats(-20, 20), min_size=3, max_size=3))
def test_scaling_exactness(d, extra, tau, z):
    params = ModelParams(d, d + 2 + extra, tau)
    zeta = np.array(z[:d])
    b = params.beta
    ref = tau ** (-params.p / b) * k1(zeta * tau ** (-1 / b), params.p)
    assert k_tau(zeta, params) == pytest.approx(ref, rel=1e-12)


def test_khat_examples():
    assert khat_tau(1.0, ModelParams(1, 3.0, 1.0)) == pytest.approx(1 / 8, rel=1e-15)
    assert khat_tau(0.0, ModelParams(2, 4.0, 1.0)) == pytest.approx(2 / 3, rel=1e-14)
    assert khat_tau(0.0, ModelParams(3, 5.0, 1.0)) == pytest.approx(1 / 3, rel=1e-14)


@pytest.mark.parametrize("d, p", [(2, 4.0), (2, 5.5), (3, 5.0), (3, 6.0)])
def test_khat_matches_quadrature(d, p):
    rng = np.random.default_rng(d * 10 + int(p))
    for tau in (1.0, 0.05):
        params = ModelParams(d, p, tau)
        for rho in rng.uniform(0, 10, size=4):
            assert khat_tau(rho, params) == pytest.approx(khat_quadrature(rho, params), rel=1e-8)


def test_khat_scaling_form():
    params = ModelParams(2, 4.0, 0.3)
    one = params.with_tau(1.0)
    b, q = params.beta, params.q
    for rho in (0.0, 0.7, 4.0):
        ref = 0.3 ** (-q / b) * khat_tau(rho * 0.3 ** (-1 / b), one)
        assert khat_tau(rho, params) == pytest.approx(ref, rel=1e-13)


def test_kernel_constants_examples():
    c = kernel_constants(ModelParams(1, 3.0, 0.1))
    assert c.c1 == 1.0 and c.c2 == 0.5
    assert c.m1 == pytest.approx(10.0, rel=1e-14)
    c = kernel_constants(ModelParams(2, 4.0, 0.1))
    assert c.c1 == pytest.approx(2 / 3, rel=1e-14) and c.c2 == 0.5
    oracle = radial_integral(lambda r: (r + 1.0) ** -4.0, 1)
    assert c.c1 == pytest.approx(oracle, rel=1e-10)


@pytest.mark.parametrize("d, p", [(2, 4.0), (3, 5.0), (3, 7.5)])
def test_c1_against_radial_quadrature(d, p):
    oracle = radial_integral(lambda r: (r + 1.0) ** (-p), d - 1)
    assert c1_constant(d, p) == pytest.approx(oracle, rel=1e-10)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_moment_identity_independent_of_tau(d):
    vals = [kernel_constants(ModelParams(d, d + 2.0, t)).m1 * t for t in (1, 0.5, 0.1, 0.01)]
    assert np.allclose(vals, vals[0], rtol=1e-10, atol=0)
    assert vals[0] == pytest.approx(2 * c1_constant(d, d + 2.0) * 0.5, rel=1e-14)


@pytest.mark.parametrize("d", [1, 2])
def test_total_mass_change_of_variables(d):
    """int K_tau depends on tau only through the saturation length."""
    p = d + 2.5
    for tau in (1.0, 0.2):
        params = ModelParams(d, p, tau)
        s = params.sigma
        quad = radial_integral(lambda r: (r + s) ** (-p), d)
        assert kernel_mass(params) == pytest.approx(quad, rel=1e-6)
        unit = radial_integral(lambda r: (r + 1.0) ** (-p), d)
        assert quad * s ** (p - d) == pytest.approx(unit, rel=1e-6)


def test_first_moment_quadrature_small_case():
    params = ModelParams(1, 3.0, 0.1)
    assert first_moment_quadrature(params) == pytest.approx(10.0, rel=1e-8)
    assert math.isinf(kernel_constants(params.with_tau(0.0)).m1)
