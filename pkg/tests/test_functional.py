import json
import math

import numpy as np
import pytest

from stripeform._weights import lattice_weights
from stripeform.functional import (QuadratureSpec, decomposed_energy, direct_energy,
                                   direct_energy_1d_quadrature, energy_gap_identity,
                                   local_energy, local_energy_field, r_tau_1d,
                                   r_tau_1d_quadrature, r_tau_profile, rvw_terms)
from stripeform.kernel import ModelParams, c1_constant, c2_constant, kernel_constants
from stripeform.setgeom import (PeriodicSet, SliceProfile, checkerboard, complement, empty_set,
                                full_set, make_stripes, permute_axes, rasterize, slice_set,
                                translate)
from stripeform.stripe1d import e_tau, h_star
from stripeform.verify import perturbed_stripe_gap, random_grid_set

P1 = ModelParams(1, 3.0, 0.05)
P2 = ModelParams(2, 4.0, 0.02)


@pytest.mark.parametrize("params", [P1, P2, ModelParams(3, 5.0, 0.1)])
def test_trivial_sets_have_zero_energy(params):
    for E in (empty_set(6.0, params.d), full_set(6.0, params.d)):
        assert direct_energy(E, params).total == 0.0
        assert decomposed_energy(E, params).total == 0.0


def test_rejects_zero_tau():
    with pytest.raises(ValueError, match="tau=0"):
        direct_energy(make_stripes(0, 1.0, 0.0, 4.0, 1), P1.with_tau(0.0))


@pytest.mark.parametrize("h", [1.0, 2.0, 3.5])
def test_stripes_match_series_d1(h):
    E = make_stripes(0, h, 0.0, 2 * h, 1)
    rep = direct_energy(E, P1)
    assert rep.total == pytest.approx(e_tau(h, P1), rel=1e-7)
    assert rep.is_equality_candidate and rep.exact_grid


def test_stripes_match_series_d2():
    h = 1.5
    E = make_stripes(1, h, 0.5, 6.0, 2)
    assert direct_energy(E, P2).total == pytest.approx(e_tau(h, P2), rel=1e-6)


def test_direct_matches_quadrature_oracle_1d():
    prof = SliceProfile(7.0, np.array([0.4, 1.9, 3.0, 5.5]), True)
    G = rasterize(PeriodicSet.from_boxes([[(0.4, 1.9)], [(3.0, 5.5)]], 7.0, 1), 7000)
    ref = direct_energy_1d_quadrature(prof, P1)
    exact = PeriodicSet.from_boxes([[(0.4, 1.9)], [(3.0, 5.5)]], 7.0, 1)
    assert direct_energy(exact, P1).total == pytest.approx(ref, rel=1e-7)
    assert direct_energy(G, P1).total == pytest.approx(ref, rel=1e-7)


def test_permutation_and_complement_symmetry():
    a = direct_energy(make_stripes(0, 1.5, 0.0, 6.0, 2), P2).total
    b = direct_energy(make_stripes(1, 1.5, 0.0, 6.0, 2), P2).total
    assert a == pytest.approx(b, rel=1e-12)
    rng = np.random.default_rng(1)
    G = random_grid_set(rng, 32, 8.0, 2)
    e = direct_energy(G, P2).total
    assert direct_energy(complement(G), P2).total == pytest.approx(e, rel=1e-10)
    assert direct_energy(permute_axes(G, [1, 0]), P2).total == pytest.approx(e, rel=1e-10)


def test_translation_invariance():
    rng = np.random.default_rng(2)
    G = random_grid_set(rng, 32, 8.0, 2)
    e = direct_energy(G, P2).total
    assert direct_energy(translate(G, [0.25 * 5, 0.25 * 3]), P2).total == pytest.approx(e, rel=1e-12)
    B = PeriodicSet.from_boxes([[(0, 2), (1, 4)], [(4, 6), (5, 6)]], 8.0, 2)
    eb = direct_energy(B, P2).total
    assert direct_energy(translate(B, [0.5, 1.5]), P2).total == pytest.approx(eb, rel=1e-6)


def test_energy_report_json():
    rep = direct_energy(make_stripes(0, 1.0, 0.0, 4.0, 2), P2)
    data = json.loads(rep.to_json())
    assert data["method"] == "direct" and data["error_bound"] >= 0
    assert data["total"] == pytest.approx(
        data["perimeter_term"] + data["kernel_moment_term"] - data["nonlocal_term"])


def test_coarse_grid_flag():
    rep = direct_energy(make_stripes(0, 4.0, 0.0, 64.0, 2), P2, QuadratureSpec(grid_n=16))
    assert "coarse_grid" in rep.flags


# ---------------------------------------------------------------------------
# r


def test_r_closed_form_matches_quadrature():
    prof = SliceProfile(9.0, np.array([0.5, 2.0, 2.8, 6.1]), False)
    for s in (2.0, 6.1):
        assert r_tau_1d(prof, s, P1) == pytest.approx(r_tau_1d_quadrature(prof, s, P1), abs=1e-7)


def test_r_sum_on_stripes_equals_series():
    for params in (P1, ModelParams(1, 4.5, 0.1)):
        h = 2.3
        prof = slice_set(make_stripes(0, h, 0.0, 4 * h, 1), 0, [])
        r = r_tau_profile(prof, params)
        assert r.sum() == pytest.approx(4 * h * e_tau(h, params), rel=1e-11)


def test_r_blows_up_for_close_interfaces():
    c = c1_constant(1, 3.0) * c2_constant(2.0 + 1.0)
    vals = []
    for gap in (1e-1, 1e-2, 1e-3):
        prof = SliceProfile(10.0, np.array([2.0, 2.0 + gap, 5.0, 7.0]), True)
        vals.append(r_tau_1d(prof, 2.0 + gap, ModelParams(1, 3.0, 1e-5)))
    assert vals[0] < vals[1] < vals[2]
    # both neighbours of the short gap contribute about c / gap
    assert c / 1e-3 < vals[2] < 2.5 * c / 1e-3
    assert vals[2] / vals[1] == pytest.approx(10, rel=0.1)


def test_r_decreases_when_tau_doubles():
    prof = SliceProfile(12.0, np.array([1.0, 4.0, 6.5, 9.0]), True)
    a = r_tau_1d(prof, 4.0, P1)
    b = r_tau_1d(prof, 4.0, P1.with_tau(0.1))
    assert b < a
    m1 = kernel_constants(P1.with_tau(0.1)).m1
    assert b < -1 + m1


def test_r_rejects_non_boundary():
    prof = SliceProfile(12.0, np.array([1.0, 4.0]), True)
    with pytest.raises(ValueError):
        r_tau_1d(prof, 2.0, P1)
    with pytest.raises(ValueError):
        r_tau_1d(SliceProfile(12.0, np.empty(0), True), 0.0, P1)


# ---------------------------------------------------------------------------
# decomposition


def test_rvw_on_stripes():
    E = make_stripes(0, 1.5, 0.0, 6.0, 2)
    pts, w = rvw_terms(E, 0, [1.3], P2)
    assert len(pts) == 4 and all(abs(v) < 1e-12 for _, _, v in pts) and np.all(np.abs(w) < 1e-10)
    pts, w = rvw_terms(E, 1, [0.7], P2)
    assert pts == [] and np.all(np.abs(w) < 1e-10)


def brute_force_w(G, i, W):
    """Cell integrals of w_i by explicit loops over lattice translations."""
    X = G.grid.astype(int)
    n, d = G.n, G.dim
    out = np.zeros(X.shape)
    for c in np.ndindex(X.shape):
        acc = 0.0
        for m in np.ndindex(X.shape):
            par = list(c)
            par[i] = (c[i] + m[i]) % n
            perp = [(c[j] + m[j]) % n if j != i else c[j] for j in range(d)]
            acc += W[m] * abs(X[c] - X[tuple(par)]) * abs(X[c] - X[tuple(perp)])
        out[c] = acc * G.cell**d / d
    return out


def test_w_against_lattice_brute_force():
    rng = np.random.default_rng(5)
    G = PeriodicSet.from_grid(rng.random((8, 8)) < 0.5, 4.0)
    W = lattice_weights(8, 4.0, 2, 4.0, 0.02).weights
    from stripeform.functional import _cell_w
    for i in range(2):
        assert np.allclose(_cell_w(G, i, W), brute_force_w(G, i, W), rtol=1e-10, atol=1e-14)


def test_checkerboard_cross_terms_positive():
    cb = rasterize(checkerboard(1.0, 4.0, 2), 16)
    rep = decomposed_energy(cb, P2)
    for r, v, w in rep.per_direction:
        assert v > 0 and w > 0
    assert rep.total <= direct_energy(cb, P2).total + 1e-8


@pytest.mark.parametrize("h, L", [(1.5, 6.0), (1.0, 8.0), (2.0, 8.0)])
def test_stripe_equality(h, L):
    E = make_stripes(0, h, 0.0, L, 2)
    a, b = direct_energy(E, P2).total, decomposed_energy(E, P2).total
    # the decomposed side is the exact series; the gap is the direct quadrature error
    assert abs(a - b) <= 1e-6 * abs(a)
    assert decomposed_energy(E, P2).is_equality_candidate


def test_lower_bound_on_random_sets_d2():
    rng = np.random.default_rng(7)
    for _ in range(5):
        G = random_grid_set(rng, 32, 8.0, 2)
        assert decomposed_energy(G, P2).total <= direct_energy(G, P2).total + 1e-8
        assert abs(energy_gap_identity(G, P2)) < 1e-12


def test_strict_gap_for_perturbed_stripes_d3():
    params = ModelParams(3, 5.0, 0.1)
    quad = QuadratureSpec(grid_n=16)
    a, b = perturbed_stripe_gap(params, 2.0, 8.0, 1.0, quad)
    assert b < a - 1e-3
    boxes = [[(0, 3), (0, 4), (0, 8)], [(0, 2), (4, 8), (0, 8)], [(4, 6), (0, 8), (0, 8)]]
    E = PeriodicSet.from_boxes(boxes, 8.0, 3)
    gap = direct_energy(E, params, quad).total - decomposed_energy(E, params, quad).total
    assert gap == pytest.approx(energy_gap_identity(E, params, quad), abs=1e-5)


def test_perturbed_stripes_d2_equal():
    a, b = perturbed_stripe_gap(P2, 2.0, 8.0, 1.0)
    assert a == pytest.approx(b, rel=1e-6)


# ---------------------------------------------------------------------------
# local energies


def test_local_energy_averages_to_decomposed():
    rng = np.random.default_rng(11)
    G = random_grid_set(rng, 32, 8.0, 2)
    F = local_energy_field(G, 2.0, P2)
    assert F.sum(axis=0).mean() == pytest.approx(decomposed_energy(G, P2).total, rel=1e-10)


def test_local_energy_on_stripes_translation_invariant():
    E = make_stripes(0, 1.0, 0.0, 8.0, 2)
    vals = [local_energy(E, [2.6, y], 2.0, P2, QuadratureSpec(grid_n=32)).total
            for y in (0.0, 1.25, 5.5)]
    assert np.allclose(vals, vals[0], rtol=1e-12)
    with pytest.raises(ValueError):
        local_energy(E, [0, 0], 8.0, P2)
    with pytest.raises(ValueError):
        local_energy(E, [0, 0], 0.3, P2, QuadratureSpec(grid_n=32))


def test_nearly_full_cubes_bound():
    from stripeform.verify import check_nearly_full_cubes, estimate_eta0
    rng = np.random.default_rng(4)
    grid = np.ones((32, 32), dtype=bool)
    grid[rng.integers(0, 32, 6), rng.integers(0, 32, 6)] = False
    G = PeriodicSet.from_grid(grid, 16.0)
    eta0 = estimate_eta0(P2, samples=100)
    out = check_nearly_full_cubes(G, 4.0, P2, 0.05, eta0)
    assert out.samples > 0 and out.passed
    assert math.isfinite(eta0)
