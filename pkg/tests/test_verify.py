import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stripeform import verify
from stripeform.functional import r_tau_profile
from stripeform.kernel import ModelParams
from stripeform.stripe1d import h_star

P1 = ModelParams(1, 3.0, 0.01)
P2 = ModelParams(2, 4.0, 0.02)


def test_outcome_margin_sign_decides():
    assert verify._outcome("x", 0.0, {}, 1).passed
    assert not verify._outcome("x", -1e-300, {}, 1).passed


def test_outcome_json_roundtrip():
    o = verify._outcome("x", 1.5, {"a": np.arange(3), "b": np.float64(2.0), "c": math.inf}, 4,
                        {"ok": np.bool_(True)})
    back = json.loads(json.dumps(o.to_dict()))
    assert back["witness"]["a"] == [0, 1, 2]
    assert back["witness"]["c"] == "inf"
    assert back["details"]["ok"] is True


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), floor=st.floats(0.05, 1.0))
def test_random_profile_respects_gap_floor(seed, floor):
    rng = np.random.default_rng(seed)
    prof = verify.random_profile(rng, 40.0, 10.0, floor)
    if len(prof):
        assert prof.gaps().min() >= floor * (1 - 1e-12)
        assert len(prof) % 2 == 0


def test_jittered_stripes_near_width():
    rng = np.random.default_rng(0)
    prof = verify.jittered_stripes(rng, 40.0, 2.0, 0.5)
    g = prof.gaps()
    assert g.min() >= 0.5 and abs(g.mean() - 2.0) < 0.5


def test_penalization_bound_on_regular_stripes():
    hs = h_star(P1).h
    from stripeform.setgeom import profile_from_intervals
    prof = profile_from_intervals([(2 * k * hs, (2 * k + 1) * hs) for k in range(4)], 8 * hs)
    r = r_tau_profile(prof, P1)
    gm, gp = verify._neighbor_gaps(prof)
    assert np.all(r >= verify.penalization_lower_bound(gm, gp, P1))


def test_eta0_is_order_one():
    eta0 = verify.estimate_eta0(P1, samples=100)
    assert 0.1 < eta0 < 2 * h_star(P1).h


def test_small_checks_pass():
    assert verify.check_stripe_equality(P2, [(29 / 16, 29.0)]).passed
    assert verify.check_lower_bound(P2, n=32, samples=3).passed
    assert verify.check_penalization_bound(P1, samples=40).passed
    o = verify.check_1d_optimization(P1, multiples=(10, 20), samples=40)
    assert o.passed and o.details["C0_fitted"] >= 0
    assert verify.check_convexity_and_window(P1, taus=(0.01,), lengths=(20, 40)).passed


def test_periodic_profile_value_small():
    hs = h_star(P1).h
    assert abs(verify.periodic_profile_value(P1, 10 * hs)) < 1e-6


def test_kernel_difference_slopes():
    o = verify.check_kernel_difference_bounds(P1)
    assert o.passed
    assert np.all(np.abs(np.asarray(o.witness["slopes"]) - 1) < 0.1)


def test_pattern_builders():
    D = verify.droplet_lattice(240, 12.0, 4)  # droplet side rounds to whole cells
    assert abs(D.volume_fraction() - 0.5) < 0.02
    S = verify.diagonal_stripes(48, 12.0, 4)
    assert S.volume_fraction() == pytest.approx(0.5)
    with pytest.raises(ValueError):
        verify.diagonal_stripes(48, 12.0, 5)
    with pytest.raises(ValueError):
        verify.compare_patterns(P1, 10.0)


def test_compare_patterns_stripes_first():
    rows = verify.compare_patterns(P2, 29.0, n=120, checker_ks=(4, 8))
    assert rows[0]["pattern"] == "stripes"
    assert [r["energy"] for r in rows] == sorted(r["energy"] for r in rows)


def test_run_suite_and_reports():
    out = verify.run_suite("closed-form")
    assert len(out) == 1 and out[0].passed
    doc = json.loads(verify.report_json(out))
    assert doc["passed"] is True and doc["checks"][0]["name"] == "closed_form"
    assert "PASS" in verify.report_text(out)


def test_unknown_suite_lists_available():
    with pytest.raises(KeyError, match="stripe-equality"):
        verify.run_suite("nope")


def test_thread_count_env(monkeypatch):
    monkeypatch.setenv("STRIPE_THREADS", "3")
    assert verify.thread_count() == 3
    monkeypatch.setenv("STRIPE_THREADS", "x")
    assert verify.thread_count() == 1


def test_seeded_checks_reproducible():
    a = verify.check_penalization_bound(P1, samples=20, seed=5).to_dict()
    b = verify.check_penalization_bound(P1, samples=20, seed=5).to_dict()
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
