import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qlab.engine import ParabolaSignal, build_ladder
from qlab.lab import (ONE, PROFILES, TOL, BilinearInstance, Workspace, check_bilinear_broad,
                      check_bilinear_restriction, check_broad_narrow_suite, check_level_set,
                      check_pointwise_suite, check_theorem, l6_sixth_full, pointwise_report,
                      random_bilinear_instance, random_instance, scalar_report, support_certified,
                      theta_cross_terms, violations)
from qlab.qadic import QInterval

LAD4 = build_ladder(81, 1.0)
LAD8 = build_ladder(3 ** 8, 1.0)


def no_nan(reports):
    for r in reports:
        for v in (r.lhs, r.rhs, r.ratio):
            assert not (isinstance(v, float) and math.isnan(v)), r.lemma


# ------------------------------------------------------------------ reports
def test_report_json_schema():
    r = scalar_report("x", 1.0, 2.0, params={"q": 3}, seed=5)
    doc = r.to_json()
    assert set(doc) == {"lemma", "params", "lhs", "rhs", "constant", "ratio", "pass", "seed",
                        "runtime_ms"}
    assert doc["pass"] is True and doc["ratio"] == 0.5
    json.dumps(doc)


def test_report_infinities_and_zero_sides():
    r = scalar_report("x", 1.0, 0.0)
    assert r.ratio == math.inf and r.passed is False
    assert json.loads(json.dumps(r.to_json()))["ratio"] == "inf"
    z = scalar_report("x", 0.0, 0.0)
    assert z.ratio == 0 and z.passed is True


def test_report_only_never_gates():
    r = scalar_report("x", 10.0, 1.0, gated=False)
    assert r.passed is None and not violations([r])


@given(st.floats(0, 1e6), st.floats(1e-6, 1e6))
@settings(max_examples=60, deadline=None)
def test_pass_iff_ratio_within_tolerance(lhs, rhs):
    r = scalar_report("x", lhs, rhs)
    assert r.passed == (lhs / rhs <= 1 + TOL)


def test_pointwise_report_picks_worst_point():
    lhs = np.array([1.0, 3.0, 2.0])
    rhs = np.array([2.0, 2.0, 4.0])
    r = pointwise_report("p", lhs, rhs, ONE, {}, 0)
    assert r.lhs == 3.0 and r.rhs == 2.0 and r.passed is False
    assert r.params["points"] == 3
    ok = pointwise_report("p", lhs, rhs + 2, ONE, {}, 0)
    assert ok.passed


def test_pointwise_report_empty():
    r = pointwise_report("p", np.zeros(0), np.zeros(0), ONE, {}, 0)
    assert r.passed


# ------------------------------------------------------------------ ensembles
@pytest.mark.parametrize("profile", PROFILES)
def test_random_instance_deterministic_and_supported(profile):
    a = random_instance(81, 4, profile)
    b = random_instance(81, 4, profile)
    assert np.array_equal(a.coeffs, b.coeffs)
    assert support_certified(a)
    assert a.l2_squared() > 0
    c = random_instance(81, 5, profile)
    assert not np.array_equal(a.coeffs, c.coeffs)


def test_unknown_profile():
    with pytest.raises(ValueError):
        random_instance(81, 0, "gaussian")


@given(st.integers(0, 10 ** 6), st.sampled_from(PROFILES))
@settings(max_examples=25, deadline=None)
def test_support_always_certified(seed, profile):
    assert support_certified(random_instance(81, seed, profile))


def test_flat_mass_closed_form():
    # R unit cells of measure R^-2 each
    for seed in (0, 1):
        sig = random_instance(3 ** 4, seed, "flat")
        assert np.allclose(np.abs(sig.coeffs), 1)
        assert sig.l2_squared() == pytest.approx(3.0 ** -4, rel=1e-12)
        f = sig.materialize()
        direct = float(np.sum(np.abs(f.values) ** 2)) * f.spec.cell_measure
        assert direct == pytest.approx(3.0 ** -4, rel=1e-10)


def test_sparse_tube_single_piece():
    sig = random_instance(3 ** 8, 7, "sparse-tube")
    live = np.nonzero(sig.coeffs)[0]
    assert len(live) == 81
    assert len(set(live % 81)) == 1  # one tau at R^-1/2
    f = np.abs(sig.materialize().values)
    # one tube: |f| is constant on its support
    vals = f[f > 1e-9 * f.max()]
    assert np.allclose(vals, vals[0], rtol=1e-9)


# ------------------------------------------------------------------ degenerate inputs
@pytest.mark.parametrize("L,exhaustive", [(4, True), (8, False)])
def test_zero_signal_passes_vacuously(L, exhaustive):
    lad = build_ladder(3 ** L, 1.0)
    sig = ParabolaSignal(3, L, np.zeros(3 ** L, complex))
    ws = Workspace(sig, lad, exhaustive=exhaustive)
    alpha = ws.pigeonhole_alpha()
    assert ws.lam(alpha) == 0.0
    reps = check_pointwise_suite(sig, lad, 0, ws=ws) + check_bilinear_broad(ws, 0)
    for a in list(ws.bins().edges) + [alpha]:
        ls = check_level_set(ws, a, 0)
        assert all(r.lhs == 0 and r.rhs == 0 for r in ls if r.lemma == "level-set-chain")
        reps += ls
    assert not violations(reps)
    no_nan(reps)


def test_lambda_infinite_approximation_is_zero():
    sig = random_instance(81, 2, "random-phase")
    ws = Workspace(sig, LAD4, exhaustive=True)
    reps = check_pointwise_suite(sig, LAD4, 2, lam=math.inf, ws=ws)
    approx = [r for r in reps if "approx" in r.lemma]
    assert approx and all(r.lhs == 0 for r in approx)
    assert not violations(reps)


# ------------------------------------------------------------------ sparse tube
def test_sparse_tube_level_sets_empty():
    sig = random_instance(81, 3, "sparse-tube")
    ws = Workspace(sig, LAD4, exhaustive=True)
    assert ws.root_mp.max() == 0  # no second child anywhere
    for a in ws.bins().edges:
        if a > 0:
            assert ws.level_set(a).bits.sum() == 0


def test_single_child_narrow_lemma_is_sharp():
    # one dominant child: |f_tau_k| equals |f_child|, so the ratio is exactly 1/rho
    sig = random_instance(81, 3, "sparse-tube")
    ws = Workspace(sig, LAD4, exhaustive=True)
    reps = check_broad_narrow_suite(ws, 3)
    nl = [r for r in reps if r.lemma == "narrow-lemma"]
    assert nl and all(r.passed for r in reps)
    assert max(r.ratio for r in nl) == pytest.approx(1 / LAD4.narrow_factor, rel=1e-9)


# ------------------------------------------------------------------ pipeline runs
@pytest.fixture(scope="module")
def flat8():
    sig = random_instance(3 ** 8, 0, "flat")
    return sig, Workspace(sig, LAD8)


def test_flat_pointwise_suite(flat8):
    sig, ws = flat8
    reps = check_pointwise_suite(sig, LAD8, 0, ws=ws)
    assert len(reps) > 20 and not violations(reps)
    lemmas = {r.lemma for r in reps}
    for name in ("prunedmon", "increase", "low-lemma", "high-lemma", "pruning-approx",
                 "initial-narrow", "broad-pointwise", "narrow-pointwise", "narrow-lemma"):
        assert name in lemmas


def test_flat_chain_on_all_bins(flat8):
    _, ws = flat8
    for a in ws.bins().edges:
        reps = check_level_set(ws, a, 0)
        chain = [r for r in reps if r.lemma == "level-set-chain"]
        assert len(chain) == 1 and chain[0].passed
        assert not violations(reps)
        head = [r for r in reps if r.lemma == "level-set-headline"]
        assert head[0].passed is None


def test_flat_bilinear_broad(flat8):
    _, ws = flat8
    assert not violations(check_bilinear_broad(ws, 0))


@pytest.mark.parametrize("profile", PROFILES)
def test_small_scale_exhaustive_all_profiles(profile):
    for seed in range(2):
        sig = random_instance(81, seed, profile)
        ws = Workspace(sig, LAD4, exhaustive=True)
        reps = (check_pointwise_suite(sig, LAD4, seed, ws=ws) + check_bilinear_broad(ws, seed)
                + check_level_set(ws, ws.pigeonhole_alpha(), seed))
        assert not violations(reps)
        no_nan(reps)


def test_exhaustive_agrees_with_certified():
    sig = random_instance(81, 1, "random-phase")
    a = check_pointwise_suite(sig, LAD4, 1, ws=Workspace(sig, LAD4, exhaustive=True))
    b = check_pointwise_suite(sig, LAD4, 1, ws=Workspace(sig, LAD4))
    assert [r.passed for r in a] == [r.passed for r in b]


# ------------------------------------------------------------------ theorem
def test_l6_matches_materialization():
    sig = random_instance(81, 1, "random-phase")
    f = sig.materialize()
    direct = float(np.sum(np.abs(f.values) ** 6)) * f.spec.cell_measure
    assert l6_sixth_full(sig, block=7) == pytest.approx(direct, rel=1e-12)


def test_single_tau_theorem_ratio_at_most_one():
    for seed in range(3):
        sig = random_instance(81, seed, "sparse-tube")
        reps, summary = check_theorem(sig, 1.0, seed)
        assert summary["ratio"] <= 1 + 1e-9
        assert not violations(reps)


def test_theorem_flat_finite():
    reps, summary = check_theorem(random_instance(81, 0, "flat"), 1.0, 0)
    assert not violations(reps)
    assert math.isfinite(summary["normalized"]) and summary["ratio"] > 0
    assert any(r.lemma == "theorem-headline" and r.passed is None for r in reps)


# ------------------------------------------------------------------ bilinear restriction
def test_bilinear_boundary_case():
    inst = random_bilinear_instance(0, delta_exp=2, kappa_exp=1)
    assert inst.kappa == pytest.approx(inst.delta ** 0.5)
    assert check_bilinear_restriction(inst).passed


def test_bilinear_rejects_close_intervals():
    with pytest.raises(ValueError):
        random_bilinear_instance(0, delta_exp=2, kappa_exp=2)
    inst = random_bilinear_instance(0, delta_exp=4, kappa_exp=0)
    with pytest.raises(ValueError):
        BilinearInstance(3, 4, inst.resolution, QInterval(4, 0), QInterval(4, 27), inst.f1_hat,
                         inst.f2_hat)
    with pytest.raises(ValueError):
        BilinearInstance(3, 3, inst.resolution, inst.I1, inst.I2, inst.f1_hat, inst.f2_hat)


@given(st.integers(0, 10 ** 6))
@settings(max_examples=15, deadline=None)
def test_bilinear_random(seed):
    inst = random_bilinear_instance(seed)
    assert inst.kappa >= inst.delta ** 0.5
    assert check_bilinear_restriction(inst, seed).passed


def test_theta_orthogonality():
    compared = 0
    for seed in range(10):
        off, diag, n = theta_cross_terms(random_bilinear_instance(seed, delta_exp=4, kappa_exp=0))
        assert diag > 0 and off <= 1e-10
        compared += n > 1
    assert compared >= 5
