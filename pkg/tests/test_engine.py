import json
import math
from fractions import Fraction

import numpy as np
import pytest

from qlab.engine import (Decomposition, LadderError, ParabolaSignal, broad_set, build_ladder,
                         class_average, dump_state, evaluate_tables, exact_values, high_low,
                         level_set, level_set_bins, lift_table, lift_to_level, omega_decomposition,
                         parabolic_rescale, piece_tables, prune, upsample, whitney,
                         whitney_cover_check)
from qlab.grid import inverse_fourier, lp_integral
from qlab.qadic import QInterval

LAD8 = build_ladder(3 ** 8, 1.0)
LAD4 = build_ladder(3 ** 4, 1.0)


def random_signal(L, seed, q=3):
    rng = np.random.default_rng(seed)
    n = q ** L
    return ParabolaSignal(q, L, rng.normal(size=n) + 1j * rng.normal(size=n))


@pytest.fixture(scope="module")
def sig8():
    return random_signal(8, 0)


@pytest.fixture(scope="module")
def dec8(sig8):
    return Decomposition.of(sig8, LAD8)


# ------------------------------------------------------------------ ladder
def test_ladder_at_3_8():
    lad = LAD8
    assert (lad.A, lad.r, lad.N, lad.J) == (1, 4, 2, 2)
    assert [lad.R_k(k) for k in range(3)] == [1, 81, 6561]
    assert lad.log_R == pytest.approx(8 * math.log(3))
    assert lad.broad_constant == pytest.approx(lad.log_R * 9)


def test_ladder_sandwich():
    for L in (2, 4, 6, 8, 10, 20):
        for eps in (1.0, 0.5):
            try:
                lad = build_ladder(3 ** L, eps)
            except LadderError:
                continue
            logq = L
            assert 3 ** (lad.A * (lad.r - 4)) <= logq < 3 ** (lad.A * lad.r)
            assert 3 ** (lad.N * lad.r) <= 3 ** L < 3 ** ((lad.N + 1) * lad.r)
            assert lad.r % 4 == 0 and lad.A == math.ceil(1 / eps)
            for k in range(lad.N + 1):
                assert lad.level(k) % 2 == 0  # R_k^-1/2 is an even power of 1/q


def test_ladder_rejects():
    with pytest.raises(ValueError):
        build_ladder(3 ** 3, 1.0)
    with pytest.raises(ValueError):
        build_ladder(3 ** 8, 0.0)
    with pytest.raises(LadderError):
        build_ladder(9, 1.0)


# ------------------------------------------------------------------ whitney
def test_whitney_counts_and_measure():
    cells = whitney(LAD8)
    assert sum(c.k == 0 and not c.diagonal for c in cells) == 72
    assert sum(c.k == 1 and not c.diagonal for c in cells) == 648
    assert sum(c.diagonal for c in cells) == 81
    ok, total = whitney_cover_check(LAD8, cells)
    assert ok and total == Fraction(1)
    for c in cells:
        if not c.diagonal:
            assert c.tau != c.tau_prime
            lvl = LAD8.level(c.k)
            assert c.tau.parent(lvl) == c.tau_prime.parent(lvl)


# ------------------------------------------------------------------ tables
def test_piece_tables_match_materialization():
    sig = random_signal(4, 1)
    n = 81
    i = np.arange(n)
    for m in (0, 1, 2):
        T = piece_tables(sig, m)
        nu, nv = T.shape[1:]
        for c in range(3 ** m):
            sub = sig.restrict(QInterval(m, c)).materialize().values
            base = np.exp(2j * np.pi * ((c * i[:, None] + c * c * i[None, :]) % n) / n)
            u = (i[:, None] + 2 * c * i[None, :]) % nu
            v = np.broadcast_to(i[None, :] % nv, u.shape)
            assert np.allclose(base * T[c][u, v], sub, atol=1e-15)


def test_lift_reassembles_parent():
    sig = random_signal(4, 2)
    T0, T1, T2 = (piece_tables(sig, m) for m in (0, 1, 2))
    for c in range(3):
        G = lift_table({cc: T2[cc] for cc in range(c, 9, 3)}, 3, 4, 2, 1, c)
        assert np.allclose(G, T1[c], atol=1e-15)
    assert np.allclose(lift_to_level(T2, 3, 4, 2, 0)[0], T0[0], atol=1e-15)


def test_exact_values_match_materialization():
    sig = random_signal(4, 3)
    full = sig.materialize().values
    dec = Decomposition.of(sig, LAD4)
    cells = np.array([[a, b] for a in range(9) for b in range(9)])
    ev = exact_values(dec, cells, 1)
    t = np.arange(9)
    for n, (a, b) in enumerate(cells):
        assert np.allclose(ev[n], full[a + 9 * t[:, None], b + 9 * t[None, :]].ravel(), atol=1e-15)


def test_moduli_constant_on_squares(dec8):
    # |f_tau_k| is a function of the level(k) square
    T = dec8.tables[1]
    vals = np.abs(evaluate_tables(T[:1], 3, 8, 2, np.array([[5, 7], [100, 3]])))
    assert np.allclose(vals, vals[:, :1], rtol=1e-12)


def test_l2_of_pieces_sums_to_total(dec8, sig8):
    for k in (1, 2):
        assert dec8.l2_squared(k).sum() == pytest.approx(sig8.l2_squared(), rel=1e-12)


# ------------------------------------------------------------------ rescaling
def test_rescale_identity_at_level_zero():
    sig = random_signal(4, 4)
    out = parabolic_rescale(sig, QInterval(0, 0))
    assert out.scale == 1
    assert np.allclose(out.f_hat.values, sig.frequency_grid().values)


def test_rescale_support(sig8):
    m = LAD8.level(1)
    for c in range(3 ** m):
        assert parabolic_rescale(sig8, QInterval(m, c)).support_ok(8 - 2 * m)


def test_rescaled_piece_has_mass_ratio_R_k_to_minus_three_halves(dec8, sig8):
    m = LAD8.level(1)
    for c in (0, 4):
        out = parabolic_rescale(sig8, QInterval(m, c))
        mass = lp_integral(inverse_fourier(out.f_hat), 2)
        assert mass / dec8.l2_squared(1)[c] == pytest.approx(3.0 ** (-3 * m), rel=1e-9)


# ------------------------------------------------------------------ pruning
def test_prune_no_op_when_lambda_large(dec8):
    st = prune(dec8, math.inf)
    for k in (1, 2):
        assert np.array_equal(st.pruned[k], dec8.tables[k])
        assert np.allclose(st.unpruned[k], dec8.tables[k])
    # g_k is the square function of the unpruned pieces
    g1 = sum(x ** 2 for x in dec8.moduli_on(1, 1))
    assert np.allclose(st.g[1], g1)


def test_prune_zero_lambda(dec8):
    st = prune(dec8, 0.0)
    for k in (1, 2):
        assert not np.any(st.pruned[k])


@pytest.mark.parametrize("frac", [0.02, 0.3, 0.8])
def test_prune_invariants(dec8, frac):
    lam = frac * np.abs(dec8.tables[2]).max()
    st = prune(dec8, lam)
    for k in (1, 2):
        assert np.all(np.abs(st.pruned[k]) <= np.abs(st.unpruned[k]) + 1e-300)
        assert np.all(st.g[k] >= 0)
    total = dec8.signal.l2_squared()
    assert st.l2_pruned(1) <= st.l2_pruned(2) * (1 + 1e-12) <= total * (1 + 1e-12)


def test_high_low_methods_agree(dec8):
    st = prune(dec8, 0.5 * np.abs(dec8.tables[2]).max())
    la, ha = high_low(st, 1, "average")
    lf, hf = high_low(st, 1, "fourier")
    assert np.allclose(la, lf, atol=1e-12 * st.g[1].max())
    assert np.allclose(st.g[1], upsample(la, st.g[1].shape[0]) + ha)


def test_low_lemma_equality_without_pruning(dec8):
    st = prune(dec8, math.inf)
    assert np.allclose(st.g_low[1], st.g[2], rtol=1e-10)


def test_single_child_has_no_high_part():
    rng = np.random.default_rng(5)
    c = np.zeros(3 ** 8, dtype=complex)
    c[7::81] = rng.normal(size=81)  # one tau_2
    dec = Decomposition.of(ParabolaSignal(3, 8, c), LAD8)
    st = prune(dec, math.inf)
    assert np.abs(st.g_high[1]).max() <= 1e-12 * st.g[1].max()


def test_omega_partition(dec8):
    st = prune(dec8, 0.3 * np.abs(dec8.tables[2]).max())
    om = omega_decomposition(st)
    masks = om.masks(3)
    total = sum(m.measure for m in masks)
    assert total == 3.0 ** 16
    stack = np.stack([m.bits for m in masks])
    assert np.all(stack.sum(axis=0) == 1)
    # Omega_1 is a union of side R_1^(1/2) squares: it is the level(1) grid itself
    assert masks[0].side_exp == LAD8.level(1)


def test_omega_region_is_coarse_union():
    lad = build_ladder(3 ** 8, 1.0)
    dec = Decomposition.of(random_signal(8, 9), lad)
    st = prune(dec, math.inf)
    om = omega_decomposition(st)
    # built from the level-1 test, which is constant on level-1 squares
    g, gh = st.g[1], st.g_high[1]
    assert np.array_equal(om.omega[1], g <= lad.log_R * gh)


# ------------------------------------------------------------------ broad sets and level sets
def test_broad_set_empty_for_single_child():
    c = np.zeros(81, dtype=complex)
    c[4::9] = 1.0  # one tau_1
    dec = Decomposition.of(ParabolaSignal(3, 4, c), LAD4)
    B = broad_set(dec, 0, 0)
    f = np.abs(dec.signal.materialize().values)
    assert not np.any(B.bits & (f > 0))


def test_broad_set_level_one_is_coarse(dec8):
    B = broad_set(dec8, 1, 3)
    assert B.bits.shape == (3 ** 6, 3 ** 6) and B.side_exp == LAD8.level(1)


def test_level_sets_zero_signal():
    dec = Decomposition.of(ParabolaSignal(3, 8, np.zeros(3 ** 8, complex)), LAD8)
    for a in level_set_bins(dec).edges:
        assert not level_set(dec, a).bits.any()
    assert not level_set(dec, 1.0).bits.any()


def test_level_set_bins_disjoint(dec8):
    bins = level_set_bins(dec8)
    assert len(bins.edges) == 13
    masks = [level_set(dec8, a).bits for a in bins.edges]
    assert np.all(np.sum(masks, axis=0) <= 1)


def test_class_average_roundtrip():
    rng = np.random.default_rng(0)
    a = rng.random((9, 9))
    up = upsample(a, 27)
    assert np.allclose(class_average(up, 9), a)


def test_dump_state_json(dec8):
    st = prune(dec8, 0.5 * np.abs(dec8.tables[2]).max())
    doc = json.loads(dump_state(st, omega_decomposition(st)))
    assert doc["ladder"]["J"] == 2
    assert set(doc["packets"]) == {"1", "2"}
    assert dump_state(st) == dump_state(st)
