import csv
import math
from concurrent.futures import ThreadPoolExecutor
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qlab.counting import (TripleIndex, build_integer_profile_F, count_solutions,
                           count_solutions_brute, cumulative_max, diagonal_count, flat_ratio,
                           k_lower_bound, profile_l6, profile_support_ok, quadrature_oracle,
                           weighted_l6, write_counts_csv, write_klower_csv)
from qlab.grid import inverse_fourier, restrict_frequency
from qlab.qadic import QInterval


def test_small_counts():
    assert [count_solutions(M) for M in (1, 2, 3)] == [1, 20, 93]


def test_literal_sextuple_loop():
    for M in (2, 3):
        n = range(1, M + 1)
        S = sum(1 for s in product(n, repeat=6)
                if s[0] + s[1] + s[2] == s[3] + s[4] + s[5]
                and s[0] ** 2 + s[1] ** 2 + s[2] ** 2 == s[3] ** 2 + s[4] ** 2 + s[5] ** 2)
        assert S == count_solutions(M)


@pytest.mark.parametrize("M", range(1, 13))
def test_matches_brute_force(M):
    assert count_solutions(M) == count_solutions_brute(M)


def test_at_least_diagonal():
    for M in range(1, 30):
        assert count_solutions(M) >= diagonal_count(M)


def test_parallel_count_identical():
    with ThreadPoolExecutor(3) as ex:
        assert count_solutions(57, ex) == count_solutions(57)
    assert count_solutions(57, blocks=1) == count_solutions(57, blocks=13)


def test_weighted_examples():
    assert weighted_l6([1, 0, 0]) == 1
    assert weighted_l6([1, 1]) == 20
    assert isinstance(weighted_l6(np.ones(5, dtype=int)), int)


@given(st.lists(st.integers(0, 1), min_size=1, max_size=9))
@settings(max_examples=40, deadline=None)
def test_indicator_weights_count_subsystem(bits):
    # 0/1 weights count the solutions with every n in the support
    support = [i + 1 for i, b in enumerate(bits) if b]
    M = len(bits)
    expected = 0
    if support:
        from collections import Counter
        keys = Counter((a + b + c, a * a + b * b + c * c)
                       for a in support for b in support for c in support)
        expected = sum(v * v for v in keys.values())
    assert weighted_l6(np.array(bits, dtype=int)) == expected
    assert TripleIndex.build(M).evaluate(np.array(bits, float)) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("M", [2, 3, 5, 8])
def test_weighted_equals_quadrature(M):
    rng = np.random.default_rng(M)
    for _ in range(5):
        a = rng.normal(size=M)
        assert weighted_l6(a) == pytest.approx(quadrature_oracle(a), rel=1e-8)


def test_quadrature_examples():
    assert quadrature_oracle([0, 0, 1.0]) == pytest.approx(1.0, rel=1e-12)
    assert quadrature_oracle([1.0, 1.0]) == pytest.approx(20, rel=1e-10)


def test_shift_invariance():
    # moving every frequency by a constant changes nothing
    rng = np.random.default_rng(11)
    for _ in range(10):
        a = rng.normal(size=4)
        shifted = np.concatenate([np.zeros(3), a])
        assert weighted_l6(shifted) == pytest.approx(weighted_l6(a), rel=1e-12)


def test_flat_ratio_values():
    assert flat_ratio(1) == 1
    assert flat_ratio(2) == pytest.approx(20 ** (1 / 6) / math.sqrt(2), abs=1e-15)
    assert abs(flat_ratio(2) - 1.1652) <= 1e-3


def test_search_dominates_flat():
    assert k_lower_bound(1, iterations=10, restarts=2).best_ratio == pytest.approx(1.0)
    r = k_lower_bound(8, iterations=40, seed=3, restarts=4)
    assert r.best_ratio >= r.flat - 1e-12
    assert r.best_ratio == k_lower_bound(8, iterations=40, seed=3, restarts=4).best_ratio
    assert np.linalg.norm(r.witness) == pytest.approx(1.0)


def test_search_threads_identical():
    with ThreadPoolExecutor(4) as ex:
        a = k_lower_bound(6, iterations=30, seed=1, restarts=6, executor=ex)
    b = k_lower_bound(6, iterations=30, seed=1, restarts=6)
    assert a == b


def test_cumulative_max():
    assert cumulative_max([1.0, 0.5, 2.0, 1.5]) == [1.0, 1.0, 2.0, 2.0]


def test_csv_writers(tmp_path):
    rows = write_counts_csv(tmp_path / "c.csv", 4)
    assert [r[1] for r in rows] == [1, 20, 93, count_solutions(4)]
    with open(tmp_path / "c.csv") as fh:
        got = list(csv.reader(fh))
    assert got[0] == ["M", "S", "flat_ratio"] and got[2][1] == "20"
    res = [k_lower_bound(M, iterations=5, restarts=2) for M in (3, 2)]
    out = write_klower_csv(tmp_path / "k.csv", res)
    assert float(out[1][1]) >= float(out[0][1])


# ------------------------------------------------------------------ integer profile
@pytest.mark.parametrize("t", [1, 2])
def test_integer_profile_support_and_pieces(t):
    q = 3
    rng = np.random.default_rng(t)
    a = rng.normal(size=q ** t)
    p = build_integer_profile_F(t, a)
    assert profile_support_ok(p)
    e = p.resolution
    for n in range(1, q ** t + 1):
        tau = QInterval(t, n % q ** t)
        # exactly one embedded integer per tau
        assert sum(1 for m in range(1, q ** t + 1) if tau.contains_int(m)) == 1
        Ft = inverse_fourier(restrict_frequency(p.f_hat, tau))
        vals = np.abs(Ft.values)
        assert vals.max() == pytest.approx(abs(a[n - 1]), rel=1e-9)
        l2 = float(np.sum(vals ** 2) * Ft.spec.cell_measure)
        assert l2 == pytest.approx(a[n - 1] ** 2 * q ** (2 * e), rel=1e-9)


@pytest.mark.parametrize("t,resolution", [(1, None), (1, 4), (2, None), (2, 6)])
def test_integer_profile_l6_matches_counting(t, resolution):
    rng = np.random.default_rng(10 + t)
    ratios = []
    for _ in range(10):
        a = rng.normal(size=3 ** t)
        p = build_integer_profile_F(t, a, resolution=resolution)
        ratios.append(profile_l6(p) / weighted_l6(a))
    assert np.allclose(ratios, 3.0 ** (2 * p.resolution), rtol=1e-9)


def test_integer_profile_rejects_coarse_cells():
    with pytest.raises(ValueError):
        build_integer_profile_F(2, np.ones(9), resolution=3)
    with pytest.raises(ValueError):
        build_integer_profile_F(2, np.ones(8))
