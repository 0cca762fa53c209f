from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from qlab.geometry import (FrequencyParallelogram, Tube, check_tiling, intersection_bound,
                           parallelogram_kernel, tube_intersection_measure, tube_tiling,
                           uncertainty_check, verify_parallelogram_equality, wave_packets,
                           xi_support_cells, xi_support_mask)
from qlab.grid import GridFunction, GridSpec, inverse_fourier, lp_integral
from qlab.qadic import QInterval, interval_partition


def test_xi_support_counts():
    m = xi_support_mask(9)
    assert m.sum() == 9 and np.all(m.sum(axis=1) == 1)
    cells = xi_support_cells(9)
    assert np.array_equal(np.argwhere(m), cells)
    for n in range(1, 40):
        j, k = n % 9, (n * n) % 9
        assert m[j, k]
    with pytest.raises(ValueError):
        xi_support_cells(27)


@pytest.mark.parametrize("R", [9, 81])
def test_parallelogram_equality(R):
    A = {9: 1, 81: 2}[R]
    for I in interval_partition(A):
        chk = verify_parallelogram_equality(I, R)
        assert chk.equal, chk.witness
        assert len(chk.anchors) == 3 ** (A + 1)


def test_wide_strip_is_curved():
    # over a strip of length q R^-1/2 the sheared description differs
    n, R = 27, 9
    j = np.arange(n)
    strip = j % 1 == 0  # level-0 strip: all of O
    curved = strip[:, None] & ((j[None, :] - (j * j % n)[:, None]) % R == 0)
    line = (2 * 0 * j - 0) % n
    sheared = strip[:, None] & ((j[None, :] - line[:, None]) % R == 0)
    assert not np.array_equal(curved, sheared)


@pytest.mark.parametrize("R", [9, 81])
def test_tiling(R):
    A = {9: 1, 81: 2}[R]
    for I in interval_partition(A):
        chk = check_tiling(I, R)
        assert chk.partition and chk.unions_of_squares
        assert chk.tubes == 3 ** A
        assert set(chk.squares_per_tube) == {3 ** A}


def test_tiling_independent_of_anchor():
    R = 81
    I = QInterval(2, 4)
    base = [T.cell_mask(4) for T in tube_tiling(I, R)]
    for t in range(3):
        J = QInterval(2, 4)
        alt = [Tube(3, 2, 4 + 9 * t, T.anchor).cell_mask(4) for T in tube_tiling(J, R)]
        assert all(np.array_equal(x, y) for x, y in zip(base, alt))


def test_tubes_equal_or_disjoint():
    R = 81
    fam = [Tube.at_scale(5, R, (Fraction(s1, 81), Fraction(s2, 81)))
           for s1 in range(0, 81, 4) for s2 in range(0, 81, 5)]
    masks = {T: T.cell_mask(4) for T in fam}
    for T, U in product(fam[:30], fam[:30]):
        inter = np.logical_and(masks[T], masks[U]).sum()
        if T == U:
            assert inter == R ** 1.5
        else:
            assert inter == 0


def test_tube_contains_matches_mask():
    T = Tube.at_scale(2, 9, (Fraction(1, 9), Fraction(2, 9)))
    m = T.cell_mask(2)
    for i1, i2 in product(range(9), range(9)):
        assert m[i1, i2] == T.contains(Fraction(i1, 9), Fraction(i2, 9))
    assert T.measure == 27 and T.direction == (-4, 1)


def test_intersection_bound_exhaustive_R9():
    R = 9
    seen_equality = False
    for a, b in product(range(R * R), repeat=2):
        T, U = Tube.at_scale(a, R * R), Tube.at_scale(b, R * R)
        meas = tube_intersection_measure(T, U)
        if a == b:
            assert meas == R ** 3
            continue
        bound = intersection_bound(a, b, R)
        assert meas <= bound
        if (2 * (b - a)) % 3:
            assert meas == bound == R * R
            seen_equality = True
    assert seen_equality


def test_intersection_disjoint_translates():
    T = Tube.at_scale(0, 81)
    U = Tube.at_scale(0, 81, (Fraction(1, 81), 0))
    assert tube_intersection_measure(T, U) == 0
    V = Tube.at_scale(0, 81, (0, Fraction(1, 3 ** 8)))
    assert tube_intersection_measure(T, V) == 0


def _random_on_P(I, R, E, rng):
    P = FrequencyParallelogram(I, R)
    spec = GridSpec.square(3, 0, E)
    mask = P.cell_mask(E)
    v = np.zeros(spec.shape, complex)
    v[mask] = rng.standard_normal(mask.sum()) + 1j * rng.standard_normal(mask.sum())
    return inverse_fourier(GridFunction(spec, "frequency", v))


def test_kernel_identity():
    for R, E in [(9, 2), (9, 3), (81, 4)]:
        A = {9: 1, 81: 2}[R]
        for I in interval_partition(A)[:4]:
            f, closed = parallelogram_kernel(I, R, E)
            assert np.max(np.abs(f.values - closed)) < 1e-12
            wp = wave_packets(f, I, R)
            nz = wp.coefficients[wp.coefficients > 1e-12]
            assert np.allclose(nz, R ** -1.5)


def test_uncertainty_and_packets_100_seeds():
    rng = np.random.default_rng(11)
    for seed in range(100):
        R, E = (81, 4) if seed % 2 else (9, 3)
        A = {9: 1, 81: 2}[R]
        I = QInterval(A, int(rng.integers(3 ** A)))
        f = _random_on_P(I, R, E, rng)
        rep = uncertainty_check(f, I, R)
        assert rep.passed, rep
        wp = wave_packets(f, I, R)
        mass = lp_integral(f, 2)
        assert abs(wp.l2_mass() - mass) <= 1e-9 * mass
        assert np.allclose(wp.modulus(), np.abs(f.values), atol=1e-9 * rep.max_abs)


def test_uncertainty_rejects_support_violation():
    rng = np.random.default_rng(0)
    f = _random_on_P(QInterval(1, 0), 9, 2, rng)
    with pytest.raises(ValueError):
        uncertainty_check(f, QInterval(1, 1), 9)


def test_zero_function_packets():
    f = GridFunction.zeros(GridSpec.square(3, 2, 0))
    wp = wave_packets(f, QInterval(1, 2), 9)
    assert np.all(wp.coefficients == 0)
    assert uncertainty_check(f, QInterval(1, 2), 9).passed
