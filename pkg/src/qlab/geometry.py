"""The parabola neighbourhood, frequency parallelograms, their dual tubes and
the tilings by tubes.

Scales are powers of q.  A scale R = q**(2A) has square root q**A; a base
interval of length R**-1/2 is a level-A QInterval.  On the unit-cell grid of
the box |x|, |y| <= q**E the point with indices (i1, i2) is
(i1 q**-E, i2 q**-E), so every tube condition turns into a congruence on
integers.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .grid import GridFunction, GridSpec, forward_fourier, inverse_fourier
from .qadic import QInterval, check_prime, log_q, qabs_frac, reduce_mod_ball


def half_log(R: int, q: int) -> int:
    """A with R = q**(2A); rejects R outside q**(2N)."""
    e = log_q(R, q)
    if e % 2:
        raise ValueError(f"R = {R} is not an even power of {q}")
    return e // 2


def valuation_array(n: np.ndarray, q: int, cap: int) -> np.ndarray:
    """min(v_q(n), cap) elementwise, with v_q(0) = cap."""
    n = np.asarray(n, dtype=np.int64)
    v = np.zeros(n.shape, dtype=np.int64)
    rest = n.copy()
    for _ in range(cap):
        m = (rest % q == 0) & (v < cap)
        if not m.any():
            break
        v[m] += 1
        rest[m] //= q
    return np.minimum(v, cap)


# ------------------------------------------------------------------ frequency side
def xi_support_mask(R: int, q: int = 3) -> np.ndarray:
    """Boolean table over (xi, eta) cells of O x O at resolution 1/R, true on
    the cells meeting the 1/R-neighbourhood of the parabola (by enumeration)."""
    half_log(R, q)  # R must be an even power of q
    j = np.arange(R, dtype=np.int64)
    # |eta - xi^2| <= 1/R  <=>  k = j^2 mod R
    diff = (j[None, :] - (j * j)[:, None]) % R
    return diff == 0


def xi_support_cells(R: int, q: int = 3) -> np.ndarray:
    """(j, j^2 mod R) for every xi-cell j, as an (R, 2) integer array."""
    half_log(R, q)
    j = np.arange(R, dtype=np.int64)
    return np.stack([j, (j * j) % R], axis=1)


@dataclass(frozen=True)
class FrequencyParallelogram:
    """{(xi, eta): xi in I, |eta - xi^2| <= 1/R} with |I| = R**-1/2."""

    interval: QInterval
    R: int

    def __post_init__(self) -> None:
        A = half_log(self.R, self.interval.q)
        if self.interval.level != A:
            raise ValueError("base interval must have length R**-1/2")

    @property
    def q(self) -> int:
        return self.interval.q

    @property
    def anchor(self) -> int:
        return self.interval.residue

    def cell_mask(self, resolution_exp: int) -> np.ndarray:
        """Membership of the cells (j, k) of O x O at resolution q**-resolution_exp."""
        q, e = self.q, log_q(self.R, self.q)
        if resolution_exp < e:
            raise ValueError("resolution coarser than 1/R")
        n = q ** resolution_exp
        j = np.arange(n, dtype=np.int64)
        in_i = (j - self.anchor) % self.interval.modulus == 0
        close = ((j[None, :] - (j * j % n)[:, None]) % q ** e) == 0
        return in_i[:, None] & close

    def sheared_mask(self, a: int, resolution_exp: int) -> np.ndarray:
        """{|xi - a| <= R**-1/2, |eta - 2 a xi + a^2| <= 1/R} on the same cells."""
        q, e = self.q, log_q(self.R, self.q)
        n = q ** resolution_exp
        j = np.arange(n, dtype=np.int64)
        near = (j - a) % self.interval.modulus == 0
        line = (2 * a * j - a * a) % n
        close = ((j[None, :] - line[:, None]) % q ** e) == 0
        return near[:, None] & close


@dataclass(frozen=True)
class ParallelogramCheck:
    equal: bool
    anchors: tuple[int, ...]
    cells: int
    witness: tuple[int, int, int] | None = None  # (a, j, k) of the first mismatch


def verify_parallelogram_equality(interval: QInterval, R: int, extra: int = 1) -> ParallelogramCheck:
    """Exhaustive cell comparison of the curved and sheared descriptions for
    every anchor a in the interval, at resolution q**-(log_q R + extra)."""
    P = FrequencyParallelogram(interval, R)
    res = log_q(R, P.q) + extra
    curved = P.cell_mask(res)
    n = P.q ** res
    anchors = tuple(range(interval.residue, n, interval.modulus))
    for a in anchors:
        bad = np.argwhere(P.sheared_mask(a, res) != curved)
        if len(bad):
            j, k = bad[0]
            return ParallelogramCheck(False, anchors, curved.size, (a, int(j), int(k)))
    return ParallelogramCheck(True, anchors, curved.size)


# ------------------------------------------------------------------ tubes
@dataclass(frozen=True)
class Tube:
    """{(x, y): |x - s1 + 2a(y - s2)| <= R**1/2, |y - s2| <= R}.

    The anchor is stored in canonical form (s2 reduced below q**-2A, then s1
    reduced below q**-A after shearing), so two tubes of one family are equal
    exactly when their fields are.
    """

    q: int
    A: int
    a: int
    anchor: tuple[Fraction, Fraction] = (Fraction(0), Fraction(0))

    def __post_init__(self) -> None:
        check_prime(self.q)
        if self.A < 0:
            raise ValueError("scale exponent must be nonnegative")
        a = self.a % self.q ** self.A if self.A else 0
        s1, s2 = (Fraction(s) for s in self.anchor)
        t2 = reduce_mod_ball(s2, -2 * self.A, self.q)
        t1 = reduce_mod_ball(s1 - 2 * a * (s2 - t2), -self.A, self.q)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "anchor", (t1, t2))

    @classmethod
    def at_scale(cls, a: int, R: int, anchor=(0, 0), q: int = 3) -> "Tube":
        return cls(q, half_log(R, q), a, (Fraction(anchor[0]), Fraction(anchor[1])))

    @property
    def R(self) -> int:
        return self.q ** (2 * self.A)

    @property
    def measure(self) -> Fraction:
        return Fraction(self.q) ** (3 * self.A)

    @property
    def direction(self) -> tuple[int, int]:
        return (-2 * self.a, 1)

    def contains(self, x, y) -> bool:
        s1, s2 = self.anchor
        x, y = Fraction(x), Fraction(y)
        w = Fraction(self.q) ** self.A
        return (qabs_frac(x - s1 + 2 * self.a * (y - s2), self.q) <= w
                and qabs_frac(y - s2, self.q) <= w * w)

    def label(self, i1: np.ndarray, i2: np.ndarray, E: int) -> tuple[np.ndarray, np.ndarray]:
        """Tube index of the unit cells (i1, i2) of the box |x|, |y| <= q**E for
        the translates of this tube's family (anchor ignored)."""
        if E < 2 * self.A:
            raise ValueError("box smaller than a tube")
        m1, m2 = self.q ** (E - self.A), self.q ** (E - 2 * self.A)
        return (i1 + 2 * self.a * i2) % m1, i2 % m2

    def cell_mask(self, E: int) -> np.ndarray:
        """Membership of the unit cells of the box |x|, |y| <= q**E."""
        n = self.q ** E
        i = np.arange(n, dtype=np.int64)
        i1, i2 = i[:, None], i[None, :]
        s1, s2 = self.anchor
        # anchor in index units; a tube outside the box gives an empty mask
        c1, c2 = s1 * n, s2 * n
        if c1.denominator != 1 or c2.denominator != 1:
            raise ValueError("anchor is finer than the unit grid")
        u, v = self.label(i1 - int(c1), i2 - int(c2), E)
        return (u == 0) & (v == 0)


def tube_tiling(interval: QInterval, R: int, corner=(0, 0)) -> list[Tube]:
    """Partition of the side-R square about ``corner`` into translates of the
    tube dual to (interval, R): shifts (s, 0) with s running over the digit
    block q**-2A .. q**-A-1, sheared by the interval's anchor."""
    q = interval.q
    A = half_log(R, q)
    if interval.level != A:
        raise ValueError("interval length must be R**-1/2")
    c1, c2 = (Fraction(c) for c in corner)
    step = Fraction(1, q ** (2 * A))
    return [Tube(q, A, interval.residue, (c1 + w * step, c2)) for w in range(q ** A)]


@dataclass(frozen=True)
class TilingCheck:
    partition: bool
    tubes: int
    squares_per_tube: tuple[int, ...]
    unions_of_squares: bool


def check_tiling(interval: QInterval, R: int) -> TilingCheck:
    """Exhaustive unit-cell check of the tiling of {|x|, |y| <= R}."""
    tubes = tube_tiling(interval, R)
    A = tubes[0].A
    E = 2 * A
    cover = np.zeros((R, R), dtype=np.int64)
    counts = []
    unions = True
    side = interval.q ** A
    for T in tubes:
        m = T.cell_mask(E)
        cover += m
        # squares of side R**1/2 are the classes (i1, i2) mod q**A
        blocks = m.reshape(R // side, side, R // side, side)
        per_square = blocks.sum(axis=(0, 2))
        full = per_square == (R // side) ** 2
        unions &= bool(np.all(full | (per_square == 0)))
        counts.append(int(full.sum()))
    return TilingCheck(bool(np.all(cover == 1)), len(tubes), tuple(counts), unions)


def tube_intersection_measure(T: Tube, U: Tube) -> Fraction:
    """Exact Haar measure of T and U (same scale) by enumerating the squares
    of side R**1/2 in the side-R square containing T."""
    if (T.q, T.A) != (U.q, U.A):
        raise ValueError("tubes must share q and scale")
    q, A = T.q, T.A
    big = Fraction(q) ** (2 * A)
    (s1, s2), (t1, t2) = T.anchor, U.anchor
    if qabs_frac(s1 - t1, q) > big or qabs_frac(s2 - t2, q) > big:
        return Fraction(0)
    n = q ** A
    d = (s1 - t1) + 2 * U.a * (s2 - t2)
    D = d * q ** (2 * A)
    assert D.denominator == 1
    j = np.arange(n, dtype=np.int64)
    i = (-2 * T.a * j) % n  # the square of T in row j
    hit = (int(D) + i + 2 * U.a * j) % n == 0
    return int(hit.sum()) * Fraction(q) ** (2 * A)


def intersection_bound(a: int, b: int, R: int, q: int = 3) -> Fraction:
    """R^2/|b - a| for the width-R, length-R^2 tubes."""
    return Fraction(R * R) / qabs_frac(Fraction(b - a), q)


# ------------------------------------------------------------------ uncertainty / wave packets
def _tube_index(spec: GridSpec, interval: QInterval, R: int) -> tuple[np.ndarray, int]:
    q = spec.q
    A = half_log(R, q)
    ax = spec.axes
    if ax[0] != ax[1] or ax[0].cell != 0:
        raise ValueError("expects the unit-cell grid of a square box")
    E = ax[0].extent
    T = Tube(q, A, interval.residue)
    i = np.arange(q ** E, dtype=np.int64)
    u, v = T.label(i[:, None], i[None, :], E)
    nv = q ** (E - 2 * A)
    return u * nv + v, q ** (E - A) * nv


def fourier_support_violation(f: GridFunction, P: FrequencyParallelogram) -> float:
    """Largest |f^| outside P relative to max |f^|."""
    F = forward_fourier(f)
    fax = F.spec.axes
    res = fax[0].cell
    if fax[0].extent > 0 or fax[1].extent > 0:
        raise ValueError("frequency box must lie in O x O")
    q = P.q
    # frequency point j q^-E_f with E_f <= 0 -> fold onto the resolution grid of O
    j0 = (np.arange(F.spec.shape[0]) * q ** (-fax[0].extent)) % q ** res
    j1 = (np.arange(F.spec.shape[1]) * q ** (-fax[1].extent)) % q ** res
    inside = P.cell_mask(res)[np.ix_(j0, j1)]
    peak = float(np.max(np.abs(F.values))) or 1.0
    out = np.abs(F.values[~inside])
    return float(out.max() / peak) if out.size else 0.0


@dataclass(frozen=True)
class UncertaintyReport:
    max_deviation: float
    max_abs: float
    tubes: int
    support_violation: float
    passed: bool


def uncertainty_check(f: GridFunction, interval: QInterval, R: int,
                      tol: float = 1e-9) -> UncertaintyReport:
    """Per tube of the family dual to (interval, R): spread of |f|."""
    P = FrequencyParallelogram(interval, R)
    viol = fourier_support_violation(f, P)
    if viol > tol:
        raise ValueError(f"Fourier support leaves the parallelogram (relative mass {viol:.2e})")
    idx, ntubes = _tube_index(f.spec, interval, R)
    a = np.abs(f.values).ravel()
    idx = idx.ravel()
    hi = np.full(ntubes, -np.inf)
    lo = np.full(ntubes, np.inf)
    np.maximum.at(hi, idx, a)
    np.minimum.at(lo, idx, a)
    dev = float(np.max(hi - lo))
    peak = float(a.max())
    return UncertaintyReport(dev, peak, ntubes, viol, dev <= tol * max(peak, 1e-300))


def parallelogram_kernel(interval: QInterval, R: int, E: int) -> tuple[GridFunction, np.ndarray]:
    """Inverse transform of 1_P on the unit grid of |x|, |y| <= q**E and the
    closed form R**-3/2 chi(a x + a^2 y) 1_T from the uncertainty argument."""
    P = FrequencyParallelogram(interval, R)
    q = P.q
    spec = GridSpec.square(q, 0, E)  # frequency grid of O x O at resolution q**-E
    F = GridFunction(spec, "frequency", P.cell_mask(E).astype(complex))
    f = inverse_fourier(F)
    n = q ** E
    i = np.arange(n, dtype=np.int64)
    a = interval.residue
    phase = (a * i[:, None] + (a * a % n) * i[None, :]) % n
    T = Tube(q, half_log(R, q), a)
    closed = R ** -1.5 * np.exp(2j * np.pi * phase / n) * T.cell_mask(E)
    return f, closed


@dataclass(frozen=True)
class WavePackets:
    """Constant moduli c_T of f on the tubes of one family, indexed by the
    tube labels (u, v) of Tube.label flattened as u * n_v + v."""

    interval: QInterval
    R: int
    coefficients: np.ndarray
    tube_measure: float
    index: np.ndarray

    def modulus(self) -> np.ndarray:
        return self.coefficients[self.index]

    def l2_mass(self) -> float:
        return float(np.sum(self.coefficients ** 2) * self.tube_measure)


def wave_packets(f: GridFunction, interval: QInterval, R: int, tol: float = 1e-9) -> WavePackets:
    rep = uncertainty_check(f, interval, R, tol)
    if not rep.passed:
        raise ValueError("|f| is not constant on the tubes")
    idx, ntubes = _tube_index(f.spec, interval, R)
    a = np.abs(f.values)
    sums = np.bincount(idx.ravel(), weights=a.ravel(), minlength=ntubes)
    cells = np.bincount(idx.ravel(), minlength=ntubes)
    c = sums / np.maximum(cells, 1)
    meas = float(Fraction(f.spec.q) ** (3 * half_log(R, f.spec.q)))  # unit cells
    return WavePackets(interval, R, c, meas, idx)
