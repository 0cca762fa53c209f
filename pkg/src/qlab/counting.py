"""Solution counts of the sextuple system

    n1 + n2 + n3 = n4 + n5 + n6,   n1^2 + n2^2 + n3^2 = n4^2 + n5^2 + n6^2,

the weighted sextuple sums (the sixth power of the L^6 norm on the torus),
and lower bounds for the L^6 restriction constant K(M).
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import Executor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .grid import GridFunction, GridSpec, inverse_fourier, lp_integral


# ------------------------------------------------------------------ keys
def _triple_keys(M: int, lead: np.ndarray) -> np.ndarray:
    """Keys of all ordered triples (n1, n2, n3) with n1 in ``lead``."""
    n = np.arange(1, M + 1, dtype=np.int64)
    s1 = lead[:, None, None] + n[None, :, None] + n[None, None, :]
    s2 = (lead * lead)[:, None, None] + (n * n)[None, :, None] + (n * n)[None, None, :]
    return (s1 * (3 * M * M + 1) + s2).ravel()


def _count_block(M: int, lead: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.unique(_triple_keys(M, lead), return_counts=True)


def count_solutions(M: int, executor: Executor | None = None, blocks: int = 8) -> int:
    """S(M) = sum over keys (sum n, sum n^2) of (number of triples)^2."""
    if M < 1:
        raise ValueError("M must be positive")
    leads = [b for b in np.array_split(np.arange(1, M + 1, dtype=np.int64), min(blocks, M)) if b.size]
    if executor is None:
        parts = [_count_block(M, b) for b in leads]
    else:
        parts = list(executor.map(_count_block, [M] * len(leads), leads))
    keys = np.concatenate([p[0] for p in parts])
    counts = np.concatenate([p[1] for p in parts])
    order = np.argsort(keys, kind="stable")
    keys, counts = keys[order], counts[order]
    starts = np.flatnonzero(np.r_[True, keys[1:] != keys[:-1]])
    merged = np.add.reduceat(counts, starts)
    if M ** 6 < 2 ** 62:  # sum of squared counts is at most M^6
        return int(np.dot(merged, merged))
    return sum(int(c) ** 2 for c in merged.tolist())


def count_solutions_brute(M: int) -> int:
    """O(M^6) oracle: for each (n1..n5), n6 is forced by the linear equation."""
    n = np.arange(1, M + 1)
    total = 0
    for a in n:
        for b in n:
            for c in n:
                s1, s2 = a + b + c, a * a + b * b + c * c
                d = n[:, None, None]
                e = n[None, :, None]
                f = n[None, None, :]
                ok = (d + e + f == s1) & (d * d + e * e + f * f == s2)
                total += int(ok.sum())
    return total


def diagonal_count(M: int) -> int:
    """Sextuples whose second triple permutes the first."""
    distinct = M * (M - 1) * (M - 2)
    two_equal = 3 * M * (M - 1)
    return distinct * 6 + two_equal * 3 + M


# ------------------------------------------------------------------ weighted sums
@dataclass(frozen=True, eq=False)
class TripleIndex:
    """Sorted triples n1 <= n2 <= n3 with their multiplicities and the id of
    their (sum, sum of squares) key, for repeated weighted evaluations."""

    M: int
    idx: np.ndarray   # (T, 3) zero-based
    mult: np.ndarray  # number of orderings
    key_id: np.ndarray
    n_keys: int

    @classmethod
    def build(cls, M: int) -> "TripleIndex":
        n = np.arange(M)
        a, b, c = np.meshgrid(n, n, n, indexing="ij")
        keep = (a <= b) & (b <= c)
        a, b, c = a[keep], b[keep], c[keep]
        mult = np.where((a == b) & (b == c), 1, np.where((a == b) | (b == c), 3, 6))
        s1 = a + b + c + 3
        s2 = (a + 1) ** 2 + (b + 1) ** 2 + (c + 1) ** 2
        key = s1.astype(np.int64) * (3 * M * M + 1) + s2
        uniq, inv = np.unique(key, return_inverse=True)
        return cls(M, np.stack([a, b, c], axis=1), mult, inv.ravel(), uniq.size)

    def evaluate(self, a: np.ndarray) -> float:
        w = a[self.idx[:, 0]] * a[self.idx[:, 1]] * a[self.idx[:, 2]] * self.mult
        if np.iscomplexobj(w):
            s = (np.bincount(self.key_id, w.real, self.n_keys)
                 + 1j * np.bincount(self.key_id, w.imag, self.n_keys))
            return float(np.sum(np.abs(s) ** 2))
        s = np.bincount(self.key_id, w, self.n_keys)
        return float(np.dot(s, s))


def weighted_l6(a: Sequence) -> float | int:
    """Sum over solution sextuples of a_n1 a_n2 a_n3 conj(a_n4 a_n5 a_n6).

    Integer coefficients give an exact integer.
    """
    arr = np.asarray(a)
    M = arr.size
    if M == 0:
        raise ValueError("empty coefficient sequence")
    if np.issubdtype(arr.dtype, np.integer):
        keys = _triple_keys(M, np.arange(1, M + 1, dtype=np.int64))
        vals = [int(x) for x in arr]
        n = range(M)
        w = np.array([vals[x] * vals[y] * vals[z] for x in n for y in n for z in n], dtype=object)
        uniq, inv = np.unique(keys, return_inverse=True)
        sums = [0] * uniq.size
        for i, v in zip(inv.ravel().tolist(), w.tolist()):
            if v:
                sums[i] += v
        return sum(s * s for s in sums)
    return TripleIndex.build(M).evaluate(arr.astype(complex if np.iscomplexobj(arr) else float))


def torus_samples(a: Sequence) -> np.ndarray:
    """sum_n a_n e(n x1 + n^2 x2) on the (3M+1) x (3M^2+1) grid of [0,1)^2."""
    arr = np.asarray(a, dtype=complex)
    M = arr.size
    n1, n2 = 3 * M + 1, 3 * M * M + 1
    spec = np.zeros((n1, n2), dtype=complex)
    n = np.arange(1, M + 1)
    np.add.at(spec, (n % n1, (n * n) % n2), arr)
    return np.fft.ifft2(spec) * (n1 * n2)


def quadrature_oracle(a: Sequence, max_points: int = 50_000_000) -> float:
    """Exact torus integral of |P|^6: the cube of P has degrees below the grid
    size in each variable, so the sample mean of |P^3|^2 is exact."""
    M = len(a)
    if (3 * M + 1) * (3 * M * M + 1) > max_points:
        raise ValueError("quadrature grid too large")
    P = torus_samples(a)
    return float(np.mean(np.abs(P ** 3) ** 2))


# ------------------------------------------------------------------ K(M) search
def flat_ratio(M: int, S: int | None = None) -> float:
    S = count_solutions(M) if S is None else S
    return S ** (1 / 6) / math.sqrt(M)


def ratio(index: TripleIndex, a: np.ndarray) -> float:
    den = float(np.dot(a, a))
    if den == 0:
        return 0.0
    return index.evaluate(a) ** (1 / 6) / math.sqrt(den)


def _ascend(index: TripleIndex, a: np.ndarray, iterations: int) -> tuple[float, np.ndarray]:
    best = ratio(index, a)
    step = 0.5
    it = 0
    while it < iterations and step > 1e-6:
        improved = False
        for i in range(a.size):
            for factor in (1 + step, 1 / (1 + step)):
                trial = a.copy()
                trial[i] *= factor
                val = ratio(index, trial)
                it += 1
                if val > best:
                    best, a, improved = val, trial, True
                    break
            if it >= iterations:
                break
        if not improved:
            step /= 2
    return best, a


@dataclass(frozen=True)
class SearchResult:
    M: int
    best_ratio: float
    witness: tuple[float, ...]
    flat: float
    seed: int
    iterations: int


def _restart(args: tuple) -> tuple[float, np.ndarray]:
    index, start, iterations = args
    return _ascend(index, start, iterations)


def k_lower_bound(M: int, iterations: int = 200, seed: int = 0, restarts: int = 32,
                  executor: Executor | None = None) -> SearchResult:
    """Best ratio (weighted_l6)^(1/6) / ||a||_2 found by coordinate ascent
    from the flat sequence and ``restarts - 1`` random positive starts."""
    if M < 1:
        raise ValueError("M must be positive")
    index = TripleIndex.build(M)
    streams = np.random.SeedSequence(seed).spawn(restarts)
    starts = [np.ones(M)] + [np.random.default_rng(s).uniform(0.1, 1.0, M) for s in streams[1:]]
    jobs = [(index, s, iterations) for s in starts]
    results = list(executor.map(_restart, jobs)) if executor else [_restart(j) for j in jobs]
    flat = ratio(index, np.ones(M))
    best_i = max(range(len(results)), key=lambda i: (results[i][0], -i))
    best, wit = results[best_i]
    best = max(best, flat)
    return SearchResult(M, best, tuple(float(x) for x in wit / np.linalg.norm(wit)), flat,
                        seed, iterations)


def cumulative_max(values: Sequence[float]) -> list[float]:
    out, cur = [], -math.inf
    for v in values:
        cur = max(cur, v)
        out.append(cur)
    return out


# ------------------------------------------------------------------ integer profile
@dataclass(frozen=True, eq=False)
class IntegerProfile:
    t: int
    q: int
    resolution: int   # frequency cells have side q**-resolution
    coeffs: np.ndarray
    f_hat: GridFunction

    @property
    def M(self) -> int:
        return self.q ** self.t

    @property
    def box_measure(self) -> float:
        return float(self.q) ** (2 * self.resolution)


def build_integer_profile_F(t: int, a: Sequence, q: int = 3, resolution: int | None = None
                            ) -> IntegerProfile:
    """F^ = sum_n a_n q**(2e) 1[cell of side q**-e around (n, n^2)], n = 1..q^t.

    The default e = 2t + 1 is the coarsest resolution at which the integer
    system is the only source of cancellation (|sum of squares| < 3 q^(2t)).
    """
    M = q ** t
    arr = np.asarray(a, dtype=complex)
    if arr.size != M:
        raise ValueError(f"need {M} coefficients")
    e = 2 * t + 1 if resolution is None else resolution
    if e < 2 * t:
        raise ValueError("cells coarser than 1/R leave the parabola neighbourhood")
    spec = GridSpec.square(q, 0, e)
    vals = np.zeros(spec.shape, dtype=complex)
    n = np.arange(1, M + 1)
    Q = q ** e
    np.add.at(vals, (n % Q, (n * n) % Q), arr * float(q) ** (2 * e))
    return IntegerProfile(t, q, e, arr, GridFunction(spec, "frequency", vals))


def profile_support_ok(p: IntegerProfile) -> bool:
    """Every nonzero cell lies in the 1/R neighbourhood of the parabola."""
    R = p.q ** (2 * p.t)
    j, k = np.nonzero(p.f_hat.values)
    return bool(np.all((k - j * j) % R == 0))


def profile_l6(p: IntegerProfile) -> float:
    return lp_integral(inverse_fourier(p.f_hat), 6)


# ------------------------------------------------------------------ CSV
def write_counts_csv(path: str | Path, max_M: int, executor: Executor | None = None) -> list[tuple]:
    rows = []
    for M in range(1, max_M + 1):
        S = count_solutions(M, executor)
        rows.append((M, S, f"{flat_ratio(M, S):.12f}"))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["M", "S", "flat_ratio"])
        w.writerows(rows)
    return rows


def write_klower_csv(path: str | Path, results: Sequence[SearchResult]) -> list[tuple]:
    curve = cumulative_max([r.best_ratio for r in results])
    rows = [(r.M, f"{c:.12f}", r.seed, r.iterations) for r, c in zip(results, curve)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["M", "best_ratio", "seed", "iterations"])
        w.writerows(rows)
    return rows
