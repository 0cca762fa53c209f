"""Multiscale machinery: scale ladder, Whitney cells, frequency pieces as
tube tables, parabolic rescaling, broad sets, pruning, square functions,
high/low split and the high/low regions.

Working grid.  A signal with Fourier support in the 1/q**L neighbourhood of
the parabola, at frequency resolution q**-L, is a list of coefficients
c_j, one for each xi-cell j mod q**L (its eta-cell is j^2 mod q**L).  It
lives in the box |x|, |y| <= q**L, is constant on unit cells, and at the
cell (i1, i2) equals

    f(i1, i2) = q**(-2L) sum_j c_j e((j i1 + j^2 i2) / q**L).

The piece over a level-m interval with residue c factors as

    f_tau(i1, i2) = e((c i1 + c^2 i2) / q**L) H(u, v),
    u = (i1 + 2c i2) mod q**(L-m),   v = i2 mod q**(L-2m),

so |f_tau| is a function of (u, v) and every (u, v) class is one tube of
the family dual to (tau, q**(2m)).  The table H is the wave-packet list.

Squares of side q**s in the box are the classes of i mod q**(L-s); the
"level-m grid" is the grid of squares of side q**m, indexed by
a in [0, q**(L-m))**2.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np
import scipy.fft as sfft

from .grid import GridFunction, GridSpec, inverse_fourier
from .qadic import QInterval, check_prime, log_q

TWO_PI = 2.0 * math.pi


# ------------------------------------------------------------------ ladder
class LadderError(ValueError):
    """R is too small for the requested epsilon."""


@dataclass(frozen=True)
class ScaleLadder:
    q: int
    eps: float
    A: int
    r: int
    N: int
    R: int
    J: int

    @property
    def log_R(self) -> float:
        return math.log(self.R)

    @property
    def L(self) -> int:
        """log_q of the working scale R_J."""
        return self.J * self.r

    def R_k(self, k: int) -> int:
        return self.q ** (k * self.r)

    def level(self, k: int) -> int:
        """Interval level of tau_k (|tau_k| = R_k**-1/2)."""
        return k * self.r // 2

    @property
    def broad_constant(self) -> float:
        """(log R) q**(r/2)."""
        return self.log_R * self.q ** (self.r / 2)

    @property
    def narrow_factor(self) -> float:
        """(1 - 1/log R)**-1."""
        return 1.0 / (1.0 - 1.0 / self.log_R)


def build_ladder(R: int, eps: float, q: int = 3, J: int | None = None) -> ScaleLadder:
    check_prime(q)
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    e = log_q(R, q)
    if e % 2 or e == 0:
        raise ValueError(f"R must be an even positive power of {q}")
    A = math.ceil(1 / eps - 1e-12)
    r = 4
    while not e < q ** (A * r):
        r += 4
    if not q ** (A * (r - 4)) <= e:
        raise LadderError(f"no admissible r for R = {q}^{e}, eps = {eps}")
    N = e // r
    if N < 1:
        raise LadderError(f"R = {q}^{e} is below the first ladder scale q^{r}")
    J = N if J is None else J
    if not 1 <= J <= N:
        raise ValueError(f"working level J must lie in 1..{N}")
    return ScaleLadder(q, eps, A, r, N, R, J)


# ------------------------------------------------------------------ Whitney cells
@dataclass(frozen=True, order=True)
class WhitneyCell:
    k: int  # N for the diagonal cells
    tau: QInterval
    tau_prime: QInterval

    @property
    def measure(self) -> Fraction:
        return self.tau.length * self.tau_prime.length

    @property
    def diagonal(self) -> bool:
        return self.tau == self.tau_prime


def whitney(ladder: ScaleLadder) -> list[WhitneyCell]:
    """Off-diagonal cells tau_{k+1} x tau'_{k+1} (distinct, same parent
    tau_k) for k < N, then the diagonal cells tau_N x tau_N."""
    q, out = ladder.q, []
    for k in range(ladder.N):
        m, m1 = ladder.level(k), ladder.level(k + 1)
        for c in range(q ** m):
            kids = QInterval(m, c, q).children(m1)
            out.extend(WhitneyCell(k, s, t) for s in kids for t in kids if s != t)
    mN = ladder.level(ladder.N)
    out.extend(WhitneyCell(ladder.N, t, t) for t in (QInterval(mN, c, q) for c in range(q ** mN)))
    return out


def whitney_cover_check(ladder: ScaleLadder, cells: list[WhitneyCell]) -> tuple[bool, Fraction]:
    """Every residue pair mod q**level(N) lies in exactly one cell; also the
    exact total measure."""
    n = ladder.q ** ladder.level(ladder.N)
    hits = np.zeros((n, n), dtype=np.int64)
    j = np.arange(n)
    for c in cells:
        a = (j - c.tau.residue) % c.tau.modulus == 0
        b = (j - c.tau_prime.residue) % c.tau_prime.modulus == 0
        hits += np.outer(a, b)
    return bool(np.all(hits == 1)), sum((c.measure for c in cells), Fraction(0))


# ------------------------------------------------------------------ signals
@dataclass(frozen=True, eq=False)
class ParabolaSignal:
    """Coefficients c_j over the xi-cells of O at resolution q**-L."""

    q: int
    L: int
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        if self.coeffs.shape != (self.q ** self.L,):
            raise ValueError("one coefficient per xi-cell")

    @property
    def n(self) -> int:
        return self.q ** self.L

    def frequency_grid(self) -> GridFunction:
        spec = GridSpec.square(self.q, 0, self.L)
        v = np.zeros(spec.shape, dtype=complex)
        j = np.arange(self.n)
        v[j, (j * j) % self.n] = self.coeffs
        return GridFunction(spec, "frequency", v)

    def materialize(self) -> GridFunction:
        """Full space-side table (feasible for small L only)."""
        return inverse_fourier(self.frequency_grid())

    def l2_squared(self) -> float:
        return float(np.sum(np.abs(self.coeffs) ** 2)) * float(self.q) ** (-2 * self.L)

    def restrict(self, tau: QInterval) -> "ParabolaSignal":
        j = np.arange(self.n)
        return ParabolaSignal(self.q, self.L, np.where((j - tau.residue) % tau.modulus == 0,
                                                       self.coeffs, 0))


def piece_tables(sig: ParabolaSignal, m: int) -> np.ndarray:
    """H for every residue c mod q**m, stacked as [c, u, v]."""
    q, L = sig.q, sig.L
    if not 0 <= m <= L:
        raise ValueError("level out of range")
    nt = q ** (L - m)           # t indexes the cells of tau: j = c + q^m t
    nv = q ** max(L - 2 * m, 0)
    c = sig.coeffs.reshape(nt, q ** m).T  # [c, t]
    t = np.arange(nt, dtype=np.int64)
    v = np.arange(nv, dtype=np.int64)
    if nv > 1:
        chirp = np.exp(1j * TWO_PI * (((t * t)[None, :] * v[:, None]) % nv) / nv)  # [v, t]
        data = c[:, None, :] * chirp[None, :, :]           # [c, v, t]
    else:
        data = c[:, None, :]
    H = sfft.ifft(data, axis=-1) * nt * float(q) ** (-2 * L)  # [c, v, u]
    return np.ascontiguousarray(np.swapaxes(H, 1, 2))


def lift_table(children: dict[int, np.ndarray], q: int, L: int, m_child: int,
               m: int, c: int) -> np.ndarray:
    """Parent-frame table of the sum of children (level m_child) of the
    level-m interval with residue c."""
    nu, nv = q ** (L - m), q ** max(L - 2 * m, 0)
    nu_c, nv_c = q ** (L - m_child), q ** max(L - 2 * m_child, 0)
    u = np.arange(nu, dtype=np.int64)[:, None]
    v = np.arange(nv, dtype=np.int64)[None, :]
    out = np.zeros((nu, nv), dtype=complex)
    step = q ** m
    for s in range(q ** (m_child - m)):
        cc = c + step * s
        if cc not in children:
            continue
        # e(s u / q^(L-m) + s^2 v / q^(L-2m)) over the common denominator q^(L-m)
        num = (s * u + (s * s % nu) * v * (nu // nv)) % nu
        uu = (u + 2 * step * s * v) % nu_c
        vv = v % nv_c
        out += np.exp(1j * TWO_PI * num / nu) * children[cc][uu, vv]
    return out


def gather(table: np.ndarray, q: int, L: int, m: int, c: int, grid_level: int) -> np.ndarray:
    """Values H(u, v) on the level-``grid_level`` grid (grid_level <= m)."""
    if grid_level > m:
        raise ValueError("grid must be at least as fine as the piece")
    n = q ** (L - grid_level)
    nu, nv = table.shape
    a = np.arange(n, dtype=np.int64)
    u = (a[:, None] + (2 * c % nu) * a[None, :]) % nu
    return table[u, np.broadcast_to(a[None, :] % nv, u.shape)]


def upsample(arr: np.ndarray, n: int) -> np.ndarray:
    """Value on the finer grid of side n at a is arr[a mod side]."""
    k = n // arr.shape[0]
    return np.tile(arr, (k, k))


def class_average(arr: np.ndarray, n_coarse: int) -> np.ndarray:
    """Average over the classes a mod n_coarse (squares of the coarser grid)."""
    n = arr.shape[0]
    k = n // n_coarse
    return arr.reshape(k, n_coarse, k, n_coarse).mean(axis=(0, 2))


def class_sum(arr: np.ndarray, n_coarse: int) -> np.ndarray:
    n = arr.shape[0]
    k = n // n_coarse
    return arr.reshape(k, n_coarse, k, n_coarse).sum(axis=(0, 2))


# ------------------------------------------------------------------ decomposition
@dataclass(eq=False)
class Decomposition:
    """Unpruned pieces at every ladder level 0..J of a signal at scale R_J."""

    ladder: ScaleLadder
    signal: ParabolaSignal
    tables: dict[int, np.ndarray] = field(default_factory=dict)  # k -> [c, u, v]

    @classmethod
    def of(cls, sig: ParabolaSignal, ladder: ScaleLadder, levels: Iterable[int] | None = None
           ) -> "Decomposition":
        if sig.L != ladder.L or sig.q != ladder.q:
            raise ValueError("signal scale differs from the working scale R_J")
        d = cls(ladder, sig)
        for k in (range(1, ladder.J + 1) if levels is None else levels):
            d.tables[k] = piece_tables(sig, ladder.level(k))
        return d

    def moduli_on(self, k: int, grid_k: int) -> np.ndarray:
        """|f_tau_k| for every tau_k on the grid of level(grid_k), as [c, a1, a2]."""
        lad = self.ladder
        m, mg = lad.level(k), lad.level(grid_k)
        T = self.tables[k]
        return np.stack([np.abs(gather(T[c], lad.q, lad.L, m, c, mg)) for c in range(T.shape[0])])

    def sup_norms(self, k: int) -> np.ndarray:
        return np.abs(self.tables[k]).reshape(self.tables[k].shape[0], -1).max(axis=1)

    def l2_squared(self, k: int) -> np.ndarray:
        # each (u, v) class holds q**(3m) unit cells
        lad = self.ladder
        T = self.tables[k]
        return (np.abs(T) ** 2).reshape(T.shape[0], -1).sum(axis=1) * float(lad.q) ** (3 * lad.level(k))


def top_two(mod: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Largest and second largest along axis 0."""
    if mod.shape[0] == 1:
        return mod[0], np.zeros_like(mod[0])
    part = -np.partition(-mod, 1, axis=0)
    return part[0], part[1]


def pair_max(mod: np.ndarray) -> np.ndarray:
    """max over distinct pieces of |f_tau f_tau'|."""
    a, b = top_two(mod)
    return a * b


# ------------------------------------------------------------------ level-0 evaluation
def evaluate_tables(tables: np.ndarray, q: int, L: int, m: int, cells: np.ndarray) -> np.ndarray:
    """sum_c e((c i1 + c^2 i2)/q^L) tables[c](u, v) at every unit cell inside
    the given level-m squares.

    ``cells`` is an (n, 2) array of level-m grid indices; returns an
    (n, q**(2m)) complex array, one row per square.
    """
    n_grid = q ** (L - m)
    Q = q ** L
    t = np.arange(q ** m, dtype=np.int64)
    t1, t2 = np.meshgrid(t, t, indexing="ij")
    cells = np.asarray(cells, dtype=np.int64).reshape(-1, 2)
    i1 = cells[:, 0:1] + n_grid * t1.ravel()[None, :]
    i2 = cells[:, 1:2] + n_grid * t2.ravel()[None, :]
    out = np.zeros(i1.shape, dtype=complex)
    nu, nv = tables.shape[1:]
    for c in range(tables.shape[0]):
        u = (cells[:, 0] + 2 * c * cells[:, 1]) % nu
        v = cells[:, 1] % nv
        h = tables[c][u, v][:, None]
        if not np.any(h):
            continue
        ph = (c * i1 + (c * c % Q) * i2) % Q
        out += np.exp(1j * TWO_PI * ph / Q) * h
    return out


def exact_values(dec: Decomposition, cells: np.ndarray, k: int = 1) -> np.ndarray:
    """f at every unit cell inside the given level(k) squares."""
    lad = dec.ladder
    return evaluate_tables(dec.tables[k], lad.q, lad.L, lad.level(k), cells)


def lift_to_level(tables: np.ndarray, q: int, L: int, m_child: int, m: int) -> np.ndarray:
    """Frames of all level-m intervals, each holding the sum of its level
    m_child pieces."""
    if m_child == m:
        return tables
    return np.stack([
        lift_table({cc: tables[cc] for cc in range(c, q ** m_child, q ** m)}, q, L, m_child, m, c)
        for c in range(q ** m)])


# ------------------------------------------------------------------ rescaling
@dataclass(frozen=True, eq=False)
class Rescaled:
    """Rescaled piece: frequency table on xi' (resolution q**-(L-m)) by eta'
    (resolution q**-(L-2m)), plus the scaling exponent of the L^2 mass."""

    f_hat: GridFunction
    scale: float

    def support_ok(self, level: int) -> bool:
        """Every nonzero cell lies in the q**-level neighbourhood of the parabola."""
        F = self.f_hat
        q = F.spec.q
        n0, n1 = F.spec.shape
        s = np.arange(n0, dtype=np.int64)
        k = np.arange(n1, dtype=np.int64)
        # eta' cells have size q^-(L-2m); |eta' - xi'^2| <= q^-level is cell-exact
        m = q ** level
        ok = ((k[None, :] - (s * s)[:, None]) % min(m, n1)) == 0
        return bool(np.all(ok | (F.values == 0)))


def parabolic_rescale(sig: ParabolaSignal, tau: QInterval, prefactor_exp: int = -3) -> Rescaled:
    """Pull the piece over tau back to O:
    f^(xi, eta) = q**(prefactor_exp m) F^(a + q^m xi, a^2 + 2 a q^m xi + q^(2m) eta).

    The default prefactor q**(-3m) = R_k**-3/2 is the q-adic Jacobian of the
    affine map; other exponents are allowed for the Plancherel comparison.
    """
    q, L, m, a = sig.q, sig.L, tau.level, tau.residue
    if 2 * m > L:
        raise ValueError("resolution insufficient for the sheared grid")
    n_xi, n_eta = q ** (L - m), q ** (L - 2 * m)
    spec = GridSpec.of(q, (0, L - m), (0, L - 2 * m))
    s = np.arange(n_xi, dtype=np.int64)
    v = np.zeros(spec.shape, dtype=complex)
    pref = float(q) ** (prefactor_exp * m)
    v[s, (s * s) % n_eta] = pref * sig.coeffs[(a + q ** m * s) % sig.n]
    return Rescaled(GridFunction(spec, "frequency", v), pref)


# ------------------------------------------------------------------ masks
@dataclass(frozen=True, eq=False)
class RegionMask:
    """Union of squares of side q**side_exp in the working box."""

    side_exp: int
    bits: np.ndarray
    label: str
    q: int = 3

    @property
    def square_measure(self) -> float:
        return float(self.q) ** (2 * self.side_exp)

    @property
    def measure(self) -> float:
        return float(self.bits.sum()) * self.square_measure

    def to_json(self) -> dict:
        return {"label": self.label, "side_exp": self.side_exp,
                "shape": list(self.bits.shape),
                "squares": np.argwhere(self.bits).tolist()}


def make_mask(q: int, side_exp: int, bits: np.ndarray, label: str) -> RegionMask:
    return RegionMask(side_exp, bits.astype(bool), label, q)


# ------------------------------------------------------------------ broad sets
def broad_set(dec: Decomposition, k: int, c: int) -> RegionMask:
    """Points where both defining inequalities of the broad set of the
    level-k interval with residue c hold (k >= 1: exact on the level-k grid;
    k = 0: needs the full table and is only offered for small boxes)."""
    lad = dec.ladder
    if not 0 <= k < lad.J:
        raise ValueError("k must lie in 0..J-1")
    K = lad.broad_constant
    q, L = lad.q, lad.L
    m = lad.level(k)
    if k == 0:
        f = np.abs(dec.signal.materialize().values)
        kids = dec.moduli_on(1, 1)
        kids = np.stack([upsample(x, q ** L) for x in kids])
        side = 0
        parent = f
    else:
        T = dec.tables[k][c]
        parent = np.abs(gather(T, q, L, m, c, m))
        all_kids = dec.moduli_on(k + 1, k)
        idx = [cc for cc in range(all_kids.shape[0]) if cc % q ** m == c]
        kids = all_kids[idx]
        side = m
    mp = np.sqrt(pair_max(kids))
    l6 = np.sum(kids ** 6, axis=0) ** (1 / 6)
    bits = (parent <= K * mp) & (l6 <= K * mp)
    return make_mask(q, side, bits, f"broad[{k},{c}]")


# ------------------------------------------------------------------ pruning
@dataclass(eq=False)
class PruningState:
    """Pruned pieces, square functions and their high/low parts.

    ``unpruned[k][c]`` is the table of f_{k+1, tau_k} in the frame of tau_k,
    ``pruned[k][c]`` that of f_{k, tau_k}; ``g[k]`` lives on the level(k) grid.
    """

    ladder: ScaleLadder
    lam: float
    unpruned: dict[int, np.ndarray]
    pruned: dict[int, np.ndarray]
    g: dict[int, np.ndarray]
    g_low: dict[int, np.ndarray] = field(default_factory=dict)
    g_high: dict[int, np.ndarray] = field(default_factory=dict)

    def l2_pruned(self, k: int) -> float:
        lad = self.ladder
        return float(np.sum(np.abs(self.pruned[k]) ** 2)) * float(lad.q) ** (3 * lad.level(k))

    def l2_unpruned(self, k: int) -> float:
        lad = self.ladder
        return float(np.sum(np.abs(self.unpruned[k]) ** 2)) * float(lad.q) ** (3 * lad.level(k))

    def g_sup(self, k: int) -> float:
        return float(self.g[k].max()) if self.g[k].size else 0.0


def square_function(tables: np.ndarray, q: int, L: int, m: int) -> np.ndarray:
    n = q ** (L - m)
    out = np.zeros((n, n))
    for c in range(tables.shape[0]):
        out += np.abs(gather(tables[c], q, L, m, c, m)) ** 2
    return out


def prune(dec: Decomposition, lam: float) -> PruningState:
    lad = dec.ladder
    q, L, J = lad.q, lad.L, lad.J
    unpruned: dict[int, np.ndarray] = {}
    pruned: dict[int, np.ndarray] = {}
    g: dict[int, np.ndarray] = {}
    untouched = True  # nothing pruned so far: the lift is the stored table
    for k in range(J, 0, -1):
        m = lad.level(k)
        if k == J or (untouched and k in dec.tables):
            G = dec.tables[k]
        else:
            G = lift_to_level(pruned[k + 1], q, L, lad.level(k + 1), m)
        unpruned[k] = G
        pruned[k] = np.where(np.abs(G) <= lam, G, 0)
        untouched = untouched and bool(np.all(np.abs(G) <= lam))
        g[k] = square_function(G, q, L, m)
    state = PruningState(lad, lam, unpruned, pruned, g)
    for k in range(1, J):
        high_low(state, k)
    return state


def high_low(state: PruningState, k: int, method: str = "average") -> tuple[np.ndarray, np.ndarray]:
    """g_k^l (on the level(k+1) grid) and g_k^h (on the level(k) grid).

    'average' averages over squares of side R_{k+1}**1/2; 'fourier' keeps the
    frequencies |xi| <= R_{k+1}**-1/2 of the coarse table.
    """
    lad = state.ladder
    if not 1 <= k < lad.J:
        raise ValueError("high/low split needs 1 <= k <= J-1")
    q, L = lad.q, lad.L
    g = state.g[k]
    n1 = q ** (L - lad.level(k + 1))
    if method == "average":
        low = class_average(g, n1)
    elif method == "fourier":
        # coarse table: square side q^m, box q^L -> axis (L, -m) in the grid module
        m = lad.level(k)
        spec = GridSpec.square(q, L, -m)
        from .grid import lowpass
        full = lowpass(GridFunction(spec, "space", g.astype(complex)), -lad.level(k + 1), "fourier")
        low = full.values.real[:n1, :n1]
    else:
        raise ValueError(method)
    high = g - upsample(low, g.shape[0])
    state.g_low[k], state.g_high[k] = low, high
    return low, high


# ------------------------------------------------------------------ high/low regions
@dataclass(frozen=True, eq=False)
class OmegaDecomposition:
    """Masks of the high regions Omega_k (k = 1..J-1) and the low region L,
    all on the level(1) grid."""

    omega: dict[int, np.ndarray]
    low: np.ndarray
    side_exp: int

    def masks(self, q: int) -> list[RegionMask]:
        out = [make_mask(q, self.side_exp, self.omega[k], f"Omega_{k}") for k in sorted(self.omega)]
        out.append(make_mask(q, self.side_exp, self.low, "L"))
        return out


def omega_decomposition(state: PruningState) -> OmegaDecomposition:
    lad = state.ladder
    q, L, J = lad.q, lad.L, lad.J
    n1 = q ** (L - lad.level(1))
    taken = np.zeros((n1, n1), dtype=bool)
    omega = {}
    for k in range(J - 1, 0, -1):
        g, gh = state.g[k], state.g_high[k]
        here = g <= lad.log_R * gh
        here = upsample(here, n1) & ~taken
        omega[k] = here
        taken |= here
    return OmegaDecomposition(omega, ~taken, lad.level(1))


# ------------------------------------------------------------------ level sets
@dataclass(frozen=True)
class LevelSetBins:
    alpha0: float
    ratio: int
    edges: tuple[float, ...]  # lower ends of the bins


def level_set_bins(dec: Decomposition) -> LevelSetBins:
    """Bins [alpha, q alpha) from R**-1/2 m to R m, m = max_tau_J ||f_tau_J||_inf."""
    lad = dec.ladder
    m = float(dec.sup_norms(lad.J).max())
    a0 = lad.R ** -0.5 * m
    count = round(math.log(lad.R ** 1.5, lad.q))
    return LevelSetBins(a0, lad.q, tuple(a0 * lad.q ** i for i in range(count + 1)))


def level_set(dec: Decomposition, alpha: float, l6_constant: float | None = None,
              tau1: np.ndarray | None = None) -> RegionMask:
    """U_alpha on the level(1) grid: max pair^(1/2) in [alpha, q alpha) and
    the l6 sum at most (constant) * alpha."""
    lad = dec.ladder
    K = lad.broad_constant if l6_constant is None else l6_constant
    mod = dec.moduli_on(1, 1) if tau1 is None else tau1
    mp = np.sqrt(pair_max(mod))
    l6 = np.sum(mod ** 6, axis=0) ** (1 / 6)
    bits = (mp >= alpha) & (mp < lad.q * alpha) & (l6 <= K * alpha)
    if alpha <= 0:
        bits[:] = False
    return make_mask(lad.q, lad.level(1), bits, f"U[{alpha:.6g}]")


# ------------------------------------------------------------------ dumps
def dump_state(state: PruningState, omega: OmegaDecomposition | None = None) -> str:
    lad = state.ladder
    doc = {
        "ladder": {"q": lad.q, "eps": lad.eps, "A": lad.A, "r": lad.r, "N": lad.N,
                   "R": lad.R, "J": lad.J},
        "lambda": state.lam,
        "g": {str(k): np.round(v, 15).tolist() for k, v in state.g.items() if v.size <= 6561},
        "g_sup": {str(k): state.g_sup(k) for k in state.g},
        "packets": {str(k): [
            {"residue": c, "kept": int(np.count_nonzero(state.pruned[k][c])),
             "total": int(np.count_nonzero(state.unpruned[k][c])),
             "max": float(np.abs(state.unpruned[k][c]).max())}
            for c in range(state.unpruned[k].shape[0])] for k in state.unpruned},
    }
    if omega is not None:
        doc["regions"] = [m.to_json() | {"measure": m.measure}
                          for m in omega.masks(lad.q) if m.bits.size <= 6561]
    return json.dumps(doc, sort_keys=True)
