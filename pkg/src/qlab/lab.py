"""Inequality checks with explicit constants.

Every check produces an InequalityReport.  Pointwise inequalities are
reduced to the worst point: ``ratio = lhs / (rhs + atol)`` maximized over the
grid, and the check passes iff that ratio is at most 1 + TOL.  Entries whose
constant is only known up to an unspecified factor are report-only and carry
``passed = None``.

Full-resolution quantities at R = 3^8 (|f| itself) are handled with
certificates: on each square of side R_1^(1/2) the values of |f| lie between
max|f_tau1| - (rest) and sum |f_tau1|, which settles most squares; the rest
are evaluated exactly.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Any, Iterable

import numpy as np

from .engine import (Decomposition, OmegaDecomposition, ParabolaSignal, PruningState,
                     ScaleLadder, build_ladder, class_sum, evaluate_tables, gather,
                     RegionMask, level_set_bins, make_mask, lift_to_level, omega_decomposition, piece_tables,
                     pair_max, prune, top_two, upsample)
from .grid import GridFunction, GridSpec, inverse_fourier, lp_integral, restrict_frequency
from .qadic import QInterval, log_q

TOL = 1e-9
ATOL = 1e-12
PROFILES = ("flat", "random-phase", "sparse-tube", "integer-points")


# ------------------------------------------------------------------ reports
@dataclass(frozen=True)
class Constant:
    expr: str
    value: float
    factors: dict[str, float] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"expr": self.expr, "value": _num(self.value),
                "factors": {k: _num(v) for k, v in sorted(self.factors.items())}}


ONE = Constant("1", 1.0)


def _num(x: Any) -> Any:
    if isinstance(x, (bool, str)) or x is None:
        return x
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


@dataclass
class InequalityReport:
    lemma: str
    params: dict
    lhs: float
    rhs: float
    constant: Constant
    ratio: float
    passed: bool | None
    seed: int | None
    runtime_ms: float | None = None

    @property
    def gated(self) -> bool:
        return self.passed is not None

    @property
    def violated(self) -> bool:
        return self.passed is False

    def to_json(self) -> dict:
        return {"lemma": self.lemma,
                "params": {k: _num(v) for k, v in sorted(self.params.items())},
                "lhs": _num(self.lhs), "rhs": _num(self.rhs),
                "constant": self.constant.to_json(), "ratio": _num(self.ratio),
                "pass": self.passed, "seed": self.seed,
                "runtime_ms": None if self.runtime_ms is None else round(self.runtime_ms, 3)}


def scalar_report(lemma: str, lhs: float, rhs: float, constant: Constant = ONE,
                  params: dict | None = None, seed: int | None = None, gated: bool = True,
                  atol: float = 0.0) -> InequalityReport:
    lhs, rhs = float(lhs), float(rhs)
    den = rhs + atol
    if den > 0:
        ratio = lhs / den
    else:
        ratio = 0.0 if lhs <= 0 else math.inf
    passed = bool(ratio <= 1 + TOL) if gated else None
    return InequalityReport(lemma, dict(params or {}), lhs, rhs, constant, ratio, passed, seed)


def pointwise_report(lemma: str, lhs: np.ndarray, rhs: np.ndarray, constant: Constant = ONE,
                     params: dict | None = None, seed: int | None = None,
                     scale: float | None = None) -> InequalityReport:
    """Worst point of lhs <= rhs over arrays of the same shape."""
    lhs, rhs = np.broadcast_arrays(np.asarray(lhs, dtype=float), np.asarray(rhs, dtype=float))
    lhs, rhs = lhs.ravel(), rhs.ravel()
    if lhs.size == 0:
        return scalar_report(lemma, 0.0, 0.0, constant, params, seed)
    if scale is None:
        scale = max(float(np.max(np.abs(lhs))), float(np.max(np.abs(rhs))))
    atol = ATOL * scale
    den = rhs + atol
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(den > 0, lhs / np.where(den > 0, den, 1), np.where(lhs > 0, np.inf, 0.0))
    i = int(np.argmax(r))
    rep = scalar_report(lemma, lhs[i], rhs[i], constant, params, seed)
    rep.ratio = float(r[i])
    rep.passed = bool(r[i] <= 1 + TOL)
    rep.params["points"] = int(lhs.size)
    return rep


# ------------------------------------------------------------------ instances
def random_instance(R: int, seed: int, profile: str, q: int = 3) -> ParabolaSignal:
    """Test signal with Fourier support in the 1/R neighbourhood of the
    parabola (one coefficient per xi-cell at resolution 1/R).

    flat: unit coefficients, translated in space by a seed-chosen vector
    (seed 0 is untranslated); random-phase: unit modulus, independent phases;
    sparse-tube: a single wave packet (one interval of length R^-1/2, one
    tube); integer-points: random real weights on the cells of (n, n^2),
    n = 1..R^(1/2).
    """
    L = log_q(R, q)
    n = q ** L
    rng = np.random.default_rng([seed, PROFILES.index(profile)])
    j = np.arange(n, dtype=np.int64)
    if profile == "flat":
        w1, w2 = (0, 0) if seed == 0 else (int(rng.integers(n)), int(rng.integers(n)))
        c = np.exp(-1j * 2 * math.pi * ((j * w1 + (j * j % n) * w2) % n) / n)
    elif profile == "random-phase":
        c = np.exp(1j * 2 * math.pi * rng.random(n))
    elif profile == "sparse-tube":
        half = q ** (L // 2)
        res = int(rng.integers(half))
        w1, w2 = int(rng.integers(n)), int(rng.integers(n))
        amp = rng.uniform(0.5, 2.0) * np.exp(1j * 2 * math.pi * rng.random())
        c = np.where((j - res) % half == 0,
                     amp * np.exp(-1j * 2 * math.pi * ((j * w1 + (j * j % n) * w2) % n) / n), 0)
    elif profile == "integer-points":
        M = q ** (L // 2)
        c = np.zeros(n, dtype=complex)
        c[np.arange(1, M + 1) % n] += rng.normal(size=M)
    else:
        raise ValueError(f"unknown profile {profile!r}")
    return ParabolaSignal(q, L, np.asarray(c, dtype=complex))


def support_certified(sig: ParabolaSignal) -> bool:
    """Cell-exhaustive check that the transform lives on the cells (j, j^2)."""
    F = sig.frequency_grid().values
    j, k = np.nonzero(F)
    return bool(np.all((k - j * j) % sig.n == 0))


# ------------------------------------------------------------------ workspace
class Workspace:
    """A signal at the working scale with its pieces and the per-square
    statistics of the tau_1 pieces on the level(1) grid."""

    def __init__(self, sig: ParabolaSignal, ladder: ScaleLadder, exhaustive: bool = False):
        # exhaustive: evaluate |f| at every unit cell instead of certifying squares
        self.sig, self.ladder, self.exhaustive = sig, ladder, exhaustive
        self.dec = Decomposition.of(sig, ladder)
        lad = ladder
        self.q, self.L = lad.q, lad.L
        self.m1 = lad.level(1)
        self.n1 = self.q ** (self.L - self.m1)
        self.P = self.dec.moduli_on(1, 1)
        self.S = self.P.sum(axis=0)
        self.M1, self.M2 = top_two(self.P)
        self.mp = self.M1 * self.M2
        self.root_mp = np.sqrt(self.mp)
        self.l6 = np.sum(self.P ** 6, axis=0) ** (1 / 6)
        self.cell1 = float(self.q) ** (2 * self.m1)
        self.sup_J = self.dec.sup_norms(lad.J)
        self.l2_J = self.dec.l2_squared(lad.J)
        self.X = float(np.sum(self.sup_J ** 2)) ** 2 * float(np.sum(self.l2_J))
        self._b0: BroadZero | None = None
        self._gJ: float | None = None
        # magnitude used for the absolute tolerance of modulus comparisons
        self.scale = float(self.S.max()) if self.S.size else 0.0

    @property
    def K(self) -> float:
        return self.ladder.broad_constant

    def base_params(self, **extra) -> dict:
        lad = self.ladder
        return {"q": lad.q, "R": lad.R, "eps": lad.eps, "r": lad.r, "J": lad.J, **extra}

    # -- level sets ----------------------------------------------------
    def bins(self):
        return level_set_bins(self.dec)

    def level_set(self, alpha: float) -> RegionMask:
        # same sets as engine.level_set, from the cached statistics
        bits = (self.root_mp >= alpha) & (self.root_mp < self.q * alpha) & (self.l6 <= self.K * alpha)
        if alpha <= 0:
            bits[:] = False
        return make_mask(self.q, self.m1, bits, f"U[{alpha:.6g}]")

    def pigeonhole_alpha(self) -> float:
        """Lower end of the bin maximizing alpha^6 |U_alpha| (the first bin if
        all level sets are empty)."""
        best, arg = -1.0, None
        for a in self.bins().edges:
            v = a ** 6 * self.level_set(a).measure
            if v > best:
                best, arg = v, a
        return float(arg)

    def lam(self, alpha: float) -> float:
        """(log R)^2 q^(r/2) ||g_J||_inf / alpha; zero when g_J vanishes and
        infinite for alpha = 0 otherwise."""
        lad = self.ladder
        if self.g_J_sup == 0:
            return 0.0
        if alpha <= 0:
            return math.inf
        return lad.log_R ** 2 * lad.q ** (lad.r / 2) * self.g_J_sup / alpha

    @property
    def g_J_sup(self) -> float:
        if self._gJ is None:
            lad = self.ladder
            m = lad.level(lad.J)
            g = np.zeros((self.q ** (self.L - m),) * 2)
            T = self.dec.tables[lad.J]
            for c in range(T.shape[0]):
                g += np.abs(gather(T[c], self.q, self.L, m, c, m)) ** 2
            self._gJ = float(g.max())
        return self._gJ

    # -- level-0 broad set -----------------------------------------------
    def broad_zero(self) -> "BroadZero":
        if self._b0 is None:
            self._b0 = BroadZero(self)
        return self._b0

    def exact_abs(self, cells: np.ndarray, chunk: int = 4096) -> np.ndarray:
        out = []
        T = self.dec.tables[1]
        for s in range(0, len(cells), chunk):
            out.append(np.abs(evaluate_tables(T, self.q, self.L, self.m1, cells[s:s + chunk])))
        return np.concatenate(out) if out else np.zeros((0, self.q ** (2 * self.m1)))


class BroadZero:
    """Membership in the top-level broad set, square by square.

    ``count`` holds the exact number of unit cells of each level(1) square
    lying in the broad set.
    """

    def __init__(self, ws: Workspace):
        thr = ws.K * np.sqrt(ws.mp)
        self.threshold = thr
        alt2 = ws.l6 <= thr
        lower = np.maximum(2 * ws.M1 - ws.S, 0)
        self.sure_in = alt2 & (ws.S <= thr)
        self.sure_out = ~alt2 | (lower > thr)
        self.unsure = ~(self.sure_in | self.sure_out)
        if ws.exhaustive:
            self.sure_in[:] = False
            self.sure_out[:] = False
            self.unsure[:] = True
        cells = np.argwhere(self.unsure)
        full = ws.q ** (2 * ws.m1)
        self.count = np.where(self.sure_in, full, 0).astype(np.int64)
        self.evaluated = len(cells)
        if len(cells):
            vals = ws.exact_abs(cells)
            inside = (vals <= thr[cells[:, 0], cells[:, 1]][:, None]) & alt2[cells[:, 0], cells[:, 1]][:, None]
            self.count[cells[:, 0], cells[:, 1]] = inside.sum(axis=1)

    def integral(self, h: np.ndarray) -> float:
        """Integral over the broad set of a function constant on level(1) squares."""
        return float(np.sum(h * self.count))


# ------------------------------------------------------------------ constants
def _c(expr: str, value: float, **factors) -> Constant:
    return Constant(expr, float(value), {k: float(v) for k, v in factors.items()})


def narrow_factor_constant(lad: ScaleLadder, power: int) -> Constant:
    return _c(f"(1-1/log R)^-{power}", lad.narrow_factor ** power, log_R=lad.log_R)


# ------------------------------------------------------------------ pruning suite
def choose_lambda(ws: Workspace, alpha: float | None) -> tuple[float, float]:
    alpha = ws.pigeonhole_alpha() if alpha is None else alpha
    return alpha, ws.lam(alpha)


def check_pruning_suite(ws: Workspace, st: PruningState, om: OmegaDecomposition,
                        seed: int | None = None, alpha: float | None = None) -> list[InequalityReport]:
    lad, q, J = ws.ladder, ws.q, ws.ladder.J
    lam = st.lam
    inv_lam = 0.0 if (math.isinf(lam) or lam == 0) else 1.0 / lam
    reps: list[InequalityReport] = []
    P = lambda **kw: ws.base_params(lam=lam, alpha=alpha, **kw)

    # pruned pieces never exceed the unpruned ones
    for k in range(1, J + 1):
        reps.append(pointwise_report("prunedmon", np.abs(st.pruned[k]), np.abs(st.unpruned[k]),
                                     ONE, P(k=k), seed))
    # L2 monotonicity f_1, ..., f_J, f
    l2 = {k: st.l2_pruned(k) for k in range(1, J + 1)}
    l2[J + 1] = ws.sig.l2_squared()
    for k in range(1, J + 1):
        reps.append(scalar_report("increase", l2[k], l2[k + 1], ONE, P(k=k), seed,
                                  atol=ATOL * l2[J + 1]))
        # orthogonality: the unpruned level-k tables carry the mass of f_{k+1}
        reps.append(scalar_report("increase-orthogonality",
                                  abs(st.l2_unpruned(k) - l2[k + 1]), TOL * l2[J + 1], ONE,
                                  P(k=k), seed, atol=ATOL * l2[J + 1]))
    # low and high lemmas
    for k in range(1, J):
        reps.append(pointwise_report("low-lemma", st.g_low[k], st.g[k + 1], ONE, P(k=k), seed))
        mk = lad.level(k)
        lhs = float(np.sum(st.g_high[k] ** 2)) * float(q) ** (2 * mk)
        rhs4 = float(np.sum(np.abs(st.unpruned[k]) ** 4)) * float(q) ** (3 * mk)
        cst = _c("q^(r/2)", q ** (lad.r / 2), q=q, r=lad.r)
        reps.append(scalar_report("high-lemma", lhs, cst.value * rhs4, cst, P(k=k), seed,
                                  atol=ATOL * cst.value * rhs4))
    reps.extend(_approximation_checks(ws, st, om, inv_lam, seed, alpha))
    return reps


def _on_level1(arr: np.ndarray, n1: int) -> np.ndarray:
    return upsample(arr, n1) if arr.shape[0] != n1 else arr


def _moduli_level1(tables: np.ndarray, q: int, L: int, m: int) -> np.ndarray:
    return np.stack([np.abs(gather(tables[c], q, L, m, c, m)) for c in range(tables.shape[0])])


def _top_level_check(ws: Workspace, tables1: np.ndarray, bound: np.ndarray, mask: np.ndarray
                     ) -> tuple[np.ndarray, np.ndarray, int]:
    """|sum of tables1 pieces| <= bound on the squares of ``mask`` (level(1)
    grid), via the triangle bound and exact values where it does not decide.

    Returns per-square (worst lhs, bound) arrays restricted to the mask and
    the number of exactly evaluated squares.
    """
    mods = _moduli_level1(tables1, ws.q, ws.L, ws.m1)
    tri = mods.sum(axis=0)
    lhs = tri.copy()
    scale = ws.scale
    undecided = mask.copy() if ws.exhaustive else mask & (tri > bound * (1 + TOL) + ATOL * scale)
    cells = np.argwhere(undecided)
    if len(cells):
        vals = []
        for s in range(0, len(cells), 4096):
            vals.append(np.abs(evaluate_tables(tables1, ws.q, ws.L, ws.m1, cells[s:s + 4096])).max(axis=1))
        lhs[cells[:, 0], cells[:, 1]] = np.concatenate(vals)
    return lhs[mask], bound[mask], len(cells)


def _approximation_checks(ws: Workspace, st: PruningState, om: OmegaDecomposition,
                          inv_lam: float, seed, alpha) -> list[InequalityReport]:
    lad, q, L, J, n1, m1 = ws.ladder, ws.q, ws.L, ws.ladder.J, ws.n1, ws.m1
    reps = []
    rho = lad.narrow_factor
    g1 = {k: _on_level1(st.g[k], n1) for k in st.g}
    g_sup = st.g_sup(J)
    everywhere = np.ones((n1, n1), dtype=bool)

    def params(**kw):
        return ws.base_params(lam=st.lam, alpha=alpha, **kw)

    # pruned-away part at each level, in the tau_1 frames; empty parts are skipped
    lifted: dict[int, np.ndarray | None] = {}
    cst = _c("1/lambda", inv_lam, lam=st.lam)
    for k in range(1, J + 1):
        D = st.unpruned[k] - st.pruned[k]
        bound = inv_lam * g1[k]
        if np.any(D):
            D1 = lift_to_level(D, q, L, lad.level(k), m1)
            worst = _moduli_level1(D1, q, L, m1).max(axis=0)
            lhs, rhs, ev = _top_level_check(ws, D1, bound, everywhere)
            lifted[k] = D1
        else:
            worst = np.zeros((n1, n1))
            lhs, rhs, ev = worst.ravel(), bound.ravel(), 0
            lifted[k] = None
        reps.append(pointwise_report("pruning-approx", worst, bound, cst,
                                     params(k=k, tau="tau_1"), seed, scale=ws.scale))
        reps.append(pointwise_report("pruning-approx", lhs, rhs, cst,
                                     params(k=k, tau="O", evaluated=ev), seed, scale=ws.scale))

    # f_tau - f_{k+1,tau} on Omega_k, and f_tau - f_{1,tau} on L (k = 0)
    for k in list(range(1, J)) + [0]:
        region = om.low if k == 0 else om.omega[k]
        label = "L" if k == 0 else f"Omega_{k}"
        js = range(k + 1, J + 1) if k else range(1, J + 1)
        # f_tau - f_{k+1,tau} is the sum of the parts pruned at levels above k
        parts = [lifted[j] for j in js if lifted[j] is not None]
        E = sum(parts[1:], parts[0]) if parts else None
        chain = inv_lam * sum(g1[j] for j in js)
        S_k = sum(rho ** (J - j) for j in js)
        telescoped = inv_lam * g_sup * S_k
        cst = _c("sum_j (1-1/log R)^-(J-j) / lambda", S_k * inv_lam, S=S_k)
        stated_c = 2.0 * inv_lam * lad.log_R / math.log(lad.log_R)
        worst = np.zeros((n1, n1)) if E is None else _moduli_level1(E, q, L, m1).max(axis=0)
        npts = int(region.sum())
        reps.append(pointwise_report("pruned-approx-chain", worst, chain, _c("1/lambda", inv_lam),
                                     params(k=k, region="all", tau="tau_1"), seed, scale=ws.scale))
        reps.append(pointwise_report("pruned-approx-region", worst[region], np.full(npts, telescoped),
                                     cst, params(k=k, region=label, tau="tau_1"), seed, scale=ws.scale))
        reps.append(pointwise_report("pruned-approx-stated", worst[region],
                                     np.full(npts, stated_c * g_sup),
                                     _c("C (log R/log log R) / lambda", stated_c, C=2.0),
                                     params(k=k, region=label, tau="tau_1"), seed, scale=ws.scale))
        if E is None:
            lhs, rhs, ev = np.zeros(npts), np.full(npts, telescoped), 0
        else:
            lhs, rhs, ev = _top_level_check(ws, E, np.full((n1, n1), telescoped), region)
        reps.append(pointwise_report("pruned-approx-region", lhs, rhs, cst,
                                     params(k=k, region=label, tau="O", evaluated=ev), seed, scale=ws.scale))
    return reps


# ------------------------------------------------------------------ broad / narrow suite
def _children_stats(ws: Workspace, k: int, c: int):
    """|f_tau_k| on the level-k grid, and over the children tau_{k+1}: the
    max pair product, l6 sum and largest modulus, upsampled to level k."""
    lad, q, L = ws.ladder, ws.q, ws.L
    m, mc = lad.level(k), lad.level(k + 1)
    nk = q ** (L - m)
    parent = np.abs(gather(ws.dec.tables[k][c], q, L, m, c, m))
    Tc = ws.dec.tables[k + 1]
    kids = np.stack([np.abs(gather(Tc[cc], q, L, mc, cc, mc)) for cc in range(c, q ** mc, q ** m)])
    a, b = top_two(kids)
    l6 = np.sum(kids ** 6, axis=0) ** (1 / 6)
    return parent, upsample(a * b, nk), upsample(l6, nk), upsample(a, nk), upsample(
        np.sum(kids ** 6, axis=0), nk)


def check_broad_narrow_suite(ws: Workspace, seed: int | None = None) -> list[InequalityReport]:
    lad, q = ws.ladder, ws.q
    K, rho = ws.K, lad.narrow_factor
    reps = []
    b0 = ws.broad_zero()
    c0 = q ** (-lad.r / 2) / lad.log_R ** 6
    cst0 = _c("q^(-r/2) (log R)^-6", c0, q=q, r=lad.r, log_R=lad.log_R)
    # top level: initial narrow estimate off the broad set
    lhs = ws.mp ** 3
    rhs = c0 * np.sum(ws.P ** 6, axis=0)
    outside = b0.count < q ** (2 * ws.m1)
    reps.append(pointwise_report("initial-narrow", lhs[outside], rhs[outside], cst0,
                                 ws.base_params(k=0, evaluated=b0.evaluated), seed,
                                 scale=float(max(lhs.max(), rhs.max()))))
    # top level narrow lemma
    reps.append(_narrow_lemma_top(ws, seed))
    for k in range(1, lad.J):
        for c in range(q ** lad.level(k)):
            parent, mp, l6, big, six = _children_stats(ws, k, c)
            thr = K * np.sqrt(mp)
            inB = (parent <= thr) & (l6 <= thr)
            p6 = parent ** 6
            cb = _c("(log R)^6 q^(3r)", K ** 6, log_R=lad.log_R, q=q, r=lad.r)
            reps.append(pointwise_report("broad-pointwise", p6[inB], (K ** 6 * mp ** 3)[inB], cb,
                                         ws.base_params(k=k, tau=c), seed,
                                         scale=float(p6.max())))
            reps.append(pointwise_report("narrow-pointwise", p6[~inB], (rho ** 6 * six)[~inB],
                                         narrow_factor_constant(lad, 6),
                                         ws.base_params(k=k, tau=c), seed, scale=float(p6.max())))
            hyp = parent > thr
            reps.append(pointwise_report("narrow-lemma", parent[hyp], (rho * big)[hyp],
                                         narrow_factor_constant(lad, 1),
                                         ws.base_params(k=k, tau=c), seed,
                                         scale=float(parent.max())))
    return reps


def _narrow_lemma_top(ws: Workspace, seed) -> InequalityReport:
    lad = ws.ladder
    rho = lad.narrow_factor
    thr = ws.K * np.sqrt(ws.mp)
    bound = rho * ws.M1
    vacuous = ws.S <= thr
    certified = ~vacuous & (ws.S <= bound)
    if ws.exhaustive:
        vacuous = np.zeros_like(vacuous)
        certified = np.zeros_like(certified)
    lhs_parts = [ws.S[certified]]
    rhs_parts = [bound[certified]]
    cells = np.argwhere(~vacuous & ~certified)
    if len(cells):
        vals = ws.exact_abs(cells)
        t = thr[cells[:, 0], cells[:, 1]][:, None]
        b = np.broadcast_to(bound[cells[:, 0], cells[:, 1]][:, None], vals.shape)
        hyp = vals > t
        lhs_parts.append(vals[hyp])
        rhs_parts.append(b[hyp])
    return pointwise_report("narrow-lemma", np.concatenate(lhs_parts), np.concatenate(rhs_parts),
                            narrow_factor_constant(lad, 1),
                            ws.base_params(k=0, evaluated=len(cells)), seed,
                            scale=float(ws.S.max()))


# ------------------------------------------------------------------ combined suite
def check_pointwise_suite(sig: ParabolaSignal, ladder: ScaleLadder, seed: int | None = None,
                          alpha: float | None = None, lam: float | None = None,
                          ws: Workspace | None = None) -> list[InequalityReport]:
    """Pruning, high/low, approximation and broad/narrow checks for one signal.

    lambda defaults to the choice (log R)^2 q^(r/2) ||g_J||_inf / alpha with
    alpha from the pigeonhole scan of the level sets.
    """
    ws = Workspace(sig, ladder) if ws is None else ws
    if lam is None:
        alpha, lam = choose_lambda(ws, alpha)
    st = prune(ws.dec, lam)
    om = omega_decomposition(st)
    return check_pruning_suite(ws, st, om, seed, alpha) + check_broad_narrow_suite(ws, seed)


# ------------------------------------------------------------------ level sets
def _eta(K: float, eps: float) -> float:
    return 2 * K * eps + eps * eps


def _eps(inv_lam: float, G: float, S: float, alpha: float) -> float:
    if G == 0:
        return 0.0
    return inv_lam * G * S / alpha if alpha > 0 else math.inf


def _times(c: float, x: float) -> float:
    # 0 * inf = 0: an infinite constant in front of a vanishing integral
    return 0.0 if x == 0 else c * x


def check_level_set(ws: Workspace, alpha: float, seed: int | None = None,
                    st: PruningState | None = None) -> list[InequalityReport]:
    """alpha^6 |U_alpha| against the concrete per-region chain, each link
    gated, plus the headline form as report-only."""
    lad, q, L, J, n1, m1 = ws.ladder, ws.q, ws.L, ws.ladder.J, ws.n1, ws.m1
    K, rho, logR = ws.K, lad.narrow_factor, lad.log_R
    lam = ws.lam(alpha)
    st = prune(ws.dec, lam) if st is None else st
    om = omega_decomposition(st)
    inv_lam = 0.0 if (math.isinf(lam) or lam == 0) else 1.0 / lam
    U = ws.level_set(alpha).bits
    cell = ws.cell1
    G = st.g_sup(J)
    f2 = ws.sig.l2_squared()
    T1 = ws.dec.tables[1]
    reps = []
    P = lambda **kw: ws.base_params(alpha=alpha, lam=lam, **kw)
    total_rhs = 0.0
    r = lad.r

    for k in range(1, J):
        Om = om.omega[k]
        UO = U & Om
        Gk = st.unpruned[k]
        Gk1 = lift_to_level(Gk, q, L, lad.level(k), m1)
        mods_k1 = _moduli_level1(Gk1, q, L, m1)
        S_k = sum(rho ** (J - j) for j in range(k + 1, J + 1))
        eps_k = _eps(inv_lam, G, S_k, alpha)
        eta = _eta(K, eps_k)
        E = np.abs(_moduli_level1(T1 - Gk1, q, L, m1)).max(axis=0)
        reps.append(pointwise_report("level-set-approx", E[UO], np.full(int(UO.sum()), eps_k * alpha),
                                     _c("eps alpha", eps_k * alpha, eps=eps_k), P(k=k, region=f"Omega_{k}"), seed, scale=ws.scale))
        C_pr = (1 - eta) ** -2 if eta < 1 else math.inf
        a4U = alpha ** 4 * UO.sum() * cell
        mpk = pair_max(mods_k1)
        link1 = float(np.sum(mpk[UO] ** 2)) * cell
        reps.append(scalar_report("level-set-pruned", a4U, _times(C_pr, link1),
                                  _c("(1-eta)^-2", C_pr, eta=eta), P(k=k), seed, atol=ATOL * a4U))
        sq = np.sum(mods_k1 ** 2, axis=0)
        pairs = sq ** 2 - np.sum(mods_k1 ** 4, axis=0)
        gk = _on_level1(st.g[k], n1)
        link2 = float(np.sum(pairs[Om])) * cell
        cst = _c("q^(r/2)", q ** (r / 2), q=q, r=r)
        reps.append(scalar_report("level-set-bilinear", link1, link2, ONE, P(k=k), seed, atol=ATOL * link2))
        g2 = float(np.sum(gk[Om] ** 2)) * cell
        # |f_tau_1|^2 <= (number of tau_k in tau_1) * sum |f_tau_k|^2
        c2 = _c("q^((k-1) r)", float(q) ** ((k - 1) * r), q=q, r=r, k=k)
        reps.append(scalar_report("level-set-square", link2, c2.value * g2, c2, P(k=k), seed,
                                  atol=ATOL * g2))
        gh = _on_level1(st.g_high[k], n1)
        gh2 = float(np.sum(gh[Om] ** 2)) * cell
        reps.append(scalar_report("level-set-high-region", g2, logR ** 2 * gh2,
                                  _c("(log R)^2", logR ** 2, log_R=logR), P(k=k), seed, atol=ATOL * g2))
        mk = lad.level(k)
        gh_all = float(np.sum(st.g_high[k] ** 2)) * float(q) ** (2 * mk)
        four_k = float(np.sum(np.abs(Gk) ** 4)) * float(q) ** (3 * mk)
        reps.append(scalar_report("level-set-high-lemma", gh_all, cst.value * four_k, cst, P(k=k), seed,
                                  atol=ATOL * four_k))
        mk1 = lad.level(k + 1)
        Fk1 = st.pruned[k + 1] if k + 1 <= J else None
        four_k1 = float(np.sum(np.abs(Fk1) ** 4)) * float(q) ** (3 * mk1)
        holder = _c("q^(3r/2)", q ** (1.5 * r), q=q, r=r)
        reps.append(scalar_report("level-set-holder", four_k, holder.value * four_k1, holder, P(k=k), seed,
                                  atol=ATOL * four_k))
        two_k1 = st.l2_pruned(k + 1)
        reps.append(scalar_report("level-set-sup", four_k1, lam ** 2 * two_k1 if lam < math.inf else math.inf,
                                  _c("lambda^2", lam ** 2), P(k=k), seed, atol=ATOL * four_k1))
        # q^(r/2) covers the square-function step at k = 1; deeper k need q^((k-1) r)
        final_c = C_pr * max(q ** (r / 2), c2.value) * logR ** 6 * q ** (3 * r)
        lhs6 = alpha ** 6 * UO.sum() * cell
        reps.append(scalar_report("level-set-omega", lhs6, _times(final_c, G ** 2 * f2),
                                  _c("(1-eta)^-2 (log R)^6 q^(7r/2)" if k == 1 else "(1-eta)^-2 (log R)^6 q^((k+2) r)", final_c, eta=eta, log_R=logR, q=q, r=r),
                                  P(k=k), seed, atol=ATOL * lhs6))
        total_rhs += _times(final_c, ws.X)

    # low region
    Lm = om.low
    UL = U & Lm
    S_L = sum(rho ** (J - j) for j in range(1, J + 1))
    eps_L = _eps(inv_lam, G, S_L, alpha)
    eta_L = _eta(K, eps_L)
    C_pl = (1 - eta_L) ** -3 if eta_L < 1 else math.inf
    F1 = st.pruned[1]
    E = _moduli_level1(T1 - F1, q, L, m1).max(axis=0)
    reps.append(pointwise_report("level-set-approx", E[UL], np.full(int(UL.sum()), eps_L * alpha),
                                 _c("eps alpha", eps_L * alpha, eps=eps_L), P(k=0, region="L"), seed, scale=ws.scale))
    mods1 = _moduli_level1(F1, q, L, m1)
    mp1 = pair_max(mods1)
    a6U = alpha ** 6 * UL.sum() * cell
    l1 = float(np.sum(mp1[UL] ** 3)) * cell
    reps.append(scalar_report("level-set-pruned-low", a6U, _times(C_pl, l1), _c("(1-eta)^-3", C_pl, eta=eta_L),
                              P(k=0), seed, atol=ATOL * a6U))
    g1 = _on_level1(st.g[1], n1)
    l2_ = float(np.sum(g1[Lm] ** 3)) * cell
    reps.append(scalar_report("level-set-square-low", l1, l2_, ONE, P(k=0), seed, atol=ATOL * l2_))
    gJ = _on_level1(st.g[J], n1)
    reps.append(pointwise_report("level-set-low-region", g1[Lm], (rho ** (J - 1) * gJ)[Lm],
                                 narrow_factor_constant(lad, J - 1), P(k=0), seed))
    cL = rho ** (J - 1)
    int_g1 = float(np.sum(g1)) * cell
    reps.append(scalar_report("level-set-low-integral", l2_, cL ** 2 * G ** 2 * int_g1,
                              narrow_factor_constant(lad, 2 * (J - 1)), P(k=0), seed, atol=ATOL * l2_))
    reps.append(scalar_report("level-set-low-mass", int_g1, f2, ONE, P(k=0), seed, atol=ATOL * f2))
    low_c = C_pl * cL ** 2
    reps.append(scalar_report("level-set-low", a6U, _times(low_c, G ** 2 * f2),
                              _c("(1-eta)^-3 (1-1/log R)^-2(J-1)", low_c, eta=eta_L), P(k=0), seed,
                              atol=ATOL * a6U))
    total_rhs += _times(low_c, ws.X)
    reps.append(scalar_report("gJ-sup", G, float(np.sum(ws.sup_J ** 2)), ONE, P(), seed, atol=ATOL * G))
    lhs_total = alpha ** 6 * U.sum() * cell
    reps.append(scalar_report("level-set-chain", lhs_total, total_rhs,
                              _c("sum of region constants", total_rhs / ws.X if ws.X else 0.0),
                              P(U_measure=float(U.sum() * cell)), seed, atol=ATOL * lhs_total))
    head = logR ** (7 + 3.5 * lad.eps)
    reps.append(scalar_report("level-set-headline", lhs_total, head * ws.X,
                              _c("(log R)^(7+7eps/2)", head, log_R=logR), P(), seed, gated=False))
    return reps


# ------------------------------------------------------------------ broad/narrow integrals
def check_bilinear_broad(ws: Workspace, seed: int | None = None) -> list[InequalityReport]:
    """Integrated broad/narrow chain for the tau_1 pairs, the pigeonhole
    pieces on squares of side R_J^(1/2), and the headline bounds (report-only)."""
    lad, q, J, r = ws.ladder, ws.q, ws.ladder.J, ws.ladder.r
    logR, rho = lad.log_R, lad.narrow_factor
    b0 = ws.broad_zero()
    cell = ws.cell1
    reps = []
    P = lambda **kw: ws.base_params(**kw)
    mp3 = ws.mp ** 3
    total = float(np.sum(mp3)) * cell
    broad0 = b0.integral(mp3)
    c0 = q ** (-r / 2) / logR ** 6
    six1 = float(np.sum(ws.P ** 6)) * cell
    reps.append(scalar_report("bn-initial", total, broad0 + c0 * six1,
                              _c("q^(-r/2) (log R)^-6", c0), P(), seed, atol=ATOL * total))
    # unrolled chain
    rhs = broad0
    for k in range(1, J):
        acc = 0.0
        for c in range(q ** lad.level(k)):
            parent, mp, l6, big, six = _children_stats(ws, k, c)
            thr = ws.K * np.sqrt(mp)
            inB = (parent <= thr) & (l6 <= thr)
            acc += float(np.sum((mp ** 3)[inB])) * float(q) ** (2 * lad.level(k))
        rhs += q ** (2.5 * r) * rho ** (6 * (k - 1)) * acc
    sixJ = _sixth_J(ws)
    rhs += c0 * rho ** (6 * (J - 1)) * sixJ
    reps.append(scalar_report("bn-chain", total, rhs,
                              _c("q^(5r/2) (1-1/log R)^-6(k-1); q^(-r/2)(log R)^-6 (1-1/log R)^-6(J-1)",
                                 q ** (2.5 * r)), P(), seed, atol=ATOL * total))
    reps.append(scalar_report("narrow-last", sixJ, ws.X, ONE, P(), seed, atol=ATOL * sixJ))

    # pigeonhole on squares of side R_J^(1/2)
    mJ = lad.level(J)
    nJ = q ** (ws.L - mJ)
    TJ = ws.dec.tables[J]
    modJ = np.stack([np.abs(gather(TJ[c], q, ws.L, mJ, c, mJ)) for c in range(TJ.shape[0])])
    mQ = modJ.max(axis=0)           # max_tauJ ||f_tauJ||_inf(Q), per square Q
    mQ1 = upsample(mQ, ws.n1)
    small = np.sqrt(ws.mp) <= lad.R ** -0.5 * mQ1
    cnt = b0.count
    small_int = class_sum(mp3 * cnt * small, nJ)
    small_bound = (lad.R_k(J) * float(lad.R) ** -3) * mQ ** 6
    reps.append(pointwise_report("broad-small", small_int, small_bound,
                                 _c("R_J R^-3", lad.R_k(J) * float(lad.R) ** -3), P(), seed))
    l2Q = (modJ ** 2).sum(axis=0) * float(q) ** (2 * mJ)
    reps.append(pointwise_report("broad-small-sup", mQ ** 6,
                                 float(np.sum(ws.sup_J ** 2)) ** 2 * l2Q, ONE, P(), seed))
    # binned remainder: x in B, alpha <= mp^(1/2) < q alpha, alpha = q^i R^(-1/2) mQ
    rest = float(np.sum((mp3 * cnt)[~small]))
    with np.errstate(divide="ignore", invalid="ignore"):
        idx = np.floor(np.log(np.sqrt(ws.mp) / (lad.R ** -0.5 * mQ1)) / math.log(q) + 1e-12)
    top = np.where(~small, (q * lad.R ** -0.5 * mQ1 * q ** np.where(~small, idx, 0)) ** 6, 0)
    bin_bound = float(np.sum(top * cnt))
    reps.append(scalar_report("broad-bins", rest, bin_bound, _c("q^6", q ** 6), P(), seed,
                              atol=ATOL * max(rest, 1e-300)))
    above = ~small & (np.sqrt(ws.mp) > lad.R * mQ1)
    reps.append(scalar_report("broad-bin-range", float(np.sum(cnt[above])), 0.0, ONE, P(), seed))
    # binned broad points satisfy the l6 condition with constant q K
    binned = (cnt > 0) & ~small
    reps.append(pointwise_report("broad-bin-l6", ws.l6[binned], (ws.K * np.sqrt(ws.mp))[binned],
                                 _c("(log R) q^(r/2)", ws.K), P(), seed))
    # report-only: pigeonhole form and headline bounds
    bins = ws.bins()
    best = max((a ** 6 * ws.level_set(a).measure, a) for a in bins.edges)
    lhs36 = broad0
    rhs36 = (lad.R_k(J) * float(lad.R) ** -3) * ws.X + logR * best[0]
    reps.append(scalar_report("pigeonhole-bins", lhs36, rhs36, _c("R_J R^-3; log R", logR),
                              P(alpha=best[1]), seed, gated=False))
    head = logR ** (9 + 6 * lad.eps)
    reps.append(scalar_report("bilinear-rescaled-headline", total, head * ws.X,
                              _c("(log R)^(9+6eps)", head), P(), seed, gated=False))
    return reps


def _sixth_J(ws: Workspace) -> float:
    lad = ws.ladder
    T = ws.dec.tables[lad.J]
    return float(np.sum(np.abs(T) ** 6)) * float(lad.q) ** (3 * lad.level(lad.J))


# ------------------------------------------------------------------ theorem
def l6_sixth_full(sig: ParabolaSignal, block: int = 243) -> float:
    """Integral of |f|^6 over the box, by rows of fixed i2 (one FFT per row)."""
    q, L, n = sig.q, sig.L, sig.n
    j = np.arange(n, dtype=np.int64)
    total = 0.0
    scale = float(q) ** (-2 * L) * n
    for s in range(0, n, block):
        i2 = np.arange(s, min(s + block, n), dtype=np.int64)
        chirp = np.exp(2j * math.pi * (((j * j % n)[None, :] * i2[:, None]) % n) / n)
        rows = np.fft.ifft(sig.coeffs[None, :] * chirp, axis=1) * scale
        total += float(np.sum(np.abs(rows) ** 6))
    return total


def check_theorem(sig: ParabolaSignal, eps: float = 1.0, seed: int | None = None
                  ) -> tuple[list[InequalityReport], dict]:
    """The Whitney/Minkowski step, the diagonal Hoelder bound, the pair count,
    trivial decoupling to the ladder scale, and the headline ratio."""
    q, L = sig.q, sig.L
    R = q ** L
    lad = build_ladder(R, eps, q)
    N = lad.N
    logR = lad.log_R
    reps = []
    base = {"q": q, "R": R, "eps": eps, "r": lad.r, "N": N}
    P = lambda **kw: {**base, **kw}
    lhs6 = l6_sixth_full(sig)
    # pieces at |tau| = R^-1/2
    half = L // 2
    Tt = piecewise(sig, half)
    sup_t = np.abs(Tt).reshape(Tt.shape[0], -1).max(axis=1)
    l2_t = (np.abs(Tt) ** 2).reshape(Tt.shape[0], -1).sum(axis=1) * float(q) ** (3 * half)
    core = float(np.sum(sup_t ** 2)) ** 2 * float(np.sum(l2_t))
    # Whitney split down to tau_N
    mN = lad.level(N)
    TN = piecewise(sig, mN)
    supN = np.abs(TN).reshape(TN.shape[0], -1).max(axis=1)
    l2N = (np.abs(TN) ** 2).reshape(TN.shape[0], -1).sum(axis=1) * float(q) ** (3 * mN)
    l6N = np.array([_sixth_piece(TN[c], q, L, mN) for c in range(TN.shape[0])])
    diag = float(np.sum(l6N ** (1 / 3)))
    off = 0.0
    pair_terms = []
    for k in range(N):
        mk, mk1 = lad.level(k), lad.level(k + 1)
        Tk1 = piecewise(sig, mk1)
        mods = np.stack([np.abs(gather(Tk1[c], q, L, mk1, c, mk1)) for c in range(Tk1.shape[0])])
        cellm = float(q) ** (2 * mk1)
        for c in range(q ** mk):
            kids = list(range(c, q ** mk1, q ** mk))
            sub = mods[kids]
            count = 0
            mx = pair_max(sub) if len(kids) > 1 else np.zeros_like(sub[0])
            max_int = float(np.sum(mx ** 3)) * cellm
            acc = 0.0
            for a in range(len(kids)):
                for b in range(len(kids)):
                    if a != b:
                        acc += (float(np.sum((sub[a] * sub[b]) ** 3)) * cellm) ** (1 / 3)
                        count += 1
            off += acc
            pair_terms.append((k, c, acc, count, max_int))
    reps.append(scalar_report("minkowski-whitney", lhs6 ** (1 / 3), diag + off, ONE, P(), seed,
                              atol=ATOL * lhs6 ** (1 / 3)))
    hold = float(np.sum(supN ** 2)) ** (2 / 3) * float(np.sum(l2N)) ** (1 / 3)
    reps.append(scalar_report("holder-diagonal", diag, hold, ONE, P(), seed, atol=ATOL * hold))
    worst = max(pair_terms, key=lambda t: t[3])
    reps.append(scalar_report("whitney-pair-count", worst[3], (q ** (lad.r / 2)) ** 2,
                              _c("(q^(r/2))^2", q ** lad.r), P(), seed))
    worst = max(pair_terms, key=lambda t: t[2] / max(t[3] * t[4] ** (1 / 3), 1e-300))
    reps.append(scalar_report("whitney-pairs-by-max", worst[2], worst[3] * worst[4] ** (1 / 3),
                              _c("pair count", worst[3]), P(k=worst[0], tau=worst[1]), seed,
                              atol=ATOL * max(worst[2], 1e-300)))
    # trivial decoupling from tau_N to |tau| = R^-1/2
    per = q ** (half - mN)
    agg_sup = np.array([np.sum(sup_t[list(range(c, q ** half, q ** mN))] ** 2) for c in range(q ** mN)])
    reps.append(pointwise_report("trivial-decoupling", supN ** 2, per * agg_sup,
                                 _c("R_N^-1/2 / R^-1/2", per, q=q, r=lad.r), P(), seed))
    agg_l2 = np.array([np.sum(l2_t[list(range(c, q ** half, q ** mN))]) for c in range(q ** mN)])
    reps.append(scalar_report("trivial-decoupling-l2", float(np.max(np.abs(l2N - agg_l2))),
                              TOL * float(np.sum(l2N)), ONE, P(), seed, atol=ATOL * float(np.sum(l2N))))
    ratio = lhs6 / core if core > 0 else 0.0
    norm = logR ** (12 + eps)
    head = scalar_report("theorem-headline", lhs6, core * norm, _c("(log R)^(12+eps)", norm, log_R=logR),
                         P(), seed, gated=False)
    reps.append(head)
    reps.append(scalar_report("theorem-finite", 0.0 if math.isfinite(ratio / norm) else 1.0, 0.0,
                              ONE, P(ratio=ratio), seed))
    summary = {"R": R, "eps": eps, "lhs": lhs6, "rhs_core": core, "ratio": ratio,
               "normalized": ratio / norm}
    return reps, summary


def piecewise(sig: ParabolaSignal, m: int) -> np.ndarray:
    return piece_tables(sig, m)


def _sixth_piece(T: np.ndarray, q: int, L: int, m: int) -> float:
    return float(np.sum(np.abs(T) ** 6)) * float(q) ** (3 * m)


# ------------------------------------------------------------------ bilinear restriction
@dataclass(frozen=True, eq=False)
class BilinearInstance:
    q: int
    delta_exp: int          # delta = q^-delta_exp, even
    resolution: int         # frequency cells of side q^-resolution
    I1: QInterval
    I2: QInterval
    f1_hat: GridFunction
    f2_hat: GridFunction

    @property
    def delta(self) -> float:
        return float(self.q) ** -self.delta_exp

    @property
    def kappa(self) -> float:
        return float(self.I1.distance(self.I2))

    def __post_init__(self) -> None:
        if self.delta_exp % 2:
            raise ValueError("delta must be an even power of 1/q")
        if self.I1.distance(self.I2) < self.q ** -(self.delta_exp // 2):
            raise ValueError("separation below delta^(1/2)")


def _nbhd_mask(q: int, e: int, I: QInterval, delta_exp: int) -> np.ndarray:
    n = q ** e
    j = np.arange(n, dtype=np.int64)
    inI = (j - I.residue) % I.modulus == 0
    m = q ** min(delta_exp, e)
    near = ((j[None, :] - (j * j)[:, None]) % m) == 0
    return inI[:, None] & near


def random_bilinear_instance(seed: int, q: int = 3, delta_exp: int | None = None,
                             kappa_exp: int | None = None) -> BilinearInstance:
    rng = np.random.default_rng([seed, 17])
    d = int(rng.choice([2, 4])) if delta_exp is None else delta_exp
    s = int(rng.integers(0, d // 2 + 1)) if kappa_exp is None else kappa_exp
    if s > d // 2:
        raise ValueError("separation below delta^(1/2)")
    e = d + int(rng.integers(0, 2)) if d < 4 else d
    # residues a, b with |a - b| = q^-s
    a = int(rng.integers(q ** (s + 1)))
    b = (a + q ** s * int(rng.integers(1, q))) % q ** (s + 1)
    # intervals between the separation scale and delta^(1/2), so that they
    # usually split into several theta
    top = max(s + 1, d // 2)
    l1 = int(rng.integers(s + 1, top + 1))
    l2 = int(rng.integers(s + 1, top + 1))
    ext1 = int(rng.integers(q ** (l1 - s - 1)))
    ext2 = int(rng.integers(q ** (l2 - s - 1)))
    I1 = QInterval(l1, a + q ** (s + 1) * ext1, q)
    I2 = QInterval(l2, b + q ** (s + 1) * ext2, q)
    spec = GridSpec.square(q, 0, e)
    fs = []
    for I in (I1, I2):
        mask = _nbhd_mask(q, e, I, d)
        vals = (rng.normal(size=spec.shape) + 1j * rng.normal(size=spec.shape)) * mask
        fs.append(GridFunction(spec, "frequency", vals))
    return BilinearInstance(q, d, e, I1, I2, fs[0], fs[1])


def check_bilinear_restriction(inst: BilinearInstance, seed: int | None = None) -> InequalityReport:
    f1 = inverse_fourier(inst.f1_hat)
    f2 = inverse_fourier(inst.f2_hat)
    lhs = lp_integral(f1 * f2, 2)
    c = inst.delta ** 2 / inst.kappa
    rhs = c * lp_integral(f1, 2) * lp_integral(f2, 2)
    return scalar_report("bilinear-restriction", lhs, rhs,
                         _c("delta^2/kappa", c, delta=inst.delta, kappa=inst.kappa),
                         {"q": inst.q, "delta": inst.delta, "kappa": inst.kappa,
                          "I1": f"{inst.I1.residue} mod {inst.I1.modulus}",
                          "I2": f"{inst.I2.residue} mod {inst.I2.modulus}",
                          "resolution": inst.resolution}, seed, atol=ATOL * max(rhs, lhs))


def theta_cross_terms(inst: BilinearInstance) -> tuple[float, float, int]:
    """Largest |integral f1_th1 f2_th2 conj(f1_th1' f2_th2')| over distinct
    (th1, th2) != (th1', th2') with |th| = delta^(1/2), after normalizing
    both functions to unit L^2 norm; also the largest diagonal term and the
    number of products compared."""
    lvl = inst.delta_exp // 2
    parts = []
    for F, I in ((inst.f1_hat, inst.I1), (inst.f2_hat, inst.I2)):
        f = inverse_fourier(F)
        F = F * (1 / math.sqrt(lp_integral(f, 2)))
        thetas = I.children(lvl) if I.level <= lvl else [I]
        parts.append([inverse_fourier(restrict_frequency(F, t)).values for t in thetas])
    prods = [a * b for a in parts[0] for b in parts[1]]
    cm = inst.f1_hat.spec.dual().cell_measure
    Pm = np.stack([p.ravel() for p in prods])
    gram = (Pm @ Pm.conj().T) * cm
    off = gram - np.diag(np.diag(gram))
    worst = float(np.abs(off).max()) if len(prods) > 1 else 0.0
    return worst, float(np.abs(np.diag(gram)).max()), len(prods)


# ------------------------------------------------------------------ summary helpers
def violations(reports: Iterable[InequalityReport]) -> list[InequalityReport]:
    return [r for r in reports if r.passed is False]


def timed(fn, *args, timing: bool = False, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    if timing and isinstance(out, list):
        ms = (time.perf_counter() - t0) * 1000 / max(len(out), 1)
        for r in out:
            r.runtime_ms = ms
    return out
