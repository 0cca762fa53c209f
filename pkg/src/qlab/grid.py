"""Functions on finite coset grids of Q_q (1-D) or Q_q^2 (2-D) and their
exact Fourier analysis.

An axis with extent exponent ``E`` and cell exponent ``C`` describes a
function supported in ``|x| <= q**E`` and constant on cosets of
``q**C O``.  Its ``q**(E+C)`` cells have representatives ``x = i q**-E``.
On such an axis the character kernel ``chi(-x xi)`` reduces to
``exp(-2 pi i ij/n)``, so the q-adic transform is a cyclic DFT scaled by the
cell measure.  The transform swaps ``E`` and ``C``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Literal

import numpy as np
import scipy.fft as sfft

from .qadic import QInterval, check_prime

Side = Literal["space", "frequency"]

DEFAULT_BUDGET_BYTES = 4 * 1024 ** 3


class BudgetExceeded(MemoryError):
    """A grid would not fit in the configured memory budget."""


class SpecMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Axis:
    extent: int
    cell: int

    def __post_init__(self) -> None:
        if self.extent + self.cell < 0:
            raise ValueError("extent + cell exponent must be nonnegative")

    @property
    def exponent(self) -> int:
        return self.extent + self.cell

    def dual(self) -> "Axis":
        return Axis(self.cell, self.extent)


@dataclass(frozen=True)
class GridSpec:
    q: int
    axes: tuple[Axis, ...]

    def __post_init__(self) -> None:
        check_prime(self.q)
        if len(self.axes) not in (1, 2):
            raise ValueError("only 1-D and 2-D grids are supported")

    @classmethod
    def square(cls, q: int, extent: int, cell: int, ndim: int = 2) -> "GridSpec":
        return cls(q, tuple(Axis(extent, cell) for _ in range(ndim)))

    @classmethod
    def of(cls, q: int, *pairs: tuple[int, int]) -> "GridSpec":
        return cls(q, tuple(Axis(e, c) for e, c in pairs))

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.q ** a.exponent for a in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_measure(self) -> float:
        return float(self.q) ** (-sum(a.cell for a in self.axes))

    def nbytes(self) -> int:
        return 16 * self.size

    def dual(self) -> "GridSpec":
        return GridSpec(self.q, tuple(a.dual() for a in self.axes))

    def check_budget(self, budget_bytes: int = DEFAULT_BUDGET_BYTES, copies: int = 1) -> None:
        need = copies * self.nbytes()
        if need > budget_bytes:
            raise BudgetExceeded(
                f"grid of shape {self.shape} needs {need / 2**20:.0f} MiB, "
                f"budget is {budget_bytes / 2**20:.0f} MiB")

    def norm_exponent_grid(self, axis: int) -> np.ndarray:
        """For each index along ``axis``: the exponent e with |x| = q**e (x != 0)."""
        ax = self.axes[axis]
        n = self.q ** ax.exponent
        idx = np.arange(n)
        val = np.full(n, -ax.cell, dtype=np.int64)  # cells at 0 have |x| <= q**-C
        nz = idx != 0
        v = np.zeros(n, dtype=np.int64)
        rest = idx.copy()
        for _ in range(ax.exponent):
            m = nz & (rest % self.q == 0)
            if not m.any():
                break
            v[m] += 1
            rest[m] //= self.q
        val[nz] = ax.extent - v[nz]
        return val


@dataclass(frozen=True, eq=False)
class GridFunction:
    spec: GridSpec
    side: Side
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.side not in ("space", "frequency"):
            raise ValueError("side must be 'space' or 'frequency'")
        if tuple(self.values.shape) != self.spec.shape:
            raise SpecMismatch(f"values shape {self.values.shape} != spec shape {self.spec.shape}")

    @classmethod
    def zeros(cls, spec: GridSpec, side: Side = "space") -> "GridFunction":
        return cls(spec, side, np.zeros(spec.shape, dtype=complex))

    @classmethod
    def constant(cls, spec: GridSpec, value: complex = 1.0, side: Side = "space") -> "GridFunction":
        return cls(spec, side, np.full(spec.shape, value, dtype=complex))

    def _like(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(self.spec, self.side, values)

    def _match(self, other: "GridFunction") -> None:
        if self.spec != other.spec or self.side != other.side:
            raise SpecMismatch("grid functions live on different grids")

    # pointwise operations
    def __add__(self, other: "GridFunction") -> "GridFunction":
        self._match(other)
        return self._like(self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        self._match(other)
        return self._like(self.values - other.values)

    def __mul__(self, other) -> "GridFunction":
        if isinstance(other, GridFunction):
            self._match(other)
            return self._like(self.values * other.values)
        return self._like(self.values * other)

    __rmul__ = __mul__

    def conj(self) -> "GridFunction":
        return self._like(np.conj(self.values))

    def abs(self) -> "GridFunction":
        return self._like(np.abs(self.values).astype(complex))

    def masked(self, mask: np.ndarray) -> "GridFunction":
        if mask.shape != self.values.shape:
            raise SpecMismatch("mask shape differs from the grid")
        return self._like(np.where(mask, self.values, 0))


def lp_integral(f: GridFunction, p: float, mask: np.ndarray | None = None) -> float:
    """Haar-weighted sum of |f|**p over the cells (optionally over a mask)."""
    if p <= 0:
        raise ValueError("p must be positive")
    a = np.abs(f.values)
    if mask is not None:
        a = a[mask]
    return float(np.sum(a ** p) * f.spec.cell_measure)


def forward_fourier(f: GridFunction) -> GridFunction:
    """hat f(xi) = int f(x) chi(-xi x) dx on the dual grid."""
    if f.side != "space":
        raise ValueError("forward transform expects a space-side function")
    out = sfft.fftn(f.values) * f.spec.cell_measure
    return GridFunction(f.spec.dual(), "frequency", out)


def inverse_fourier(F: GridFunction) -> GridFunction:
    """check F(x) = int F(xi) chi(xi x) dxi on the dual grid."""
    if F.side != "frequency":
        raise ValueError("inverse transform expects a frequency-side function")
    out = sfft.ifftn(F.values) * (F.spec.size * F.spec.cell_measure)
    return GridFunction(F.spec.dual(), "space", out)


def ball_indicator(spec: GridSpec, radius_exp: int, side: Side = "space") -> GridFunction:
    """Indicator of {|x| <= q**radius_exp} (max norm over axes)."""
    mask = np.ones(spec.shape, dtype=bool)
    for ax in range(spec.ndim):
        e = spec.norm_exponent_grid(ax)
        shape = [1] * spec.ndim
        shape[ax] = -1
        mask = mask & (e <= radius_exp).reshape(shape)
    return GridFunction(spec, side, mask.astype(complex))


def restrict_frequency(F: GridFunction, tau: QInterval, axis: int = 0) -> GridFunction:
    """Keep the frequency cells whose coordinate along ``axis`` lies in tau."""
    if F.side != "frequency":
        raise ValueError("restriction acts on frequency-side functions")
    ax = F.spec.axes[axis]
    if ax.extent > 0:
        raise ValueError("frequency axis extends beyond O")
    if tau.level > ax.cell:
        raise ValueError("tau is finer than the frequency resolution")
    # xi = j q**-E with E <= 0, an integer
    xi = np.arange(F.spec.shape[axis]) * F.spec.q ** (-ax.extent)
    keep = (xi - tau.residue) % tau.modulus == 0
    shape = [1] * F.spec.ndim
    shape[axis] = -1
    return F.masked(np.broadcast_to(keep.reshape(shape), F.spec.shape))


def lowpass(g: GridFunction, cutoff_exp: int, method: str = "fourier") -> GridFunction:
    """Keep the frequencies with |xi| <= q**cutoff_exp.

    ``method='fourier'`` multiplies the transform by the ball indicator;
    ``method='average'`` averages g over space balls of radius q**-cutoff_exp,
    which is the same operator because the normalized ball indicator has the
    frequency ball as its transform.
    """
    if g.side != "space":
        raise ValueError("lowpass acts on space-side functions")
    if any(cutoff_exp < -ax.extent for ax in g.spec.axes):
        raise ValueError("cutoff is below the frequency resolution")
    if method == "fourier":
        G = forward_fourier(g)
        B = ball_indicator(G.spec, cutoff_exp, side="frequency")
        return inverse_fourier(G * B)
    if method != "average":
        raise ValueError(f"unknown method {method!r}")
    vals = g.values
    for ax_i, ax in enumerate(g.spec.axes):
        # x = i q**-E; |x - x'| <= q**-c  <=>  i = i' mod q**(E + c)
        period = ax.extent + cutoff_exp
        n = g.spec.q ** ax.exponent
        if period >= ax.exponent:
            continue
        if period <= 0:
            vals = np.broadcast_to(vals.mean(axis=ax_i, keepdims=True), vals.shape).copy()
            continue
        p = g.spec.q ** period
        shp = list(vals.shape)
        new = shp[:ax_i] + [n // p, p] + shp[ax_i + 1:]
        blk = vals.reshape(new).mean(axis=ax_i, keepdims=True)
        vals = np.broadcast_to(blk, new).reshape(shp).copy()
    return g._like(vals)


def highpart(g: GridFunction, cutoff_exp: int, method: str = "fourier") -> GridFunction:
    return g - lowpass(g, cutoff_exp, method)


def constant_along(values: np.ndarray, axis: int, period: int, rtol: float = 1e-9) -> bool:
    """True if values depend on the index along ``axis`` only modulo ``period``."""
    n = values.shape[axis]
    if period >= n:
        return True
    shp = list(values.shape)
    new = shp[:axis] + [n // period, period] + shp[axis + 1:]
    v = values.reshape(new)
    first = np.take(v, [0], axis=axis)
    scale = max(float(np.max(np.abs(values))), 1e-300)
    return bool(np.max(np.abs(v - first)) <= rtol * scale)


def constancy_scale(f: GridFunction, modulus: bool = False, rtol: float = 1e-9) -> tuple[int, ...]:
    """Per axis, the largest s such that f (or |f|) is constant on cosets of
    diameter q**s along that axis.  Squares of side q**s carry a constant
    value exactly when every axis scale is at least s."""
    if f.side != "space":
        raise ValueError("constancy is measured on the space side")
    vals = np.abs(f.values) if modulus else f.values
    out = []
    for ax_i, ax in enumerate(f.spec.axes):
        best = -ax.cell
        for s in range(ax.extent, -ax.cell - 1, -1):
            # |x - x'| <= q**s  <=>  i = i' mod q**(E - s)
            period = f.spec.q ** (ax.extent - s)
            if constant_along(vals, ax_i, period, rtol):
                best = s
                break
        out.append(best)
    return tuple(out)


def square_constancy_scale(f: GridFunction, modulus: bool = False, rtol: float = 1e-9) -> int:
    return min(constancy_scale(f, modulus, rtol))


# ---------------------------------------------------------------- snapshots
_MAGIC = b"QGRD"
_SIDES = {"space": 0, "frequency": 1}


def save_snapshot(f: GridFunction, path: str | Path) -> None:
    """Binary table: header (q, ndim, per-axis E/C, side tag) then the
    values as interleaved little-endian float64 real/imag in row-major order."""
    header = struct.pack("<4sIII", _MAGIC, 1, f.spec.q, f.spec.ndim)
    for ax in f.spec.axes:
        header += struct.pack("<ii", ax.extent, ax.cell)
    header += struct.pack("<I", _SIDES[f.side])
    body = np.ascontiguousarray(f.values, dtype="<c16").view("<f8").tobytes()
    Path(path).write_bytes(header + body)


def load_snapshot(path: str | Path) -> GridFunction:
    raw = Path(path).read_bytes()
    magic, version, q, ndim = struct.unpack_from("<4sIII", raw, 0)
    if magic != _MAGIC or version != 1:
        raise ValueError("not a grid snapshot")
    off = 16
    axes = []
    for _ in range(ndim):
        e, c = struct.unpack_from("<ii", raw, off)
        axes.append(Axis(e, c))
        off += 8
    (tag,) = struct.unpack_from("<I", raw, off)
    off += 4
    spec = GridSpec(q, tuple(axes))
    side = "space" if tag == 0 else "frequency"
    vals = np.frombuffer(raw, dtype="<f8", offset=off).view("<c16").reshape(spec.shape).copy()
    return GridFunction(spec, side, vals)


# ---------------------------------------------------------------- streaming
def stream_inverse_rows(F: GridFunction, block: int = 512,
                        budget_bytes: int = DEFAULT_BUDGET_BYTES
                        ) -> Iterator[tuple[slice, np.ndarray]]:
    """Yield (slice, values) row blocks of the inverse transform of a 2-D
    frequency function.

    The transform along the first axis is done once for the whole array;
    each block then needs only a block-sized transform along the second.
    """
    if F.side != "frequency" or F.spec.ndim != 2:
        raise ValueError("expects a 2-D frequency-side function")
    F.spec.check_budget(budget_bytes, copies=2)
    scale = F.spec.size * F.spec.cell_measure
    half = sfft.ifft(F.values, axis=0)
    n0 = F.spec.shape[0]
    for start in range(0, n0, block):
        sl = slice(start, min(start + block, n0))
        yield sl, sfft.ifft(half[sl], axis=1) * scale
