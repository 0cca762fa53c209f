"""Finite-precision q-adic numbers, the standard additive character, and
q-adic intervals of the ring of integers.

A nonzero element is stored as ``q**valuation * (d_0 + d_1 q + ... )`` with
``P`` base-q digits and ``d_0 != 0``.  Arithmetic is exact modulo the
absolute cap that the operands allow (``min(v1, v2) + P`` for sums,
``v1 + v2 + P`` for products), which is how capped-relative p-adic
libraries behave.  Nothing is ever rounded.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence


class PrecisionError(ValueError):
    """Raised when a value does not fit in the configured digit budget."""


def is_odd_prime(q: int) -> bool:
    if q < 3 or q % 2 == 0:
        return False
    return all(q % d for d in range(3, math.isqrt(q) + 1, 2))


def check_prime(q: int) -> int:
    if not is_odd_prime(q):
        raise ValueError(f"q must be an odd prime, got {q}")
    return q


def valuation_int(n: int, q: int) -> int:
    """q-adic valuation of a nonzero integer."""
    if n == 0:
        raise ValueError("valuation of 0 is infinite")
    v = 0
    while n % q == 0:
        n //= q
        v += 1
    return v


def qabs_int(n: int, q: int) -> Fraction:
    """|n|_q for an integer, as an exact rational."""
    if n == 0:
        return Fraction(0)
    return Fraction(1, q ** valuation_int(n, q))


def log_q(n: int, q: int) -> int:
    """Exact base-q logarithm of a power of q."""
    if n < 1:
        raise ValueError(f"{n} is not a power of {q}")
    e = 0
    while n % q == 0:
        n //= q
        e += 1
    if n != 1:
        raise ValueError(f"not a power of {q}")
    return e


@dataclass(frozen=True)
class QAdicScalar:
    q: int
    precision: int
    valuation: int
    digits: tuple[int, ...]
    zero: bool = False

    def __post_init__(self) -> None:
        if self.zero:
            return
        if len(self.digits) != self.precision:
            raise PrecisionError("digit count must equal the precision")
        if self.digits[0] == 0:
            raise ValueError("mantissa must be normalized (leading digit nonzero)")
        if any(not 0 <= d < self.q for d in self.digits):
            raise ValueError("digits must lie in [0, q)")

    # -- construction ---------------------------------------------------
    @classmethod
    def zero_of(cls, q: int, precision: int = 24) -> "QAdicScalar":
        return cls(q, precision, 0, (), zero=True)

    @classmethod
    def from_unit_part(cls, q: int, precision: int, valuation: int, unit: int) -> "QAdicScalar":
        """Build ``q**valuation * unit`` where ``unit`` is reduced mod q**precision."""
        unit %= q ** precision
        if unit == 0:
            return cls.zero_of(q, precision)
        shift = valuation_int(unit, q)
        if shift:
            raise ValueError("unit part must not be divisible by q")
        digs = []
        u = unit
        for _ in range(precision):
            u, d = divmod(u, q)
            digs.append(d)
        return cls(q, precision, valuation, tuple(digs))

    @classmethod
    def _from_capped(cls, q: int, precision: int, value: int, scale: int, cap: int) -> "QAdicScalar":
        # value * q**scale, known modulo q**cap
        if cap <= scale:
            raise PrecisionError("no significant digits survive")
        value %= q ** (cap - scale)
        if value == 0:
            return cls.zero_of(q, precision)
        v = valuation_int(value, q)
        unit = value // q ** v
        return cls.from_unit_part(q, precision, scale + v, unit)

    # -- reading --------------------------------------------------------
    def mantissa(self) -> int:
        return sum(d * self.q ** i for i, d in enumerate(self.digits))

    def to_fraction(self) -> Fraction:
        """The stored representative as a rational number."""
        if self.zero:
            return Fraction(0)
        return Fraction(self.mantissa()) * Fraction(self.q) ** self.valuation

    def digit(self, position: int) -> int:
        """Coefficient of q**position in the stored expansion."""
        if self.zero:
            return 0
        i = position - self.valuation
        if 0 <= i < self.precision:
            return self.digits[i]
        if i < 0:
            return 0
        raise PrecisionError(f"digit at q^{position} is beyond the precision")

    def fractional_part(self) -> Fraction:
        """Sum of the negative-index digits, a rational in [0, 1)."""
        if self.zero or self.valuation >= 0:
            return Fraction(0)
        top = min(-self.valuation, self.precision)
        num = sum(self.digits[i] * self.q ** i for i in range(top))
        return Fraction(num, self.q ** (-self.valuation))

    # -- arithmetic -----------------------------------------------------
    def _check(self, other: "QAdicScalar") -> None:
        if (self.q, self.precision) != (other.q, other.precision):
            raise ValueError("operands differ in q or precision")

    def __add__(self, other: "QAdicScalar") -> "QAdicScalar":
        self._check(other)
        if self.zero:
            return other
        if other.zero:
            return self
        scale = min(self.valuation, other.valuation)
        cap = scale + self.precision
        total = (self.mantissa() * self.q ** (self.valuation - scale)
                 + other.mantissa() * self.q ** (other.valuation - scale))
        return self._from_capped(self.q, self.precision, total, scale, cap)

    def __neg__(self) -> "QAdicScalar":
        if self.zero:
            return self
        return self._from_capped(self.q, self.precision, -self.mantissa(), self.valuation,
                                 self.valuation + self.precision)

    def __sub__(self, other: "QAdicScalar") -> "QAdicScalar":
        return self + (-other)

    def __mul__(self, other: "QAdicScalar") -> "QAdicScalar":
        self._check(other)
        if self.zero or other.zero:
            return self.zero_of(self.q, self.precision)
        scale = self.valuation + other.valuation
        return self._from_capped(self.q, self.precision, self.mantissa() * other.mantissa(),
                                 scale, scale + self.precision)


def embed_int(n: int, q: int = 3, precision: int = 24) -> QAdicScalar:
    """Base-q expansion of an integer; negatives use the complement digits."""
    if abs(n) >= q ** precision:
        raise PrecisionError(f"|{n}| does not fit in {precision} base-{q} digits")
    if n == 0:
        return QAdicScalar.zero_of(q, precision)
    v = valuation_int(n, q)
    return QAdicScalar.from_unit_part(q, precision, v, n // q ** v)


def from_fraction(x: Fraction, q: int = 3, precision: int = 24) -> QAdicScalar:
    """Expansion of a rational whose denominator is a power of q."""
    x = Fraction(x)
    if x == 0:
        return QAdicScalar.zero_of(q, precision)
    k = log_q(x.denominator, q)
    v = valuation_int(x.numerator, q)
    unit = x.numerator // q ** v
    if abs(unit) >= q ** precision:
        raise PrecisionError("unit part does not fit in the precision")
    return QAdicScalar.from_unit_part(q, precision, v - k, unit)


def qnorm(x: QAdicScalar) -> Fraction:
    if x.zero:
        return Fraction(0)
    return Fraction(x.q) ** (-x.valuation)


def chi(x: QAdicScalar) -> complex:
    """e(fractional part); trivial on the integers, nontrivial on q^-1 O."""
    frac = x.fractional_part()
    if frac == 0:
        return 1 + 0j
    return cmath.exp(2j * math.pi * frac.numerator / frac.denominator)


def e_frac(num: int, den: int) -> complex:
    """e(num/den) with the argument reduced exactly before exponentiating."""
    num %= den
    return cmath.exp(2j * math.pi * num / den)


@dataclass(frozen=True, order=True)
class QInterval:
    """{xi in O : |xi - residue| <= q**-level}, i.e. xi = residue mod q**level."""

    level: int
    residue: int
    q: int = 3

    def __post_init__(self) -> None:
        if self.level < 0:
            raise ValueError("level must be nonnegative")
        if not 0 <= self.residue < self.q ** self.level:
            raise ValueError("residue out of range for the level")

    @property
    def length(self) -> Fraction:
        return Fraction(1, self.q ** self.level)

    @property
    def modulus(self) -> int:
        return self.q ** self.level

    def contains_int(self, n: int) -> bool:
        return (n - self.residue) % self.modulus == 0

    def contains(self, x: QAdicScalar) -> bool:
        if x.valuation < 0 and not x.zero:
            return False
        digits = sum(x.digit(j) * self.q ** j for j in range(self.level)) if not x.zero else 0
        return digits == self.residue

    def children(self, level: int) -> list["QInterval"]:
        """Sub-intervals of a finer level, in residue order."""
        if level < self.level:
            raise ValueError("children must be at a finer level")
        step = self.modulus
        count = self.q ** (level - self.level)
        return [QInterval(level, self.residue + step * t, self.q) for t in range(count)]

    def parent(self, level: int) -> "QInterval":
        if level > self.level:
            raise ValueError("parent must be at a coarser level")
        return QInterval(level, self.residue % self.q ** level, self.q)

    def distance(self, other: "QInterval") -> Fraction:
        """q-adic distance between two intervals (0 if they meet)."""
        lo = min(self.level, other.level)
        if (self.residue - other.residue) % self.q ** lo == 0:
            return Fraction(0)
        return qabs_int(self.residue - other.residue, self.q)


def interval_partition(m: int, q: int = 3) -> list[QInterval]:
    if m < 0:
        raise ValueError("level must be nonnegative")
    return [QInterval(m, c, q) for c in range(q ** m)]


def iter_children(intervals: Sequence[QInterval], level: int) -> Iterator[QInterval]:
    for iv in intervals:
        yield from iv.children(level)


def qabs_frac(x: Fraction, q: int) -> Fraction:
    """|x|_q for a rational."""
    x = Fraction(x)
    if x == 0:
        return Fraction(0)
    v = valuation_int(x.numerator, q) - (valuation_int(x.denominator, q) if x.denominator % q == 0 else 0)
    return Fraction(q) ** (-v)


def reduce_mod_ball(x: Fraction, k: int, q: int) -> Fraction:
    """Canonical representative of x + q**k O for x in Z[1/q]: the digits of
    x strictly below position k."""
    x = Fraction(x)
    y = x / Fraction(q) ** k
    d = log_q(y.denominator, q)
    return Fraction(y.numerator % q ** d, q ** d) * Fraction(q) ** k
