"""Rational enclosures of transcendental values.

``exp`` and ``log`` of rationals are bracketed by truncated power series with
explicit remainder bounds, then rounded outward onto a dyadic grid so the
endpoints keep small denominators. Every enclosure returned here contains the
true real value; no floating point is involved.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import ceil, floor, log2

from bcq.errors import InvalidInput

DEFAULT_WIDTH = Fraction(1, 10**9)
FINEST_WIDTH = Fraction(1, 10**30)
# widths tried in order when a comparison is not yet decided
REFINEMENT_WIDTHS = (DEFAULT_WIDTH, Fraction(1, 10**15), Fraction(1, 10**22), FINEST_WIDTH)


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    raise TypeError(f"expected int or Fraction, got {type(x).__name__}")


@dataclass(frozen=True)
class RationalEnclosure:
    lower: Fraction
    upper: Fraction

    def __post_init__(self):
        lo, hi = _frac(self.lower), _frac(self.upper)
        if lo > hi:
            raise InvalidInput(f"empty enclosure [{lo}, {hi}]")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def exact(cls, x) -> "RationalEnclosure":
        x = _frac(x)
        return cls(x, x)

    @property
    def width(self) -> Fraction:
        return self.upper - self.lower

    @property
    def midpoint(self) -> Fraction:
        return (self.lower + self.upper) / 2

    @property
    def is_exact(self) -> bool:
        return self.lower == self.upper

    def contains(self, x) -> bool:
        if isinstance(x, RationalEnclosure):
            return self.lower <= x.lower and x.upper <= self.upper
        if isinstance(x, float):
            x = Fraction(x)
        return self.lower <= x <= self.upper

    def overlaps(self, other: "RationalEnclosure") -> bool:
        return self.lower <= other.upper and other.lower <= self.upper

    def __float__(self):
        return float(self.midpoint)

    def __neg__(self):
        return RationalEnclosure(-self.upper, -self.lower)

    def __add__(self, other):
        o = enclose(other)
        return RationalEnclosure(self.lower + o.lower, self.upper + o.upper)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-enclose(other))

    def __rsub__(self, other):
        return enclose(other) - self

    def __mul__(self, other):
        o = enclose(other)
        products = (self.lower * o.lower, self.lower * o.upper,
                    self.upper * o.lower, self.upper * o.upper)
        return RationalEnclosure(min(products), max(products))

    __rmul__ = __mul__

    def reciprocal(self) -> "RationalEnclosure":
        if self.lower <= 0 <= self.upper:
            raise ZeroDivisionError(f"enclosure [{self.lower}, {self.upper}] contains 0")
        return RationalEnclosure(1 / self.upper, 1 / self.lower)

    def __truediv__(self, other):
        return self * enclose(other).reciprocal()

    def __rtruediv__(self, other):
        return enclose(other) * self.reciprocal()

    def rounded(self, bits: int) -> "RationalEnclosure":
        """Outward rounding onto the grid 2**-bits."""
        return RationalEnclosure(_floor_grid(self.lower, bits), _ceil_grid(self.upper, bits))

    def __str__(self):
        return f"[{float(self.lower):.15g}, {float(self.upper):.15g}]"


def enclose(x) -> RationalEnclosure:
    if isinstance(x, RationalEnclosure):
        return x
    return RationalEnclosure.exact(x)


def _floor_grid(x: Fraction, bits: int) -> Fraction:
    scale = 1 << bits
    return Fraction(floor(x * scale), scale)


def _ceil_grid(x: Fraction, bits: int) -> Fraction:
    scale = 1 << bits
    return Fraction(ceil(x * scale), scale)


def _bits_for(width: Fraction) -> int:
    width = _frac(width)
    if width <= 0:
        raise InvalidInput("enclosure width must be positive")
    return max(1, ceil(log2(1 / width))) + 3


def _exp_small(y: Fraction, bits: int) -> tuple[Fraction, Fraction]:
    """Bracket exp(y) for 0 <= y <= 1/2 to within 2**-bits."""
    total = Fraction(0)
    term = Fraction(1)
    k = 0
    tol = Fraction(1, 1 << (bits + 2))
    while True:
        total += term
        k += 1
        term = term * y / k
        # tail after this point is below 2*term since successive ratios are <= 1/2
        if 2 * term <= tol:
            break
    return total, total + 2 * term


def _exp_positive(x: Fraction, bits: int) -> tuple[Fraction, Fraction]:
    s = 0
    while x > Fraction(1, 2) * (1 << s):
        s += 1
    y = x / (1 << s)
    # relative error doubles on every squaring and scales with exp(x)
    work = bits + 2 * s + ceil(float(x) * 1.5) + 8
    lo, hi = _exp_small(y, work)
    lo, hi = _floor_grid(lo, work), _ceil_grid(hi, work)
    for _ in range(s):
        lo = _floor_grid(lo * lo, work)
        hi = _ceil_grid(hi * hi, work)
    return lo, hi


def exp_enclosure(x, width=DEFAULT_WIDTH) -> RationalEnclosure:
    """Enclosure of exp(x) of width at most ``width``."""
    x = _frac(x)
    width = _frac(width)
    if x == 0:
        return RationalEnclosure.exact(1)
    bits = _bits_for(width)
    while True:
        if x > 0:
            lo, hi = _exp_positive(x, bits)
        else:
            plo, phi = _exp_positive(-x, bits)
            lo, hi = 1 / phi, 1 / plo
        enc = RationalEnclosure(lo, hi).rounded(bits + 2)
        if enc.width <= width:
            return enc
        bits += 8


def _atanh_series(z: Fraction, bits: int) -> tuple[Fraction, Fraction]:
    """Bracket atanh(z) for 0 <= z <= 1/3."""
    z2 = z * z
    power = z
    total = Fraction(0)
    j = 0
    tol = Fraction(1, 1 << (bits + 2))
    while True:
        total += power / (2 * j + 1)
        j += 1
        power *= z2
        remainder = power / ((2 * j + 1) * (1 - z2))
        if remainder <= tol:
            break
    return total, total + remainder


def _ln2(bits: int) -> tuple[Fraction, Fraction]:
    lo, hi = _atanh_series(Fraction(1, 3), bits + 1)
    return 2 * lo, 2 * hi


def log_enclosure(x, width=DEFAULT_WIDTH) -> RationalEnclosure:
    """Enclosure of the natural log of a positive rational."""
    x = _frac(x)
    width = _frac(width)
    if x <= 0:
        raise InvalidInput(f"log of non-positive value {x}")
    if x == 1:
        return RationalEnclosure.exact(0)
    k = x.numerator.bit_length() - x.denominator.bit_length()
    m = x / Fraction(2) ** k
    while m >= Fraction(4, 3):
        m /= 2
        k += 1
    while m < Fraction(2, 3):
        m *= 2
        k -= 1
    bits = _bits_for(width)
    while True:
        work = bits + abs(k).bit_length() + 4
        if m == 1:
            mlo = mhi = Fraction(0)
        else:
            z = (m - 1) / (m + 1)
            alo, ahi = _atanh_series(abs(z), work)
            if z > 0:
                mlo, mhi = 2 * alo, 2 * ahi
            else:
                mlo, mhi = -2 * ahi, -2 * alo
        llo, lhi = _ln2(work)
        if k >= 0:
            klo, khi = k * llo, k * lhi
        else:
            klo, khi = k * lhi, k * llo
        enc = RationalEnclosure(klo + mlo, khi + mhi).rounded(work)
        if enc.width <= width:
            return enc
        bits += 8


def exp_interval(enc: RationalEnclosure, width=DEFAULT_WIDTH) -> RationalEnclosure:
    """exp is increasing, so the image of [a, b] is [exp a, exp b]."""
    enc = enclose(enc)
    half = _frac(width) / 2
    return RationalEnclosure(exp_enclosure(enc.lower, half).lower,
                             exp_enclosure(enc.upper, half).upper)


def log2_enclosure(x, width=DEFAULT_WIDTH) -> RationalEnclosure:
    width = _frac(width)
    inner = width / 8
    while True:
        enc = log_enclosure(x, inner) / log_enclosure(2, inner)
        if enc.width <= width:
            return enc
        inner /= 16


def power_of_two(level: int) -> Fraction:
    """2**-level as an exact rational."""
    if level < 0:
        raise InvalidInput("level must be nonnegative")
    return Fraction(1, 1 << level)
