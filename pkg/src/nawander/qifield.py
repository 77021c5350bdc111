"""Exact arithmetic in Q(i) with the 2-adic absolute value.

Elements are pairs of ``fractions.Fraction`` (re + im*i); all field
operations are exact.  The absolute value extends the 2-adic one on Q:
|z| = 2^(-v2(re^2 + im^2) / 2), so exponents live in (1/2)Z.  With the
normalization |2| = 1/2 this gives |1+i| = 2^(-1/2) and |a| = 2 for the
worked constant a = -1 + i/2.

Square roots are exact when they exist in Q(i) (``sqrt_exact``); roots
that exit the field are the business of the tower extensions, not this
module.
"""

from __future__ import annotations

from fractions import Fraction

from .valgroup import ValExp, ZERO


def v2_int(n: int) -> int:
    if n == 0:
        raise ValueError("v2 of 0")
    return ((n & -n).bit_length()) - 1


def v2_fraction(q: Fraction) -> int:
    return v2_int(q.numerator) - v2_int(q.denominator)


class GaussianRational:
    """Exact element re + im*i of Q(i)."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = Fraction(re)
        self.im = Fraction(im)

    # -- basics ---------------------------------------------------------

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def __eq__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self.re == other.re and self.im == other.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __repr__(self):
        return f"GaussianRational({self.re!r}, {self.im!r})"

    def __str__(self):
        if self.im == 0:
            return str(self.re)
        if self.re == 0:
            return f"{self.im}*i"
        sign = "+" if self.im > 0 else "-"
        return f"{self.re} {sign} {abs(self.im)}*i"

    # -- field operations -------------------------------------------------

    def __add__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return GaussianRational(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __sub__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return GaussianRational(self.re - other.re, self.im - other.im)

    def __rsub__(self, other):
        return _coerce(other) - self

    def __mul__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return GaussianRational(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    __rmul__ = __mul__

    def inverse(self) -> "GaussianRational":
        if self.is_zero():
            raise ZeroDivisionError("inverse of 0 in Q(i)")
        n = self.re * self.re + self.im * self.im
        return GaussianRational(self.re / n, -self.im / n)

    def __truediv__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self * other.inverse()

    def __rtruediv__(self, other):
        return _coerce(other) / self

    def conjugate(self) -> "GaussianRational":
        return GaussianRational(self.re, -self.im)

    def norm(self) -> Fraction:
        """Field norm re^2 + im^2 down to Q."""
        return self.re * self.re + self.im * self.im

    # -- valuation ---------------------------------------------------------

    def val(self) -> ValExp:
        """Absolute value exponent: -v2(norm)/2; ZERO for the element 0."""
        if self.is_zero():
            return ZERO
        return ValExp(Fraction(-v2_fraction(self.norm()), 2))

    # -- serialization -------------------------------------------------------

    def serialize(self) -> dict:
        return {"re": _frac_str(self.re), "im": _frac_str(self.im)}

    @classmethod
    def deserialize(cls, data: dict) -> "GaussianRational":
        return cls(_parse_frac(data["re"]), _parse_frac(data["im"]))


def _frac_str(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


def _parse_frac(text: str) -> Fraction:
    num, _, den = text.partition("/")
    return Fraction(int(num), int(den or "1"))


def _coerce(x):
    if isinstance(x, GaussianRational):
        return x
    if isinstance(x, (int, Fraction)):
        return GaussianRational(x)
    return NotImplemented


I = GaussianRational(0, 1)
ONE = GaussianRational(1, 0)
ZERO_Q = GaussianRational(0, 0)


def val(z: GaussianRational) -> ValExp:
    return z.val()


def sqrt_exact(z: GaussianRational):
    """Both square roots of z in Q(i), or None if they exit the field.

    Solving (x+yi)^2 = re + im*i exactly: either im = 0 and the root is
    purely real or purely imaginary, or x^2 is a rational root of the
    resolvent 4t^2 - 4*re*t - im^2 (t = x^2), which requires the rational
    discriminant re^2 + im^2 to be a perfect square in Q.
    """
    if z.is_zero():
        return (ZERO_Q, ZERO_Q)
    n = z.norm()
    s = _rational_sqrt(n)
    if s is None:
        return None
    # |root|^2 candidates: x^2 = (re + s)/2 or (re - s)/2, with y = im/(2x)
    for t in ((z.re + s) / 2, (z.re - s) / 2):
        if t == 0:
            continue
        x = _rational_sqrt(t)
        if x is None or x == 0:
            continue
        if z.im == 0:
            # need x^2 == re exactly (t was re or 0)
            if x * x == z.re:
                r = GaussianRational(x, 0)
                return (r, -r)
            continue
        y = z.im / (2 * x)
        r = GaussianRational(x, y)
        if r * r == z:
            return (r, -r)
    if z.im == 0 and z.re < 0:
        y = _rational_sqrt(-z.re)
        if y is not None:
            r = GaussianRational(0, y)
            return (r, -r)
    return None


def _rational_sqrt(q: Fraction):
    """Exact square root of a nonnegative rational, or None."""
    if q < 0:
        return None
    if q == 0:
        return Fraction(0)
    num, den = q.numerator, q.denominator
    rn = _isqrt_exact(num)
    if rn is None:
        return None
    rd = _isqrt_exact(den)
    if rd is None:
        return None
    return Fraction(rn, rd)


def _isqrt_exact(n: int):
    from math import isqrt

    r = isqrt(n)
    return r if r * r == n else None
