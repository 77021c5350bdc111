"""Exact arithmetic in the value group 2^Q.

An absolute value is stored as its exact rational exponent q, meaning the
real number 2**q; the absolute value of 0 is the distinguished element
``ValExp.ZERO`` (exponent "minus infinity").  All comparisons and all
arithmetic on exponents are exact rational operations; no floating point
appears anywhere in this module or in anything built on it.

The module also provides the contraction-scale sequence rho_i and the
shrink products 2^(2N) * rho_N^2 * ... * rho_1^2 that drive the choice of
the itinerary integers.  rho_1 = 1/2 and rho_i = 1/(2 * 2^(1/4) * ... *
2^(1/2^i)); the exponent of rho_i is -3/2 + 2^(-i) and is always computed
both ways in the test suite.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Union

_ExpLike = Union[int, Fraction, "ValExp"]


class ValExp:
    """An absolute value 2**exponent with exact rational exponent.

    ``ValExp.ZERO`` is the absolute value of 0.  It absorbs multiplication
    and is smaller than every finite value.
    """

    __slots__ = ("_q",)

    def __init__(self, exponent=None):
        if exponent is None:
            self._q = None
        elif isinstance(exponent, ValExp):
            self._q = exponent._q
        else:
            self._q = Fraction(exponent)

    # -- constructors -------------------------------------------------

    @classmethod
    def of(cls, num, den=1) -> "ValExp":
        return cls(Fraction(num, den))

    # -- predicates / accessors ---------------------------------------

    @property
    def is_zero(self) -> bool:
        return self._q is None

    @property
    def exponent(self) -> Fraction:
        if self._q is None:
            raise ValueError("the zero absolute value has no finite exponent")
        return self._q

    # -- arithmetic ----------------------------------------------------

    def __mul__(self, other: "ValExp") -> "ValExp":
        other = _coerce(other)
        if self.is_zero or other.is_zero:
            return ZERO
        return ValExp(self._q + other._q)

    def __truediv__(self, other: "ValExp") -> "ValExp":
        other = _coerce(other)
        if other.is_zero:
            raise ZeroDivisionError("division by the zero absolute value")
        if self.is_zero:
            return ZERO
        return ValExp(self._q - other._q)

    def __pow__(self, n: int) -> "ValExp":
        if self.is_zero:
            if n <= 0:
                raise ZeroDivisionError("0**n for n <= 0")
            return ZERO
        return ValExp(self._q * n)

    def scale(self, two_power) -> "ValExp":
        """Multiply by 2**two_power (exact exponent shift)."""
        if self.is_zero:
            return ZERO
        return ValExp(self._q + Fraction(two_power))

    # -- comparisons (ZERO is smallest) ---------------------------------

    def _key(self):
        return (0,) if self._q is None else (1, self._q)

    def __eq__(self, other):
        if not isinstance(other, (ValExp, int, Fraction)):
            return NotImplemented
        return self._key() == _coerce(other)._key()

    def __lt__(self, other):
        other = _coerce(other)
        if self.is_zero:
            return not other.is_zero
        if other.is_zero:
            return False
        return self._q < other._q

    def __le__(self, other):
        return self < other or self == other

    def __gt__(self, other):
        return _coerce(other) < self

    def __ge__(self, other):
        return _coerce(other) <= self

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        if self.is_zero:
            return "ValExp(zero)"
        return f"ValExp(2^{self._q})"

    # -- serialization ---------------------------------------------------

    def serialize(self) -> str:
        """Exact fraction string "p/q"; the zero value serializes as "-inf"."""
        if self.is_zero:
            return "-inf"
        return f"{self._q.numerator}/{self._q.denominator}"

    @classmethod
    def deserialize(cls, text: str) -> "ValExp":
        if text == "-inf":
            return ZERO
        num, _, den = text.partition("/")
        return cls(Fraction(int(num), int(den or "1")))


ZERO = ValExp(None)
ONE = ValExp(0)


def _coerce(x: _ExpLike) -> ValExp:
    return x if isinstance(x, ValExp) else ValExp(x)


def vmul(x: ValExp, y: ValExp) -> ValExp:
    """|x*y|: exponents add; the zero value absorbs."""
    return _coerce(x) * _coerce(y)


def vadd_bound(x: ValExp, y: ValExp):
    """Ultrametric bound for |x+y|.

    Returns (bound, is_equality) where bound = max(|x|, |y|) and
    is_equality is True exactly when |x| != |y|, in which case the strong
    triangle inequality is an equality.
    """
    x, y = _coerce(x), _coerce(y)
    bound = x if x >= y else y
    return bound, (x != y)


def rho_exponent(i: int) -> ValExp:
    """Exponent of rho_i: -3/2 + 2^(-i), equal to the defining product."""
    if i < 1:
        raise ValueError(f"rho index must be >= 1, got {i}")
    return ValExp(Fraction(-3, 2) + Fraction(1, 2**i))


def rho_exponent_product(i: int) -> ValExp:
    """Exponent of rho_i computed from the literal product (test oracle)."""
    if i < 1:
        raise ValueError(f"rho index must be >= 1, got {i}")
    q = Fraction(-1)
    for j in range(2, i + 1):
        q -= Fraction(1, 2**j)
    return ValExp(q)


def shrink_exponent(N: int) -> ValExp:
    """Exponent of 2^(2N) * rho_N^2 * ... * rho_1^2, i.e. 2 - N - 2^(1-N)."""
    if N < 1:
        raise ValueError(f"shrink index must be >= 1, got {N}")
    return ValExp(Fraction(2 - N) - Fraction(1, 2 ** (N - 1)))


def shrink_exponent_product(N: int) -> ValExp:
    """Shrink exponent from the term-by-term product (test oracle)."""
    if N < 1:
        raise ValueError(f"shrink index must be >= 1, got {N}")
    q = Fraction(2 * N)
    for j in range(1, N + 1):
        q += 2 * rho_exponent(j).exponent
    return ValExp(q)
