"""Exact rational helpers.

All distances and potential values in this package are :class:`fractions.Fraction`
instances.  This module adds the wire format (``"p/q"`` strings), dyadic powers,
the Cantor pairing function and one fixed enumeration of the rationals used by
every "least code" search.
"""

from __future__ import annotations

import functools
from fractions import Fraction
from math import gcd, isqrt
from typing import Union

Rat = Fraction
RatLike = Union[Fraction, int, str]

ZERO = Fraction(0)
ONE = Fraction(1)


def rat(value: RatLike) -> Fraction:
    """Coerce ``value`` to a Fraction; strings must be ``"p/q"`` or ``"p"``."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        text = value.strip()
        num, sep, den = text.partition("/")
        try:
            if sep:
                return Fraction(int(num), int(den))
            return Fraction(int(num))
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"not an exact rational: {value!r}") from exc
    raise TypeError(f"cannot interpret {value!r} as an exact rational")


def fmt(q: Fraction) -> str:
    """Canonical ``"p/q"`` string (denominator always written)."""
    q = Fraction(q)
    return f"{q.numerator}/{q.denominator}"


def pow2(n: int) -> Fraction:
    """``2**-n`` as an exact fraction (``n`` may be negative)."""
    return Fraction(1, 1 << n) if n >= 0 else Fraction(1 << -n)


def pair(a: int, b: int) -> int:
    """Cantor pairing ``(a, b) -> (a+b)(a+b+1)/2 + b``."""
    s = a + b
    return s * (s + 1) // 2 + b


def unpair(n: int) -> tuple[int, int]:
    w = (isqrt(8 * n + 1) - 1) // 2
    b = n - w * (w + 1) // 2
    return w - b, b


# The enumeration of Q: a reduced fraction p/q (q > 0) has code
# 2 * pair(|p|, q) + (1 if p < 0 else 0).  Codes of non-reduced pairs, q == 0,
# and "-0" are unused.


def rational_code(q: RatLike) -> int:
    q = rat(q)
    sign = 1 if q < 0 else 0
    return 2 * pair(abs(q.numerator), q.denominator) + sign


def rational_from_code(code: int) -> Fraction | None:
    """Inverse of :func:`rational_code`; ``None`` for unused codes."""
    if code < 0:
        return None
    sign, rest = code % 2, code // 2
    p, q = unpair(rest)
    if q == 0 or gcd(p, q) != 1 or (sign and p == 0):
        return None
    return Fraction(-p if sign else p, q)


@functools.lru_cache(maxsize=4096)
def least_code_rational(lo: RatLike, hi: RatLike) -> Fraction:
    """The rational with least code in the open interval ``(lo, hi)``.

    Walks the pairing diagonals ``|p| + q = d`` in code order, so the search is
    quadratic in the size of the answer rather than in its code.
    """
    lo, hi = rat(lo), rat(hi)
    if not lo < hi:
        raise ValueError(f"empty interval ({lo}, {hi})")
    d = 1
    while True:
        # within a diagonal the code grows with q; for equal q the
        # nonnegative candidate precedes the negative one
        for q in range(1, d + 1):
            p = d - q
            if gcd(p, q) != 1:
                continue
            for cand in ((p, q), (-p, q)) if p else ((0, q),):
                num, den = cand
                if lo.numerator * den < num * lo.denominator and num * hi.denominator < hi.numerator * den:
                    return Fraction(num, den)
        d += 1
