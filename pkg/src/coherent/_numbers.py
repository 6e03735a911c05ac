"""Number coercion shared by the exact (Fraction) and float code paths."""

from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational
from typing import Union

Number = Union[int, float, Fraction]


def as_fraction(value) -> Fraction:
    """Convert ``value`` to an exact Fraction.

    Strings are parsed literally ("3/10", "0.37", "1e-3"), floats through their
    shortest repr so that ``0.37`` becomes ``37/100`` rather than the binary
    expansion of the double.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite value {value!r}")
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot convert {type(value).__name__} to Fraction")


def is_exact(value) -> bool:
    return isinstance(value, (int, Fraction)) and not isinstance(value, bool)


def format_number(value) -> str:
    """Render a number so that parsing it back gives the identical value."""
    if isinstance(value, Fraction):
        if value.denominator == 1:
            return str(value.numerator)
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def parse_number(token: str, exact: bool = False):
    """Inverse of :func:`format_number`.

    Integers and ``num/den`` tokens parse to Fraction; decimals parse to float
    unless ``exact`` is set, in which case they become exact decimal fractions.
    """
    token = token.strip()
    if "/" in token or exact:
        return Fraction(token)
    try:
        return Fraction(int(token))
    except ValueError:
        return float(token)
