"""Exact rational values and their JSON encoding.

Budgets, costs, and scores move through the package as
``fractions.Fraction`` so that feasibility checks never depend on
floating-point rounding.  JSON has no rational type, so on disk a
rational is an ``int`` when the denominator is 1 and a ``"p/q"``
string otherwise.  Decimal literals in hand-written files (``0.5``)
are read back as the exact decimal they spell.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Union

RationalLike = Union[int, float, str, Fraction]


def to_rational(value: RationalLike) -> Fraction:
    """Coerce a parsed JSON value or CLI string to an exact Fraction.

    Floats are interpreted through their shortest decimal repr, so a
    file containing ``0.5`` yields ``1/2`` rather than the binary
    expansion of the nearest double.
    """
    if isinstance(value, bool):
        raise ValueError(f"expected a rational number, got {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"not a rational literal: {value!r}") from exc
    raise ValueError(f"expected a rational number, got {value!r}")


def rational_to_jsonable(value: Fraction) -> int | str:
    """Encode a Fraction losslessly for JSON."""
    if value.denominator == 1:
        return int(value)
    return f"{value.numerator}/{value.denominator}"


def rational_from_jsonable(value: RationalLike) -> Fraction:
    """Inverse of :func:`rational_to_jsonable`, tolerant of literals."""
    return to_rational(value)
