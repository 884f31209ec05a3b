"""Exact-rational helpers; model arithmetic stays in Fractions until display."""

from __future__ import annotations

from fractions import Fraction


def as_fraction(value) -> Fraction:
    """Coerce a number to a Fraction, reading floats by their decimal repr.

    Fraction(str(2.3)) is 23/10 rather than the binary expansion of the
    double. Machine and kernel files carry decimal values, so this keeps
    every derived quantity exact until it is formatted.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError(f"not a number: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(str(value))
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"not a number: {value!r}")


def round_half_away(value, decimals: int = 0) -> Fraction:
    """Round to `decimals` decimal places with halves going away from zero."""
    v = as_fraction(value)
    if v < 0:
        return -round_half_away(-v, decimals)
    m = 10**decimals
    scaled = v * m
    # floor(scaled + 1/2) in integer arithmetic
    n = (2 * scaled.numerator + scaled.denominator) // (2 * scaled.denominator)
    return Fraction(n, m)
