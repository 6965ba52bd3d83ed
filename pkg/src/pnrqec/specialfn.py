"""Terminating hypergeometric series, Hermite polynomials and dB conversions.

Every closed-form expression for the generated states is a finite polynomial
in its argument, so the Gauss series is summed exactly up to its termination
index. Parameters are handled as :class:`fractions.Fraction` so that the
termination test is exact.
"""

from fractions import Fraction
from functools import lru_cache
import math

import numpy as np

__all__ = [
    "NonTerminatingSeries",
    "PoleInLowerParameter",
    "as_rational",
    "hyp2f1_terminating",
    "hyp2f1_coefficients",
    "hermite_poly",
    "squeezing_db_to_r",
    "r_to_squeezing_db",
]

_DB_PER_NEPER = 20.0 / math.log(10.0)


class NonTerminatingSeries(ValueError):
    """Neither upper parameter is a non-positive integer."""


class PoleInLowerParameter(ZeroDivisionError):
    """The lower Pochhammer symbol vanishes before the series terminates."""


def as_rational(value):
    """Convert ``value`` to an exact :class:`Fraction`.

    Accepts ints, Fractions, ``(numerator, denominator)`` pairs and floats that
    are exactly representable with a small denominator (e.g. ``-0.5``).
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, tuple):
        num, den = value
        return Fraction(int(num), int(den))
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    frac = Fraction(float(value)).limit_denominator(1 << 20)
    if float(frac) != float(value):
        raise TypeError(f"parameter {value!r} is not an exact rational")
    return frac


def _termination_index(a, b):
    idx = [int(-p) for p in (a, b) if p.denominator == 1 and p <= 0]
    if not idx:
        raise NonTerminatingSeries(f"2F1({a}, {b}; ...) does not terminate")
    return min(idx)


@lru_cache(maxsize=4096)
def _coefficients(a, b, c):
    order = _termination_index(a, b)
    coeffs = [Fraction(1)]
    term = Fraction(1)
    for j in range(order):
        denom = (c + j) * (j + 1)
        if denom == 0:
            raise PoleInLowerParameter(f"(c)_j vanishes at j={j} for c={c}")
        term = term * (a + j) * (b + j) / denom
        coeffs.append(term)
    return tuple(coeffs)


def hyp2f1_coefficients(a, b, c):
    """Exact series coefficients ``(a)_j (b)_j / ((c)_j j!)`` up to termination."""
    return _coefficients(as_rational(a), as_rational(b), as_rational(c))


@lru_cache(maxsize=4096)
def _float_coefficients(a, b, c):
    return tuple(float(x) for x in reversed(hyp2f1_coefficients(a, b, c)))


def hyp2f1_terminating(a, b, c, x):
    """Evaluate a terminating Gauss hypergeometric series ``2F1(a, b; c; x)``.

    ``x`` may be a scalar or an array (real or complex); the sum is evaluated
    by Horner's rule over the exact rational coefficients.

    Raises
    ------
    NonTerminatingSeries
        If neither ``a`` nor ``b`` is a non-positive integer.
    PoleInLowerParameter
        If ``(c)_j`` is zero for some ``j`` below the termination index.
    """
    try:
        coeffs = _float_coefficients(a, b, c)
    except TypeError:  # unhashable parameter types
        coeffs = tuple(float(x) for x in reversed(hyp2f1_coefficients(a, b, c)))
    x = np.asarray(x)
    if x.ndim == 0 and not np.iscomplexobj(x):
        acc = 0.0
        xf = float(x)
        for coef in coeffs:
            acc = acc * xf + coef
        return np.float64(acc)
    out = np.zeros_like(x, dtype=np.result_type(x.dtype, float))
    for coef in coeffs:
        out = out * x + coef
    return out


def hermite_poly(k, w):
    """Physicists' Hermite polynomial ``H_k(w)`` by three-term recurrence."""
    if k < 0:
        raise ValueError("k must be non-negative")
    w = np.asarray(w)
    h_prev = np.ones_like(w, dtype=np.result_type(w.dtype, float))
    if k == 0:
        return h_prev[()] if h_prev.ndim == 0 else h_prev
    h = 2 * w * h_prev
    for j in range(1, k):
        h_prev, h = h, 2 * w * h - 2 * j * h_prev
    return h[()] if np.ndim(h) == 0 else h


def squeezing_db_to_r(s_db):
    """Squeezing in dB (on the quadrature standard deviation) to ``r``."""
    return np.divide(s_db, _DB_PER_NEPER)


def r_to_squeezing_db(r):
    """Inverse of :func:`squeezing_db_to_r`."""
    return np.multiply(r, _DB_PER_NEPER)
