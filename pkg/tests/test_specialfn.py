from fractions import Fraction
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import hermite as H
from scipy.special import hyp2f1

from pnrqec.specialfn import (
    NonTerminatingSeries,
    PoleInLowerParameter,
    as_rational,
    hermite_poly,
    hyp2f1_coefficients,
    hyp2f1_terminating,
    r_to_squeezing_db,
    squeezing_db_to_r,
)


def pochhammer_sum(a, b, c, x, terms=60):
    """Direct term-by-term sum, independent of the library's Horner evaluation."""
    total, term = 0.0, 1.0
    for j in range(terms):
        total += term
        term *= (a + j) * (b + j) / ((c + j) * (j + 1)) * x
        if term == 0.0:
            break
    return total


def test_hyp2f1_empty_product():
    assert hyp2f1_terminating(0, 0.3, 1, 0.7) == 1.0
    assert hyp2f1_terminating(0, -2.5, 1, 0.7) == 1.0


@pytest.mark.parametrize("a,b,c,x,expected", [(-0.5, -1, 1, 1.0, 1.5), (-1, -1.5, 1, 0.25, 1.375)])
def test_hyp2f1_two_term(a, b, c, x, expected):
    assert hyp2f1_terminating(a, b, c, x) == pytest.approx(expected, abs=1e-15)
    assert pochhammer_sum(a, b, c, x) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("m", range(0, 13))
@pytest.mark.parametrize("x", [0.0, 0.3, 1.0, 2.5, 9.0])
def test_hyp2f1_matches_pochhammer_and_scipy(m, x):
    params = [((1 - m) / 2, -m / 2, 1)]
    if m >= 2:
        params.append(((3 - m) / 2, (2 - m) / 2, 2))
    for a, b, c in params:
        ours = hyp2f1_terminating(a, b, c, x)
        assert ours == pytest.approx(pochhammer_sum(a, b, c, x), rel=1e-12, abs=1e-12)
        if x < 1:
            assert ours == pytest.approx(hyp2f1(a, b, c, x), rel=1e-10, abs=1e-12)


def test_hyp2f1_vectorised_and_complex():
    x = np.array([0.1, 0.5, 2.0])
    out = hyp2f1_terminating(-3, 0.5, 1.5, x)
    assert out.shape == (3,)
    assert np.allclose(out, [pochhammer_sum(-3, 0.5, 1.5, v) for v in x])
    zc = 0.3 + 0.4j
    assert hyp2f1_terminating(-2, -1, 1, zc) == pytest.approx(pochhammer_sum(-2, -1, 1, zc))


def test_coefficients_are_exact():
    assert hyp2f1_coefficients(-0.5, -1, 1) == (Fraction(1), Fraction(1, 2))
    assert as_rational((3, 4)) == Fraction(3, 4)
    with pytest.raises(TypeError):
        as_rational(math.pi)


def test_non_terminating_and_pole():
    with pytest.raises(NonTerminatingSeries):
        hyp2f1_terminating(0.5, 1.5, 1, 0.2)
    with pytest.raises(PoleInLowerParameter):
        hyp2f1_terminating(-3, 1, -1, 0.2)


def test_hermite_examples():
    assert hermite_poly(0, 0.37) == 1.0
    assert hermite_poly(2, 1.0) == pytest.approx(2.0)
    # H_3(w) = 8w^3 - 12w gives -20i at w = i
    assert hermite_poly(3, 1j) == pytest.approx(8 * 1j**3 - 12j)
    assert hermite_poly(3, 1j) == pytest.approx(-20j)


@pytest.mark.parametrize("k", range(0, 15))
def test_hermite_matches_numpy(k):
    w = np.linspace(-3, 3, 13)
    coef = np.zeros(k + 1)
    coef[k] = 1.0
    assert np.allclose(hermite_poly(k, w), H.hermval(w, coef), rtol=1e-12, atol=1e-9)


def test_hermite_negative_order():
    with pytest.raises(ValueError):
        hermite_poly(-1, 0.0)


def test_db_conversion():
    assert squeezing_db_to_r(0.0) == 0.0
    assert squeezing_db_to_r(2.0) == pytest.approx(0.2303, abs=1e-4)
    assert squeezing_db_to_r(-3.0) == pytest.approx(-0.3454, abs=1e-4)


@settings(max_examples=100, deadline=None)
@given(st.floats(-40, 40, allow_nan=False))
def test_db_round_trip(db):
    assert r_to_squeezing_db(squeezing_db_to_r(db)) == pytest.approx(db, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10), st.floats(-2, 2, allow_nan=False))
def test_hermite_recurrence_property(k, w):
    # H_{k+1} = 2w H_k - 2k H_{k-1}
    if k == 0:
        assert hermite_poly(1, w) == pytest.approx(2 * w)
    else:
        lhs = hermite_poly(k + 1, w)
        rhs = 2 * w * hermite_poly(k, w) - 2 * k * hermite_poly(k - 1, w)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-9)
