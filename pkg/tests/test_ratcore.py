import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from softsync.errors import (BothZero, DivisionByZeroPolynomial, DivisionByZeroRational, ParseError,
                             PoleAtEvaluationPoint, ZeroPolynomial)
from softsync.ratcore import (Polynomial, RationalFunction, Stability, classify_stability, freqresp,
                              parse_polynomial, parse_rational, poly_divmod, poly_gcd, rf_eval, routh_hurwitz)

from .oracles import hurwitz_by_roots

coeff = st.floats(-10, 10, allow_nan=False).filter(lambda x: abs(x) > 1e-3)
poly = st.lists(coeff, min_size=1, max_size=6).map(Polynomial)


def test_zero_polynomial_has_degree_minus_one():
    assert Polynomial().degree == -1
    assert Polynomial([0.0, 0.0]).is_zero


def test_trailing_zeros_stripped():
    assert Polynomial([1.0, 2.0, 0.0]).degree == 1


def test_divmod_known_case():
    q, r = poly_divmod(Polynomial([-1, 0, 1]), Polynomial([1, 1]))  # (s^2 - 1) / (s + 1)
    assert q.allclose(Polynomial([-1, 1]))
    assert r.is_zero


def test_divmod_by_zero_raises():
    with pytest.raises(DivisionByZeroPolynomial):
        poly_divmod(Polynomial([1.0]), Polynomial())


@given(poly, poly)
def test_divmod_identity(a, b):
    q, r = poly_divmod(a, b)
    assert r.degree < b.degree
    rebuilt = q * b + r
    pts = np.array([0.7, -1.3, 0.4 + 1.1j])
    scale = np.abs(q(pts) * b(pts)) + np.abs(r(pts)) + 1.0
    assert np.all(np.abs(rebuilt(pts) - a(pts)) <= 1e-9 * scale)


def test_gcd_finds_common_factor():
    a = Polynomial.from_roots([-1.0, -2.0])
    b = Polynomial.from_roots([-1.0, -3.0])
    assert poly_gcd(a, b).allclose(Polynomial([1.0, 1.0]))


def test_gcd_of_coprime_is_one():
    assert poly_gcd(Polynomial([1, 1]), Polynomial([2, 1])) == Polynomial([1.0])


def test_gcd_both_zero_raises():
    with pytest.raises(BothZero):
        poly_gcd(Polynomial(), Polynomial())


def test_channel_denominator_is_marginal():
    cls = classify_stability(Polynomial([0.0, 3.61, 2.66, 1.0]))
    assert cls.tag is Stability.MARGINAL
    assert abs(cls.witness) <= 1e-7


@pytest.mark.parametrize("coeffs,tag", [
    ([25.0, 10.0, 1.0], Stability.HURWITZ),
    ([-1.0, 0.0, 1.0], Stability.UNSTABLE),
    ([1.0, 0.0, 1.0], Stability.MARGINAL),
])
def test_classify_known(coeffs, tag):
    assert classify_stability(Polynomial(coeffs)).tag is tag


def test_classify_zero_raises():
    with pytest.raises(ZeroPolynomial):
        classify_stability(Polynomial())


@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=2, max_size=8), st.floats(0.1, 5))
def test_routh_matches_roots(coeffs, lead):
    p = Polynomial(list(coeffs[:-1]) + [lead])
    r = p.roots()
    if r.size and np.min(np.abs(r.real)) < 1e-6:
        return  # too close to the axis for a floating comparison to be meaningful
    assert routh_hurwitz(p) == hurwitz_by_roots(p.coeffs)


def test_rational_canonical_form():
    f = RationalFunction(Polynomial.from_roots([-1.0, -2.0]), Polynomial.from_roots([-1.0, -3.0], lead=2.0))
    assert f.cancelled
    assert f.den.lead == 1.0
    assert f.num.degree == 1 and f.den.degree == 1


def test_rational_arithmetic_values():
    f = RationalFunction(Polynomial([1.0]), Polynomial([1.0, 1.0]))
    g = RationalFunction(Polynomial([0.0, 1.0]), Polynomial([2.0, 1.0]))
    s0 = 0.3 + 0.8j
    for op, expect in ((f + g, f(s0) + g(s0)), (f - g, f(s0) - g(s0)), (f * g, f(s0) * g(s0)),
                       (f / g, f(s0) / g(s0))):
        assert abs(op(s0) - expect) < 1e-12


def test_division_by_zero_rational():
    with pytest.raises(DivisionByZeroRational):
        RationalFunction(1.0) / RationalFunction(0.0)


def test_eval_at_pole_raises():
    with pytest.raises(PoleAtEvaluationPoint):
        rf_eval(RationalFunction(Polynomial([1.0]), Polynomial([0.0, 1.0])), 0.0)


def test_freqresp_of_first_order_lowpass():
    f = RationalFunction(Polynomial([5.0]), Polynomial([5.0, 1.0]))
    assert abs(abs(freqresp(f, 5.0)) - 1 / math.sqrt(2)) < 1e-15


def test_relative_degree_and_properness():
    ch = RationalFunction(Polynomial([7.831]), Polynomial([0.0, 3.61, 2.66, 1.0]))
    assert ch.relative_degree == 3 and ch.is_strictly_proper
    assert not RationalFunction(Polynomial([0.0, 0.0, 1.0]), Polynomial([1.0, 1.0])).is_proper


@pytest.mark.parametrize("text,coeffs", [
    ("1*s^2 + 10*s + 25", [25.0, 10.0, 1.0]),
    ("-s + 2", [2.0, -1.0]),
    ("1e-05*s^3 - 2.5", [-2.5, 0.0, 0.0, 1e-05]),
    ("0", []),
])
def test_parse_polynomial(text, coeffs):
    assert parse_polynomial(text) == Polynomial(coeffs)


def test_parse_errors():
    with pytest.raises(ParseError):
        parse_polynomial("3*x")
    with pytest.raises(ParseError):
        parse_rational("(1)/(0)")


@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=6),
       st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=5))
def test_text_roundtrip_is_exact(num, den):
    den = Polynomial(list(den) + [1.0])
    f = RationalFunction.from_canonical(Polynomial(num), den)
    back = parse_rational(f.to_text(), verbatim=True)
    assert back.num == f.num and back.den == f.den
