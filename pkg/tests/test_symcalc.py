import json
import time

import pytest
import sympy as sp
from hypothesis import assume, given, strategies as st

from flrwren.errors import UnsupportedExpression
from flrwren.symcalc import (SigmaExpr, alpha, box_apply, change_scale, conjugate,
                             delta_coefficient, ell, euler_apply, identity_corpus,
                             laurent, minimal_subtract, ms_power, multiply_sigma,
                             regularised_power)

P = SigmaExpr.power
half = sp.Rational(1, 2)
PI2I = sp.pi**2 * sp.I


def test_identity_corpus_passes_quickly():
    t0 = time.perf_counter()
    checks = identity_corpus()
    elapsed = time.perf_counter() - t0
    failed = [c.name for c in checks if not c.passed]
    assert not failed
    assert len(checks) >= 10
    assert elapsed < 5.0


# box ------------------------------------------------------------------------

def test_box_of_inverse_sigma_is_delta():
    assert box_apply(P(1)) == SigmaExpr.delta(8 * PI2I)


def test_box_of_constant_vanishes():
    assert box_apply(P(0, coeff=7)) == SigmaExpr.zero()


def test_box_of_log():
    # Box log sigma = (Box sigma - 2)/sigma with Box sigma = 4
    assert box_apply(P(0, 1)) == P(1, coeff=2)


def test_box_of_conjugate_flips_delta_sign():
    assert box_apply(P(1, bar=True)) == SigmaExpr.delta(-8 * PI2I, bar=True)


def test_box_grading_overflow():
    with pytest.raises(UnsupportedExpression):
        box_apply(box_apply(box_apply(SigmaExpr.delta())))


def test_log_power_bound():
    with pytest.raises(UnsupportedExpression):
        P(1, 4)


# Euler ----------------------------------------------------------------------

def test_euler_examples():
    assert euler_apply(P(2)) == SigmaExpr.zero()
    assert euler_apply(P(2 + alpha)) == P(2 + alpha, coeff=2 * alpha)
    assert euler_apply(P(2, 1)) == P(2, coeff=-2)


def test_euler_rejects_more_points_and_deltas():
    with pytest.raises(UnsupportedExpression):
        euler_apply(P(2), n_points=3)
    with pytest.raises(UnsupportedExpression):
        euler_apply(SigmaExpr.delta())


@given(num=st.integers(-6, 12), den=st.integers(1, 4), coeff=st.integers(-5, 5))
def test_euler_on_homogeneous(num, den, coeff):
    s = sp.Rational(num, den)
    assume(s <= 3)  # grading bound
    e = P(s, coeff=coeff)
    degree = -2 * s
    assert euler_apply(e) == e.scale(-(degree + 4))


# Laurent and minimal subtraction -------------------------------------------

def test_laurent_inverse_square():
    r = laurent(regularised_power(2))
    assert r.order == 1
    assert not r.principal.terms
    assert delta_coefficient(r.principal) == 4 * PI2I / alpha
    assert r.finite == P(1, 1, -half, box=1) + P(1, 0, -half, box=1)


def test_laurent_alpha_free_input():
    r = laurent(P(1))
    assert r.principal == SigmaExpr.zero()
    assert r.finite == P(1)
    assert r.order == 0


def test_laurent_inverse_cube():
    r = laurent(regularised_power(3))
    assert r.order == 1
    assert delta_coefficient(r.principal, 1) == PI2I / alpha
    assert delta_coefficient(r.principal, 0) == 0


def test_laurent_log_line_is_double_pole():
    r = laurent(regularised_power(2, 1))
    assert r.order == 2
    assert delta_coefficient(r.principal) == 4 * PI2I / alpha**2


def test_laurent_rejects_non_affine_exponent():
    with pytest.raises(UnsupportedExpression):
        laurent(P(2 + 2 * alpha))


def test_ms_inverse_square():
    expected = P(1, 1, -half, box=1) + P(1, 0, -half, box=1)
    assert ms_power(2) == expected
    # the Box(1/(2 sigma)) piece evaluates to a delta
    assert delta_coefficient(ms_power(2)) == -4 * PI2I


def test_sigma_times_ms_cube_is_ms_square():
    assert multiply_sigma(ms_power(3)) == ms_power(2)


def test_scale_flow():
    flow = change_scale(ms_power(2)) - ms_power(2)
    assert flow == SigmaExpr.delta(-4 * PI2I * ell)


def test_change_scale_requires_finite_input():
    with pytest.raises(UnsupportedExpression):
        change_scale(regularised_power(2))


def test_mixing_conjugates_raises():
    with pytest.raises(UnsupportedExpression):
        P(1) + P(2, bar=True)


@pytest.mark.parametrize("s0,n", [(2, 0), (2, 1), (3, 0)])
def test_poles_are_local(s0, n):
    assert laurent(regularised_power(s0, n)).principal.is_local


@pytest.mark.parametrize("s0,n", [(2, 0), (2, 1), (3, 0)])
def test_conjugation_commutes_with_ms(s0, n):
    lhs = minimal_subtract(conjugate(regularised_power(s0, n)))
    assert lhs == conjugate(ms_power(s0, n))


@pytest.mark.parametrize("s0,n", [(2, 0), (2, 1)])
def test_box_commutes_with_ms(s0, n):
    assert box_apply(ms_power(s0, n)) == minimal_subtract(box_apply(regularised_power(s0, n)))


@given(s=st.integers(0, 3), n=st.integers(0, 3), coeff=st.integers(-9, 9).filter(bool))
def test_ms_is_identity_without_alpha(s, n, coeff):
    e = P(s, n, coeff)
    assert minimal_subtract(e) == e


@given(c1=st.integers(-5, 5), c2=st.integers(-5, 5))
def test_ms_is_linear(c1, c2):
    e = regularised_power(2).scale(c1) + regularised_power(3).scale(c2)
    assert minimal_subtract(e) == ms_power(2).scale(c1) + ms_power(3).scale(c2)


def test_json_dump_roundtrips():
    e = P(2, 0, 3) + P(1, 2) + SigmaExpr.delta(sp.I, 1)
    d = json.loads(e.to_json())
    assert d["bar"] is False
    assert {t["n"] for t in d["terms"]} == {0, 2}
    assert d["deltas"][0]["op"] == 1


def test_exact_coefficients():
    # coefficients stay symbolic; no floats creep in
    for t in ms_power(3).terms:
        assert not t.coeff.has(sp.Float)
    for d in ms_power(3).deltas:
        assert not d.coeff.has(sp.Float)
