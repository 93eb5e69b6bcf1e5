from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from conftest import diffpolys
from taucover.jetspace import (
    CoeffPoly, DiffPoly, DimensionMismatch, Functional, NotExact, degree, from_text, integrate, is_exact, mul,
    normal_form, to_text, total_derivative, variational_derivative,
)

v = DiffPoly.v(1, 0)
u1 = DiffPoly.u(1, 0, 1)
u2 = DiffPoly.u(1, 0, 2)


def test_odd_factors_anticommute():
    t1, t2 = DiffPoly.theta(2, 0), DiffPoly.theta(2, 1)
    assert mul(t2, t1) == mul(t1, t2).scale(-1)
    assert to_text(mul(t1, t2)) == "1*th1_0*th2_0"
    assert mul(t1, t1).is_zero()


def test_even_product_commutes():
    assert mul(v, u1) == mul(u1, v)
    assert to_text(mul(v, u1)) == "1*v1*u1_1"


def test_dimension_mismatch():
    with pytest.raises((DimensionMismatch, ValueError)):
        mul(DiffPoly.v(1, 0), DiffPoly.v(2, 0))


def test_total_derivative_examples():
    assert total_derivative(v) == u1
    assert total_derivative(mul(v, u1)) == mul(u1, u1) + mul(v, u2)
    assert total_derivative(DiffPoly.const(1, 1)).is_zero()


def test_degrees():
    a = mul(DiffPoly.u(2, 0, 1), mul(DiffPoly.theta(2, 0), DiffPoly.theta(2, 1, 1)))
    assert degree(a, "standard") == 2
    assert degree(a, "super") == 2
    assert degree(v + u1) == "inhomogeneous"
    assert degree(DiffPoly.zero(1)) == "homogeneous-zero"


def test_variational_derivative_examples():
    assert variational_derivative(mul(u1, u1).scale(Fraction(1, 2)), 0) == u2.scale(-1)
    a = mul(DiffPoly.theta(2, 0), DiffPoly.theta(2, 1, 1))
    assert variational_derivative(a, 0, "odd") == DiffPoly.theta(2, 1, 1)


def test_exactness_examples():
    assert is_exact(mul(v, u1))
    assert not is_exact(mul(u1, u1))
    assert is_exact(DiffPoly.zero(1))


def test_integrate_examples():
    assert integrate(u1) == v
    assert integrate(mul(u1, u1) + mul(v, u2)) == mul(v, u1)
    assert integrate(mul(v, u1)) == mul(v, v).scale(Fraction(1, 2))
    with pytest.raises(NotExact):
        integrate(mul(u1, u1))


def test_normal_form_examples():
    assert normal_form(mul(v, u1)).is_zero()
    assert normal_form(mul(u1, u1)) == mul(u1, u1)
    assert normal_form(mul(v, u2)) == mul(u1, u1).scale(-1)
    assert Functional(mul(v, u2)) == Functional(mul(u1, u1).scale(-1))


def test_text_format():
    a = from_text("1/5*u1_1^2 + -3*v1*th1_0*th1_2", 1)
    assert to_text(a) == "1/5*u1_1^2 + -3*v1*th1_0*th1_2"
    assert from_text(to_text(a), 1) == a


def test_coeffpoly_basics():
    p = CoeffPoly.var(2, 0) * CoeffPoly.var(2, 1) + 3
    assert p([2, 5]) == 13
    assert p.diff(0) == CoeffPoly.var(2, 1)


@given(diffpolys(n=2), diffpolys(n=2))
def test_d_is_a_derivation(a, b):
    assert total_derivative(mul(a, b)) == mul(total_derivative(a), b) + mul(a, total_derivative(b))


@given(diffpolys(n=2, odd=(1, 1)), diffpolys(n=2, odd=(1, 1)))
def test_odd_elements_anticommute(a, b):
    assert mul(a, b) == mul(b, a).scale(-1)


@given(diffpolys(n=2), st.integers(0, 1))
def test_euler_operator_kills_total_derivatives(a, i):
    da = total_derivative(a)
    assert variational_derivative(da, i).is_zero()
    assert variational_derivative(da, i, "odd").is_zero()


@given(diffpolys(n=2))
def test_integrate_is_right_inverse(a):
    da = total_derivative(a)
    assert is_exact(da)
    assert total_derivative(integrate(da)) == da


@given(diffpolys(n=2), diffpolys(n=2))
def test_normal_form_idempotent_and_shift_invariant(a, b):
    nf = normal_form(a)
    assert normal_form(nf) == nf
    assert normal_form(a + total_derivative(b)) == nf


@given(diffpolys(n=1, odd=(1, 1)))
def test_d_raises_standard_degree(a):
    for d in set(degree(t) for t in _homogeneous_parts(a)):
        part = sum((t for t in _homogeneous_parts(a) if degree(t) == d), DiffPoly.zero(1))
        dd = total_derivative(part)
        assert dd.is_zero() or degree(dd) == d + 1


def _homogeneous_parts(a):
    return [DiffPoly(a.n, {k: c}) for k, c in a.terms.items()]


@given(diffpolys(n=2))
def test_text_round_trip(a):
    assert from_text(to_text(a), 2) == a
