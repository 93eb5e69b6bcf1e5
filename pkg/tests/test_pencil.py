from fractions import Fraction

import numpy as np
import pytest

from taucover.frobenius import pencil_from_frobenius, psi_at
from taucover.jetspace import CoeffPoly, DiffPoly, Functional, mul
from taucover.pencil import (
    ComplexSpectrum, DegenerateSpectrum, HydroMetric, canonical_coordinates_at, check_DZ_f, check_egoroff,
    check_gamma_system, check_irreducible, christoffel_residual, poisson_operator, psi_residual,
    rotation_coefficients,
)

A2_POINTS = [(0.0, 0.5), (0.1, 0.7), (0.2, 0.9), (0.3, 1.1), (0.4, 1.3),
             (0.5, 1.5), (0.6, 1.7), (0.7, 1.9), (-0.3, 0.8), (1.0, 2.0)]

th, th1 = DiffPoly.theta(1, 0), DiffPoly.theta(1, 0, 1)


def test_constant_metric_operator():
    assert poisson_operator(HydroMetric([[1]])) == Functional(mul(th, th1).scale(Fraction(1, 2)))


def test_linear_metric_operator():
    m = HydroMetric([[CoeffPoly.var(1, 0)]], [[[Fraction(1, 2)]]])
    want = Functional(mul(DiffPoly.v(1, 0), mul(th, th1)).scale(Fraction(1, 2)))
    assert poisson_operator(m) == want


def test_metric_must_be_symmetric():
    with pytest.raises(ValueError):
        HydroMetric([[1, CoeffPoly.var(2, 0)], [0, 1]])


def test_scalar_chart():
    g1, g2 = HydroMetric([[1]]), HydroMetric([[CoeffPoly.var(1, 0)]])
    ch = canonical_coordinates_at(g1, g2, [3.0])
    assert ch.u == pytest.approx([3.0])
    assert ch.f_upper == pytest.approx([1.0])
    assert rotation_coefficients(ch).shape == (1, 1) and rotation_coefficients(ch)[0, 0] == 0
    assert check_egoroff(ch) == 0 and check_irreducible(ch)
    assert check_gamma_system(ch) == {"distinct": 0.0, "unit": 0.0, "euler": 0.0}
    assert psi_residual(ch, lambda c: np.sqrt(c.f_lower))["residual"] == 0.0


def test_equal_metrics_are_degenerate():
    g = HydroMetric([[1, 0], [0, 1]])
    with pytest.raises(DegenerateSpectrum):
        canonical_coordinates_at(g, g, [0.3, 0.4])


def test_complex_spectrum_is_reported():
    g1 = HydroMetric([[1, 0], [0, 1]])
    g2 = HydroMetric([[0, -1], [-1, 0]])
    g2.g[0][1] = CoeffPoly.const(2, 1)
    g2.g[1][0] = CoeffPoly.const(2, -1)
    with pytest.raises(ComplexSpectrum):
        canonical_coordinates_at(g1, g2, [0.0, 0.0])


def test_decoupled_pencil_is_reducible():
    x, y = CoeffPoly.var(2, 0), CoeffPoly.var(2, 1)
    half = Fraction(1, 2)
    gam = [[[0, 0], [0, 0]], [[0, 0], [0, 0]]]
    gam[0][0][0] = half
    gam[1][1][1] = half
    g1, g2 = HydroMetric([[1, 0], [0, 1]]), HydroMetric([[x, 0], [0, y]], gam)
    ch = canonical_coordinates_at(g1, g2, [0.4, 1.7])
    assert np.allclose(rotation_coefficients(ch), 0)
    assert not check_irreducible(ch)


@pytest.mark.parametrize("point", A2_POINTS)
def test_a2_canonical_identities(a2, point):
    g1, g2 = pencil_from_frobenius(a2)
    ch = canonical_coordinates_at(g1, g2, point)
    gam = rotation_coefficients(ch)
    assert abs(gam[0, 1] - gam[1, 0]) < 1e-8
    assert check_egoroff(ch) < 1e-8
    assert max(check_gamma_system(ch).values()) < 1e-8
    assert check_DZ_f(ch) < 1e-8
    assert check_irreducible(ch)
    for a in range(2):
        assert psi_residual(ch, lambda c, a=a: psi_at(a2, c)[:, a])["residual"] < 1e-6
    assert christoffel_residual(ch) < 1e-8


def test_zero_psi_is_flagged(a2):
    g1, g2 = pencil_from_frobenius(a2)
    ch = canonical_coordinates_at(g1, g2, A2_POINTS[3])
    assert psi_residual(ch, lambda c: np.zeros(2)) == {"residual": 0.0, "trivial": True}


def test_a3_chart_off_diagonal(a3):
    g1, g2 = pencil_from_frobenius(a3)
    ch = canonical_coordinates_at(g1, g2, [0.2, 0.4, 1.2])
    assert ch.offdiag_residual < 1e-10
    assert max(check_gamma_system(ch).values()) < 1e-6
