"""Hydrodynamic metrics, their Poisson operators, and canonical charts.

The symbolic side builds ``P = 1/2 int (g^{ij} th_i th_j^1 + G^{ij}_k u^{k,1} th_i th_j)``.
The numeric side works at a point: the roots of ``det(g2 - u g1)`` give
canonical coordinates, their Jacobian comes from first-order eigenvalue
perturbation, and everything needing higher derivatives goes through
central differences with one Richardson step.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .jetspace import CoeffPoly, DiffPoly, Functional, mul

FD_STEP = 1e-3


class DegenerateSpectrum(ValueError):
    pass


class ComplexSpectrum(ValueError):
    pass


class ZeroDiagonalEntry(ValueError):
    pass


def _poly(n, x):
    return x if isinstance(x, CoeffPoly) else CoeffPoly.const(n, x)


class HydroMetric:
    """Contravariant metric ``g^{ab}(v)`` with connection ``Gamma^{ab}_c(v)``."""

    def __init__(self, g, christoffel=None):
        n = len(g)
        self.n = n
        self.g = [[_poly(n, g[a][b]) for b in range(n)] for a in range(n)]
        for a in range(n):
            for b in range(a + 1, n):
                if self.g[a][b] != self.g[b][a]:
                    raise ValueError("metric must be symmetric")
        if christoffel is None:
            christoffel = [[[0] * n for _ in range(n)] for _ in range(n)]
        self.christoffel = [[[_poly(n, christoffel[a][b][c]) for c in range(n)] for b in range(n)]
                            for a in range(n)]

    def at(self, point):
        return np.array([[float(self.g[a][b](point)) for b in range(self.n)] for a in range(self.n)])

    def d_at(self, point):
        """Array ``D[c, a, b] = d g^{ab} / d v^c`` at ``point``."""
        n = self.n
        return np.array([[[float(self.g[a][b].diff(c)(point)) for b in range(n)] for a in range(n)]
                         for c in range(n)])


def poisson_operator(m):
    n = m.n
    half = Fraction(1, 2)
    out = DiffPoly.zero(n)
    for i in range(n):
        for j in range(n):
            gij = m.g[i][j]
            if not gij.is_zero():
                out = out + mul(DiffPoly.from_coeff(gij * half),
                                mul(DiffPoly.theta(n, i), DiffPoly.theta(n, j, 1)))
            for k in range(n):
                c = m.christoffel[i][j][k]
                if not c.is_zero():
                    t = mul(DiffPoly.from_coeff(c * half), DiffPoly.u(n, k, 1))
                    out = out + mul(t, mul(DiffPoly.theta(n, i), DiffPoly.theta(n, j)))
    return Functional(out)


# --------------------------------------------------------------------------
# numeric canonical coordinates

def _roots_and_vectors(G1, G2):
    vals, vecs = np.linalg.eig(np.linalg.solve(G1, G2))
    if np.max(np.abs(vals.imag)) > 1e-10 * max(1.0, np.max(np.abs(vals))):
        raise ComplexSpectrum(f"complex roots {vals}")
    vals = vals.real
    vecs = vecs.real
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    scale = max(1.0, np.max(np.abs(vals)))
    if len(vals) > 1 and np.min(np.diff(vals)) < 1e-9 * scale:
        raise DegenerateSpectrum(f"repeated roots {vals}")
    return vals, vecs


def _jacobian(g1, g2, point):
    """Roots ``u`` and ``J[i, a] = du^i/dv^a`` at ``point``."""
    G1, G2 = g1.at(point), g2.at(point)
    D1, D2 = g1.d_at(point), g2.d_at(point)
    u, R = _roots_and_vectors(G1, G2)
    n = len(u)
    J = np.empty((n, n))
    for i in range(n):
        r = R[:, i]
        den = r @ G1 @ r
        for a in range(n):
            J[i, a] = r @ (D2[a] - u[i] * D1[a]) @ r / den
    return u, J


def _upper_f(g1, point, J):
    G1 = g1.at(point)
    M = J @ G1 @ J.T
    return np.diag(M).copy(), M


def deriv(fn, x, direction, h=FD_STEP):
    """Directional derivative by central differences plus one Richardson step."""
    x = np.asarray(x, dtype=float)
    d = np.asarray(direction, dtype=float)

    def central(hh):
        return (np.asarray(fn(x + hh * d)) - np.asarray(fn(x - hh * d))) / (2 * hh)

    return (4 * central(h / 2) - central(h)) / 3


@dataclass
class PencilChart:
    point: np.ndarray
    u: np.ndarray
    du_dv: np.ndarray
    dv_du: np.ndarray
    f_upper: np.ndarray
    g1: HydroMetric = field(repr=False)
    g2: HydroMetric = field(repr=False)
    offdiag_residual: float = 0.0
    step: float = FD_STEP

    @property
    def n(self):
        return len(self.u)

    @property
    def f_lower(self):
        return 1.0 / self.f_upper

    def recompute(self, point):
        return canonical_coordinates_at(self.g1, self.g2, point, self.step)

    def along(self, fn, k):
        """``d fn / du^k`` at the chart point, ``fn`` a function of v."""
        return deriv(fn, self.point, self.dv_du[:, k], self.step)


def canonical_coordinates_at(g1, g2, point, step=FD_STEP):
    point = np.asarray([float(x) for x in point])
    u, J = _jacobian(g1, g2, point)
    if abs(np.linalg.det(J)) < 1e-14:
        raise DegenerateSpectrum("canonical coordinates are not independent here")
    f, M = _upper_f(g1, point, J)
    if np.any(np.abs(f) < 1e-14):
        raise ZeroDiagonalEntry(f"f = {f}")
    off = M - np.diag(f)
    scale = max(1.0, np.max(np.abs(f)))
    return PencilChart(point, u, J, np.linalg.inv(J), f, g1, g2,
                       float(np.max(np.abs(off)) / scale), step)


def _f_lower_fn(g1, g2):
    def fn(p):
        u, J = _jacobian(g1, g2, p)
        f, _ = _upper_f(g1, p, J)
        return 1.0 / f
    return fn


def df_lower(chart):
    """``D[i, j] = d f_i / d u^j``."""
    fn = _f_lower_fn(chart.g1, chart.g2)
    return np.array([chart.along(fn, j) for j in range(chart.n)]).T


def psi_first(chart):
    """``psi_{i1} = f_i^{1/2}``, principal branch (imaginary when f_i < 0)."""
    return np.sqrt(chart.f_lower.astype(complex))


def rotation_coefficients(chart, dfl=None):
    n = chart.n
    if n == 1:
        return np.zeros((1, 1), dtype=complex)
    if dfl is None:
        dfl = df_lower(chart)
    s = psi_first(chart)
    gam = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            if i != j:
                gam[i, j] = dfl[i, j] / (2 * s[i] * s[j])
    return gam


def _gamma_fn(g1, g2, step):
    def fn(p):
        return rotation_coefficients(canonical_coordinates_at(g1, g2, p, step))
    return fn


def check_egoroff(chart):
    if chart.n == 1:
        return 0.0
    d = df_lower(chart)
    return float(np.max(np.abs(d - d.T)))


def check_DZ_f(chart):
    fn = lambda p: 1.0 / _f_lower_fn(chart.g1, chart.g2)(p)
    total = sum(chart.along(fn, k) for k in range(chart.n))
    return float(np.max(np.abs(total)))


def gamma_derivatives(chart):
    """``D[k, i, j] = d gamma_ij / d u^k``."""
    fn = _gamma_fn(chart.g1, chart.g2, chart.step)
    return np.array([chart.along(fn, k) for k in range(chart.n)])


def check_gamma_system(chart):
    n = chart.n
    if n == 1:
        return {"distinct": 0.0, "unit": 0.0, "euler": 0.0}
    gam = rotation_coefficients(chart)
    D = gamma_derivatives(chart)
    r1 = 0.0
    for i in range(n):
        for j in range(n):
            for k in range(n):
                if len({i, j, k}) == 3:
                    r1 = max(r1, abs(D[k, i, j] - gam[i, k] * gam[j, k]))
    unit = np.abs(D.sum(axis=0) - np.diag(np.diag(D.sum(axis=0))))
    eul = np.einsum("k,kij->ij", chart.u, D) + gam
    np.fill_diagonal(eul, 0)
    return {"distinct": float(r1), "unit": float(np.max(unit)), "euler": float(np.max(np.abs(eul)))}


def check_irreducible(chart, tol=1e-8):
    n = chart.n
    if n == 1:
        return True
    gam = rotation_coefficients(chart)
    seen = {0}
    stack = [0]
    while stack:
        i = stack.pop()
        for j in range(n):
            if j not in seen and abs(gam[i, j]) > tol:
                seen.add(j)
                stack.append(j)
    return len(seen) == n


def psi_residual(chart, psi_fn):
    """Residual of the linear system for ``psi_fn(chart) -> vector psi_i``."""
    n = chart.n
    psi = np.asarray(psi_fn(chart))
    if np.max(np.abs(psi)) == 0:
        return {"residual": 0.0, "trivial": True}
    gam = rotation_coefficients(chart)
    fn = lambda p: np.asarray(psi_fn(chart.recompute(p)))
    res = 0.0
    for i in range(n):
        d = chart.along(fn, i)
        for j in range(n):
            if j != i:
                want = gam[j, i] * psi[i]
            else:
                want = -sum(gam[k, i] * psi[k] for k in range(n) if k != i)
            res = max(res, abs(d[j] - want))
    return {"residual": float(res), "trivial": False}


def christoffel_residual(chart):
    """Compare both connections in canonical coordinates with the closed forms.

    Transforms the flat-coordinate Christoffels of ``g1`` and ``g2`` to the
    canonical chart and subtracts the diagonal-metric expressions.
    """
    n = chart.n
    J, Jinv, p = chart.du_dv, chart.dv_du, chart.point
    jac = lambda q: _jacobian(chart.g1, chart.g2, q)[1]
    # H[c, i, a] = d^2 u^i / dv^a dv^c
    H = np.array([deriv(jac, p, np.eye(n)[c], chart.step) for c in range(n)])
    fu = chart.f_upper
    fn = lambda q: 1.0 / _f_lower_fn(chart.g1, chart.g2)(q)
    dfu = np.array([chart.along(fn, k) for k in range(n)]).T  # dfu[i, k] = d f^i / du^k
    u = chart.u
    out = 0.0
    for which, metric in ((1, chart.g1), (2, chart.g2)):
        G = metric.at(p)
        Gam = np.array([[[float(metric.christoffel[a][b][c](p)) for c in range(n)] for b in range(n)]
                        for a in range(n)])
        got = (np.einsum("ia,jb,ck,abc->ijk", J, J, Jinv, Gam)
               + np.einsum("ab,ia,cjb,ck->ijk", G, J, H, Jinv))
        w = fu if which == 1 else u * fu
        dw = dfu if which == 1 else (np.diag(fu) + u[:, None] * dfu)
        want = np.zeros((n, n, n))
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    t = 0.0
                    if i == j:
                        t += 0.5 * dw[i, k]
                    if j == k:
                        t += 0.5 * w[i] / fu[j] * dfu[j, i]
                    if i == k:
                        t -= 0.5 * w[j] / fu[i] * dfu[i, j]
                    want[i, j, k] = t
        out = max(out, float(np.max(np.abs(got - want))))
    return out
