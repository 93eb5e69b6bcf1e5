"""WDVV potentials: metric and structure constants, checks, pencils, transforms."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _linalg as la
from .jetspace import CoeffPoly, as_fraction, fmt_fraction, radial_potential
from .pencil import HydroMetric, psi_first


class NotWDVV(ValueError):
    pass


class MissingEuler(ValueError):
    pass


class NonInvertibleB(ValueError):
    pass


@dataclass
class Euler:
    """``E = sum_a (coeffs[a] v^a + shifts[a]) d/dv^a`` and the weight of F."""

    coeffs: list
    weight: Fraction
    shifts: list = None

    def __post_init__(self):
        self.coeffs = [as_fraction(c) for c in self.coeffs]
        self.weight = as_fraction(self.weight)
        if self.shifts is None:
            self.shifts = [Fraction(0)] * len(self.coeffs)
        self.shifts = [as_fraction(c) for c in self.shifts]

    def component(self, n, a):
        return CoeffPoly.var(n, a) * self.coeffs[a] + self.shifts[a]

    @property
    def charge(self):
        return 3 - self.weight


@dataclass
class WDVVPotential:
    n: int
    F: CoeffPoly
    euler: Euler = None
    unit: int = 0
    name: str = ""

    @classmethod
    def from_dict(cls, d, name=""):
        n = int(d["n"])
        terms = {}
        for exps, c in d["F"]:
            if len(exps) != n:
                raise ValueError(f"exponent vector {exps} does not have length {n}")
            key = tuple(int(e) for e in exps)
            terms[key] = terms.get(key, Fraction(0)) + as_fraction(str(c))
        eu = d.get("euler")
        euler = None
        if eu:
            euler = Euler(eu["coeffs"], eu["weight"], eu.get("shifts"))
        return cls(n, CoeffPoly(n, terms), euler, int(d.get("unit", 0)), d.get("name", name))

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        d = {"n": self.n, "F": [[list(k), fmt_fraction(c)] for k, c in sorted(self.F.terms.items())]}
        if self.name:
            d["name"] = self.name
        if self.euler is not None:
            d["euler"] = {"coeffs": [fmt_fraction(c) for c in self.euler.coeffs],
                          "weight": fmt_fraction(self.euler.weight)}
            if any(self.euler.shifts):
                d["euler"]["shifts"] = [fmt_fraction(c) for c in self.euler.shifts]
        return d


@dataclass
class FrobeniusData:
    potential: WDVVPotential
    eta: list
    eta_inv: list
    c: list  # c[a][b][g] CoeffPoly
    quadratic_ok: bool = True
    notes: list = field(default_factory=list)

    @property
    def n(self):
        return self.potential.n

    @property
    def euler(self):
        return self.potential.euler

    @property
    def unit(self):
        return self.potential.unit

    def c_up(self, a, b, g):
        """``c^{ab}_g`` with both upper indices raised by eta."""
        n = self.n
        out = CoeffPoly(n)
        for m in range(n):
            for k in range(n):
                w = self.eta_inv[a][m] * self.eta_inv[k][b]
                if w:
                    out = out + self.c[m][g][k] * w
        return out

    def c_mixed(self, a, b, g):
        """``c_{ab}^g``."""
        out = CoeffPoly(self.n)
        for k in range(self.n):
            if self.eta_inv[k][g]:
                out = out + self.c[a][b][k] * self.eta_inv[k][g]
        return out

    def lower(self, a):
        """``v_a = eta_{ab} v^b``."""
        out = CoeffPoly(self.n)
        for b in range(self.n):
            if self.eta[a][b]:
                out = out + CoeffPoly.var(self.n, b) * self.eta[a][b]
        return out


def analyze(pot):
    n, F = pot.n, pot.F
    d1 = [F.diff(a) for a in range(n)]
    d2 = [[d1[a].diff(b) for b in range(n)] for a in range(n)]
    c = [[[d2[a][b].diff(g) for g in range(n)] for b in range(n)] for a in range(n)]
    e = pot.unit
    eta = []
    for a in range(n):
        row = []
        for b in range(n):
            p = c[e][a][b]
            if any(sum(k) for k in p.terms):
                raise NotWDVV(f"eta_{{{a + 1}{b + 1}}} = c_1ab is not constant")
            row.append(p.constant_term())
        eta.append(row)
    eta_inv = la.inverse(eta)
    if eta_inv is None:
        raise NotWDVV("eta is degenerate")
    for a in range(n):
        for b in range(n):
            for g in range(n):
                for x in range(n):
                    if c[a][b][g].diff(x) != c[x][b][g].diff(a):
                        raise NotWDVV("integrability of c fails")
    prod = [[CoeffPoly(n) for _ in range(n)] for _ in range(n)]
    # M[a][b][z] = c_{ab xi} eta^{xi z}
    M = [[[sum((c[a][b][x] * eta_inv[x][z] for x in range(n) if eta_inv[x][z]), CoeffPoly(n))
           for z in range(n)] for b in range(n)] for a in range(n)]
    for a in range(n):
        for b in range(n):
            for g in range(n):
                for dd in range(n):
                    lhs = sum((M[a][b][z] * c[z][g][dd] for z in range(n)), CoeffPoly(n))
                    rhs = sum((M[dd][b][z] * c[z][g][a] for z in range(n)), CoeffPoly(n))
                    if lhs != rhs:
                        raise NotWDVV(f"associativity fails at ({a + 1},{b + 1},{g + 1},{dd + 1})")
    data = FrobeniusData(pot, eta, eta_inv, c)
    for a in range(n):
        if d2[e][a] != data.lower(a):
            data.quadratic_ok = False
            data.notes.append(f"d2F/dv^1dv^{a + 1} differs from v_{a + 1} by a constant")
    return data


def quasihomogeneity_check(pot, euler=None, weight=None):
    """Largest coefficient of ``d^3(E(F) - weight F)``; zero when quasi-homogeneous."""
    euler = euler or pot.euler
    if euler is None:
        raise MissingEuler("no Euler field")
    w = as_fraction(weight) if weight is not None else euler.weight
    n, F = pot.n, pot.F
    EF = sum((euler.component(n, a) * F.diff(a) for a in range(n)), CoeffPoly(n))
    R = EF - F * w
    worst = Fraction(0)
    for a in range(n):
        for b in range(n):
            for g in range(n):
                for c in R.diff(a).diff(b).diff(g).terms.values():
                    worst = max(worst, abs(c))
    return worst


def pencil_from_frobenius(data):
    """``(g1, g2)`` with ``g1 = eta`` and ``g2^{ab} = E^e c_e^{ab}``.

    The second connection is ``((1 + d)/2 - q_b) c^{ab}_g`` with
    ``q_b = 1 - d_b`` and charge ``d``: its antisymmetric part is what the
    bracket sees, its symmetric part is fixed by metric compatibility.
    """
    eu = data.euler
    if eu is None:
        raise MissingEuler("pencil needs an Euler field")
    n = data.n
    g1 = HydroMetric([[data.eta_inv[a][b] for b in range(n)] for a in range(n)])
    g2 = [[CoeffPoly(n) for _ in range(n)] for _ in range(n)]
    for a in range(n):
        for b in range(n):
            for e in range(n):
                g2[a][b] = g2[a][b] + eu.component(n, e) * data.c_up(a, b, e)
    shift = (1 + eu.charge) / 2
    gam = [[[data.c_up(a, b, g) * (shift - (1 - eu.coeffs[b])) for g in range(n)] for b in range(n)]
           for a in range(n)]
    return g1, HydroMetric(g2, gam)


def psi_at(data, chart):
    """``psi[i, a]`` with ``psi_{i1} = f_i^{1/2}`` and ``psi_{ia} = psi_{i1} du^i/dv^a``."""
    s = psi_first(chart)
    return s[:, None] * chart.du_dv


def eta_from_psi(psi):
    return psi.T @ psi


def c_from_psi(psi, unit=0):
    return np.einsum("ia,ib,ig,i->abg", psi, psi, psi, 1.0 / psi[:, unit])


def c_at(data, point):
    n = data.n
    return np.array([[[float(data.c[a][b][g](point)) for g in range(n)] for b in range(n)] for a in range(n)])


# --------------------------------------------------------------------------
# Legendre-type transformation

def _shift(p, base):
    """Re-expand ``p`` around ``base``: returns q with q(x) = p(base + x)."""
    n = p.n
    imgs = [CoeffPoly.var(n, i) + base[i] for i in range(n)]
    return p.compose(imgs)


@dataclass
class LegendreResult:
    data: FrobeniusData
    b: list
    base: list
    base_hat: list
    hat_map: list          # v-hat^a as CoeffPoly in v
    inverse: list          # (v - base) as series in y = v-hat - base_hat
    F_hat: CoeffPoly       # series in y
    order: int

    @property
    def unit_hat(self):
        return list(self.b)

    def to_hat(self, v):
        return [float(p(list(v))) for p in self.hat_map]

    def hessian_hat(self, y):
        n = self.data.n
        return np.array([[float(self.F_hat.diff(a).diff(b)(list(y))) for b in range(n)] for a in range(n)])

    def residual(self, points):
        """Max mismatch of second derivatives at the images of ``points``."""
        n = self.data.n
        F = self.data.potential.F
        worst = 0.0
        for v in points:
            vh = self.to_hat(v)
            y = [vh[a] - float(self.base_hat[a]) for a in range(n)]
            H = np.array([[float(F.diff(a).diff(b)(list(map(float, v)))) for b in range(n)] for a in range(n)])
            worst = max(worst, float(np.max(np.abs(self.hessian_hat(y) - H))))
        return worst


def legendre_transform(data, b, base=None, order=8):
    n = data.n
    F = data.potential.F
    b = [as_fraction(x) for x in b]
    base = [as_fraction(x) for x in (base if base is not None else [1] * n)]
    low = [sum((F.diff(g).diff(a) * b[g] for g in range(n) if b[g]), CoeffPoly(n)) for a in range(n)]
    hat = [sum((low[m] * data.eta_inv[a][m] for m in range(n) if data.eta_inv[a][m]), CoeffPoly(n))
           for a in range(n)]
    base_hat = [p(base) for p in hat]
    # x -> y map around the base point
    shifted = [_shift(p, base) - p(base) for p in hat]
    J = [[shifted[a].homogeneous_part(1).diff(c).constant_term() for c in range(n)] for a in range(n)]
    Jinv = la.inverse(J)
    if Jinv is None:
        raise NonInvertibleB("the map v -> v-hat is singular at the base point")
    nonlin = [p - p.homogeneous_part(1) - p.homogeneous_part(0) for p in shifted]
    ys = [CoeffPoly.var(n, a) for a in range(n)]
    x = [sum((ys[c] * Jinv[a][c] for c in range(n)), CoeffPoly(n)) for a in range(n)]
    for _ in range(order):
        N = [q.compose(x, order) for q in nonlin]
        rhs = [ys[c] - N[c] for c in range(n)]
        x = [sum((rhs[c] * Jinv[a][c] for c in range(n)), CoeffPoly(n)).truncate(order) for a in range(n)]
    vy = [x[a] + base[a] for a in range(n)]
    H = [[F.diff(a).diff(c).compose(vy, order) for c in range(n)] for a in range(n)]
    grads = []
    for a in range(n):
        g, ok = radial_potential(H[a])
        if not ok:
            raise NonInvertibleB("transformed Hessian is not closed")
        grads.append(g)
    Fh, ok = radial_potential(grads)
    if not ok:
        raise NonInvertibleB("transformed gradient is not closed")
    return LegendreResult(data, b, base, base_hat, hat, x, Fh, order)
