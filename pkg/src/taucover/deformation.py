"""Tau-symmetric deformations: verification, deformed tau structure, Miura shifts.

Every identity is checked up to a truncation degree ``dmax`` in the standard
gradation. Densities and tau-structure entries are kept through ``dmax``;
flows and x-derivatives through ``dmax + 1``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .brackets import Derivation, exp_ad, miura_exp, schouten, _check_shift
from .jetspace import (
    CoeffPoly,
    DiffPoly,
    Functional,
    NotExact,
    from_text,
    integrate,
    is_exact,
    mul,
    substitute,
    to_text,
    total_derivative,
    variational_derivative,
)
from .pencil import deriv, poisson_operator
from .report import Check, exact, pmap, within, worst


class CoincidingVelocities(ValueError):
    pass


def unit_field(n, unit=0):
    return Functional(DiffPoly.theta(n, unit))


def delta_Z(Q, unit=0):
    """``delta Q / delta v^1``; integrates to ``[Z, Q]`` for ``Z = int theta_1``."""
    Q = Q if isinstance(Q, Functional) else Functional(Q)
    return variational_derivative(Q.density, unit, "even")


# --------------------------------------------------------------------------
# data

@dataclass
class DeformedData:
    """``(P1~, {h~_{a,p}}, Z~)`` truncated at standard degree ``dmax``.

    ``h[(alpha, p)]`` for ``p = -1..top``; ``eta`` and ``unit`` come from the
    undeformed structure.
    """

    n: int
    P1: Functional
    h: dict
    eta: list
    dmax: int
    top: int
    unit: int = 0
    Z: Functional = None
    _flows: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.Z is None:
            self.Z = unit_field(self.n, self.unit)

    @classmethod
    def trivial(cls, hierarchy, dmax, top=None):
        """The undeformed structure viewed as a deformation."""
        from .hierarchy import pencil_or_flat
        data = hierarchy.data
        top = hierarchy.theta.pmax + 1 if top is None else top
        if top > hierarchy.h.top:
            raise ValueError(f"density table only reaches p={hierarchy.h.top}")
        g1, _ = pencil_or_flat(data)
        h = {(a, p): DiffPoly.from_coeff(hierarchy.h(a, p)) for a in range(data.n) for p in range(-1, top + 1)}
        return cls(data.n, poisson_operator(g1), h, data.eta, dmax, top, data.unit)

    def with_h(self, h, top=None, P1=None):
        return DeformedData(self.n, P1 or self.P1, h, self.eta, self.dmax,
                            self.top if top is None else top, self.unit, self.Z)

    def perturbed(self, alpha, p, extra):
        h = dict(self.h)
        h[(alpha, p)] = h[(alpha, p)] + extra
        return self.with_h(h)

    def hamiltonian_field(self, alpha, p):
        """``X = -[P1~, int h~_{a,p}]`` truncated one degree above ``dmax``."""
        return -schouten(self.P1, Functional(self.h[(alpha, p)])).truncate(self.dmax + 1)

    def flow(self, alpha, p):
        key = (alpha, p)
        if key not in self._flows:
            self._flows[key] = Derivation(self.hamiltonian_field(alpha, p), self.dmax + 1)
        return self._flows[key]

    def apply(self, alpha, p, a):
        return self.flow(alpha, p)(a).truncate(self.dmax + 1)

    def to_dict(self, base=None):
        """Corrections relative to ``base`` (a trivial deformation) in text form."""
        out = {"n": self.n, "dmax": self.dmax, "top": self.top, "unit": self.unit + 1}
        ref = base.h if base is not None else {}
        out["h_corrections"] = [
            {"alpha": a + 1, "p": p, "density": to_text(self.h[(a, p)] - ref.get((a, p), DiffPoly.zero(self.n)))}
            for (a, p) in sorted(self.h)
            if not (self.h[(a, p)] - ref.get((a, p), DiffPoly.zero(self.n))).is_zero()
        ]
        dP = self.P1 - base.P1 if base is not None else self.P1
        out["P1_corrections"] = [] if dP.is_zero() else [to_text(dP.density)]
        return out


def load_deformation(d, hierarchy):
    """Deformation fixture: corrections in DiffPoly text form added to the principal data."""
    n = hierarchy.data.n
    if int(d.get("n", n)) != n:
        raise ValueError(f"fixture is for n={d['n']}, hierarchy has n={n}")
    dmax = int(d["dmax"])
    top = int(d.get("top", hierarchy.theta.pmax + 1))
    base = DeformedData.trivial(hierarchy, dmax, top)
    h = dict(base.h)
    for rec in d.get("h_corrections", []):
        key = (int(rec["alpha"]) - 1, int(rec["p"]))
        if key not in h:
            raise ValueError(f"correction for h_{{{key[0] + 1},{key[1]}}} is outside the table")
        h[key] = h[key] + from_text(rec["density"], n)
    P1 = base.P1
    for text in d.get("P1_corrections", []):
        P1 = P1 + Functional(from_text(text, n))
    return base.with_h(h, top, P1), base


# --------------------------------------------------------------------------
# verification

def _cells(n, top):
    return [(a, p, b, q) for a in range(n) for p in range(top + 1) for b in range(n) for q in range(top + 1)
            if (a, p) <= (b, q)]


def verify_deformation(d, max_index=None):
    top = d.top if max_index is None else min(max_index, d.top)
    n, D = d.n, d.dmax
    checks = [exact("deformed_P1_hamiltonian", schouten(d.P1, d.P1).truncate(D + 2), dmax=D)]

    def involution(k):
        a, p, b, q = k
        r = d.apply(a, p, d.h[(b, q)])
        ok = is_exact(r)
        return Check("deformed_involution", "pass" if ok else "fail", 0.0 if ok else 1.0,
                     {"cell": [a + 1, p, b + 1, q]})

    def tau(k):
        a, p, b, q = k
        r = d.apply(b, q, d.h[(a, p - 1)]) - d.apply(a, p, d.h[(b, q - 1)])
        return exact("deformed_tau_symmetry", r, cell=[a + 1, p, b + 1, q])

    cells = _cells(n, top)
    checks.append(worst(pmap(involution, cells), "deformed_involution", dmax=D))
    checks.append(worst(pmap(tau, cells), "deformed_tau_symmetry", dmax=D))
    e = d.unit
    norm = max(exact("", d.flow(e, 0).components[g] - DiffPoly.u(n, g, 1)).value for g in range(n))
    checks.append(Check("deformed_x_translation", "pass" if norm == 0 else "fail", norm, {"dmax": D}))
    cas = [exact("deformed_casimir", d.hamiltonian_field(a, -1), cell=[a + 1]) for a in range(n)]
    checks.append(worst(cas, "deformed_casimir", dmax=D))
    return checks


# --------------------------------------------------------------------------
# deformed tau structure

@dataclass
class DeformedOmega:
    omega: dict      # (a, p, b, q) -> DiffPoly
    pmax: int
    dmax: int

    def __call__(self, a, p, b, q):
        if p < 0 or q < 0:
            return DiffPoly.zero(next(iter(self.omega.values())).n)
        return self.omega[(a, p, b, q)]

    def perturbed(self, key, extra):
        om = dict(self.omega)
        om[key] = om[key] + extra
        return DeformedOmega(om, self.pmax, self.dmax)


def build_omega_deformed(d, omega, pmax=None):
    """``Omega~ = int d~_{a,p}(h~_{b,q-1})`` with the degree-zero part pinned to ``omega``."""
    pmax = min(d.top, omega.pmax) if pmax is None else pmax
    n = d.n
    out = {}
    for a in range(n):
        for p in range(pmax + 1):
            for b in range(n):
                for q in range(pmax + 1):
                    r = d.apply(a, p, d.h[(b, q - 1)])
                    prim = integrate(r).truncate(d.dmax)
                    prim = prim + omega(a, p, b, q).constant_term()
                    out[(a, p, b, q)] = prim
    return DeformedOmega(out, pmax, d.dmax)


def deformed_omega_checks(d, om, omega):
    n, pmax, e = d.n, om.pmax, d.unit
    lead, sym, der, col = [], [], [], []
    for a in range(n):
        for p in range(pmax + 1):
            for b in range(n):
                for q in range(pmax + 1):
                    x = om(a, p, b, q)
                    sym.append(exact("deformed_omega_symmetry", x - om(b, q, a, p), cell=[a + 1, p, b + 1, q]))
                    lead.append(exact("deformed_omega_leading", x.part(0) - DiffPoly.from_coeff(omega(a, p, b, q)),
                                      cell=[a + 1, p, b + 1, q]))
                    r = d.apply(b, q, d.h[(a, p - 1)]) - total_derivative(x)
                    der.append(exact("deformed_omega_derivative", r.truncate(d.dmax + 1),
                                     cell=[a + 1, p, b + 1, q]))
            col.append(exact("deformed_omega_unit_column", om(a, p, e, 0) - d.h[(a, p - 1)].truncate(d.dmax),
                             cell=[a + 1, p]))
    return [worst(lead, "deformed_omega_leading", dmax=d.dmax),
            worst(sym, "deformed_omega_symmetry", dmax=d.dmax),
            worst(der, "deformed_omega_derivative", dmax=d.dmax),
            worst(col, "deformed_omega_unit_column", dmax=d.dmax)]


# --------------------------------------------------------------------------
# normal coordinates

@dataclass
class NormalCoordinates:
    w: list          # w^a as DiffPoly in v-jets
    inverse: list    # v^a as DiffPoly in w-jets (same variable names)
    dmax: int

    def to_w(self, a):
        """Rewrite a theta-free DiffPoly in v-jets in terms of w-jets."""
        return substitute(a, self.inverse, self.dmax)

    def round_trip(self):
        """``v(w(v)) - v`` and ``w(v(w)) - w`` up to ``dmax``."""
        n = len(self.w)
        a = [substitute(self.inverse[i], self.w, self.dmax) - DiffPoly.v(n, i) for i in range(n)]
        b = [substitute(self.w[i], self.inverse, self.dmax) - DiffPoly.v(n, i) for i in range(n)]
        return a + b


def normal_coordinates(d):
    n, D = d.n, d.dmax
    inv_eta = _inverse(d.eta)
    w = []
    for a in range(n):
        acc = DiffPoly.zero(n)
        for b in range(n):
            if inv_eta[a][b]:
                acc = acc + d.h[(b, -1)].scale(inv_eta[a][b])
        w.append(acc.truncate(D))
    corr = [w[a] - DiffPoly.v(n, a) for a in range(n)]
    if any(not c.part(0).is_zero() for c in corr):
        raise ValueError("normal coordinates must start with v")
    v = [DiffPoly.v(n, a) for a in range(n)]
    for _ in range(D + 1):
        v = [(DiffPoly.v(n, a) - substitute(corr[a], v, D)).truncate(D) for a in range(n)]
    return NormalCoordinates(w, v, D)


def _inverse(m):
    from . import _linalg as la
    return la.inverse(m)


def check_deformed_galilean(d, om, w):
    """``d Omega~ / d w^1`` identity with Omega~ written in w-jets."""
    n, e, D = d.n, d.unit, d.dmax
    DZ = Derivation.from_components([DiffPoly.const(n, int(i == e)) for i in range(n)])
    cache = {}

    def in_w(a, p, b, q):
        key = (a, p, b, q)
        if key not in cache:
            cache[key] = w.to_w(om(a, p, b, q)) if p >= 0 and q >= 0 else DiffPoly.zero(n)
        return cache[key]

    out = []
    for a in range(n):
        for p in range(om.pmax + 1):
            for b in range(n):
                for q in range(om.pmax + 1):
                    r = DZ(in_w(a, p, b, q)) - in_w(a, p - 1, b, q) - in_w(a, p, b, q - 1)
                    if p == 0 and q == 0:
                        r = r - d.eta[a][b]
                    out.append(exact("deformed_galilean", r.truncate(D), cell=[a + 1, p, b + 1, q]))
    return worst(out, "deformed_galilean", dmax=D)


# --------------------------------------------------------------------------
# equivalent deformations

@dataclass
class EquivalenceShift:
    K: Functional
    Y: Functional
    g: DiffPoly
    G: DiffPoly


def shift_from(d, K):
    """``Y = [P1, K]``, ``g`` with ``d g = delta_Z K`` and ``G = sum D_Y^{i-1} g / i!``."""
    K = K if isinstance(K, Functional) else Functional(K)
    D = d.dmax
    Y = schouten(d.P1, K).truncate(D + 2)
    _check_shift(Y)
    g = integrate(delta_Z(K, d.unit)).truncate(D)
    DY = Derivation(Y, D)
    G = DiffPoly.zero(d.n)
    term = g
    k = 1
    fact = 1
    while not term.is_zero():
        G = G + term.scale(Fraction(1, fact))
        term = DY(term).truncate(D)
        k += 1
        fact *= k
    return EquivalenceShift(K, Y, g, G.truncate(D))


def generate_equivalent(d, K):
    """Miura-shifted deformation with densities ``e^{D_Y} h~_{a,p} + d d^_{a,p+1} G``.

    The shift of the density by ``d^_{a,p+1}G`` is the one under which the new
    densities stay tau-symmetric; the table loses its top level.
    """
    D, n = d.dmax, d.n
    s = shift_from(d, K)
    P1 = exp_ad(s.Y, d.P1, D + 1)
    mid = {k: miura_exp(s.Y, v, D) for k, v in d.h.items()}
    raw = d.with_h(mid, d.top, P1)
    h = {}
    for a in range(n):
        for p in range(-1, d.top):
            corr = total_derivative(raw.apply(a, p + 1, s.G)).truncate(D)
            h[(a, p)] = (mid[(a, p)] + corr).truncate(D)
    return raw.with_h(h, d.top - 1, P1), s


def shift_checks(d, new, s, omega_old, omega_new):
    """Identities tying a deformation to its Miura shift."""
    D, n = d.dmax, d.n
    Z = d.Z
    checks = [
        exact("shift_Y_Z_commute", schouten(s.Y, Z).truncate(D + 2)),
        exact("shift_K_Z_commute", schouten(s.K, Z).truncate(D + 2)),
        exact("shift_g_primitive", total_derivative(s.g) - delta_Z(s.K, d.unit)),
    ]
    mid = {k: miura_exp(s.Y, v, D) for k, v in d.h.items()}
    lifted = d.with_h(mid, d.top, new.P1)
    dens, ham = [], []
    for (a, p), hh in sorted(new.h.items()):
        diff = hh - mid[(a, p)]
        try:
            r = integrate(diff) - lifted.apply(a, p + 1, s.G).truncate(D)
            dens.append(exact("shift_density", r.truncate(D), cell=[a + 1, p]))
        except NotExact:
            dens.append(Check("shift_density", "fail", 1.0, {"cell": [a + 1, p], "reason": "not exact"}))
        lhs = Functional(hh).truncate(D)
        rhs = exp_ad(s.Y, Functional(d.h[(a, p)]), D)
        ham.append(exact("shift_hamiltonian", (lhs - rhs).truncate(D), cell=[a + 1, p]))
    checks.append(worst(dens, "shift_density", dmax=D))
    checks.append(worst(ham, "shift_hamiltonian", dmax=D))
    om = []
    for (a, p, b, q), val in omega_new.omega.items():
        want = miura_exp(s.Y, omega_old(a, p, b, q), D) + new.apply(a, p, new.apply(b, q, s.G))
        om.append(exact("shift_omega", (val - want).truncate(D), cell=[a + 1, p, b + 1, q]))
    checks.append(worst(om, "shift_omega", dmax=D))
    return checks


# --------------------------------------------------------------------------
# semi-Hamiltonian property (numeric)

def check_semi_hamiltonian(A, samples, direction=None, step=1e-3, tol=1e-8, grad=None):
    """Tsarev condition and nondegeneracy for diagonal velocities ``A(point)``.

    ``direction(point, k)`` gives the displacement of the input point along
    ``d/du^k``; by default the input is ``u`` itself. ``grad(point)[k, i]``,
    when given, is an exact ``d_k A^i`` and leaves one finite-difference layer.
    """
    direction = direction or (lambda x, k: np.eye(len(x))[k])
    worst_, nondeg = 0.0, []
    for x in samples:
        x = np.asarray(x, dtype=float)
        a = np.asarray(A(x), dtype=float)
        n = len(a)
        if n > 1 and np.min(np.abs(a[:, None] - a[None, :]) + np.eye(n) * 1e300) < 1e-12:
            raise CoincidingVelocities(f"velocities coincide at {x.tolist()}")

        def dA(y, k):
            if grad is not None:
                return np.asarray(grad(y))[k]
            return deriv(A, y, direction(y, k), step)

        grads = np.array([dA(x, k) for k in range(n)])  # grads[k, i] = d_k A^i
        nondeg.append(bool(np.all(np.abs(np.diag(grads)) > 1e-12)))
        if n < 3:
            continue

        def ratio(y, j):
            ay = np.asarray(A(y), dtype=float)
            dj = dA(y, j)
            with np.errstate(divide="ignore", invalid="ignore"):
                r = dj / (ay[j] - ay)
            r[j] = 0.0
            return r

        R = {}
        for j in range(n):
            for k in range(n):
                if j != k:
                    R[(j, k)] = deriv(lambda y: ratio(y, j), x, direction(x, k), step)
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    if len({i, j, k}) == 3:
                        worst_ = max(worst_, abs(R[(j, k)][i] - R[(k, j)][i]))
    return [within("semi_hamiltonian", worst_, tol, samples=len(samples)),
            Check("nondegenerate", "pass" if all(nondeg) else "fail", float(sum(not f for f in nondeg)),
                  {"flags": nondeg})]


def pencil_velocities(H, alpha, p, with_grad=False):
    """Characteristic velocities of the flow ``t^{alpha,p}`` as a function of ``v``, and the chart direction.

    With ``with_grad`` a third function returns ``G[k, i] = d A^i / du^k``
    from first-order eigenvalue perturbation of the exact ``d V``.
    """
    from .pencil import canonical_coordinates_at
    from .frobenius import pencil_from_frobenius
    data = H.data
    n = data.n
    g1, g2 = pencil_from_frobenius(data)
    hp = H.h(alpha, p)
    hess = [[hp.diff(l).diff(m) for m in range(n)] for l in range(n)]
    eta_inv = np.array([[float(x) for x in r] for r in data.eta_inv])

    def V(v):
        Hm = np.array([[float(hess[l][m](list(v))) for m in range(n)] for l in range(n)])
        return eta_inv @ Hm

    def A(v):
        ch = canonical_coordinates_at(g1, g2, v)
        return np.diag(ch.du_dv @ V(v) @ ch.dv_du).copy()

    def direction(v, k):
        return canonical_coordinates_at(g1, g2, v).dv_du[:, k]

    dhess = [[[hess[l][m].diff(c) for m in range(n)] for l in range(n)] for c in range(n)]

    def grad(v):
        ch = canonical_coordinates_at(g1, g2, v)
        dV = [eta_inv @ np.array([[float(dhess[c][l][m](list(v))) for m in range(n)] for l in range(n)])
              for c in range(n)]
        out = np.empty((n, n))
        for k in range(n):
            dk = sum(ch.dv_du[c, k] * dV[c] for c in range(n))
            out[k] = np.diag(ch.du_dv @ dk @ ch.dv_du)
        return out

    if with_grad:
        return A, direction, grad
    return A, direction


def dump_deformation(d, base):
    return json.dumps(d.to_dict(base), indent=1, sort_keys=True) + "\n"
