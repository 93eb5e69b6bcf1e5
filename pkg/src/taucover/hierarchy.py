"""Calibration, densities, tau structure and flows of the principal hierarchy.

Everything here is exact: tables hold CoeffPolys in the flat coordinates,
flows are DiffPolys of standard degree one, and every check compares
polynomials coefficient by coefficient.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

from . import _linalg as la
from .brackets import Derivation, schouten
from .frobenius import FrobeniusData, pencil_from_frobenius
from .jetspace import CoeffPoly, DiffPoly, Functional, as_fraction, fmt_fraction, mul, radial_potential
from .pencil import poisson_operator
from .report import Check, exact, pmap, worst


class RecursionInconsistent(ValueError):
    pass


class DivisionMismatch(ValueError):
    pass


class OrthogonalityViolation(ValueError):
    pass


def default_pmax(n):
    return 6 if n == 1 else 4


# --------------------------------------------------------------------------
# calibration changes

@dataclass
class CalibrationChange:
    """``theta(z) -> theta(z) C(z) + theta0(z)`` with ``C(z) = 1 + C_1 z + ...``.

    ``matrices[k]`` is ``C_k`` (``matrices[0]`` the identity), indexed
    ``[beta][alpha]``; ``shifts[(alpha, p)]`` are constants.
    """

    matrices: list
    shifts: dict = field(default_factory=dict)

    @classmethod
    def identity(cls, n):
        return cls([la.identity(n)])

    def coefficient(self, k):
        if k < len(self.matrices):
            return self.matrices[k]
        n = len(self.matrices[0])
        return [[Fraction(0)] * n for _ in range(n)]

    def is_identity(self):
        n = len(self.matrices[0])
        return (all(m == la.identity(n) if k == 0 else not any(any(r) for r in m)
                    for k, m in enumerate(self.matrices))
                and not any(self.shifts.values()))

    def orthogonality_defect(self, eta, order):
        """Largest entry of ``C^T(-z) eta C(z) - eta`` up to ``z^order``."""
        n = len(eta)
        worst_ = Fraction(0)
        for k in range(order + 1):
            acc = [[Fraction(0)] * n for _ in range(n)]
            for i in range(k + 1):
                A = la.matmul(la.matmul(la.transpose(self.coefficient(i)), eta), self.coefficient(k - i))
                s = -1 if i % 2 else 1
                acc = [[acc[r][c] + s * A[r][c] for c in range(n)] for r in range(n)]
            if k == 0:
                acc = [[acc[r][c] - eta[r][c] for c in range(n)] for r in range(n)]
            worst_ = max([worst_] + [abs(x) for row in acc for x in row])
        return worst_

    def to_dict(self):
        return {
            "matrices": [[[fmt_fraction(x) for x in row] for row in m] for m in self.matrices],
            "shifts": [[a + 1, p, fmt_fraction(c)] for (a, p), c in sorted(self.shifts.items())],
        }


# --------------------------------------------------------------------------
# theta table

@dataclass
class ThetaTable:
    data: FrobeniusData
    theta: list            # theta[alpha][p]
    pmax: int
    calibration: CalibrationChange
    raw_normalization: Fraction = Fraction(0)

    @property
    def n(self):
        return self.data.n

    @property
    def depth(self):
        return len(self.theta[0]) - 1

    def __call__(self, alpha, p):
        return self.theta[alpha][p]


def _structure(data):
    n = data.n
    return [[[data.c_mixed(a, b, z) for z in range(n)] for b in range(n)] for a in range(n)]


def _recursion_step(cm, prev):
    """Solve ``d_a d_b next = c_ab^z d_z prev`` with zero affine part at 0."""
    n = prev.n
    grad_prev = [prev.diff(z) for z in range(n)]
    grads = []
    for a in range(n):
        row = [sum((cm[a][b][z] * grad_prev[z] for z in range(n) if not cm[a][b][z].is_zero()),
                   CoeffPoly(n)) for b in range(n)]
        g, ok = radial_potential(row)
        if not ok:
            raise RecursionInconsistent(f"second derivatives in row {a + 1} are not closed")
        grads.append(g)
    nxt, ok = radial_potential(grads)
    if not ok:
        raise RecursionInconsistent("gradient is not closed")
    return nxt


def _jacobian(thetas):
    """``J[l][a] = d theta_a / d v^l`` for a list of theta_a."""
    n = len(thetas)
    return [[thetas[a].diff(l) for a in range(n)] for l in range(n)]


def _pairing(A, eta_inv, B):
    """``A^T eta^{-1} B`` for matrices of CoeffPolys indexed [lambda][alpha]."""
    n = len(A)
    out = [[CoeffPoly(n) for _ in range(n)] for _ in range(n)]
    for a in range(n):
        for b in range(n):
            acc = CoeffPoly(n)
            for l in range(n):
                for m in range(n):
                    w = eta_inv[l][m]
                    if w and not A[l][a].is_zero() and not B[m][b].is_zero():
                        acc = acc + A[l][a] * B[m][b] * w
            out[a][b] = acc
    return out


def _normalization_term(jacs, eta_inv, k):
    n = len(eta_inv)
    N = [[CoeffPoly(n) for _ in range(n)] for _ in range(n)]
    for p in range(k + 1):
        T = _pairing(jacs[p], eta_inv, jacs[k - p])
        s = -1 if (k - p) % 2 else 1
        N = [[N[a][b] + T[a][b] * s for b in range(n)] for a in range(n)]
    return N


def build_theta(data, pmax=None, depth=None):
    """Calibration functions ``theta_{alpha,p}`` for ``p = 0..depth``.

    ``depth`` defaults to ``2*pmax + 2``, enough for the tau structure up to
    ``pmax``. A nonzero normalization defect is removed order by order by a
    linear correction, recorded as a calibration change.
    """
    n = data.n
    pmax = default_pmax(n) if pmax is None else pmax
    depth = 2 * pmax + 2 if depth is None else max(depth, pmax + 2)
    cm = _structure(data)
    F = data.potential.F
    theta = [[data.lower(a)] for a in range(n)]
    jacs = [_jacobian([theta[a][0] for a in range(n)])]
    mats = [la.identity(n)]
    raw = Fraction(0)
    for k in range(1, depth + 1):
        if k == 1:
            row = [F.diff(a) for a in range(n)]
            for a in range(n):
                chk = _recursion_step(cm, theta[a][0])
                if any(sum(e) >= 2 for e in (chk - row[a]).terms):
                    raise RecursionInconsistent(f"dF/dv^{a + 1} violates the recursion")
        else:
            row = [_recursion_step(cm, theta[a][k - 1]) for a in range(n)]
        J = _jacobian(row)
        jacs.append(J)
        N = _normalization_term(jacs, data.eta_inv, k)
        if any(not N[a][b].is_zero() and N[a][b].total_degree() > 0 for a in range(n) for b in range(n)):
            raise RecursionInconsistent(f"normalization defect at order {k} is not constant")
        Nc = [[N[a][b].constant_term() for b in range(n)] for a in range(n)]
        raw = max([raw] + [abs(x) for r in Nc for x in r])
        sign = Fraction(-1 if k % 2 == 0 else 1, 2)
        M = [[Nc[g][a] * sign for a in range(n)] for g in range(n)]  # M = eta C_k
        if any(any(r) for r in M):
            for a in range(n):
                lin = sum((CoeffPoly.var(n, g) * M[g][a] for g in range(n) if M[g][a]), CoeffPoly(n))
                row[a] = row[a] + lin
            jacs[k] = _jacobian(row)
            N = _normalization_term(jacs, data.eta_inv, k)
            if any(not N[a][b].is_zero() for a in range(n) for b in range(n)):
                raise RecursionInconsistent(f"normalization defect at order {k} has the wrong symmetry")
        mats.append(la.matmul(data.eta_inv, M))
        for a in range(n):
            theta[a].append(row[a])
    return ThetaTable(data, theta, pmax, CalibrationChange(mats), raw)


def recursion_residual(t):
    """Largest coefficient of the recursion defect over the table."""
    cm = _structure(t.data)
    n = t.n
    worst_ = Fraction(0)
    for a in range(n):
        for p in range(t.depth):
            nxt = t.theta[a][p + 1]
            grad_prev = [t.theta[a][p].diff(z) for z in range(n)]
            for x in range(n):
                for y in range(n):
                    lhs = nxt.diff(x).diff(y)
                    rhs = sum((cm[x][y][z] * grad_prev[z] for z in range(n)), CoeffPoly(n))
                    for c in (lhs - rhs).terms.values():
                        worst_ = max(worst_, abs(c))
    return worst_


def normalization_residual(t):
    """Largest entry of ``dtheta(z) eta^{-1} dtheta(-z)^T - eta`` up to the table depth."""
    n = t.n
    jacs = [_jacobian([t.theta[a][p] for a in range(n)]) for p in range(t.depth + 1)]
    worst_ = Fraction(0)
    for k in range(t.depth + 1):
        N = _normalization_term(jacs, t.data.eta_inv, k)
        for a in range(n):
            for b in range(n):
                d = N[a][b] - (t.data.eta[a][b] if k == 0 else 0)
                for c in d.terms.values():
                    worst_ = max(worst_, abs(c))
    return worst_


def apply_calibration_change(t, C):
    n = t.n
    if C.matrices[0] != la.identity(n):
        raise OrthogonalityViolation("C(0) must be the identity")
    defect = C.orthogonality_defect(t.data.eta, t.depth)
    if defect:
        raise OrthogonalityViolation(f"C^T(-z) eta C(z) differs from eta by {defect}")
    theta = []
    for a in range(n):
        col = []
        for p in range(t.depth + 1):
            acc = CoeffPoly(n)
            for j in range(p + 1):
                Cj = C.coefficient(j)
                for b in range(n):
                    if Cj[b][a]:
                        acc = acc + t.theta[b][p - j] * Cj[b][a]
            acc = acc + C.shifts.get((a, p), 0)
            col.append(acc)
        theta.append(col)
    mats = [la.identity(n)]
    for k in range(1, t.depth + 1):
        tot = [[Fraction(0)] * n for _ in range(n)]
        for j in range(k + 1):
            A = la.matmul(t.calibration.coefficient(j), C.coefficient(k - j))
            tot = [[tot[r][c] + A[r][c] for c in range(n)] for r in range(n)]
        mats.append(tot)
    shifts = dict(C.shifts)
    return ThetaTable(t.data, theta, t.pmax, CalibrationChange(mats, shifts), t.raw_normalization)


# --------------------------------------------------------------------------
# densities, tau structure

@dataclass
class DensityTable:
    data: FrobeniusData
    h: list      # h[alpha][p + 1] for p = -1..
    pmax: int

    @property
    def n(self):
        return self.data.n

    @property
    def top(self):
        return len(self.h[0]) - 2

    def __call__(self, alpha, p):
        return self.h[alpha][p + 1]

    def perturbed(self, alpha, p, extra):
        h = [list(col) for col in self.h]
        h[alpha][p + 1] = h[alpha][p + 1] + extra
        return DensityTable(self.data, h, self.pmax)


def build_h(t):
    if t.depth < t.pmax + 2:
        raise ValueError("theta table is too shallow")
    e = t.data.unit
    h = [[t.theta[a][p + 2].diff(e) for p in range(-1, t.depth - 1)] for a in range(t.n)]
    return DensityTable(t.data, h, t.pmax)


@dataclass
class OmegaTable:
    data: FrobeniusData
    omega: dict     # (alpha, p, beta, q) -> CoeffPoly
    pmax: int

    def __call__(self, alpha, p, beta, q):
        if p < 0 or q < 0:
            return CoeffPoly(self.data.n)
        return self.omega[(alpha, p, beta, q)]

    def perturbed(self, key, extra):
        om = dict(self.omega)
        om[key] = om[key] + extra
        a, p, b, q = key
        if (b, q, a, p) != key:
            om[(b, q, a, p)] = om[(b, q, a, p)] + extra
        return OmegaTable(self.data, om, self.pmax)


def _generating_coefficients(h, eta, eta_inv, top):
    """``S[(a, i, b, j)]``: coefficient of ``z1^i z2^j`` in ``dh(z1) eta^{-1} dh(z2) - eta``."""
    n = h.n
    grads = {(a, i): [h(a, i - 1).diff(l) for l in range(n)] for a in range(n) for i in range(top + 1)}

    def S(a, i, b, j):
        acc = CoeffPoly(n)
        ga, gb = grads[(a, i)], grads[(b, j)]
        for l in range(n):
            if ga[l].is_zero():
                continue
            for m in range(n):
                if eta_inv[l][m] and not gb[m].is_zero():
                    acc = acc + ga[l] * gb[m] * eta_inv[l][m]
        if i == 0 and j == 0:
            acc = acc - eta[a][b]
        return acc

    return S


def build_omega(t, h=None):
    """Tau structure from the generating series, divided by ``z1 + z2``."""
    h = h or build_h(t)
    n, pmax = t.n, t.pmax
    top = 2 * pmax + 1
    if h.top < top - 1:
        raise ValueError(f"density table reaches p={h.top}; the tau structure needs p={top - 1}")
    S = _generating_coefficients(h, t.data.eta, t.data.eta_inv, top)
    om = {}
    for a in range(n):
        for b in range(n):
            for s in range(2 * pmax + 1):
                for q in range(s + 1):
                    p = s - q
                    val = S(a, p + 1, b, q)
                    if q > 0:
                        val = val - om[(a, p + 1, b, q - 1)]
                    om[(a, p, b, q)] = val
            for j in range(top + 1):
                want = om[(a, 0, b, j - 1)] if j > 0 else CoeffPoly(n)
                if S(a, 0, b, j) != want:
                    raise DivisionMismatch(f"generating series not divisible by z1+z2 at ({a + 1},{b + 1},{j})")
    keep = {k: v for k, v in om.items() if k[1] <= pmax and k[3] <= pmax}
    return OmegaTable(t.data, keep, pmax)


def omega_checks(om, h):
    """Symmetry and the unit-column normalization of the tau structure."""
    n, pmax, e = om.data.n, om.pmax, om.data.unit
    sym, col = [], []
    for a in range(n):
        for b in range(n):
            for p in range(pmax + 1):
                for q in range(pmax + 1):
                    sym.append(exact("omega_symmetry", om(a, p, b, q) - om(b, q, a, p),
                                     cell=[a + 1, p, b + 1, q]))
        for p in range(pmax + 1):
            col.append(exact("omega_unit_column", om(a, p, e, 0) - h(a, p - 1), cell=[a + 1, p]))
    return [worst(sym, "omega_symmetry"), worst(col, "omega_unit_column")]


def omega_derivative_check(om, h, ft):
    """``d_x Omega_{a,p;b,q} = d h_{a,p-1} / dt^{b,q}`` on every cell."""
    n, pmax = om.data.n, om.pmax

    def cell(k):
        a, p, b, q = k
        w = om(a, p, b, q)
        dx = DiffPoly.zero(n)
        for m in range(n):
            dx = dx + mul(DiffPoly.from_coeff(w.diff(m)), DiffPoly.u(n, m, 1))
        return exact("omega_x_derivative", dx - ft.apply(b, q, h(a, p - 1)), cell=[a + 1, p, b + 1, q])

    cells = [(a, p, b, q) for a in range(n) for p in range(pmax + 1) for b in range(n) for q in range(pmax + 1)]
    return worst(pmap(cell, cells), "omega_x_derivative")


# --------------------------------------------------------------------------
# flows

@dataclass
class FlowTable:
    data: FrobeniusData
    rhs: dict       # (alpha, p) -> [DiffPoly per gamma]
    pmax: int
    _derivations: dict = field(default_factory=dict, repr=False)

    def __call__(self, alpha, p):
        return self.rhs[(alpha, p)]

    def derivation(self, alpha, p):
        key = (alpha, p)
        if key not in self._derivations:
            self._derivations[key] = Derivation.from_components(self.rhs[key])
        return self._derivations[key]

    def apply(self, alpha, p, a):
        """``d/dt^{alpha,p}`` of a DiffPoly by the chain rule along the flow."""
        if isinstance(a, CoeffPoly):
            a = DiffPoly.from_coeff(a)
        return self.derivation(alpha, p)(a)


def flow_rhs(data, density):
    """``eta^{g l} d_x (dh/dv^l)`` as a DiffPoly per component."""
    n = data.n
    grad = [density.diff(l) for l in range(n)]
    out = []
    for g in range(n):
        acc = DiffPoly.zero(n)
        for l in range(n):
            w = data.eta_inv[g][l]
            if not w:
                continue
            for m in range(n):
                c = grad[l].diff(m)
                if not c.is_zero():
                    acc = acc + mul(DiffPoly.from_coeff(c * w), DiffPoly.u(n, m, 1))
        out.append(acc)
    return out


def build_flows(h, pmax=None):
    pmax = h.pmax if pmax is None else pmax
    rhs = {(a, p): flow_rhs(h.data, h(a, p)) for a in range(h.n) for p in range(-1, pmax + 1)}
    return FlowTable(h.data, rhs, pmax)


def _cells(n, pmax):
    return [(a, p, b, q) for a in range(n) for p in range(pmax + 1) for b in range(n) for q in range(pmax + 1)
            if (a, p) <= (b, q)]


def verify_tau_symmetry(ft, h, pmax=None):
    pmax = ft.pmax if pmax is None else pmax

    def cell(k):
        a, p, b, q = k
        r = ft.apply(b, q, h(a, p - 1)) - ft.apply(a, p, h(b, q - 1))
        return exact("tau_symmetry", r, cell=[a + 1, p, b + 1, q])

    return worst(pmap(cell, _cells(h.n, pmax)), "tau_symmetry", pmax=pmax)


def verify_commutativity(ft, pmax=None):
    pmax = ft.pmax if pmax is None else pmax
    n = ft.data.n

    def cell(k):
        a, p, b, q = k
        size = 0
        for g in range(n):
            r = ft.apply(a, p, ft(b, q)[g]) - ft.apply(b, q, ft(a, p)[g])
            size = max(size, exact("", r).value)
        return Check("commutativity", "pass" if size == 0 else "fail", size, {"cell": [a + 1, p, b + 1, q]})

    return worst(pmap(cell, _cells(n, pmax)), "commutativity", pmax=pmax)


def verify_normalization(ft):
    """``d v^g / dt^{1,0} = u^{g,1}``."""
    n, e = ft.data.n, ft.data.unit
    r = max(exact("", ft(e, 0)[g] - DiffPoly.u(n, g, 1)).value for g in range(n))
    return Check("flow_normalization", "pass" if r == 0 else "fail", r, {})


def galilean_check(t, h, om, ft=None, pmax=None):
    """Omega shift identity and ``[D_Z, d_{b,q}] = d_{b,q-1}`` on each ``v^g``."""
    pmax = om.pmax if pmax is None else pmax
    n, e = t.n, t.data.unit
    eta = t.data.eta
    shift = []
    for a in range(n):
        for b in range(n):
            for p in range(pmax + 1):
                for q in range(pmax + 1):
                    r = om(a, p, b, q).diff(e) - om(a, p - 1, b, q) - om(a, p, b, q - 1)
                    if p == 0 and q == 0:
                        r = r - eta[a][b]
                    shift.append(exact("galilean_omega_shift", r, cell=[a + 1, p, b + 1, q]))
    ft = ft or build_flows(h, pmax)
    DZ = Derivation.from_components([DiffPoly.const(n, int(i == e)) for i in range(n)])
    inter = []
    for b in range(n):
        for q in range(pmax + 1):
            size = 0
            for g in range(n):
                vg = DiffPoly.v(n, g)
                r = DZ(ft(b, q)[g]) - ft.apply(b, q, DZ(vg)) - ft(b, q - 1)[g]
                size = max(size, exact("", r).value)
            inter.append(Check("galilean_intertwining", "pass" if size == 0 else "fail", size,
                               {"cell": [b + 1, q]}))
    return [worst(shift, "galilean_omega_shift", pmax=pmax), worst(inter, "galilean_intertwining", pmax=pmax)]


def hamiltonian_consistency(ft, h, pmax=None):
    """Flow equals ``D_X(v^g)`` for ``X = -[P1, int h]``."""
    pmax = ft.pmax if pmax is None else pmax
    n = ft.data.n
    g1, _ = pencil_or_flat(ft.data)
    P1 = poisson_operator(g1)
    out = []
    for a in range(n):
        for p in range(pmax + 1):
            X = -schouten(P1, Functional(DiffPoly.from_coeff(h(a, p))))
            D = Derivation(X)
            size = max(exact("", D.components[g] - ft(a, p)[g]).value for g in range(n))
            out.append(Check("hamiltonian_form", "pass" if size == 0 else "fail", size, {"cell": [a + 1, p]}))
    return worst(out, "hamiltonian_form", pmax=pmax)


def bihamiltonian_conservation(h, pmax):
    """``[P2, [P1, int h_{a,p}]] = 0``."""
    n = h.n
    g1, g2 = pencil_from_frobenius(h.data)
    P1, P2 = poisson_operator(g1), poisson_operator(g2)
    out = []
    for a in range(n):
        for p in range(pmax + 1):
            X = schouten(P1, Functional(DiffPoly.from_coeff(h(a, p))))
            out.append(exact("bihamiltonian_conservation", schouten(P2, X), cell=[a + 1, p]))
    return worst(out, "bihamiltonian_conservation", pmax=pmax)


def pencil_or_flat(data):
    if data.euler is not None:
        return pencil_from_frobenius(data)
    from .pencil import HydroMetric
    n = data.n
    return HydroMetric([[data.eta_inv[a][b] for b in range(n)] for a in range(n)]), None


# --------------------------------------------------------------------------
# bundle and JSON

@dataclass
class Hierarchy:
    theta: ThetaTable
    h: DensityTable
    omega: OmegaTable
    flows: FlowTable

    @property
    def data(self):
        return self.theta.data


def build_hierarchy(data, pmax=None):
    t = build_theta(data, pmax)
    h = build_h(t)
    return Hierarchy(t, h, build_omega(t, h), build_flows(h))


def verify_hierarchy(H, pmax=None, h=None, omega=None):
    """Exact identity suite; ``h``/``omega`` override the tables (for negative controls)."""
    h = h or H.h
    om = omega or H.omega
    pmax = H.theta.pmax if pmax is None else pmax
    checks = [
        exact("theta_recursion", recursion_residual(H.theta)),
        exact("theta_normalization", normalization_residual(H.theta)),
        verify_normalization(H.flows),
        verify_tau_symmetry(H.flows, h, pmax),
        verify_commutativity(H.flows, pmax),
    ]
    checks += omega_checks(om, h)
    checks.append(omega_derivative_check(om, h, H.flows))
    checks += galilean_check(H.theta, h, om, H.flows, pmax)
    checks.append(hamiltonian_consistency(H.flows, h, min(pmax, 4)))
    return checks


def poly_to_json(p):
    return [[list(k), fmt_fraction(c)] for k, c in sorted(p.terms.items())]


def poly_from_json(n, rows):
    return CoeffPoly(n, {tuple(k): as_fraction(c) for k, c in rows})


def tables_to_dict(H, name=""):
    n, pmax = H.data.n, H.theta.pmax
    return {
        "name": name,
        "n": n,
        "pmax": pmax,
        "calibration": H.theta.calibration.to_dict(),
        "theta": [{"alpha": a + 1, "p": p, "poly": poly_to_json(H.theta(a, p))}
                  for a in range(n) for p in range(pmax + 3)],
        "h": [{"alpha": a + 1, "p": p, "poly": poly_to_json(H.h(a, p))}
              for a in range(n) for p in range(-1, pmax + 1)],
        "omega": [{"alpha": a + 1, "p": p, "beta": b + 1, "q": q, "poly": poly_to_json(H.omega(a, p, b, q))}
                  for a in range(n) for p in range(pmax + 1) for b in range(n) for q in range(pmax + 1)],
    }


def dump_tables(H, name=""):
    return json.dumps(tables_to_dict(H, name), indent=1, sort_keys=True) + "\n"
