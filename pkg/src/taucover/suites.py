"""Check suites that the CLI and the acceptance script run.

Each suite returns a list of :class:`~taucover.report.Check` records. The
``perturb_*`` helpers build the negative controls used by ``--fuzz``.
"""
from __future__ import annotations

import random
from fractions import Fraction

import numpy as np

from .brackets import Derivation, commutator_sign, is_bihamiltonian, is_exact_triple, schouten, symmetry_sign
from .deformation import (
    build_omega_deformed, check_deformed_galilean, check_semi_hamiltonian, deformed_omega_checks,
    generate_equivalent, normal_coordinates, pencil_velocities, shift_checks, unit_field, verify_deformation,
    DeformedData,
)
from .frobenius import pencil_from_frobenius, psi_at
from .hierarchy import bihamiltonian_conservation, poly_to_json, verify_hierarchy
from .jetspace import CoeffPoly, DiffPoly, Functional, NotExact, from_text
from .pencil import (
    canonical_coordinates_at, check_DZ_f, check_egoroff, check_gamma_system, christoffel_residual,
    poisson_operator, psi_residual,
)
from .report import Check, exact, within, worst

FD_TOL = 1e-6
NUMERIC_TOL = 1e-8


# --------------------------------------------------------------------------
# brackets

def random_functional(rng, n, super_degree, order=2, terms=3):
    out = DiffPoly.zero(n)
    for _ in range(terms):
        t = DiffPoly.const(n, rng.randint(-3, 3))
        for _ in range(rng.randint(0, 2)):
            t = t * DiffPoly.u(n, rng.randrange(n), rng.randint(0, order))
        for _ in range(super_degree):
            t = t * DiffPoly.theta(n, rng.randrange(n), rng.randint(0, order))
        out = out + t
    return Functional(out)


def _probe_elements(n):
    return [DiffPoly.u(n, 0, 1) * DiffPoly.theta(n, n - 1, 0) + DiffPoly.v(n, 0) * DiffPoly.u(n, 0, 2),
            DiffPoly.v(n, n - 1) * DiffPoly.v(n, 0),
            DiffPoly.theta(n, 0, 2)]


def bracket_suite(seed=0, pairs=20, max_degree=3):
    """Graded antisymmetry, graded Jacobi and the derivation identities on seeded random inputs."""
    rng = random.Random(seed)
    anti, jac, comm, var, comp = [], [], [], [], []
    for k in range(pairs):
        n = rng.choice([1, 2])
        p, q, r = (rng.randint(0, max_degree) for _ in range(3))
        P, Q, R = (random_functional(rng, n, d) for d in (p, q, r))
        ctx = {"pair": k, "n": n, "degrees": [p, q, r]}
        PQ = schouten(P, Q)
        anti.append(exact("graded_antisymmetry", PQ - schouten(Q, P).scale(symmetry_sign(p, q)), **ctx))
        J = (schouten(PQ, R).scale(symmetry_sign(p, r))
             + schouten(schouten(Q, R), P).scale(symmetry_sign(q, p))
             + schouten(schouten(R, P), Q).scale(symmetry_sign(r, q)))
        jac.append(exact("graded_jacobi", J, **ctx))
        DP, DQ = Derivation(P), Derivation(Q)
        probes = _probe_elements(n)
        comm.append(exact("derivation_commutes_with_d", max(
            (exact("", DP(a).d() - DP(a.d())).value for a in probes)), **ctx))
        sign = symmetry_sign(p, q)
        var.append(exact("variational_derivative_of_bracket", max(
            exact("", PQ.delta(a) - DP(Q.delta(a)) - DQ(P.delta(a)).scale(sign)).value for a in range(n)), **ctx))
        DPQ = Derivation(PQ)
        pre = -1 if (p - 1) & 1 else 1
        comp.append(exact("derivation_of_bracket", max(
            exact("", DPQ(a).scale(pre) - DP(DQ(a)) + DQ(DP(a)).scale(commutator_sign(p, q))).value
            for a in probes), **ctx))
    return [worst(c, c[0].name, seed=seed) for c in (anti, jac, comm, var, comp)]


# --------------------------------------------------------------------------
# pencil

def residual_at(a, point):
    """Largest jet-monomial coefficient of ``a`` evaluated at ``v = point``."""
    a = a.density if isinstance(a, Functional) else a
    groups = {}
    for (vexp, evens, odds), c in a.terms.items():
        val = float(c) * float(np.prod([float(point[i]) ** e for i, e in enumerate(vexp)]))
        groups[(evens, odds)] = groups.get((evens, odds), 0.0) + val
    return max((abs(x) for x in groups.values()), default=0.0)


def pencil_suite(data, points):
    g1, g2 = pencil_from_frobenius(data)
    P1, P2 = poisson_operator(g1), poisson_operator(g2)
    Z = unit_field(data.n, data.unit)
    out = [Check("bihamiltonian", "pass" if is_bihamiltonian(P1, P2) else "fail", 0.0, {}),
           Check("exact_triple", "pass" if is_exact_triple(P1, P2, Z) else "fail", 0.0, {})]
    residuals = [schouten(P1, P1), schouten(P2, P2), schouten(P1, P2), schouten(Z, P1), schouten(Z, P2) - P1]
    out.append(within("pencil_residual_at_points",
                      max((residual_at(r, x) for r in residuals for x in points), default=0.0),
                      NUMERIC_TOL, points=len(points)))
    if data.n == 1:
        return out
    rec = {k: [] for k in ("egoroff", "gamma_distinct", "gamma_unit", "gamma_euler", "DZ_f", "psi_system",
                           "christoffel_canonical", "offdiagonal_metric")}
    for x in points:
        ch = canonical_coordinates_at(g1, g2, x)
        ctx = {"point": [float(y) for y in x]}
        rec["egoroff"].append(within("egoroff", check_egoroff(ch), FD_TOL, **ctx))
        gs = check_gamma_system(ch)
        for key in ("distinct", "unit", "euler"):
            rec["gamma_" + key].append(within("gamma_" + key, gs[key], FD_TOL, **ctx))
        rec["DZ_f"].append(within("DZ_f", check_DZ_f(ch), FD_TOL, **ctx))
        psi = max(psi_residual(ch, lambda c, a=a: psi_at(data, c)[:, a])["residual"] for a in range(data.n))
        rec["psi_system"].append(within("psi_system", psi, FD_TOL, **ctx))
        rec["christoffel_canonical"].append(within("christoffel_canonical", christoffel_residual(ch), FD_TOL, **ctx))
        rec["offdiagonal_metric"].append(within("offdiagonal_metric", ch.offdiag_residual, NUMERIC_TOL, **ctx))
    out += [worst(v, k) for k, v in rec.items()]
    return out


def semi_hamiltonian_suite(H, points, flows=None):
    flows = flows or range(1, H.theta.pmax + 1)
    out = []
    for a in range(H.data.n):
        for p in flows:
            A, direction, grad = pencil_velocities(H, a, p, with_grad=True)
            for c in check_semi_hamiltonian(A, points, direction, grad=grad):
                c.context["flow"] = [a + 1, p]
                out.append(c)
    names = sorted({c.name for c in out})
    return [worst([c for c in out if c.name == nm], nm) for nm in names]


# --------------------------------------------------------------------------
# hierarchy

def _random_coeff(rng, n, min_degree=1, max_degree=3):
    e = [0] * n
    for _ in range(rng.randint(min_degree, max_degree)):
        e[rng.randrange(n)] += 1
    c = Fraction(rng.choice([-3, -2, -1, 1, 2, 3]), rng.randint(1, 5))
    return CoeffPoly(n, {tuple(e): c})


def perturb_h(H, seed):
    rng = random.Random(seed)
    a, p = rng.randrange(H.data.n), rng.randint(-1, H.theta.pmax - 1)
    extra = _random_coeff(rng, H.data.n, 0)
    return H.h.perturbed(a, p, extra), {"entry": f"h[{a + 1},{p}]", "added": poly_to_json(extra)}


def perturb_omega(H, seed):
    rng = random.Random(seed)
    n, pm = H.data.n, H.omega.pmax
    key = (rng.randrange(n), rng.randint(0, pm), rng.randrange(n), rng.randint(0, pm))
    extra = _random_coeff(rng, n)
    return H.omega.perturbed(key, extra), {"entry": "Omega[%d,%d;%d,%d]" % (key[0] + 1, key[1], key[2] + 1, key[3]),
                                           "added": poly_to_json(extra)}


def hierarchy_suite(H, pmax=None, fuzz=None, seed=0):
    h = omega = None
    note = {}
    if fuzz == "h":
        h, note = perturb_h(H, seed)
    elif fuzz == "omega":
        omega, note = perturb_omega(H, seed)
    checks = verify_hierarchy(H, pmax, h=h, omega=omega)
    if H.data.euler is not None:
        checks.append(bihamiltonian_conservation(h or H.h, min(H.theta.pmax if pmax is None else pmax, 3)))
    for c in checks:
        if note:
            c.context["fuzz"] = note
    return checks


# --------------------------------------------------------------------------
# deformations

def perturb_deformation(d, seed):
    """Add a non-exact degree-two term to one deformed density."""
    rng = random.Random(seed)
    n = d.n
    a, p = rng.randrange(n), rng.randint(-1, d.top)
    b, c = rng.randrange(n), rng.randrange(n)
    term = DiffPoly.u(n, b, 1) * DiffPoly.u(n, c, 1)
    for _ in range(rng.randint(0, 2)):
        term = term * DiffPoly.v(n, rng.randrange(n))
    coeff = Fraction(rng.choice([-2, -1, 1, 2]), rng.randint(1, 4))
    return d.perturbed(a, p, term.scale(coeff)), {"entry": f"h[{a + 1},{p}]", "added": f"{coeff}*u{b + 1}_1*u{c + 1}_1*..."}


def deformation_suite(d, omega, max_index=None, fuzz=False, seed=0):
    """Identity suite for a loaded deformation ``d`` over principal Omega ``omega``."""
    note = {}
    if fuzz:
        d, note = perturb_deformation(d, seed)
    checks = verify_deformation(d, max_index)
    top = d.top if max_index is None else min(d.top, max_index)
    try:
        om = build_omega_deformed(d, omega, top - 1)
    except NotExact as exc:
        checks.append(Check("deformed_omega_primitive", "fail", 1.0, {"error": str(exc)[:200]}))
    else:
        checks.append(Check("deformed_omega_primitive", "pass", 0.0, {}))
        checks += deformed_omega_checks(d, om, omega)
        checks.append(check_deformed_galilean(d, om, normal_coordinates(d)))
    for c in checks:
        if note:
            c.context["fuzz"] = note
    return checks


def miura_suite(H, K_text, dmax, top=None):
    """Generate an equivalent deformation from ``K`` and check both shift identities."""
    n = H.data.n
    d0 = DeformedData.trivial(H, dmax, top)
    K = Functional(from_text(K_text, n))
    new, s = generate_equivalent(d0, K)
    om_old = build_omega_deformed(d0, H.omega, d0.top - 1)
    om_new = build_omega_deformed(new, H.omega)
    checks = verify_deformation(new)
    checks += deformed_omega_checks(new, om_new, H.omega)
    checks += shift_checks(d0, new, s, om_old, om_new)
    checks.append(check_deformed_galilean(new, om_new, normal_coordinates(new)))
    return new, d0, s, checks
