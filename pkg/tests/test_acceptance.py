"""One printed line per acceptance criterion; each test also asserts its criterion."""
import json
import time
from fractions import Fraction
from math import comb, factorial

import numpy as np
import pytest

from taucover.brackets import is_exact_triple
from taucover.cli import data_path
from taucover.deformation import build_omega_deformed, check_deformed_galilean, load_deformation, normal_coordinates
from taucover.frobenius import WDVVPotential, analyze
from taucover.hierarchy import build_hierarchy, galilean_check, verify_commutativity, verify_tau_symmetry
from taucover.jetspace import CoeffPoly, Functional, from_text
from taucover.solver import (
    Profile, ScalarICProblem, ScalarTables, evaluate_tau, galilean_slopes, solve_characteristics, tau_convergence,
)
from taucover import suites

DEFAULT = json.loads(data_path("default.json").read_text())
POINTS = {e["name"]: e for e in DEFAULT["potentials"]}


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {n:2d}] {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return emit


def _failed(checks):
    return sorted({c.name for c in checks if not c.ok})


def _potential(name):
    return analyze(WDVVPotential.from_dict(json.loads(data_path(f"{name}.json").read_text())))


def test_criterion_01_kdv_closed_forms(report):
    t0 = time.perf_counter()
    H = build_hierarchy(_potential("kdv"), 6)
    mono = lambda k, c=1: CoeffPoly(1, {(k,): Fraction(c, factorial(k))})
    bad = [f"theta{p}" for p in range(7) if H.theta(0, p) != mono(p + 1)]
    bad += [f"h{p}" for p in range(7) if H.h(0, p) != mono(p + 2)]
    bad += [f"omega{p},{q}" for p in range(7) for q in range(7)
            if H.omega(0, p, 0, q) != mono(p + q + 1, comb(p + q, p))]
    dt = time.perf_counter() - t0
    report(1, not bad and dt < 10, f"KdV theta/h/Omega closed forms p,q<=6 exact; mismatches={bad}; {dt:.2f}s (<10s)")


def test_criterion_02_tau_symmetry_commutativity(report):
    t0 = time.perf_counter()
    out = []
    for name, pmax in (("kdv", 6), ("a2", 4)):
        H = build_hierarchy(_potential(name), pmax)
        out += [verify_tau_symmetry(H.flows, H.h, pmax), verify_commutativity(H.flows, pmax)]
    dt = time.perf_counter() - t0
    report(2, not _failed(out) and dt < 60,
           f"tau symmetry and commutativity exact zero (KdV<=6, A2<=4); failed={_failed(out)}; {dt:.2f}s (<60s)")


def test_criterion_03_bracket_suite(report):
    t0 = time.perf_counter()
    out = suites.bracket_suite(seed=0, pairs=20, max_degree=3)
    dt = time.perf_counter() - t0
    report(3, not _failed(out) and dt < 30,
           f"{len(out)} bracket identities exact on 20 seeded pairs, degrees<=3; failed={_failed(out)}; {dt:.2f}s (<30s)")


def test_criterion_04_exact_triple(report, a2):
    P1 = Functional(from_text("1/2*th1_0*th1_1", 1))
    P2 = Functional(from_text("1/2*v1*th1_0*th1_1", 1))
    Z = Functional(from_text("1*th1_0", 1))
    triple = is_exact_triple(P1, P2, Z)
    out = suites.pencil_suite(a2, POINTS["a2"]["pencil_points"])[:3]
    worst = max(c.value for c in out)
    report(4, triple and not _failed(out),
           f"scalar exact triple={triple}; A2 pencil at 10 points max residual {worst:.2e} (<1e-8)")


def test_criterion_05_canonical_residuals(report, a2):
    out = suites.pencil_suite(a2, POINTS["a2"]["pencil_points"])[3:]
    vals = ", ".join(f"{c.name}={c.value:.1e}" for c in out)
    report(5, not _failed(out), f"A2 canonical residuals at 10 points (FD<1e-6, exact<1e-8): {vals}")


def test_criterion_06_galilean(report, kdv_h, a2_h):
    out = galilean_check(kdv_h.theta, kdv_h.h, kdv_h.omega, kdv_h.flows, 6)
    out += galilean_check(a2_h.theta, a2_h.h, a2_h.omega, a2_h.flows, 4)
    new, _, _, _ = suites.miura_suite(kdv_h, "1/2*u1_1^2", 6)
    om = build_omega_deformed(new, kdv_h.omega)
    out.append(check_deformed_galilean(new, om, normal_coordinates(new)))
    report(6, not _failed(out), f"Galilean identities exact (KdV<=6, A2<=4, Miura KdV deg 6); failed={_failed(out)}")


def test_criterion_07_equivalence_round_trip(report, kdv_h):
    _, _, _, checks = suites.miura_suite(kdv_h, "1/2*u1_1^2", 6)
    shift = [c for c in checks if c.name.startswith("shift_")]
    report(7, len(shift) >= 2 and not _failed(checks),
           f"K=int u_x^2/2 round trip to degree 6: {len(shift)} shift identities; failed={_failed(checks)}")


def test_criterion_08_semi_hamiltonian(report, kdv_h, a2_h, a3_h):
    out = suites.semi_hamiltonian_suite(a2_h, POINTS["a2"]["semi_hamiltonian_points"])
    out += suites.semi_hamiltonian_suite(a3_h, POINTS["a3"]["semi_hamiltonian_points"])
    sh = max(c.value for c in out if c.name == "semi_hamiltonian")
    nd = suites.semi_hamiltonian_suite(kdv_h, POINTS["kdv"]["semi_hamiltonian_points"])
    report(8, not _failed(out + nd),
           f"Tsarev residual A2/A3 max {sh:.2e} (<1e-8); KdV flows p=1..6 nondegenerate; failed={_failed(out + nd)}")


def test_criterion_09_numerics(report, kdv_h):
    tb = ScalarTables(kdv_h)
    eps = 0.3
    lin = solve_characteristics(ScalarICProblem(Profile([0.0, eps]), 1, -1, 1, 41, 0, 2, 21), tb)
    X, T = np.meshgrid(lin.xs, lin.ts)
    lin_err = float(np.max(np.abs(lin.v - eps * X / (1 - eps * T))))
    prob = ScalarICProblem(Profile([0.5], [0.2], [0.1]), p=1, nx=32, t0=0.0, t1=0.5, nt=9)
    fld = solve_characteristics(prob, tb)
    disc = evaluate_tau(fld).discrepancy
    _, orders = tau_convergence(prob, tb, 3)
    sl = galilean_slopes(fld, 0.2)
    ok = (lin_err < 1e-10 and disc < 1e-6 and min(orders) >= 3.5
          and abs(sl["euler"] - 2) <= 0.3 and abs(sl["rk4"] - 4) <= 0.3)
    report(9, ok, f"linear err {lin_err:.1e} (<1e-10); route disc {disc:.1e} (<1e-6); order {min(orders):.2f} (>=3.5); "
                  f"Galilean slopes euler {sl['euler']:.2f} rk4 {sl['rk4']:.2f} (2, 4 +-0.3)")


def test_criterion_10_negative_controls(report, kdv_h, a2_h):
    missed = []
    runs = 0
    for name, H, pmax in (("kdv", kdv_h, 4), ("a2", a2_h, 3)):
        for target in ("h", "omega"):
            for seed in range(10):
                runs += 1
                if not _failed(suites.hierarchy_suite(H, pmax, target, seed)):
                    missed.append(f"{name}/{target}/{seed}")
    fx = json.loads(data_path("kdv_miura.json").read_text())
    d, _ = load_deformation(fx, kdv_h)
    for seed in range(8):
        runs += 1
        if not _failed(suites.deformation_suite(d, kdv_h.omega, fuzz=True, seed=seed)):
            missed.append(f"deformation/{seed}")
    report(10, not missed, f"{runs} fuzzed perturbations, each with a named failure; undetected={missed}")
