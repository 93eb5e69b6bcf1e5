import json
import time
from fractions import Fraction
from math import comb, factorial
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from conftest import potential
from taucover import _linalg as la
from taucover.frobenius import FrobeniusData, WDVVPotential, analyze
from taucover.hierarchy import (
    CalibrationChange, DivisionMismatch, OrthogonalityViolation, RecursionInconsistent, apply_calibration_change,
    bihamiltonian_conservation, build_h, build_hierarchy, build_omega, build_theta, default_pmax, dump_tables,
    galilean_check, hamiltonian_consistency, normalization_residual, poly_from_json, recursion_residual,
    tables_to_dict, verify_commutativity, verify_hierarchy, verify_tau_symmetry,
)
from taucover.jetspace import CoeffPoly
from taucover.suites import perturb_h

GOLDEN = Path(__file__).parent / "data"


def mono(n, exps, c):
    return CoeffPoly(n, {tuple(exps): Fraction(c)})


def test_default_orders():
    assert default_pmax(1) == 6 and default_pmax(2) == 4


def test_kdv_closed_forms(kdv_h):
    H = kdv_h
    for p in range(7):
        assert H.theta(0, p) == mono(1, [p + 1], Fraction(1, factorial(p + 1)))
        assert H.h(0, p) == mono(1, [p + 2], Fraction(1, factorial(p + 2)))
        for q in range(7):
            want = mono(1, [p + q + 1], Fraction(comb(p + q, p), factorial(p + q + 1)))
            assert H.omega(0, p, 0, q) == want
    assert H.omega(0, 1, 0, 1) == mono(1, [3], Fraction(1, 3))


def test_kdv_build_is_fast(kdv):
    t0 = time.perf_counter()
    build_hierarchy(kdv, 6)
    assert time.perf_counter() - t0 < 10


@pytest.mark.parametrize("name", ["kdv", "a2", "a3"])
def test_leading_entries(name, request):
    H = request.getfixturevalue(name + "_h")
    data = H.data
    for a in range(data.n):
        assert H.theta(a, 0) == data.lower(a)
        assert H.h(a, -1) == data.lower(a)
        for p in range(H.omega.pmax + 1):
            assert H.omega(a, p, data.unit, 0) == H.h(a, p - 1)


def test_a2_first_densities(a2_h):
    v1, v2 = CoeffPoly.var(2, 0), CoeffPoly.var(2, 1)
    assert a2_h.h(0, 0) == v1 * v2
    assert a2_h.h(1, 0) == v1 * v1 * Fraction(1, 2) + v2 * v2 * v2 * Fraction(1, 18)


def test_a2_theta_depth_and_normalization(a2):
    t = build_theta(a2, 4)
    assert t.depth >= 6
    assert recursion_residual(t) == 0
    assert normalization_residual(t) == 0


@pytest.mark.parametrize("name,pmax", [("kdv", 6), ("a2", 4)])
def test_tau_symmetry_commutativity_galilean(name, pmax, request):
    H = request.getfixturevalue(name + "_h")
    assert verify_tau_symmetry(H.flows, H.h, pmax).ok
    assert verify_commutativity(H.flows, pmax).ok
    assert all(c.ok for c in galilean_check(H.theta, H.h, H.omega, H.flows, pmax))


def test_full_suite_passes(kdv_h, a2_h, a3_h):
    for H in (kdv_h, a2_h, a3_h):
        failed = [c.name for c in verify_hierarchy(H) if not c.ok]
        assert failed == []


def test_hamiltonian_form_and_conservation(kdv_h):
    assert hamiltonian_consistency(kdv_h.flows, kdv_h.h, 4).ok
    assert bihamiltonian_conservation(kdv_h.h, 4).ok


def test_fuzzed_density_names_the_cell(a2_h):
    h, note = perturb_h(a2_h, seed=4)
    bad = [c for c in verify_hierarchy(a2_h, h=h) if not c.ok]
    assert bad
    assert all("first_failure" in c.context for c in bad if "cells" in c.context)


def test_fuzzed_tau_symmetry_reports_cell(kdv_h):
    h = kdv_h.h.perturbed(0, 2, mono(1, [3], 1))
    rep = verify_tau_symmetry(kdv_h.flows, h)
    assert not rep.ok
    assert rep.context["first_failure"]["cell"][1] == 3 or rep.context["first_failure"]["cell"][3] == 3


def test_fuzzed_flows_break_commutativity(a2_h):
    # scalar hydrodynamic flows always commute, so the control needs two components
    from taucover.hierarchy import FlowTable, flow_rhs
    rhs = dict(a2_h.flows.rhs)
    rhs[(0, 2)] = flow_rhs(a2_h.data, a2_h.h(0, 2) + mono(2, [3, 0], 1))
    ft = FlowTable(a2_h.data, rhs, a2_h.flows.pmax)
    assert not verify_commutativity(ft, 3).ok


def test_inconsistent_recursion(a3):
    bad = WDVVPotential.from_dict(
        {"n": 3, "F": [[[2, 0, 1], "1/2"], [[1, 2, 0], "1/2"], [[0, 2, 2], "1"], [[0, 0, 5], "1/60"]]})
    F = bad.F
    c = [[[F.diff(a).diff(b).diff(g) for g in range(3)] for b in range(3)] for a in range(3)]
    with pytest.raises(RecursionInconsistent):
        build_theta(FrobeniusData(bad, a3.eta, a3.eta_inv, c), 3)


def test_broken_density_is_not_divisible(a2):
    t = build_theta(a2, 2)
    h = build_h(t).perturbed(0, 3, mono(2, [0, 2], 1))
    with pytest.raises(DivisionMismatch):
        build_omega(t, h)


def test_identity_calibration(a2):
    t = build_theta(a2, 3)
    same = apply_calibration_change(t, CalibrationChange.identity(2))
    assert all(same(a, p) == t(a, p) for a in range(2) for p in range(t.depth + 1))


def test_orthogonal_calibration_keeps_normalization(a2):
    t = build_theta(a2, 3)
    C1 = [[Fraction(0), Fraction(3)], [Fraction(0), Fraction(0)]]
    new = apply_calibration_change(t, CalibrationChange([la.identity(2), C1]))
    assert new(1, 1) != t(1, 1)
    assert normalization_residual(new) == 0


def test_non_orthogonal_calibration_is_rejected(a2):
    t = build_theta(a2, 3)
    with pytest.raises(OrthogonalityViolation):
        apply_calibration_change(t, CalibrationChange([la.identity(2), la.identity(2)]))


def test_shift_only_change_keeps_tau_structure(a2):
    t = build_theta(a2, 2)
    new = apply_calibration_change(t, CalibrationChange([la.identity(2)], {(0, 3): Fraction(5), (1, 2): Fraction(-1)}))
    assert new(0, 3) != t(0, 3)
    om, om2 = build_omega(t), build_omega(new)
    assert om.omega == om2.omega


@given(st.integers(0, 1), st.integers(0, 4), st.integers(0, 1), st.integers(0, 4))
def test_omega_is_symmetric(a2_h, a, p, b, q):
    assert a2_h.omega(a, p, b, q) == a2_h.omega(b, q, a, p)


def test_json_round_trip(a2_h):
    d = json.loads(dump_tables(a2_h, "a2"))
    for rec in d["omega"]:
        assert poly_from_json(2, rec["poly"]) == a2_h.omega(rec["alpha"] - 1, rec["p"], rec["beta"] - 1, rec["q"])
    assert d == tables_to_dict(a2_h, "a2")


@pytest.mark.parametrize("name", ["kdv", "a2"])
def test_tables_match_golden(name, request):
    H = request.getfixturevalue(name + "_h")
    assert dump_tables(H, name) == (GOLDEN / f"{name}_tables.json").read_text()
