import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import diffpolys
from taucover.brackets import miura_exp, schouten
from taucover.cli import data_path
from taucover.deformation import (
    CoincidingVelocities, DeformedData, build_omega_deformed, check_deformed_galilean, check_semi_hamiltonian,
    deformed_omega_checks, delta_Z, generate_equivalent, load_deformation, normal_coordinates, pencil_velocities,
    shift_checks, unit_field, verify_deformation,
)
from taucover.jetspace import DiffPoly, Functional, from_text, integrate, is_exact, to_text, total_derivative
from taucover.suites import deformation_suite, perturb_deformation

K_TEXT = "1/2*u1_1^2"


@pytest.fixture(scope="module")
def miura(kdv_h):
    d0 = DeformedData.trivial(kdv_h, 6)
    new, s = generate_equivalent(d0, Functional(from_text(K_TEXT, 1)))
    om_old = build_omega_deformed(d0, kdv_h.omega, d0.top - 1)
    om_new = build_omega_deformed(new, kdv_h.omega)
    return d0, new, s, om_old, om_new


def test_delta_z_examples():
    assert delta_Z(Functional(from_text("1/2*v1^2", 1))) == DiffPoly.v(1, 0)
    assert delta_Z(Functional(from_text(K_TEXT, 1))) == from_text("-1*u1_2", 1)


@given(diffpolys(n=2, odd=(0, 0)))
def test_delta_z_matches_bracket(a):
    Q = Functional(a)
    assert Functional(delta_Z(Q)) == schouten(unit_field(2), Q)


@pytest.mark.parametrize("name,dmax,top", [("kdv", 4, 4), ("a2", 4, 3)])
def test_trivial_deformation_passes(name, dmax, top, request):
    H = request.getfixturevalue(name + "_h")
    d = DeformedData.trivial(H, dmax)
    assert [c.name for c in verify_deformation(d, top) if not c.ok] == []


def test_trivial_deformed_omega_is_principal(a2_h):
    d = DeformedData.trivial(a2_h, 4)
    om = build_omega_deformed(d, a2_h.omega, 3)
    for (a, p, b, q), val in om.omega.items():
        assert val == DiffPoly.from_coeff(a2_h.omega(a, p, b, q))
    assert all(c.ok for c in deformed_omega_checks(d, om, a2_h.omega))
    assert check_deformed_galilean(d, om, normal_coordinates(d)).ok


def test_deformed_omega_is_deterministic(miura, kdv_h):
    _, new, _, _, om_new = miura
    again = build_omega_deformed(new, kdv_h.omega)
    assert again.omega == om_new.omega


def test_miura_shift_closed_forms(miura):
    _, new, s, _, _ = miura
    assert s.Y == Functional(from_text("-1*u1_2*th1_1", 1))
    assert s.g == from_text("-1*u1_1", 1)
    assert s.G == from_text("-1*u1_1 + -1/2*u1_4", 1)
    assert new.h[(0, -1)] == DiffPoly.v(1, 0)
    assert new.h[(0, 0)] == from_text("-3*u1_1*u1_2 + 9/2*u1_2*u1_4 + 9/2*u1_3^2 + 1/2*v1^2", 1)


def test_miura_pipeline_passes(miura, kdv_h):
    d0, new, s, om_old, om_new = miura
    checks = verify_deformation(new)
    checks += deformed_omega_checks(new, om_new, kdv_h.omega)
    checks += shift_checks(d0, new, s, om_old, om_new)
    checks.append(check_deformed_galilean(new, om_new, normal_coordinates(new)))
    assert [c.name for c in checks if not c.ok] == []
    names = {c.name for c in checks}
    assert {"shift_Y_Z_commute", "shift_K_Z_commute", "shift_density", "shift_omega", "deformed_galilean"} <= names


def test_density_shift_is_doubly_exact(miura):
    d0, new, s, _, _ = miura
    for (a, p), hh in new.h.items():
        diff = hh - miura_exp(s.Y, d0.h[(a, p)], new.dmax)
        assert is_exact(diff)
        assert is_exact(integrate(diff))


def test_x_flow_is_d_after_shift(miura):
    _, new, _, _, _ = miura
    a = from_text("1*v1*u1_2 + 1*u1_1^3", 1)
    assert new.apply(0, 0, a) == total_derivative(a).truncate(new.dmax + 1)


def test_zero_shift_is_identity(kdv_h):
    d0 = DeformedData.trivial(kdv_h, 4)
    new, s = generate_equivalent(d0, Functional(DiffPoly.zero(1)))
    assert s.G.is_zero()
    assert all(new.h[k] == d0.h[k] for k in new.h)


def test_fixture_round_trip(miura, kdv_h):
    _, new, _, _, _ = miura
    fx = json.loads(data_path("kdv_miura.json").read_text())
    loaded, base = load_deformation(fx, kdv_h)
    assert loaded.top == new.top
    assert all(loaded.h[k] == new.h[k] for k in new.h)
    assert new.to_dict(base)["h_corrections"] == fx["h_corrections"]


def test_fuzzed_fixture_fails(kdv_h):
    fx = json.loads(data_path("kdv_miura.json").read_text())
    d, _ = load_deformation(fx, kdv_h)
    bad = [c.name for c in deformation_suite(d, kdv_h.omega, fuzz=True, seed=1) if not c.ok]
    assert bad


def test_fuzzed_density_breaks_tau_symmetry(kdv_h):
    d = DeformedData.trivial(kdv_h, 6)
    bad = d.perturbed(0, 2, from_text("1/5*u1_1^2", 1))
    names = {c.name for c in verify_deformation(bad) if not c.ok}
    assert "deformed_tau_symmetry" in names


def test_normal_coordinates():
    from taucover.frobenius import WDVVPotential, analyze
    from taucover.hierarchy import build_hierarchy
    H = build_hierarchy(analyze(WDVVPotential.from_dict({"n": 1, "F": [[[3], "1/6"]],
                                                         "euler": {"coeffs": ["1"], "weight": "3"}})), 2)
    d = DeformedData.trivial(H, 4)
    w = normal_coordinates(d)
    assert w.w[0] == DiffPoly.v(1, 0) and w.inverse[0] == DiffPoly.v(1, 0)
    F2 = from_text("1*v1*u1_2", 1)
    w2 = normal_coordinates(d.perturbed(0, -1, F2))
    assert w2.inverse[0].truncate(3) == (DiffPoly.v(1, 0) - F2).truncate(3)
    assert all(r.is_zero() for r in w2.round_trip())


def test_scalar_velocity_is_semi_hamiltonian():
    checks = check_semi_hamiltonian(lambda u: np.array([u[0]]), [[0.3], [1.2]])
    assert all(c.ok for c in checks)


def test_coinciding_velocities():
    with pytest.raises(CoincidingVelocities):
        check_semi_hamiltonian(lambda u: np.array([2.0, 2.0]), [[0.1, 0.2]])


@pytest.mark.parametrize("p", [1, 2, 3])
def test_a2_velocities(a2_h, p):
    A, direction, grad = pencil_velocities(a2_h, 0, p, with_grad=True)
    checks = check_semi_hamiltonian(A, [[0.3, 1.0], [1.0, 2.0], [0.5, 0.7]], direction, grad=grad)
    assert all(c.ok for c in checks)


@pytest.mark.parametrize("p", [1, 2])
def test_a3_velocities(a3_h, p):
    A, direction, grad = pencil_velocities(a3_h, 0, p, with_grad=True)
    pts = [[0.1, 0.2, 1.0], [0.3, 0.1, 2.0], [0.0, -0.3, 1.5], [0.2, 0.4, 1.2]]
    sh, nd = check_semi_hamiltonian(A, pts, direction, grad=grad)
    assert sh.ok and sh.value < 1e-8
    assert nd.ok


def test_kdv_flows_are_nondegenerate(kdv_h):
    for p in range(1, 7):
        A, direction = pencil_velocities(kdv_h, 0, p)
        _, nd = check_semi_hamiltonian(A, [[0.5], [1.3], [-0.7]], direction)
        assert nd.ok and all(nd.context["flags"])
