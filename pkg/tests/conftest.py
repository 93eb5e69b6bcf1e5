import json
from fractions import Fraction

import pytest
from hypothesis import settings, strategies as st

from taucover.cli import data_path
from taucover.frobenius import WDVVPotential, analyze
from taucover.hierarchy import build_hierarchy
from taucover.jetspace import DiffPoly

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def potential(name):
    return WDVVPotential.from_dict(json.loads(data_path(f"{name}.json").read_text()))


@pytest.fixture(scope="session")
def kdv():
    return analyze(potential("kdv"))


@pytest.fixture(scope="session")
def a2():
    return analyze(potential("a2"))


@pytest.fixture(scope="session")
def a3():
    return analyze(potential("a3"))


@pytest.fixture(scope="session")
def kdv_h(kdv):
    return build_hierarchy(kdv, 6)


@pytest.fixture(scope="session")
def a2_h(a2):
    return build_hierarchy(a2, 4)


@pytest.fixture(scope="session")
def a3_h(a3):
    return build_hierarchy(a3, 2)


@st.composite
def diffpolys(draw, n=1, max_terms=3, max_order=2, odd=(0, 2)):
    """Random differential polynomials; ``odd`` bounds the number of theta factors per term."""
    out = DiffPoly.zero(n)
    for _ in range(draw(st.integers(0, max_terms))):
        t = DiffPoly.const(n, Fraction(draw(st.integers(-4, 4)), draw(st.integers(1, 3))))
        for _ in range(draw(st.integers(0, 2))):
            i = draw(st.integers(0, n - 1))
            t = t * DiffPoly.u(n, i, draw(st.integers(0, max_order)))
        for _ in range(draw(st.integers(*odd))):
            i = draw(st.integers(0, n - 1))
            t = t * DiffPoly.theta(n, i, draw(st.integers(0, max_order)))
        out = out + t
    return out
