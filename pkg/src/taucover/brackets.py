"""Schouten bracket of local multivectors and evolutionary derivations."""
from __future__ import annotations

from fractions import Fraction

from .jetspace import (
    DiffPoly,
    Functional,
    apply_derivation,
    d_power,
    mul,
    variational_derivative,
)


class NonPositiveDegreeShift(ValueError):
    """The exponential of an adjoint action would not terminate degree-wise."""


def _as_functional(P):
    return P if isinstance(P, Functional) else Functional(P)


def _super_parts(P):
    return P.density.components("super")


def _bracket_homogeneous(dP, p, dQ):
    n = dP.n
    out = DiffPoly.zero(n)
    sign = -1 if p & 1 else 1
    for i in range(n):
        a = variational_derivative(dP, i, "odd")
        b = variational_derivative(dQ, i, "even")
        if a and b:
            out = out + mul(a, b)
        a = variational_derivative(dP, i, "even")
        b = variational_derivative(dQ, i, "odd")
        if a and b:
            out = out + mul(a, b).scale(sign)
    return out


def schouten(P, Q):
    """``[P, Q]`` for local functionals (bilinear over super-degree parts)."""
    P, Q = _as_functional(P), _as_functional(Q)
    if P.n != Q.n:
        raise ValueError("dimension mismatch")
    out = DiffPoly.zero(P.n)
    qd = Q.density
    for p, dp in _super_parts(P).items():
        out = out + _bracket_homogeneous(dp, p, qd)
    return Functional(out)


def symmetry_sign(p, q):
    """``[P, Q] = symmetry_sign(p, q) [Q, P]`` for super degrees p, q."""
    return -1 if (p * q) & 1 else 1


def commutator_sign(p, q):
    """Sign in ``D_P D_Q - sign D_Q D_P``."""
    return -1 if ((p - 1) * (q - 1)) & 1 else 1


class Derivation:
    """Evolutionary derivation attached to a homogeneous local multivector."""

    def __init__(self, P, dmax=None):
        P = _as_functional(P)
        parts = _super_parts(P)
        if len(parts) > 1:
            raise ValueError("derivation needs a homogeneous super degree")
        self.n = P.n
        self.p = next(iter(parts)) if parts else 0
        self.dmax = dmax
        d = P.density
        self._even = [variational_derivative(d, a, "odd") for a in range(self.n)]
        sign = -1 if self.p & 1 else 1
        self._odd = [variational_derivative(d, a, "even").scale(sign) for a in range(self.n)]
        self._cache = {}

    @classmethod
    def from_components(cls, comps, dmax=None):
        """Vector field ``sum comps[a] theta_a`` given by its (even) components."""
        self = cls.__new__(cls)
        self.n = comps[0].n
        self.p = 1
        self.dmax = dmax
        self._even = list(comps)
        self._odd = [DiffPoly.zero(self.n) for _ in comps]
        self._cache = {}
        return self

    @property
    def components(self):
        return list(self._even)

    def _img(self, parity, i, s):
        key = (parity, i, s)
        if key not in self._cache:
            if s == 0:
                base = self._even[i] if parity == 0 else self._odd[i]
            else:
                base = d_power(self._img(parity, i, s - 1), 1)
            if self.dmax is not None:
                base = base.truncate(self.dmax)
            self._cache[key] = base
        return self._cache[key]

    def __call__(self, a):
        r = apply_derivation(
            a,
            lambda i, s: self._img(0, i, s),
            lambda i, s: self._img(1, i, s),
        )
        return r.truncate(self.dmax) if self.dmax is not None else r


def evolutionary_derivation(P, dmax=None):
    return Derivation(P, dmax)


def exp_derivation(D, a, dmax):
    """``sum_k D^k(a)/k!`` truncated at standard degree ``dmax``."""
    total = a.truncate(dmax)
    term = total
    k = 0
    while not term.is_zero():
        k += 1
        term = D(term).truncate(dmax).scale(Fraction(1, k))
        total = total + term
        if k > 4 * dmax + 8:
            raise NonPositiveDegreeShift("series does not terminate")
    return total


def _check_shift(Y):
    comps = Y.density.components("standard")
    low = [d for d in comps if d <= 1]
    if low:
        raise NonPositiveDegreeShift(f"vector field has a component of degree {min(low)}")


def exp_ad(Y, Q, dmax):
    """``e^{ad_Y} Q = sum_k [Y, [Y, ..., Q]]/k!`` truncated at ``dmax``."""
    Y, Q = _as_functional(Y), _as_functional(Q)
    _check_shift(Y)
    total = Q.truncate(dmax)
    term = total
    k = 0
    while not term.is_zero():
        k += 1
        term = schouten(Y, term).truncate(dmax).scale(Fraction(1, k))
        total = total + term
    return total


def miura_exp(Y, a, dmax):
    """``e^{D_Y} a`` for a vector field ``Y`` with components of degree >= 2."""
    Y = _as_functional(Y)
    _check_shift(Y)
    return exp_derivation(Derivation(Y, dmax), a, dmax)


def is_hamiltonian(P):
    return schouten(P, P).is_zero()


def is_bihamiltonian(P1, P2):
    return is_hamiltonian(P1) and is_hamiltonian(P2) and schouten(P1, P2).is_zero()


def is_exact_triple(P1, P2, Z):
    """Bihamiltonian pencil with ``[Z, P1] = 0`` and ``[Z, P2] = P1``."""
    if not is_bihamiltonian(P1, P2):
        return False
    return schouten(Z, P1).is_zero() and schouten(Z, P2) == _as_functional(P1)
