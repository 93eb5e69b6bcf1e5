"""Differential polynomials on the super jet space.

Even jet variables are written ``u^{i,s}`` (order ``s``); order 0 is the
coordinate ``v^i`` and lives in the coefficient ring.  Odd variables are
``theta_i^s`` with ``s >= 0``.  Indices are 0-based in code and 1-based
in the text form (``v1``, ``u1_2``, ``th1_0``).

A term key is ``(vexp, evens, odds)``:

* ``vexp``  tuple of exponents of ``v^0..v^{n-1}``
* ``evens`` sorted tuple of ``((s, i), e)`` with ``s >= 1``
* ``odds``  strictly increasing tuple of ``(s, i)``

Variables are ranked by ``(order, index, parity)`` with odd above even,
which is also the order used when reducing modulo total derivatives.
"""
from __future__ import annotations

import re
from fractions import Fraction

ZERO = Fraction(0)
ONE = Fraction(1)

INHOMOGENEOUS = "inhomogeneous"
HOMOGENEOUS_ZERO = "homogeneous-zero"


class NotExact(ValueError):
    """Raised by :func:`integrate` on input outside the image of d/dx."""


class DimensionMismatch(ValueError):
    pass


def as_fraction(x):
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"cannot use {type(x).__name__} as an exact coefficient")


def fmt_fraction(c):
    c = as_fraction(c)
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


# --------------------------------------------------------------------------
# polynomials in v^1..v^n

class CoeffPoly:
    """Polynomial in ``v^0..v^{n-1}`` with exact rational coefficients."""

    __slots__ = ("n", "terms")

    def __init__(self, n, terms=None):
        self.n = n
        self.terms = {}
        if terms:
            for k, c in terms.items():
                if len(k) != n:
                    raise DimensionMismatch(f"exponent {k} in dimension {n}")
                c = as_fraction(c)
                if c:
                    self.terms[tuple(k)] = c

    @classmethod
    def const(cls, n, c):
        return cls(n, {(0,) * n: c})

    @classmethod
    def var(cls, n, i):
        e = [0] * n
        e[i] = 1
        return cls(n, {tuple(e): ONE})

    @classmethod
    def monomial(cls, exps, c=1):
        return cls(len(exps), {tuple(exps): c})

    def _wrap(self, other):
        if isinstance(other, CoeffPoly):
            if other.n != self.n:
                raise DimensionMismatch("dimension mismatch")
            return other
        return CoeffPoly.const(self.n, as_fraction(other))

    def __add__(self, other):
        other = self._wrap(other)
        out = dict(self.terms)
        for k, c in other.terms.items():
            s = out.get(k, ZERO) + c
            if s:
                out[k] = s
            else:
                out.pop(k, None)
        r = CoeffPoly(self.n)
        r.terms = out
        return r

    __radd__ = __add__

    def __neg__(self):
        r = CoeffPoly(self.n)
        r.terms = {k: -c for k, c in self.terms.items()}
        return r

    def __sub__(self, other):
        return self + (-self._wrap(other))

    def __rsub__(self, other):
        return self._wrap(other) - self

    def __mul__(self, other):
        if not isinstance(other, CoeffPoly):
            c = as_fraction(other)
            r = CoeffPoly(self.n)
            if c:
                r.terms = {k: v * c for k, v in self.terms.items()}
            return r
        if other.n != self.n:
            raise DimensionMismatch("dimension mismatch")
        out = {}
        for k1, c1 in self.terms.items():
            for k2, c2 in other.terms.items():
                k = tuple(a + b for a, b in zip(k1, k2))
                s = out.get(k, ZERO) + c1 * c2
                if s:
                    out[k] = s
                else:
                    out.pop(k, None)
        r = CoeffPoly(self.n)
        r.terms = out
        return r

    __rmul__ = __mul__

    def __pow__(self, k):
        r = CoeffPoly.const(self.n, 1)
        for _ in range(k):
            r = r * self
        return r

    def __eq__(self, other):
        if isinstance(other, CoeffPoly):
            return self.n == other.n and self.terms == other.terms
        try:
            return self.terms == CoeffPoly.const(self.n, as_fraction(other)).terms
        except TypeError:
            return NotImplemented

    def __hash__(self):
        return hash((self.n, frozenset(self.terms.items())))

    def __repr__(self):
        return f"CoeffPoly({self.to_text()})"

    def is_zero(self):
        return not self.terms

    def constant_term(self):
        return self.terms.get((0,) * self.n, ZERO)

    def total_degree(self):
        return max((sum(k) for k in self.terms), default=-1)

    def diff(self, i):
        out = {}
        for k, c in self.terms.items():
            if k[i]:
                kk = list(k)
                kk[i] -= 1
                out[tuple(kk)] = c * k[i]
        r = CoeffPoly(self.n)
        r.terms = out
        return r

    def antiderivative(self, i):
        out = {}
        for k, c in self.terms.items():
            kk = list(k)
            kk[i] += 1
            out[tuple(kk)] = c / kk[i]
        r = CoeffPoly(self.n)
        r.terms = out
        return r

    def truncate(self, max_degree):
        r = CoeffPoly(self.n)
        r.terms = {k: c for k, c in self.terms.items() if sum(k) <= max_degree}
        return r

    def homogeneous_part(self, d):
        r = CoeffPoly(self.n)
        r.terms = {k: c for k, c in self.terms.items() if sum(k) == d}
        return r

    def __call__(self, point):
        """Evaluate at ``point``; works with floats, complex or Fractions."""
        total = 0
        for k, c in self.terms.items():
            t = c if isinstance(point[0], Fraction) else float(c)
            for x, e in zip(point, k):
                if e:
                    t = t * x ** e
            total = total + t
        return total

    def compose(self, images, max_degree=None):
        """Substitute ``v^i -> images[i]`` (CoeffPolys in a possibly new ring)."""
        m = images[0].n
        out = CoeffPoly(m)
        powers = [[CoeffPoly.const(m, 1)] for _ in range(self.n)]
        for k, c in self.terms.items():
            t = CoeffPoly.const(m, c)
            for i, e in enumerate(k):
                while len(powers[i]) <= e:
                    nxt = powers[i][-1] * images[i]
                    if max_degree is not None:
                        nxt = nxt.truncate(max_degree)
                    powers[i].append(nxt)
                if e:
                    t = t * powers[i][e]
                    if max_degree is not None:
                        t = t.truncate(max_degree)
            out = out + t
        return out

    def to_text(self):
        if not self.terms:
            return "0"
        parts = []
        for k in sorted(self.terms):
            f = [fmt_fraction(self.terms[k])]
            for i, e in enumerate(k):
                if e:
                    f.append(f"v{i + 1}" + (f"^{e}" if e > 1 else ""))
            parts.append("*".join(f))
        return " + ".join(parts)


def radial_potential(grad):
    """Polynomial ``phi`` with ``phi(0) = 0`` and ``d phi / dv^i = grad[i]``.

    Returns ``(phi, ok)`` where ``ok`` says whether the 1-form was closed.
    """
    n = len(grad)
    phi = CoeffPoly(n)
    for i, g in enumerate(grad):
        for k, c in g.terms.items():
            kk = list(k)
            kk[i] += 1
            key = tuple(kk)
            phi.terms[key] = phi.terms.get(key, ZERO) + c / sum(kk)
    phi.terms = {k: c for k, c in phi.terms.items() if c}
    ok = all(phi.diff(i) == grad[i] for i in range(n))
    return phi, ok


# --------------------------------------------------------------------------
# odd-list helpers

def _merge_odds(a, b):
    """Sign and sorted concatenation of two sorted odd lists, or (0, None)."""
    if not a:
        return 1, b
    if not b:
        return 1, a
    sa = set(a)
    for x in b:
        if x in sa:
            return 0, None
    inv = 0
    j = 0
    # count pairs (x in a, y in b) with x > y
    for y in b:
        while j < len(a) and a[j] < y:
            j += 1
        inv += len(a) - j
    return (-1 if inv & 1 else 1), tuple(sorted(a + b))


def _insert_front(odds, var):
    """Place ``var`` in front of ``odds`` and sort: returns (sign, new) or (0, None)."""
    pos = 0
    for x in odds:
        if x == var:
            return 0, None
        if x < var:
            pos += 1
        else:
            break
    return (-1 if pos & 1 else 1), odds[:pos] + (var,) + odds[pos:]


def _evens_add(evens, var, de):
    d = dict(evens)
    e = d.get(var, 0) + de
    if e:
        d[var] = e
    else:
        d.pop(var, None)
    return tuple(sorted(d.items()))


# --------------------------------------------------------------------------

class DiffPoly:
    """Element of the super jet algebra, dict of term keys to Fractions."""

    __slots__ = ("n", "terms")

    def __init__(self, n, terms=None):
        self.n = n
        self.terms = {}
        if terms:
            for k, c in terms.items():
                c = as_fraction(c)
                if c:
                    self.terms[k] = c

    # constructors ---------------------------------------------------------
    @classmethod
    def _raw(cls, n, terms):
        r = cls.__new__(cls)
        r.n = n
        r.terms = terms
        return r

    @classmethod
    def zero(cls, n):
        return cls._raw(n, {})

    @classmethod
    def const(cls, n, c):
        c = as_fraction(c)
        return cls._raw(n, {((0,) * n, (), ()): c} if c else {})

    @classmethod
    def v(cls, n, i):
        e = [0] * n
        e[i] = 1
        return cls._raw(n, {(tuple(e), (), ()): ONE})

    @classmethod
    def u(cls, n, i, s=0):
        if s == 0:
            return cls.v(n, i)
        return cls._raw(n, {((0,) * n, (((s, i), 1),), ()): ONE})

    @classmethod
    def theta(cls, n, i, s=0):
        return cls._raw(n, {((0,) * n, (), ((s, i),)): ONE})

    @classmethod
    def from_coeff(cls, p):
        return cls._raw(p.n, {(k, (), ()): c for k, c in p.terms.items()})

    def to_coeff(self):
        out = CoeffPoly(self.n)
        for (ve, ev, od), c in self.terms.items():
            if ev or od:
                raise ValueError("not a function of v alone")
            out.terms[ve] = c
        return out

    # arithmetic -----------------------------------------------------------
    def _wrap(self, other):
        if isinstance(other, DiffPoly):
            if other.n != self.n:
                raise DimensionMismatch("dimension mismatch")
            return other
        if isinstance(other, CoeffPoly):
            if other.n != self.n:
                raise DimensionMismatch("dimension mismatch")
            return DiffPoly.from_coeff(other)
        return DiffPoly.const(self.n, other)

    def __add__(self, other):
        other = self._wrap(other)
        out = dict(self.terms)
        for k, c in other.terms.items():
            s = out.get(k, ZERO) + c
            if s:
                out[k] = s
            else:
                out.pop(k, None)
        return DiffPoly._raw(self.n, out)

    __radd__ = __add__

    def __neg__(self):
        return DiffPoly._raw(self.n, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._wrap(other))

    def __rsub__(self, other):
        return self._wrap(other) - self

    def scale(self, c):
        c = as_fraction(c)
        if not c:
            return DiffPoly.zero(self.n)
        return DiffPoly._raw(self.n, {k: v * c for k, v in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        other = self._wrap(other)
        return mul(self, other)

    def __rmul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        return mul(self._wrap(other), self)

    def __eq__(self, other):
        if isinstance(other, DiffPoly):
            return self.n == other.n and self.terms == other.terms
        if isinstance(other, (int, Fraction)):
            return self.terms == DiffPoly.const(self.n, other).terms
        return NotImplemented

    def __hash__(self):
        return hash((self.n, frozenset(self.terms.items())))

    def __repr__(self):
        return f"DiffPoly({self.to_text()})"

    def __bool__(self):
        return bool(self.terms)

    def is_zero(self):
        return not self.terms

    # structure ------------------------------------------------------------
    def max_order(self):
        m = -1
        for ve, ev, od in self.terms:
            if any(ve):
                m = max(m, 0)
            for (s, _), _e in ev:
                m = max(m, s)
            for s, _ in od:
                m = max(m, s)
        return m

    def components(self, kind="standard"):
        out = {}
        for k, c in self.terms.items():
            d = _term_degree(k, kind)
            out.setdefault(d, {})[k] = c
        return {d: DiffPoly._raw(self.n, t) for d, t in out.items()}

    def truncate(self, dmax):
        return DiffPoly._raw(
            self.n, {k: c for k, c in self.terms.items() if _term_degree(k, "standard") <= dmax}
        )

    def part(self, d, kind="standard"):
        return DiffPoly._raw(self.n, {k: c for k, c in self.terms.items() if _term_degree(k, kind) == d})

    def d(self):
        return total_derivative(self)

    def to_text(self):
        return to_text(self)


def _term_degree(key, kind):
    ve, ev, od = key
    if kind == "standard":
        return sum(s * e for (s, _), e in ev) + sum(s for s, _ in od)
    if kind == "super":
        return len(od)
    raise ValueError(f"unknown degree kind {kind!r}")


def degree(a, kind="standard"):
    """Degree of ``a`` or a marker when it is zero or not homogeneous."""
    if a.is_zero():
        return HOMOGENEOUS_ZERO
    ds = {_term_degree(k, kind) for k in a.terms}
    if len(ds) > 1:
        return INHOMOGENEOUS
    return ds.pop()


def _mul_keys(k1, k2):
    ve1, ev1, od1 = k1
    ve2, ev2, od2 = k2
    sign, od = _merge_odds(od1, od2)
    if not sign:
        return 0, None
    ve = tuple(a + b for a, b in zip(ve1, ve2))
    if not ev1:
        ev = ev2
    elif not ev2:
        ev = ev1
    else:
        d = dict(ev1)
        for var, e in ev2:
            d[var] = d.get(var, 0) + e
        ev = tuple(sorted(d.items()))
    return sign, (ve, ev, od)


def mul(a, b):
    if a.n != b.n:
        raise DimensionMismatch("dimension mismatch")
    out = {}
    for k1, c1 in a.terms.items():
        for k2, c2 in b.terms.items():
            sign, k = _mul_keys(k1, k2)
            if not sign:
                continue
            s = out.get(k, ZERO) + (c1 * c2 if sign > 0 else -c1 * c2)
            if s:
                out[k] = s
            else:
                out.pop(k, None)
    return DiffPoly._raw(a.n, out)


def _acc(out, k, c):
    s = out.get(k, ZERO) + c
    if s:
        out[k] = s
    else:
        out.pop(k, None)


def _d_term(key, c, out):
    ve, ev, od = key
    n = len(ve)
    for i in range(n):
        if ve[i]:
            nve = ve[:i] + (ve[i] - 1,) + ve[i + 1:]
            _acc(out, (nve, _evens_add(ev, (1, i), 1), od), c * ve[i])
    for (s, i), e in ev:
        nev = _evens_add(_evens_add(ev, (s, i), -1), (s + 1, i), 1)
        _acc(out, (ve, nev, od), c * e)
    for j, (s, i) in enumerate(od):
        rest = od[:j] + od[j + 1:]
        sign, nod = _insert_front(rest, (s + 1, i))
        if sign:
            sign *= -1 if j & 1 else 1
            _acc(out, (ve, ev, nod), c if sign > 0 else -c)


def total_derivative(a):
    out = {}
    for k, c in a.terms.items():
        _d_term(k, c, out)
    return DiffPoly._raw(a.n, out)


def d_power(a, k):
    for _ in range(k):
        a = total_derivative(a)
    return a


def partial_even(a, i, s):
    """Derivative with respect to ``u^{i,s}`` (``s = 0`` means ``v^i``)."""
    out = {}
    for (ve, ev, od), c in a.terms.items():
        if s == 0:
            if ve[i]:
                nve = ve[:i] + (ve[i] - 1,) + ve[i + 1:]
                out[(nve, ev, od)] = c * ve[i]
        else:
            e = dict(ev).get((s, i), 0)
            if e:
                out[(ve, _evens_add(ev, (s, i), -1), od)] = c * e
    return DiffPoly._raw(a.n, out)


def partial_odd(a, i, s):
    """Left derivative with respect to ``theta_i^s``."""
    out = {}
    var = (s, i)
    for (ve, ev, od), c in a.terms.items():
        if var in od:
            j = od.index(var)
            out[(ve, ev, od[:j] + od[j + 1:])] = -c if j & 1 else c
    return DiffPoly._raw(a.n, out)


def variables_of(a):
    """Sets of even (order >= 0) and odd variables occurring in ``a``."""
    evens, odds = set(), set()
    for ve, ev, od in a.terms:
        for i, e in enumerate(ve):
            if e:
                evens.add((0, i))
        for var, _ in ev:
            evens.add(var)
        odds.update(od)
    return evens, odds


def variational_derivative(a, i, parity="even"):
    """``sum_s (-d)^s`` of the partial derivative in ``u^{i,s}`` or ``theta_i^s``."""
    ev, od = variables_of(a)
    pool = ev if parity == "even" else od
    orders = [s for s, j in pool if j == i]
    if not orders:
        return DiffPoly.zero(a.n)
    part = partial_even if parity == "even" else partial_odd
    r = DiffPoly.zero(a.n)
    for s in range(max(orders), -1, -1):
        r = part(a, i, s) - total_derivative(r)
    return r


def euler_operator(a):
    """All variational derivatives: (list over even, list over odd)."""
    return (
        [variational_derivative(a, i, "even") for i in range(a.n)],
        [variational_derivative(a, i, "odd") for i in range(a.n)],
    )


def is_exact(a):
    """True iff ``a`` lies in the image of the total derivative."""
    if a.terms.get(((0,) * a.n, (), ()), ZERO):
        return False
    e, o = euler_operator(a)
    return all(x.is_zero() for x in e) and all(x.is_zero() for x in o)


# --------------------------------------------------------------------------
# reduction modulo total derivatives

def _factors(key):
    """List of (rank, exponent) for every variable in the term."""
    ve, ev, od = key
    out = [((0, i, 0), e) for i, e in enumerate(ve) if e]
    out += [((s, i, 0), e) for (s, i), e in ev]
    out += [((s, i, 1), 1) for s, i in od]
    return out


def _reduction(key):
    """Top variable and predecessor exponent if the term is reducible, else None."""
    fs = _factors(key)
    if not fs:
        return None
    top, e = max(fs)
    s, i, par = top
    if s < 1 or e != 1:
        return None
    pred = (s - 1, i, par)
    a = 0
    for r, ex in fs:
        if r == top:
            continue
        if r == pred:
            if par:
                return None
            a = ex
            continue
        if (r[0] + 1, r[1], r[2]) >= top:
            return None
    return top, a


def _primitive(n, key, c, top, a):
    """``Q`` such that ``dQ`` equals the term plus lower-ranked terms."""
    ve, ev, od = key
    s, i, par = top
    if par == 0:
        nev = _evens_add(ev, (s, i), -1)
        if s - 1 == 0:
            nve = ve[:i] + (ve[i] + 1,) + ve[i + 1:]
            return DiffPoly._raw(n, {(nve, nev, od): c / (a + 1)})
        nev = _evens_add(nev, (s - 1, i), 1)
        return DiffPoly._raw(n, {(ve, nev, od): c / (a + 1)})
    j = od.index((s, i))
    k = len(od)
    sign = -1 if (k - 1 - j) & 1 else 1
    rest = DiffPoly._raw(n, {(ve, ev, od[:j] + od[j + 1:]): c * sign})
    return mul(rest, DiffPoly.theta(n, i, s - 1))


def _reduce(a):
    """Return ``(remainder, primitive)`` with ``a = remainder + d(primitive)``."""
    n = a.n
    cur = dict(a.terms)
    prim = {}
    while True:
        red = []
        for k in cur:
            r = _reduction(k)
            if r is not None:
                red.append((r[0], k, r[1]))
        if not red:
            break
        # reduce every term sharing the highest reducible top; new terms rank lower
        best = max(t for t, _, _ in red)
        for top, k, ex in red:
            if top != best or k not in cur:
                continue
            q = _primitive(n, k, cur[k], top, ex)
            for kk, cc in q.terms.items():
                _acc(prim, kk, cc)
            for kk, cc in total_derivative(q).terms.items():
                _acc(cur, kk, -cc)
    return DiffPoly._raw(n, cur), DiffPoly._raw(n, prim)


def normal_form(a):
    """Canonical representative of ``a`` modulo total derivatives."""
    return _reduce(a)[0]


def integrate(a):
    """Primitive of an exact element (zero constant term)."""
    rem, prim = _reduce(a)
    if not rem.is_zero():
        raise NotExact(f"not a total derivative; remainder {rem.to_text()}")
    return prim


# --------------------------------------------------------------------------
# derivations and substitution

def apply_derivation(a, even_image, odd_image=None):
    """Apply ``sum even_image(i,s) d/du^{i,s} + odd_image(i,s) d/dtheta_i^s``.

    The images are callables returning DiffPolys (or None for zero); the
    image multiplies the partial derivative from the left.
    """
    evs, ods = variables_of(a)
    out = DiffPoly.zero(a.n)
    for s, i in sorted(evs):
        img = even_image(i, s)
        if img is not None and not img.is_zero():
            out = out + mul(img, partial_even(a, i, s))
    if odd_image is not None:
        for s, i in sorted(ods):
            img = odd_image(i, s)
            if img is not None and not img.is_zero():
                out = out + mul(img, partial_odd(a, i, s))
    return out


def substitute(a, images, dmax=None):
    """Replace ``u^{i,s}`` by ``d^s images[i]`` in a theta-free polynomial."""
    n = a.n
    cache = {}

    def img(i, s):
        if (i, s) not in cache:
            cache[(i, s)] = images[i] if s == 0 else total_derivative(img(i, s - 1))
            if dmax is not None:
                cache[(i, s)] = cache[(i, s)].truncate(dmax)
        return cache[(i, s)]

    pw = {}

    def power(i, s, e):
        key = (i, s, e)
        if key not in pw:
            if e == 1:
                pw[key] = img(i, s)
            else:
                r = mul(power(i, s, e - 1), img(i, s))
                pw[key] = r.truncate(dmax) if dmax is not None else r
        return pw[key]

    out = DiffPoly.zero(n)
    for (ve, ev, od), c in a.terms.items():
        if od:
            raise ValueError("substitute expects an even polynomial")
        t = DiffPoly.const(n, c)
        for i, e in enumerate(ve):
            if e:
                t = mul(t, power(i, 0, e))
                if dmax is not None:
                    t = t.truncate(dmax)
        for (s, i), e in ev:
            t = mul(t, power(i, s, e))
            if dmax is not None:
                t = t.truncate(dmax)
        out = out + t
    return out


# --------------------------------------------------------------------------
# text form

def to_text(a):
    if a.is_zero():
        return "0"
    parts = []
    for k in sorted(a.terms):
        ve, ev, od = k
        f = [fmt_fraction(a.terms[k])]
        for i, e in enumerate(ve):
            if e:
                f.append(f"v{i + 1}" + (f"^{e}" if e > 1 else ""))
        for (s, i), e in ev:
            f.append(f"u{i + 1}_{s}" + (f"^{e}" if e > 1 else ""))
        for s, i in od:
            f.append(f"th{i + 1}_{s}")
        parts.append("*".join(f))
    return " + ".join(parts)


_RAT = re.compile(r"^-?\d+(/\d+)?$")
_V = re.compile(r"^v(\d+)(?:\^(\d+))?$")
_U = re.compile(r"^u(\d+)_(\d+)(?:\^(\d+))?$")
_TH = re.compile(r"^th(\d+)_(\d+)$")


def from_text(text, n):
    """Parse the canonical text form (factors may appear in any order)."""
    text = text.strip()
    out = DiffPoly.zero(n)
    if text == "0" or not text:
        return out
    for raw in text.split(" + "):
        toks = [t.strip() for t in raw.strip().split("*")]
        c = ONE
        t = DiffPoly.const(n, 1)
        for tok in toks:
            if _RAT.match(tok):
                c *= Fraction(tok)
                continue
            m = _V.match(tok)
            if m:
                i = int(m.group(1)) - 1
                e = int(m.group(2) or 1)
                f = DiffPoly.v(n, i)
            else:
                m = _U.match(tok)
                if m:
                    i, s = int(m.group(1)) - 1, int(m.group(2))
                    e = int(m.group(3) or 1)
                    f = DiffPoly.u(n, i, s)
                else:
                    m = _TH.match(tok)
                    if not m:
                        raise ValueError(f"bad factor {tok!r}")
                    i, s, e = int(m.group(1)) - 1, int(m.group(2)), 1
                    f = DiffPoly.theta(n, i, s)
            if not 0 <= i < n:
                raise DimensionMismatch(f"index out of range in {tok!r}")
            for _ in range(e):
                t = mul(t, f)
        out = out + t.scale(c)
    return out


# --------------------------------------------------------------------------
# local functionals

class Functional:
    """Class of a density modulo total derivatives, kept in normal form."""

    __slots__ = ("density",)

    def __init__(self, density):
        self.density = normal_form(density)

    @property
    def n(self):
        return self.density.n

    def __add__(self, other):
        return Functional(self.density + other.density)

    def __sub__(self, other):
        return Functional(self.density - other.density)

    def __neg__(self):
        return Functional(-self.density)

    def scale(self, c):
        f = Functional.__new__(Functional)
        f.density = self.density.scale(c)
        return f

    def __eq__(self, other):
        if not isinstance(other, Functional):
            return NotImplemented
        return self.density == other.density

    def __hash__(self):
        return hash(self.density)

    def is_zero(self):
        return self.density.is_zero()

    def super_degree(self):
        return degree(self.density, "super")

    def standard_degree(self):
        return degree(self.density, "standard")

    def truncate(self, dmax):
        f = Functional.__new__(Functional)
        f.density = self.density.truncate(dmax)
        return f

    def delta(self, i, parity="even"):
        return variational_derivative(self.density, i, parity)

    def __repr__(self):
        return f"Functional({self.density.to_text()})"


def functional(a):
    return Functional(a)
