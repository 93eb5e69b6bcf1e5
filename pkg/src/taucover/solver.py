"""Scalar flows by characteristics and the tau cover on (x, t) grids.

The flow ``v_t = A(v) v_x`` of the one-component hierarchy is solved from
``v = v0(x + A(v) t)`` node by node (compiled kernel when available).
The tau cover is integrated with RK4 along two routes through the grid,
``x`` then ``t`` and ``t`` then ``x``; the field is solved pointwise at the
half-steps, so each step is exact in the unknowns and fourth order.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .report import Check, within


class BreakingDetected(RuntimeError):
    def __init__(self, message, t_last=None, partial=None):
        super().__init__(message)
        self.t_last = t_last
        self.partial = partial


# --------------------------------------------------------------------------
# initial data

@dataclass
class Profile:
    """``sum poly[k] x^k + sum_k (cos[k] cos((k+1) w x) + sin[k] sin((k+1) w x))``."""

    poly: list = field(default_factory=lambda: [0.0])
    cos: list = field(default_factory=list)
    sin: list = field(default_factory=list)
    omega: float = 1.0

    def __post_init__(self):
        self.poly = [float(c) for c in self.poly] or [0.0]
        m = max(len(self.cos), len(self.sin))
        self.cos = [float(c) for c in self.cos] + [0.0] * (m - len(self.cos))
        self.sin = [float(c) for c in self.sin] + [0.0] * (m - len(self.sin))
        self.omega = float(self.omega)

    def arrays(self):
        return (np.array(self.poly), np.array(self.cos), np.array(self.sin), self.omega)

    def __call__(self, x):
        from ._kernels_py import _profile
        return _profile(x, *self.arrays())[0]

    def derivative(self, x):
        from ._kernels_py import _profile
        return _profile(x, *self.arrays())[1]

    def shifted(self, s):
        poly = list(self.poly)
        poly[0] += s
        return Profile(poly, list(self.cos), list(self.sin), self.omega)

    @property
    def periodic(self):
        return all(c == 0 for c in self.poly[1:]) and any(self.cos + self.sin)

    @property
    def period(self):
        return 2 * math.pi / self.omega

    @classmethod
    def from_dict(cls, d):
        return cls(d.get("poly", [0.0]), d.get("cos", []), d.get("sin", []), d.get("omega", 1.0))


@dataclass
class ScalarICProblem:
    profile: Profile
    p: int = 1
    x0: float = 0.0
    x1: float = 1.0
    nx: int = 33
    t0: float = 0.0
    t1: float = 0.5
    nt: int = 17
    periodic: bool = None

    def __post_init__(self):
        if self.periodic is None:
            self.periodic = self.profile.periodic
        if self.nx < 1 or self.nt < 1:
            raise ValueError("grid needs at least one node per axis")
        if self.nx > 1 and self.x1 <= self.x0 or self.nt > 1 and self.t1 <= self.t0:
            raise ValueError("grid must be strictly increasing")

    @property
    def xs(self):
        if self.periodic:
            L = self.profile.period
            return self.x0 + L * np.arange(self.nx) / self.nx
        return np.linspace(self.x0, self.x1, self.nx) if self.nx > 1 else np.array([self.x0])

    @property
    def ts(self):
        return np.linspace(self.t0, self.t1, self.nt) if self.nt > 1 else np.array([self.t0])

    def refined(self, factor=2):
        """Same window with every step divided by ``factor``."""
        nx = self.nx * factor if self.periodic else (self.nx - 1) * factor + 1
        nt = (self.nt - 1) * factor + 1
        return ScalarICProblem(self.profile, self.p, self.x0, self.x1, nx, self.t0, self.t1, nt, self.periodic)

    def with_profile(self, profile):
        return ScalarICProblem(profile, self.p, self.x0, self.x1, self.nx, self.t0, self.t1, self.nt, self.periodic)

    def to_dict(self):
        d = asdict(self)
        d["profile"] = asdict(self.profile)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["profile"] = Profile.from_dict(d["profile"])
        return cls(**d)


# --------------------------------------------------------------------------
# scalar tables as numeric polynomials

class ScalarTables:
    """Float views of a one-component hierarchy: ``A_p``, ``h_{1,p}`` and ``Omega_{1,p;1,q}``."""

    def __init__(self, hierarchy):
        data = hierarchy.data
        if data.n != 1:
            raise ValueError("the scalar solver needs a one-component hierarchy")
        self.hierarchy = hierarchy
        self.eta = float(data.eta[0][0])
        self.pmax = hierarchy.omega.pmax

    @staticmethod
    def _coeffs(poly):
        deg = max(poly.total_degree(), 0)
        out = np.zeros(deg + 1)
        for (e,), c in poly.terms.items():
            out[e] = float(c)
        return out

    def velocity(self, p):
        """Ascending coefficients of ``A_p = d^2 h_{1,p} / dv^2``."""
        return self._coeffs(self.hierarchy.h(0, p).diff(0).diff(0))

    def density(self, p):
        return self._coeffs(self.hierarchy.h(0, p))

    def omega(self, p, q):
        return self._coeffs(self.hierarchy.omega(0, p, 0, q))


def kdv_tables(pmax=6):
    from .frobenius import WDVVPotential, analyze
    from .hierarchy import build_hierarchy
    pot = WDVVPotential.from_dict({"n": 1, "F": [[[3], "1/6"]], "euler": {"coeffs": ["1"], "weight": "3"}})
    return ScalarTables(build_hierarchy(analyze(pot), pmax))


def _horner(c, v):
    out = np.zeros_like(v, dtype=float)
    for a in c[::-1]:
        out = out * v + a
    return out


# --------------------------------------------------------------------------
# characteristics

@dataclass
class Field:
    problem: ScalarICProblem
    tables: ScalarTables
    xs: np.ndarray
    ts: np.ndarray
    v: np.ndarray
    jac: np.ndarray
    t_last: float = None
    broken: bool = False

    def solve_on(self, xs, ts):
        V, J, feet = kernels.solve_grid(np.asarray(xs, float), np.asarray(ts, float), *self.problem.profile.arrays(),
                                        self.tables.velocity(self.problem.p))
        return V


def solve_characteristics(prob, tables=None, allow_partial=False):
    """Solve ``v = v0(x + A(v) t)`` on the grid; raise at the first row past breaking."""
    tables = tables or kdv_tables(max(prob.p, 1))
    xs, ts = prob.xs, prob.ts
    A = tables.velocity(prob.p)
    V, J, feet = kernels.solve_grid(xs, ts, *prob.profile.arrays(), A)
    bad = np.where((np.min(J, axis=1) <= 0) | (feet <= 0) | ~np.all(np.isfinite(V), axis=1))[0]
    if len(bad):
        k = int(bad[0])
        partial = Field(prob, tables, xs, ts[:k], V[:k], J[:k], float(ts[k - 1]) if k else None, True)
        if allow_partial:
            return partial
        raise BreakingDetected(f"characteristics cross before t={ts[k]:.6g}",
                               partial.t_last, partial)
    return Field(prob, tables, xs, ts, V, J, float(ts[-1]))


def breaking_time(profile, A, xs):
    """``-1 / min(A'(v0) v0')`` over the feet ``xs`` (inf when there is no crossing)."""
    p0 = profile(xs)
    dp = profile.derivative(xs)
    dA = _horner(np.polynomial.polynomial.polyder(A) if len(A) > 1 else np.zeros(1), p0)
    m = np.min(dA * dp)
    return math.inf if m >= 0 else -1.0 / m


# --------------------------------------------------------------------------
# tau cover

@dataclass
class TauGrid:
    xs: np.ndarray
    ts: np.ndarray
    v: np.ndarray
    f: np.ndarray            # route x-then-t
    F: np.ndarray            # F[q] = f_{1,q}, route x-then-t
    f_alt: np.ndarray        # route t-then-x
    F_alt: np.ndarray
    diagnostics: dict

    @property
    def discrepancy(self):
        if self.f.size == 0:
            return 0.0
        return float(max(np.max(np.abs(self.f - self.f_alt)), np.max(np.abs(self.F - self.F_alt))))


def _rk4_line(y0, s, vs_full, vs_mid, route_index, rates):
    """RK4 along one axis for ``y = (f, F_0..F_Q)``.

    ``vs_full[k]`` and ``vs_mid[k]`` are the field at the nodes and at the
    half-steps (arrays over the transverse axis); ``rates[q](v)`` gives
    ``dF_q/ds`` and ``df/ds = F_{route_index}``.
    """
    m = len(s)
    Q = len(rates)
    out = np.empty((m,) + y0.shape)
    out[0] = y0
    y = y0.copy()

    def rhs(v, yy):
        r = np.empty_like(yy)
        r[0] = yy[1 + route_index]
        for q in range(Q):
            r[1 + q] = rates[q](v)
        return r

    for k in range(m - 1):
        H = s[k + 1] - s[k]
        k1 = rhs(vs_full[k], y)
        k2 = rhs(vs_mid[k], y + 0.5 * H * k1)
        k3 = rhs(vs_mid[k], y + 0.5 * H * k2)
        k4 = rhs(vs_full[k + 1], y + H * k3)
        y = y + H / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[k + 1] = y
    return out


def evaluate_tau(fld, order=None, origin_values=None):
    """Integrate ``(f, f_{1,0..Q})`` over the field's grid along two routes.

    Normalized by ``f = f_{1,q} = 0`` at the first grid node unless
    ``origin_values`` (length ``Q + 2``) is given.
    """
    tb = fld.tables
    p = fld.problem.p
    Q = max(p, 1) if order is None else order
    if Q > tb.pmax:
        raise ValueError(f"tables reach q={tb.pmax}")
    xs, ts = fld.xs, fld.ts
    nx, nt = len(xs), len(ts)
    y0 = np.zeros(Q + 2) if origin_values is None else np.asarray(origin_values, dtype=float)
    if nx == 0 or nt == 0:
        empty = np.zeros((0, 0))
        return TauGrid(xs, ts, fld.v, empty, np.zeros((Q + 1, 0, 0)), empty, np.zeros((Q + 1, 0, 0)), {})
    xm = 0.5 * (xs[1:] + xs[:-1])
    tm = 0.5 * (ts[1:] + ts[:-1])
    om_x = [tb.omega(0, q) for q in range(Q + 1)]   # dF_q/dx = Omega_{1,0;1,q}
    om_t = [tb.omega(p, q) for q in range(Q + 1)]   # dF_q/dt = Omega_{1,p;1,q}
    rx = [(lambda c: (lambda v: _horner(c, v)))(c) for c in om_x]
    rt = [(lambda c: (lambda v: _horner(c, v)))(c) for c in om_t]
    V = fld.v
    # field at half-steps
    V_xm = fld.solve_on(xm, ts) if nx > 1 else np.zeros((nt, 0))
    V_tm = fld.solve_on(xs, tm) if nt > 1 else np.zeros((0, nx))

    def route_xt():
        col = _rk4_line(y0[:, None], ts, V[:, :1], V_tm[:, :1], p, rt)[:, :, 0]   # along t at x0
        res = np.empty((nx, Q + 2, nt))
        res[0] = col.T
        if nx > 1:
            lines = _rk4_line(col.T, xs, V.T, V_xm.T, 0, rx)
            res = lines
        return res.transpose(1, 2, 0)   # (Q+2, nt, nx)

    def route_tx():
        row = _rk4_line(y0[:, None], xs, V[:1].T, V_xm[:1].T if nx > 1 else None, 0, rx)[:, :, 0]
        res = np.empty((nt, Q + 2, nx))
        res[0] = row.T
        if nt > 1:
            res = _rk4_line(row.T, ts, V, V_tm, p, rt)
        return res.transpose(1, 0, 2)

    A = route_xt()
    B = route_tx()
    diag = {}
    if nx > 2 and nt > 2:
        dx, dt = xs[1] - xs[0], ts[1] - ts[0]
        fxx = (A[0, :, 2:] - 2 * A[0, :, 1:-1] + A[0, :, :-2]) / dx ** 2
        diag["fxx_minus_omega"] = float(np.max(np.abs(fxx - _horner(tb.omega(0, 0), V[:, 1:-1]))))
        ft = (A[0, 2:, :] - A[0, :-2, :]) / (2 * dt)
        diag["ft_minus_fp"] = float(np.max(np.abs(ft - A[1 + p, 1:-1, :])))
        mixed_a = (A[1, 2:, :] - A[1, :-2, :]) / (2 * dt)                 # d f_{1,0} / dt
        mixed_b = (A[1 + p, :, 2:] - A[1 + p, :, :-2]) / (2 * dx)         # d f_{1,p} / dx
        diag["mixed_partials"] = float(np.max(np.abs(mixed_a[:, 1:-1] - mixed_b[1:-1, :])))
    tg = TauGrid(xs, ts, V, A[0], A[1:], B[0], B[1:], diag)
    diag["route_discrepancy"] = tg.discrepancy
    return tg


def tau_convergence(prob, tables=None, levels=3):
    """Route discrepancy under step halving and the observed order."""
    tables = tables or kdv_tables(max(prob.p, 1))
    discs = []
    pr = prob
    for _ in range(levels):
        discs.append(evaluate_tau(solve_characteristics(pr, tables)).discrepancy)
        pr = pr.refined()
    orders = [math.log2(a / b) for a, b in zip(discs, discs[1:]) if a > 0 and b > 0]
    return discs, orders


def constant_tau(c, x, t, p, tables):
    """Closed form of the tau cover for ``v = c`` normalized at the origin."""
    w = lambda a, b: float(_horner(tables.omega(a, b), np.array([c]))[0])
    return 0.5 * w(0, 0) * x ** 2 + w(p, 0) * x * t + 0.5 * w(p, p) * t ** 2


def conservation_drift(fld, q):
    """Spread over time of ``int h_{1,q} dx`` on a periodic window."""
    if not fld.problem.periodic:
        raise ValueError("conservation needs a periodic window")
    L = fld.problem.profile.period
    dens = _horner(fld.tables.density(q), fld.v)
    totals = dens.mean(axis=1) * L
    return float(np.max(totals) - np.min(totals))


# --------------------------------------------------------------------------
# Galilean symmetry

def _spectral_dx(v, L):
    k = 2 * np.pi * np.fft.fftfreq(v.shape[-1], d=L / v.shape[-1])
    return np.real(np.fft.ifft(1j * k * np.fft.fft(v, axis=-1), axis=-1))


def _s_rhs(state, X, T, p, tables, L):
    """Right-hand side of the s-flow restricted to the times ``x = t^{1,0}`` and ``t = t^{1,p}``."""
    v, f, F = state
    Q = F.shape[0] - 1
    eta = tables.eta
    vx = _spectral_dx(v, L)
    dv = 1.0 + T * _horner(tables.velocity(p - 1), v) * vx
    df = 0.5 * eta * X ** 2 + T * F[p - 1]
    dF = np.empty_like(F)
    for q in range(Q + 1):
        dF[q] = T * _horner(tables.omega(p - 1, q), v)
        if q == 0:
            dF[q] += eta * X
        else:
            dF[q] += F[q - 1]
    return dv, df, dF


def advance_s(state, X, T, p, tables, L, s, steps=1, method="rk4"):
    h = s / steps
    y = tuple(np.array(a, dtype=float) for a in state)
    add = lambda a, b, c: tuple(ai + c * bi for ai, bi in zip(a, b))
    for _ in range(steps):
        k1 = _s_rhs(y, X, T, p, tables, L)
        if method == "euler":
            y = add(y, k1, h)
            continue
        k2 = _s_rhs(add(y, k1, h / 2), X, T, p, tables, L)
        k3 = _s_rhs(add(y, k2, h / 2), X, T, p, tables, L)
        k4 = _s_rhs(add(y, k3, h), X, T, p, tables, L)
        y = tuple(a + h / 6 * (b1 + 2 * b2 + 2 * b3 + b4) for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4))
    return y


def galilean_shift_check(fld, s_step, method="euler", steps=1, order=None):
    """Advance ``(v, f, f_{1,q})`` along the s-flow and compare with the solution for ``v0 + s``.

    The tau functions are compared up to the affine ambiguity left by the
    integration constants. Returns a dict of discrepancies.
    """
    prob = fld.problem
    if not prob.periodic:
        raise ValueError("the Galilean check needs a periodic window")
    if prob.p < 1:
        raise ValueError("the Galilean check needs a flow with p >= 1")
    tb = fld.tables
    Q = max(prob.p, 1) if order is None else order
    tau = evaluate_tau(fld, Q)
    X, T = np.meshgrid(fld.xs, fld.ts)
    L = prob.profile.period
    v1, f1, F1 = advance_s((fld.v, tau.f, tau.F), X, T, prob.p, tb, L, s_step, steps, method)
    moved = solve_characteristics(prob.with_profile(prob.profile.shifted(s_step)), tb)
    tau2 = evaluate_tau(moved, Q)
    dF = F1 - tau2.F
    dF0 = dF[:, :1, :1]
    df = f1 - tau2.f
    X0, T0 = X - fld.xs[0], T - fld.ts[0]
    df = df - df[0, 0] - dF[0, 0, 0] * X0 - dF[prob.p, 0, 0] * T0
    return {
        "v": float(np.max(np.abs(v1 - moved.v))),
        "F": float(np.max(np.abs(dF - dF0))),
        "f": float(np.max(np.abs(df))),
        "s_step": s_step,
        "method": method,
        "steps": steps,
    }


def galilean_slopes(fld, s=0.2):
    """Observed orders: Euler one step (local error), RK4 over a fixed horizon (global error)."""
    e1 = galilean_shift_check(fld, s, "euler")["v"]
    e2 = galilean_shift_check(fld, s / 2, "euler")["v"]
    r1 = galilean_shift_check(fld, s, "rk4", steps=2)["v"]
    r2 = galilean_shift_check(fld, s, "rk4", steps=4)["v"]
    return {"euler": math.log2(e1 / e2), "rk4": math.log2(r1 / r2),
            "errors": {"euler": [e1, e2], "rk4": [r1, r2]}}


# --------------------------------------------------------------------------
# output

def grid_csv(fld, tau, exact=None):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = ["x", "t", "v", "f", "f_1_0", "f_1_1", "route_residual"]
    if exact is not None:
        cols.append("exact_residual")
    w.writerow(cols)
    for i, t in enumerate(fld.ts):
        for j, x in enumerate(fld.xs):
            row = [x, t, fld.v[i, j], tau.f[i, j], tau.F[0, i, j], tau.F[1, i, j],
                   abs(tau.f[i, j] - tau.f_alt[i, j])]
            if exact is not None:
                row.append(abs(fld.v[i, j] - exact[i, j]))
            w.writerow([f"{x:.17g}" for x in row])
    return buf.getvalue()


def manifest(prob, extra=None):
    d = {"problem": prob.to_dict(), "backend": kernels.BACKEND}
    if extra:
        d.update(extra)
    text = json.dumps(d, sort_keys=True)
    d["hash"] = hashlib.sha256(text.encode()).hexdigest()
    return d


def solver_checks(prob, tables=None, tol=1e-6):
    """Report records for one problem (breaking surfaces as a status, not an error)."""
    tables = tables or kdv_tables(max(prob.p, 1))
    fld = solve_characteristics(prob, tables, allow_partial=True)
    out = []
    if fld.broken:
        out.append(Check("breaking", "pass", fld.t_last if fld.t_last is not None else float("nan"),
                         {"last_valid_t": fld.t_last}))
    if len(fld.ts) == 0:
        return fld, None, out
    tau = evaluate_tau(fld)
    out.append(within("tau_route_discrepancy", tau.discrepancy, tol))
    return fld, tau, out
