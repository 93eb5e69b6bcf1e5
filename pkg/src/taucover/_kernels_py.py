"""numpy fallback for the characteristic Newton solve (same contract as the compiled kernel)."""
import numpy as np


def _profile(x, poly, cc, ss, omega):
    x = np.asarray(x, dtype=float)
    v = np.zeros_like(x)
    d = np.zeros_like(x)
    for c in poly[::-1]:
        d = d * x + v
        v = v * x + c
    for k, (a, b) in enumerate(zip(cc, ss), start=1):
        arg = k * omega * x
        c, s = np.cos(arg), np.sin(arg)
        v = v + a * c + b * s
        d = d + k * omega * (b * c - a * s)
    return v, d


def _poly(x, a):
    v = np.zeros_like(x)
    d = np.zeros_like(x)
    for c in a[::-1]:
        d = d * x + v
        v = v * x + c
    return v, d


def solve_grid(xs, ts, poly, cc, ss, omega, acoef, tol=1e-14, maxit=60):
    xs = np.asarray(xs, dtype=float)
    ts = np.asarray(ts, dtype=float)
    poly, cc, ss, acoef = (np.asarray(z, dtype=float) for z in (poly, cc, ss, acoef))
    nt, nx = len(ts), len(xs)
    V = np.empty((nt, nx))
    J = np.empty((nt, nx))
    feet = np.empty(nt)
    p_feet, dp_feet = _profile(xs, poly, cc, ss, omega)
    _, da_feet = _poly(p_feet, acoef)
    for i, t in enumerate(ts):
        v = _profile(xs, poly, cc, ss, omega)[0] if i == 0 else V[i - 1].copy()
        active = np.ones(nx, dtype=bool)
        for _ in range(maxit):
            if not active.any():
                break
            a, da = _poly(v, acoef)
            p0, dp0 = _profile(xs + a * t, poly, cc, ss, omega)
            dF = 1.0 - dp0 * da * t
            ok = active & (dF != 0.0)
            step = np.zeros(nx)
            step[ok] = (v[ok] - p0[ok]) / dF[ok]
            v = v - step
            active = ok & (np.abs(step) > tol * (1.0 + np.abs(v)))
        a, da = _poly(v, acoef)
        _, dp0 = _profile(xs + a * t, poly, cc, ss, omega)
        V[i] = v
        J[i] = 1.0 - dp0 * da * t
        feet[i] = np.min(1.0 - dp_feet * da_feet * t) if nx else 1.0
    return V, J, feet
