# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Newton solve of the characteristic equation ``v = v0(x + A(v) t)``.

Nodes of one time row are independent given the previous row (the warm
start), so each row runs under ``prange``.
"""
import numpy as np
from cython.parallel cimport prange
from libc.math cimport cos, sin, fabs


cdef inline void _profile(double x, const double[::1] poly, const double[::1] cc, const double[::1] ss,
                          double omega, double* val, double* der) noexcept nogil:
    cdef Py_ssize_t k, m = cc.shape[0]
    cdef double v = 0.0, d = 0.0, c1, s1, c, s, tmp, w
    for k in range(poly.shape[0] - 1, -1, -1):
        d = d * x + v
        v = v * x + poly[k]
    if m:
        c1 = cos(omega * x)
        s1 = sin(omega * x)
        c = c1
        s = s1
        for k in range(m):
            w = (k + 1) * omega
            v += cc[k] * c + ss[k] * s
            d += w * (ss[k] * c - cc[k] * s)
            tmp = c * c1 - s * s1
            s = s * c1 + c * s1
            c = tmp
    val[0] = v
    der[0] = d


cdef inline void _poly(double x, const double[::1] a, double* val, double* der) noexcept nogil:
    cdef Py_ssize_t k
    cdef double v = 0.0, d = 0.0
    for k in range(a.shape[0] - 1, -1, -1):
        d = d * x + v
        v = v * x + a[k]
    val[0] = v
    der[0] = d


cdef inline double _newton(double x, double t, double v, const double[::1] poly, const double[::1] cc,
                           const double[::1] ss, double omega, const double[::1] acoef,
                           double tol, int maxit) noexcept nogil:
    cdef int it
    cdef double a, da, p0, dp0, dF, step
    for it in range(maxit):
        _poly(v, acoef, &a, &da)
        _profile(x + a * t, poly, cc, ss, omega, &p0, &dp0)
        dF = 1.0 - dp0 * da * t
        if dF == 0.0:
            break
        step = (v - p0) / dF
        v = v - step
        if fabs(step) <= tol * (1.0 + fabs(v)):
            break
    return v


def solve_grid(const double[::1] xs, const double[::1] ts, const double[::1] poly, const double[::1] cc,
               const double[::1] ss, double omega, const double[::1] acoef, double tol=1e-14, int maxit=60,
               int threads=1):
    """Return ``(V, J, feet)``: solution, Newton denominator per node, and the
    smallest denominator along characteristics with feet on ``xs`` per row."""
    cdef Py_ssize_t nt = ts.shape[0], nx = xs.shape[0], i, j
    V_np = np.empty((nt, nx))
    J_np = np.empty((nt, nx))
    feet_np = np.empty(nt)
    slope_np = np.empty(nx)
    cdef double[:, ::1] V = V_np
    cdef double[:, ::1] J = J_np
    cdef double[::1] feet = feet_np
    cdef double[::1] slope = slope_np
    cdef double t, v, a, da, p0, dp0, m
    if threads < 1:
        threads = 1
    with nogil:
        for j in range(nx):
            _profile(xs[j], poly, cc, ss, omega, &p0, &dp0)
            _poly(p0, acoef, &a, &da)
            slope[j] = dp0 * da
        for i in range(nt):
            t = ts[i]
            for j in prange(nx, num_threads=threads, schedule="static"):
                if i == 0:
                    _profile(xs[j], poly, cc, ss, omega, &p0, &dp0)
                    v = p0
                else:
                    v = V[i - 1, j]
                v = _newton(xs[j], t, v, poly, cc, ss, omega, acoef, tol, maxit)
                _poly(v, acoef, &a, &da)
                _profile(xs[j] + a * t, poly, cc, ss, omega, &p0, &dp0)
                V[i, j] = v
                J[i, j] = 1.0 - dp0 * da * t
            m = 1.0
            for j in range(nx):
                if 1.0 - slope[j] * t < m or j == 0:
                    m = 1.0 - slope[j] * t
            feet[i] = m
    return V_np, J_np, feet_np
