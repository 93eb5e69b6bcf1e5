"""Kernel selection: the compiled extension when importable, else numpy.

Set ``TAUCOVER_PURE_PYTHON=1`` to force the fallback.
"""
import os

import numpy as np

from . import _kernels_py
from .report import thread_count

BACKEND = "python"
_impl = None

if os.environ.get("TAUCOVER_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled.solve_grid
        BACKEND = "compiled"


def _arrays(*zs):
    return [np.ascontiguousarray(z, dtype=float).reshape(-1) for z in zs]


def solve_grid(xs, ts, poly, cc, ss, omega, acoef, tol=1e-14, maxit=60):
    """``(V, J, feet)`` for ``v = v0(x + A(v) t)`` on the grid ``ts x xs``.

    ``cc`` and ``ss`` are zero-padded to a common length.
    """
    xs, ts, poly, cc, ss, acoef = _arrays(xs, ts, poly, cc, ss, acoef)
    m = max(len(cc), len(ss))
    cc = np.concatenate([cc, np.zeros(m - len(cc))])
    ss = np.concatenate([ss, np.zeros(m - len(ss))])
    if len(poly) == 0:
        poly = np.zeros(1)
    if len(acoef) == 0:
        acoef = np.zeros(1)
    if _impl is not None:
        return _impl(xs, ts, poly, cc, ss, float(omega), acoef, tol, maxit, thread_count())
    return _kernels_py.solve_grid(xs, ts, poly, cc, ss, float(omega), acoef, tol, maxit)
