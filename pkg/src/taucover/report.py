"""Check records shared by the verification suites and the CLI."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction


@dataclass
class Check:
    name: str
    status: str  # "pass" | "fail"
    value: float = 0.0
    context: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.status == "pass"

    def to_dict(self):
        d = asdict(self)
        d["value"] = float(self.value)
        return d


def exact(name, residual, **context):
    """Record for an identity that must hold exactly; ``residual`` is a DiffPoly/CoeffPoly or number."""
    size = magnitude(residual)
    return Check(name, "pass" if size == 0 else "fail", float(size), context)


def within(name, value, tol, **context):
    value = float(value)
    return Check(name, "pass" if value < tol else "fail", value, dict(context, tol=tol))


def magnitude(x):
    """Largest absolute coefficient of a polynomial-like object (0 for zero)."""
    if hasattr(x, "terms"):
        return max((abs(c) for c in x.terms.values()), default=Fraction(0))
    if hasattr(x, "density"):
        return magnitude(x.density)
    return abs(x)


def worst(checks, name, **context):
    """Collapse a list of checks into one record keeping the worst value."""
    checks = list(checks)
    bad = [c for c in checks if not c.ok]
    top = max(checks, key=lambda c: c.value, default=None)
    ctx = dict(context, cells=len(checks))
    if bad:
        ctx["first_failure"] = bad[0].context
        ctx["failures"] = len(bad)
    return Check(name, "fail" if bad else "pass", top.value if top else 0.0, ctx)


def thread_count():
    try:
        return max(1, int(os.environ.get("TAUCOVER_THREADS", "1")))
    except ValueError:
        return 1


def pmap(fn, items):
    """Order-preserving map, threaded when TAUCOVER_THREADS > 1."""
    items = list(items)
    k = thread_count()
    if k == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=k) as ex:
        return list(ex.map(fn, items))
