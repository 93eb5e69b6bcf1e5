"""Time the characteristic Newton solve: compiled kernel against the numpy fallback.

    python benchmarks/bench_kernels.py [--nx 2048] [--nt 512] [--repeat 5]
"""
import argparse
import json
import time

import numpy as np

from taucover import _kernels_py

try:
    from taucover import _kernels
except ImportError:
    _kernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nx", type=int, default=2048)
    ap.add_argument("--nt", type=int, default=512)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--threads", type=int, default=1, help="OpenMP threads for the compiled kernel")
    args = ap.parse_args()
    xs = np.linspace(0, 2 * np.pi, args.nx, endpoint=False)
    ts = np.linspace(0, 0.5, args.nt)
    prof = (np.array([0.5]), np.array([0.2, 0.05]), np.array([0.1, 0.0]), 1.0)
    A = np.array([0.0, 0.0, 0.5])   # second KdV flow, A = v^2/2
    rows = {"nodes": args.nx * args.nt, "threads": args.threads}
    t_py, (v_py, _, _) = best_of(lambda: _kernels_py.solve_grid(xs, ts, *prof, A), args.repeat)
    rows["python_s"] = t_py
    if _kernels is not None:
        t_c, (v_c, _, _) = best_of(lambda: _kernels.solve_grid(xs, ts, *prof, A, threads=args.threads),
                                     args.repeat)
        rows["compiled_s"] = t_c
        rows["speedup"] = t_py / t_c
        rows["max_abs_difference"] = float(np.max(np.abs(np.asarray(v_c) - v_py)))
    else:
        rows["compiled_s"] = None
    print(json.dumps(rows, indent=1))


if __name__ == "__main__":
    main()
