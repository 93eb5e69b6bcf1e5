"""``taucover`` command line: build tables, run identity suites, solve scalar flows.

Exit codes: 0 all checks pass, 1 a check failed, 2 potential is not WDVV,
3 recursion inconsistency, 64 usage error or empty spec, 66 missing file.
"""
from __future__ import annotations

import argparse
import copy
import hashlib
import json
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .deformation import DeformedData, load_deformation
from .frobenius import NotWDVV, WDVVPotential, analyze
from .hierarchy import DivisionMismatch, RecursionInconsistent, build_hierarchy, dump_tables
from .report import Check, pmap, within
from . import solver as sv
from . import suites

EXIT_FAILED = 1
EXIT_NOT_WDVV = 2
EXIT_RECURSION = 3
EXIT_USAGE = 64
EXIT_MISSING = 66

FUZZ_TARGETS = ("h", "omega", "deformation")


class UsageError(Exception):
    pass


class MissingFile(Exception):
    pass


# --------------------------------------------------------------------------
# problem specifications

def data_path(name):
    return resources.files("taucover") / "data" / name


def _resolve(name, base):
    for cand in (Path(base) / name, Path(name)):
        if cand.is_file():
            return cand
    packaged = data_path(name)
    if packaged.is_file():
        return packaged
    raise MissingFile(f"fixture not found: {name}")


def _read_json(path):
    try:
        text = Path(path).read_text() if isinstance(path, (str, Path)) else path.read_text()
    except FileNotFoundError:
        raise MissingFile(f"no such file: {path}")
    if not text.strip():
        raise UsageError(f"{path} is empty")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})")


class ProblemSpec:
    """Parsed spec with every referenced fixture read in, so hashing covers inputs."""

    def __init__(self, raw, base="."):
        if not isinstance(raw, dict) or not (raw.get("potentials") or raw.get("solver")):
            raise UsageError("spec names no potentials and no solver problems")
        self.raw = raw
        self.name = raw.get("name", "spec")
        self.seed = int(raw.get("seed", 0))
        self.brackets = raw.get("brackets")
        self.potentials = []
        for entry in raw.get("potentials", []):
            e = dict(entry)
            if "file" in e:
                e["potential"] = _read_json(_resolve(e["file"], base))
            elif "potential" not in e:
                raise UsageError(f"potential entry {e.get('name', '?')} has neither 'file' nor 'potential'")
            e.setdefault("name", e["potential"].get("name", f"potential{len(self.potentials) + 1}"))
            defs = []
            for d in e.get("deformations", []):
                d = dict(d)
                if "file" in d:
                    d["fixture"] = _read_json(_resolve(d["file"], base))
                defs.append(d)
            e["deformations"] = defs
            self.potentials.append(e)
        self.solver = list(raw.get("solver", []))

    @classmethod
    def load(cls, path):
        if path is None:
            return cls(json.loads(data_path("default.json").read_text()), ".")
        p = Path(path)
        if not p.is_file():
            raise MissingFile(f"no such spec: {path}")
        return cls(_read_json(p), p.parent)

    def resolved(self):
        return {"spec": self.raw, "potentials": self.potentials}

    def input_hash(self, **flags):
        blob = json.dumps({"inputs": self.resolved(), "flags": flags}, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()


# --------------------------------------------------------------------------
# pipeline pieces

class Workspace:
    """Caches built hierarchies by potential name."""

    def __init__(self, spec, pmax=None):
        self.spec = spec
        self.pmax = pmax
        self._built = {}

    def entry(self, name):
        for e in self.spec.potentials:
            if e["name"] == name:
                return e
        raise UsageError(f"unknown potential {name}")

    def hierarchy(self, entry):
        name = entry["name"]
        if name not in self._built:
            pot = WDVVPotential.from_dict(entry["potential"], name)
            data = analyze(pot)
            pmax = self.pmax if self.pmax is not None else entry.get("pmax")
            self._built[name] = build_hierarchy(data, pmax)
        return self._built[name]


def _tag(checks, **context):
    for c in checks:
        c.context = dict(context, **c.context)
    return checks


def _deformation_checks(ws, entry, d, dmax=None, fuzz=False, seed=0):
    H = ws.hierarchy(entry)
    label = d.get("file") or ("miura" if "miura" in d else "trivial")
    if "miura" in d:
        D = dmax if dmax is not None else int(d.get("dmax", 6))
        new, _, _, checks = suites.miura_suite(H, d["miura"], D)
        if fuzz:
            # negative control on the generated densities
            checks = suites.deformation_suite(new, H.omega, fuzz=True, seed=seed)
    elif "fixture" in d:
        fx = copy.deepcopy(d["fixture"])
        if dmax is not None:
            fx["dmax"] = dmax
        defo, _ = load_deformation(fx, H)
        checks = suites.deformation_suite(defo, H.omega, d.get("max_index"), fuzz, seed)
    elif d.get("trivial"):
        D = dmax if dmax is not None else int(d.get("dmax", 4))
        defo = DeformedData.trivial(H, D)
        checks = suites.deformation_suite(defo, H.omega, d.get("max_index"), fuzz, seed)
    else:
        raise UsageError(f"deformation entry for {entry['name']} needs 'file', 'miura' or 'trivial'")
    return _tag(checks, potential=entry["name"], deformation=label)


def _verify_potential(ws, entry, fuzz, seed, dmax):
    H = ws.hierarchy(entry)
    name = entry["name"]
    checks = []
    hf = fuzz if fuzz in ("h", "omega") else None
    checks += _tag(suites.hierarchy_suite(H, fuzz=hf, seed=seed), potential=name)
    if H.data.euler is not None and entry.get("pencil_points"):
        checks += _tag(suites.pencil_suite(H.data, entry["pencil_points"]), potential=name)
    if H.data.euler is not None and entry.get("semi_hamiltonian_points"):
        checks += _tag(suites.semi_hamiltonian_suite(H, entry["semi_hamiltonian_points"]), potential=name)
    for d in entry["deformations"]:
        checks += _deformation_checks(ws, entry, d, dmax, fuzz == "deformation", seed)
    return checks


def _scalar_tables(ws, job):
    name = job.get("potential")
    if name is None:
        cands = [e for e in ws.spec.potentials if e["potential"].get("n") == 1]
        if not cands:
            return sv.kdv_tables()
        entry = cands[0]
    else:
        entry = ws.entry(name)
    return sv.ScalarTables(ws.hierarchy(entry))


def solve_job(ws, job, out_dir):
    """One solver problem: CSV, manifest and checks."""
    name = job.get("name", "problem")
    prob = sv.ScalarICProblem.from_dict(job["problem"])
    tables = _scalar_tables(ws, job)
    fld = sv.solve_characteristics(prob, tables, allow_partial=True)
    checks = []
    extra = {"name": name}
    if fld.broken:
        t_star = sv.breaking_time(prob.profile, tables.velocity(prob.p), prob.xs)
        checks.append(Check("breaking", "pass", fld.t_last if fld.t_last is not None else float("nan"),
                            {"last_valid_t": fld.t_last, "predicted_breaking_t": t_star,
                             "rows_written": len(fld.ts)}))
        extra["truncated"] = True
        extra["last_valid_t"] = fld.t_last
    tau = sv.evaluate_tau(fld) if len(fld.ts) else None
    exact_v = None
    kind = job.get("exact")
    X, T = np.meshgrid(fld.xs, fld.ts)
    if kind == "linear":
        eps = prob.profile.poly[1]
        exact_v = eps * X / (1 - eps * T)
        checks.append(within("exact_linear_solution", np.max(np.abs(fld.v - exact_v)), 1e-10))
    elif kind == "constant":
        c = prob.profile.poly[0]
        exact_v = np.full_like(fld.v, c)
        checks.append(within("constant_field", np.max(np.abs(fld.v - c)), 1e-12))
        closed = sv.constant_tau(c, X - fld.xs[0], T - fld.ts[0], prob.p, tables)
        checks.append(within("constant_tau_closed_form", np.max(np.abs(tau.f - closed)), 1e-10))
    elif kind is not None:
        raise UsageError(f"unknown exact solution kind {kind}")
    if tau is not None and tau.f.size:
        if fld.broken:
            # steepening front: the window is not smooth, so the value is diagnostic only
            checks.append(Check("tau_route_discrepancy", "residual", tau.discrepancy, {"tol": None}))
        else:
            checks.append(within("tau_route_discrepancy", tau.discrepancy, 1e-6))
        for key in ("ft_minus_fp", "mixed_partials"):
            if key in tau.diagnostics:
                # second-order differences of the integrated grid: O(step^2)
                checks.append(Check("tau_" + key, "residual", tau.diagnostics[key], {}))
    if "convergence" in job:
        discs, orders = sv.tau_convergence(prob, tables, int(job["convergence"].get("levels", 3)))
        order = min(orders) if orders else float("nan")
        checks.append(Check("tau_convergence_order", "pass" if order >= 3.5 else "fail", order,
                            {"min_order": 3.5, "discrepancies": discs, "orders": orders}))
    if "galilean" in job and prob.periodic and not fld.broken:
        s = float(job["galilean"].get("s", 0.2))
        zero = sv.galilean_shift_check(fld, 0.0)
        checks.append(within("galilean_zero_step", max(zero["v"], zero["F"], zero["f"]), 1e-14))
        sl = sv.galilean_slopes(fld, s)
        checks.append(within("galilean_slope_euler", abs(sl["euler"] - 2.0), 0.3, slope=sl["euler"]))
        checks.append(within("galilean_slope_rk4", abs(sl["rk4"] - 4.0), 0.3, slope=sl["rk4"]))
        one = sv.galilean_shift_check(fld, s / 4, "rk4", steps=4)
        checks.append(Check("galilean_rk4_discrepancy", "residual", max(one["v"], one["F"], one["f"]), one))
    for q in job.get("conservation", []):
        if prob.periodic and not fld.broken:
            checks.append(within("conservation_drift", sv.conservation_drift(fld, int(q)), 1e-10, q=q))
    _tag(checks, problem=name)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if tau is not None:
        (out_dir / f"{name}.csv").write_text(sv.grid_csv(fld, tau, exact_v))
    man = sv.manifest(prob, extra)
    (out_dir / f"{name}.manifest.json").write_text(json.dumps(man, indent=1, sort_keys=True) + "\n")
    return checks


# --------------------------------------------------------------------------
# reports

def _clean(x):
    if isinstance(x, float):
        return x if math.isfinite(x) else str(x)
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.generic):
        return _clean(x.item())
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if hasattr(x, "numerator"):
        return float(x)
    return x


def make_report(command, spec, checks, flags):
    recs = [_clean(c.to_dict()) for c in checks]
    body = {
        "tool": "taucover",
        "version": __version__,
        "command": command,
        "spec": spec.name,
        "input_hash": spec.input_hash(command=command, **flags),
        "checks": recs,
        "summary": {
            "total": len(recs),
            "failed": sum(r["status"] == "fail" for r in recs),
            "failed_names": sorted({r["name"] for r in recs if r["status"] == "fail"}),
        },
    }
    body["report_hash"] = hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()
    return body


def _write_report(out, report, stem="report"):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{stem}.json"
    path.write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
    return path


def _summary(report, path, stream):
    s = report["summary"]
    for r in report["checks"]:
        if r["status"] == "fail":
            where = {k: r["context"][k] for k in ("potential", "deformation", "problem") if k in r["context"]}
            print(f"FAIL {r['name']} value={r['value']} {where}", file=stream)
    print(f"{report['command']}: {s['total'] - s['failed']}/{s['total']} checks pass; report at {path}",
          file=stream)


# --------------------------------------------------------------------------
# commands

def cmd_build(args, spec, stream):
    ws = Workspace(spec, args.pmax)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for entry in spec.potentials:
        H = ws.hierarchy(entry)
        path = out / f"{entry['name']}_tables.json"
        path.write_text(dump_tables(H, entry["name"]))
        print(f"wrote {path}", file=stream)
    return 0


def _flags(args):
    return {"pmax": args.pmax, "dmax": args.dmax, "seed": args.seed, "fuzz": args.fuzz}


def cmd_verify(args, spec, stream):
    ws = Workspace(spec, args.pmax)
    seed = spec.seed if args.seed is None else args.seed
    for e in spec.potentials:
        ws.hierarchy(e)   # surface construction errors before dispatch
    jobs = [("potential", e) for e in spec.potentials]
    if spec.brackets is not None:
        jobs.insert(0, ("brackets", spec.brackets))

    def run(job):
        kind, e = job
        if kind == "brackets":
            return _tag(suites.bracket_suite(seed, int(e.get("pairs", 20)), int(e.get("max_degree", 3))),
                        suite="brackets")
        return _verify_potential(ws, e, args.fuzz, seed, args.dmax)

    checks = [c for group in pmap(run, jobs) for c in group]
    return _finish("verify", spec, checks, args, stream)


def cmd_deform_verify(args, spec, stream):
    ws = Workspace(spec, args.pmax)
    seed = spec.seed if args.seed is None else args.seed
    if args.fuzz not in (None, "deformation"):
        raise UsageError("deform-verify only fuzzes deformation corrections")
    checks = []
    for e in spec.potentials:
        for d in e["deformations"]:
            checks += _deformation_checks(ws, e, d, args.dmax, args.fuzz == "deformation", seed)
    if not checks:
        raise UsageError("spec has no deformation fixtures")
    return _finish("deform-verify", spec, checks, args, stream)


def cmd_solve(args, spec, stream):
    ws = Workspace(spec, args.pmax)
    if not spec.solver:
        raise UsageError("spec has no solver problems")
    checks = []
    for job in spec.solver:
        checks += solve_job(ws, job, args.out)
    return _finish("solve", spec, checks, args, stream, extra={"backend": kernels.BACKEND})


def _finish(command, spec, checks, args, stream, extra=None):
    report = make_report(command, spec, checks, _flags(args))
    if extra:
        report["environment"] = extra
    path = _write_report(args.out, report, command.replace("-", "_") + "_report")
    _summary(report, path, stream)
    return EXIT_FAILED if report["summary"]["failed"] else 0


COMMANDS = {"build": cmd_build, "verify": cmd_verify, "solve": cmd_solve, "deform-verify": cmd_deform_verify}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parser():
    p = _Parser(prog="taucover", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"taucover {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.error = p.error
        s.add_argument("--spec", default=None, help="problem spec JSON (default: packaged KdV/A2/A3 spec)")
        s.add_argument("--pmax", type=int, default=None)
        s.add_argument("--dmax", type=int, default=None)
        s.add_argument("--seed", type=int, default=None)
        s.add_argument("--fuzz", choices=FUZZ_TARGETS, default=None, metavar="CHECK",
                       help="perturb h, omega or deformation corrections (negative control)")
        s.add_argument("--out", default="taucover_out")
    return p


def main(argv=None, stream=None):
    stream = stream or sys.stdout
    try:
        args = parser().parse_args(argv)
        spec = ProblemSpec.load(args.spec)
        return COMMANDS[args.command](args, spec, stream)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MissingFile as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_MISSING
    except NotWDVV as exc:
        print(f"not a WDVV solution: {exc}", file=sys.stderr)
        return EXIT_NOT_WDVV
    except (RecursionInconsistent, DivisionMismatch) as exc:
        print(f"recursion inconsistent: {exc}", file=sys.stderr)
        return EXIT_RECURSION


if __name__ == "__main__":
    sys.exit(main())
