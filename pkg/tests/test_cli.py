import json

import pytest

import taucover.cli as cli
from taucover.cli import data_path, main
from taucover.hierarchy import RecursionInconsistent

GOLDEN = __import__("pathlib").Path(__file__).parent / "data"


def _kdv_spec(tmp_path, **extra):
    spec = {"name": "small", "potentials": [{"file": str(data_path("kdv.json")), "pmax": 3, "points": [[0.5], [1.3]]}]}
    spec.update(extra)
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec))
    return str(path)


def _run(args, tmp_path, capsys=None):
    out = tmp_path / "out"
    code = main(list(args) + ["--out", str(out)])
    return code, out


def test_build_matches_golden_tables(tmp_path):
    code, out = _run(["build"], tmp_path)
    assert code == 0
    for name in ("kdv", "a2"):
        assert (out / f"{name}_tables.json").read_text() == (GOLDEN / f"{name}_tables.json").read_text()


def test_verify_small_spec_passes(tmp_path):
    code, out = _run(["verify", "--spec", _kdv_spec(tmp_path)], tmp_path)
    assert code == 0
    rep = json.loads((out / "verify_report.json").read_text())
    assert rep["summary"]["failed"] == 0 and rep["summary"]["total"] > 10


def test_report_is_deterministic(tmp_path):
    spec = _kdv_spec(tmp_path)
    _, out = _run(["verify", "--spec", spec], tmp_path)
    first = json.loads((out / "verify_report.json").read_text())["report_hash"]
    _, out = _run(["verify", "--spec", spec], tmp_path)
    assert json.loads((out / "verify_report.json").read_text())["report_hash"] == first


@pytest.mark.parametrize("target", ["h", "omega"])
def test_fuzz_fails_verify(tmp_path, target):
    code, out = _run(["verify", "--spec", _kdv_spec(tmp_path), "--fuzz", target, "--seed", "3"], tmp_path)
    assert code == 1
    rep = json.loads((out / "verify_report.json").read_text())
    assert rep["summary"]["failed_names"]


def test_fuzz_fails_deform_verify(tmp_path):
    spec = _kdv_spec(tmp_path)
    raw = json.loads(open(spec).read())
    raw["potentials"][0]["pmax"] = 6
    raw["potentials"][0]["deformations"] = [{"name": "miura", "file": str(data_path("kdv_miura.json"))}]
    open(spec, "w").write(json.dumps(raw))
    assert _run(["deform-verify", "--spec", spec], tmp_path)[0] == 0
    assert _run(["deform-verify", "--spec", spec, "--fuzz", "deformation"], tmp_path)[0] == 1


def test_empty_spec_is_usage_error(tmp_path):
    path = tmp_path / "empty.json"
    path.write_text("{}")
    assert _run(["verify", "--spec", str(path)], tmp_path)[0] == 64


def test_unknown_flag_is_usage_error(tmp_path):
    assert _run(["verify", "--bogus"], tmp_path)[0] == 64


def test_missing_spec_and_fixture(tmp_path):
    assert _run(["verify", "--spec", str(tmp_path / "nope.json")], tmp_path)[0] == 66
    path = tmp_path / "spec.json"
    path.write_text(json.dumps({"potentials": [{"file": "missing.json"}]}))
    assert _run(["verify", "--spec", str(path)], tmp_path)[0] == 66


def test_non_wdvv_potential(tmp_path):
    pot = json.loads(data_path("a3.json").read_text())
    pot["F"] = [[e, "1" if c == "1/4" else c] for e, c in pot["F"]]
    path = tmp_path / "spec.json"
    path.write_text(json.dumps({"potentials": [{"potential": pot, "pmax": 2}]}))
    assert _run(["verify", "--spec", str(path)], tmp_path)[0] == 2


def test_recursion_failure_exit_code(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise RecursionInconsistent("forced")
    monkeypatch.setattr(cli, "build_hierarchy", boom)
    assert _run(["verify", "--spec", _kdv_spec(tmp_path)], tmp_path)[0] == 3


def test_solve_writes_outputs(tmp_path):
    code, out = _run(["solve"], tmp_path)
    assert code == 0
    rep = json.loads((out / "solve_report.json").read_text())
    names = {c["name"] for c in rep["checks"]}
    assert {"tau_convergence_order", "galilean_slope_rk4", "breaking"} <= names
    assert rep["environment"]["backend"] in ("compiled", "python")
    assert list(out.glob("*.csv")) and list(out.glob("*manifest*.json"))
