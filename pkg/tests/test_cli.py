import json
import shlex
import subprocess
import sys
from pathlib import Path

import pytest

from hubgraph.cli import EXIT_DIAGNOSTICS, EXIT_OK, EXIT_SOLVER, EXIT_USAGE, main

from golden_runner import GOLDEN, corpus

BUNDLED = Path(__file__).resolve().parents[1] / "src" / "hubgraph" / "models" / "reference.hub"
PY = shlex.quote(sys.executable)

TINY = """horizon { T = 3; }
wacc = 0.05;
series cf = constant(0.5);
node gen : conversion { outputs = [power]; availability = cf; capex = 100; lifetime = 20; vom = 0.01; }
node tank : storage { commodity = power; eta_plus = 0.9; eta_minus = 0.9; stock.capex = 10; stock.lifetime = 10; }
hyperedge bus : conservation { tail = [gen.power, tank.discharge]; head = [tank.charge]; withdrawal = 1; }
scenario dear { gen.capex *= 2; }
scenario broken { gen.kappa_max = 1; }
"""


@pytest.fixture
def tiny(tmp_path):
    p = tmp_path / "tiny.hub"
    p.write_text(TINY)
    return p


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_validate_bundled_model(capsys):
    code, out, _ = run(["validate", BUNDLED], capsys)
    assert code == EXIT_OK and out.rstrip().endswith("0 errors")


@pytest.mark.parametrize("name", corpus())
def test_validate_exit_codes_over_corpus(name, capsys):
    expected = (GOLDEN / (name[:-4] + ".expected")).read_text()
    base_ok = "resolve (base): ok" in expected
    code, out, err = run(["validate", GOLDEN / name], capsys)
    if base_ok:
        assert code == EXIT_OK
    else:
        assert code == EXIT_DIAGNOSTICS
        assert "error:" in err and "Traceback" not in err
        # positioned where the error has a position
        assert str(GOLDEN / name) in err


def test_compile_writes_mps_and_manifest(tiny, tmp_path, capsys):
    out = tmp_path / "out"
    code, stdout, _ = run(["compile", tiny, "-o", out], capsys)
    assert code == EXIT_OK
    assert (out / "tiny.mps").is_file() and (out / "tiny.names.tsv").is_file()
    fp = next(line.split()[1] for line in stdout.splitlines() if line.startswith("fingerprint"))
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["fingerprint"] == fp
    assert set(manifest["outputs"]) == {"tiny.mps", "tiny.names.tsv"}
    assert {"hubgraph", "python", "numpy", "scipy"} <= set(manifest["versions"])
    assert "wall_time_s" in manifest


def test_dry_run(tiny, capsys):
    code, out, _ = run(["solve", tiny, "--dry-run"], capsys)
    assert code == EXIT_OK and out.startswith("rows ")
    assert "equalities" in out


@pytest.mark.parametrize("solver", ["embedded", "external"])
def test_solve(tiny, tmp_path, capsys, solver):
    out = tmp_path / solver
    code, stdout, _ = run(["solve", tiny, "-o", out, "--solver", solver], capsys)
    assert code == EXIT_OK, stdout
    assert "feasible at 1e-06" in stdout
    rows = (out / "solution.csv").read_text().splitlines()
    assert rows[0] == "node,variable,t,value" and len(rows) > 5
    total = float((out / "objective.csv").read_text().splitlines()[-1].split(",")[1])
    assert total > 0


def test_solvers_agree(tiny, tmp_path, capsys):
    totals = []
    for solver in ("embedded", "external"):
        run(["solve", tiny, "-o", tmp_path / solver, "--solver", solver], capsys)
        totals.append(float((tmp_path / solver / "objective.csv").read_text().splitlines()[-1].split(",")[1]))
    assert totals[0] == pytest.approx(totals[1], rel=1e-7)


def test_solve_is_idempotent(tiny, tmp_path, capsys):
    for d in ("a", "b"):
        assert run(["solve", tiny, "-o", tmp_path / d, "--solver", "embedded"], capsys)[0] == EXIT_OK
    for name in ("solution.csv", "objective.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    ma = json.loads((tmp_path / "a" / "manifest.json").read_text())
    mb = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert ma["content_hash"] == mb["content_hash"]


def test_scenario_in_model_file(tiny, tmp_path, capsys):
    code, out, _ = run(["solve", tiny, "-o", tmp_path / "d", "--scenario", "dear", "--solver", "embedded"], capsys)
    assert code == EXIT_OK


def test_infeasible_model_is_a_solver_failure(tiny, tmp_path, capsys):
    code, _, err = run(["solve", tiny, "-o", tmp_path / "x", "--scenario", "broken", "--solver", "embedded"],
                       capsys)
    assert code == EXIT_SOLVER and "infeasible" in err


def test_external_solver_crash(tiny, tmp_path, capsys):
    script = tmp_path / "crash.py"
    script.write_text("import sys\nsys.stderr.write('segfault-ish')\nsys.exit(139)\n")
    cmd = f"{PY} {shlex.quote(str(script))} {{mps}} {{solution}}"
    code, _, err = run(["solve", tiny, "-o", tmp_path / "x", "--solver", "external", "--solver-cmd", cmd], capsys)
    assert code == EXIT_SOLVER and "segfault-ish" in err and "Traceback" not in err


def test_embedded_too_large_points_to_bridge(tmp_path, capsys):
    code, _, err = run(["scenario", "reference", "--horizon", "8760:240", "--solver", "embedded",
                        "-o", tmp_path], capsys)
    assert code == EXIT_SOLVER and "external" in err


@pytest.mark.parametrize("argv", [
    [], ["frobnicate"], ["validate"], ["solve", "m.hub", "--solver", "cplex"], ["solve", "m.hub", "--tol-feas", "x"],
    ["scenario", "no-such-scenario"], ["scenario", "reference", "--jobs", "0"], ["report", "/nonexistent/dir"],
])
def test_usage_errors(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == EXIT_USAGE and err and "Traceback" not in err


def test_missing_model_is_a_diagnostic(tmp_path, capsys):
    code, _, err = run(["validate", tmp_path / "absent.hub"], capsys)
    assert code == EXIT_DIAGNOSTICS and "model file not found" in err


def test_bad_solver_template(tiny, tmp_path, capsys):
    code, _, err = run(["solve", tiny, "-o", tmp_path, "--solver", "external", "--solver-cmd", "highs"], capsys)
    assert code == EXIT_DIAGNOSTICS and "placeholder" in err


def test_scenario_and_report(tmp_path, capsys):
    out = tmp_path / "runs"
    code, stdout, err = run(["scenario", "reference", "zero-financing", "--horizon", "8760:240",
                             "--solver", "external", "-o", out], capsys)
    assert code == EXIT_OK, err
    for name in ("reference", "zero-financing"):
        d = out / name
        for f in ("solution.csv", "costs.csv", "capacities.csv", "flows.csv", "summary.json", "manifest.json"):
            assert (d / f).is_file(), f
        assert json.loads((d / "summary.json").read_text())["run"]["feasible"] is True
    code, stdout, _ = run(["report", out / "reference", out / "zero-financing", "-o", tmp_path / "cmp"], capsys)
    assert code == EXIT_OK
    lines = stdout.strip().splitlines()
    assert lines[0].startswith("scenario,total,") and len(lines) == 3
    ref, zero = (float(line.split(",")[1]) for line in lines[1:])
    assert zero < ref
    assert (tmp_path / "cmp" / "comparison.csv").read_text() == stdout


def test_scenario_jobs_match_serial(tmp_path, capsys):
    args = ["scenario", "reference", "solar-only", "--horizon", "8760:240", "--solver", "external"]
    assert run(args + ["-o", tmp_path / "serial"], capsys)[0] == EXIT_OK
    assert run(args + ["-o", tmp_path / "par", "--jobs", "2"], capsys)[0] == EXIT_OK
    for name in ("reference", "solar-only"):
        for f in ("costs.csv", "summary.json"):
            assert (tmp_path / "serial" / name / f).read_bytes() == (tmp_path / "par" / name / f).read_bytes()


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "hubgraph.cli", "validate", str(BUNDLED)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "0 errors" in proc.stdout
