import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from memra.cli import EXIT_INTEGRATE, EXIT_OK, EXIT_PARSE, EXIT_SOLVE, EXIT_USAGE, EXIT_VALIDATE, main
from memra.sim import DegenerateConfigurationWarning

NETLISTS = Path(__file__).resolve().parents[1] / "netlists"


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_check_vc_loop_present(tmp_path, capsys):
    path = write(tmp_path, "vc.net", "V1 VSOURCE a 0 dc(1)\nC1 CAP a 0 linear(C=1)\n")
    assert main(["check", path]) == EXIT_OK
    out = capsys.readouterr().out
    assert "VC-loop: present" in out
    assert "n=2 m=2 k=1" in out


def test_check_json(tmp_path, capsys):
    path = write(tmp_path, "rc.net", "R1 RRES a 0 linear(R=1)\nC1 CAP a 0 linear(C=1)\n")
    assert main(["check", path, "--format", "json"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["valid"] is True and doc["topology"]["m"] == 2


def test_parse_error_exit(tmp_path, capsys):
    path = write(tmp_path, "bad.net", "R1 RRES a 0 linear(R=\n")
    assert main(["check", path]) == EXIT_PARSE
    assert "bad.net" in capsys.readouterr().err


def test_missing_file_is_parse_error(tmp_path):
    assert main(["analyze", str(tmp_path / "nope.net")]) == EXIT_PARSE


def test_validation_error_exit(tmp_path, capsys):
    path = write(tmp_path, "inv.net", 'C1 CAP a b expr="q+i"\nR1 RRES a b linear(R=1)\n')
    assert main(["check", path]) == EXIT_VALIDATE
    assert main(["analyze", path]) == EXIT_VALIDATE


def test_parallel_sources_solve_failure(tmp_path, capsys):
    path = write(tmp_path, "vv.net", "V1 VSOURCE a 0 dc(1)\nV2 VSOURCE a 0 dc(2)\n")
    assert main(["analyze", path]) == EXIT_SOLVE
    doc = json.loads(capsys.readouterr().out)
    assert doc["equilibrium"]["status"] == "failed"


def test_integration_failure_writes_partial_csv(tmp_path, capsys):
    path = write(tmp_path, "blow.net",
                 'I1 ISOURCE a 0 expr="1/(1-t)"\nR1 RRES a 0 linear(R=1)\nC1 CAP a 0 linear(C=1)\n')
    assert main(["simulate", path, "--t1", "2", "--h", "0.25"]) == EXIT_INTEGRATE
    captured = capsys.readouterr()
    rows = list(csv.reader(io.StringIO(captured.out)))
    assert rows[0][0] == "t" and len(rows) == 1 + 4
    assert "integration failed" in captured.err


def test_inconsistent_initial_data_exit(tmp_path):
    path = write(tmp_path, "vc.net", "V1 VSOURCE a 0 dc(1)\nC1 CAP a 0 linear(C=1)\n")
    assert main(["simulate", path, "--guess", "C1=0.5"]) == EXIT_SOLVE
    with pytest.warns(DegenerateConfigurationWarning):
        assert main(["simulate", path, "--guess", "C1=1"]) == EXIT_OK


def test_usage_errors():
    with pytest.raises(SystemExit) as info:
        main(["frobnicate", "x.net"])
    assert info.value.code == EXIT_USAGE
    assert main(["simulate", "a.net", "--h", "0"]) == EXIT_USAGE
    assert main(["simulate", "a.net", "b.net"]) == EXIT_USAGE


def test_rank_tol_from_environment(monkeypatch, capsys):
    path = str(NETLISTS / "vrc.net")
    monkeypatch.setenv("MEMRA_RANK_TOL", "1e-8")
    assert main(["analyze", path]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["tolerances"]["rank_rel_tol"] == 1e-8
    monkeypatch.setenv("MEMRA_RANK_TOL", "abc")
    assert main(["analyze", path]) == EXIT_USAGE


def test_analyze_json_fields(capsys):
    assert main(["analyze", str(NETLISTS / "chua_mc.net")]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert list(doc)[0] == "schema_version"
    assert doc["null_multiplicity"] == 1
    assert doc["corank_K"] == 1


def test_batch_jobs_match_serial(capsys):
    paths = sorted(str(p) for p in NETLISTS.glob("*.net"))
    assert main(["analyze", *paths]) == EXIT_OK
    serial = capsys.readouterr().out
    assert main(["analyze", *paths, "--jobs", "3"]) == EXIT_OK
    parallel = capsys.readouterr().out
    assert serial == parallel
    assert set(json.loads(serial)) == set(paths)


def test_out_file_and_module_entry(tmp_path):
    out = tmp_path / "traj.csv"
    proc = subprocess.run([sys.executable, "-m", "memra", "simulate", str(NETLISTS / "rl.net"),
                           "--guess", "L1=1", "--t1", "0.1", "--h", "0.01", "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == EXIT_OK, proc.stderr
    rows = list(csv.reader(out.open()))
    assert rows[0][0] == "t" and rows[-1][0] == "0.10000000000000001"
