from __future__ import annotations

import csv
import io
import json
import math

import pytest

from conftest import DATA
from escbundle.cli import main


def test_theta_c5(capsys):
    assert main(["theta", "--instance", str(DATA / "C5.col")]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(math.sqrt(5), abs=1e-6)


def test_theta_maxcut_rudy(capsys):
    assert main(["theta", "--instance", str(DATA / "torus_g3_4.rudy"), "--problem", "maxcut"]) == 0
    assert float(capsys.readouterr().out) > 0


def test_atoms_csv(tmp_path):
    out = tmp_path / "atoms.csv"
    rc = main(["atoms", "--instance", str(DATA / "C5.col"), "--problem", "stableset",
               "--subset", "0,1,2", "--out", str(out)])
    assert rc == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert set(rows[0]) == {"atom", "row", "col", "value"}
    # path 0-1-2: stable sets {}, {0}, {1}, {2}, {0,2}
    assert len({r["atom"] for r in rows}) == 5
    assert len(rows) == 5 * 9


def test_solve_json(tmp_path, capsys):
    out = tmp_path / "rep.json"
    rc = main(["solve", "--problem", "stableset", "--instance", str(DATA / "C5.col"),
               "--k-schedule", "5", "--cycles", "1", "--escs-per-cycle", "3",
               "--bundle-iters", "40", "--out", str(out), "--known-optimum", "2"])
    assert rc == 0
    rep = json.loads(out.read_text())
    assert rep["problem"] == "stableset" and rep["known_optimum"] == 2
    assert rep["final"] < rep["basic"]


def test_solve_table_to_stdout(capsys):
    rc = main(["solve", "--problem", "maxcut", "--instance", str(DATA / "C5.col"),
               "--k-schedule", "3", "--cycles", "1", "--report-format", "table"])
    assert rc == 0
    assert "basic" in capsys.readouterr().out


def test_missing_file_exits_2(capsys):
    assert main(["theta", "--instance", "/nonexistent.col"]) == 2
    assert "error" in capsys.readouterr().err


def test_parse_error_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.col"
    bad.write_text("p edge 3 1\ne 1 7\n")
    assert main(["theta", "--instance", str(bad)]) == 2


def test_bad_schedule_exits_2():
    assert main(["solve", "--problem", "maxcut", "--instance", str(DATA / "C5.col"),
                 "--k-schedule", "5,3"]) == 2


def test_solver_failure_exits_3(monkeypatch):
    import escbundle.cli as cli

    def boom(*a, **k):
        raise RuntimeError("forced")

    monkeypatch.setattr(cli, "solve", boom)
    assert main(["theta", "--instance", str(DATA / "C5.col")]) == 3


def test_verify_small_cli(tmp_path, capsys):
    out = tmp_path / "cert.json"
    rc = main(["verify-small", "--n", "5", "--n-min", "5", "--trials", "1", "--out", str(out)])
    assert rc == 0
    assert "2/2 passed" in capsys.readouterr().out
    assert len(json.loads(out.read_text())) == 2


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--problem", "nope", "--instance", "x"])
    assert exc.value.code == 2
