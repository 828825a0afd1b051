from __future__ import annotations

import csv
import io
import json
import math

import pytest

from conftest import DATA, complete, cycle, random_graph
from escbundle.driver import (BoundReport, RunConfig, emit_report, exact_value, format_table,
                              run_cycles,
                              verify_instance, verify_small)
from escbundle.sdp import build_basic, natural_value, solve


def _cfg(problem, **kw):
    base = dict(k_schedule=(3,), cycles=2, escs_per_cycle=10, bundle_iters=10, seed=3)
    base.update(kw)
    return RunConfig(problem, **base)


def test_config_validation():
    with pytest.raises(ValueError):
        RunConfig("maxcut", k_schedule=(5, 3))
    with pytest.raises(ValueError):
        RunConfig("maxcut", k_schedule=(1,))
    with pytest.raises(ValueError):
        RunConfig("maxcut", k_schedule=(9,))
    with pytest.raises(ValueError):
        RunConfig("bogus")


def test_zero_cycles_gives_basic_bound():
    g = cycle(5)
    rep = run_cycles(_cfg("stableset", cycles=0), g)
    assert rep.rows == [] and rep.levels == []
    assert rep.final == rep.basic == pytest.approx(math.sqrt(5), abs=1e-6)
    assert emit_report(rep, "csv").strip().count("\n") == 0      # header only


@pytest.mark.parametrize("problem", ["maxcut", "stableset", "coloring"])
def test_run_improves_and_stays_valid(problem):
    g = random_graph(12, 0.4, 21)
    opt = exact_value(problem, g)
    rep = run_cycles(_cfg(problem, k_schedule=(3, 4)), g, opt)
    assert rep.complete
    bounds = [r.bound for r in rep.rows]
    sign = -1 if problem == "coloring" else 1
    # reported bounds never get worse and stay on the valid side of the optimum
    assert all(sign * (b - a) <= 1e-9 for a, b in zip(bounds, bounds[1:]))
    assert all(sign * (b - opt) >= -1e-5 for b in bounds)
    assert sign * (rep.final - rep.basic) <= 1e-9
    assert [lv.k for lv in rep.levels] == [3, 4]
    assert all(r.n_blocks >= 1 and r.b >= 1 for r in rep.rows)


def test_deterministic_given_seed():
    g = random_graph(10, 0.5, 2)
    a = run_cycles(_cfg("maxcut"), g)
    b = run_cycles(_cfg("maxcut"), g)
    assert [(r.n_blocks, r.b, round(r.bound, 8)) for r in a.rows] == \
           [(r.n_blocks, r.b, round(r.bound, 8)) for r in b.rows]


def test_report_round_trip_and_formats(tmp_path):
    rep = run_cycles(_cfg("stableset", cycles=1), cycle(7), 3)
    d = json.loads(emit_report(rep, "json", tmp_path / "r.json"))
    back = BoundReport.from_dict(d)
    # compared as JSON text because unmeasured distances are NaN
    assert json.dumps(back.to_dict(), sort_keys=True) == json.dumps(rep.to_dict(), sort_keys=True)
    rows = list(csv.DictReader(io.StringIO(emit_report(rep, "csv"))))
    assert len(rows) == len(rep.rows)
    table = format_table([rep])
    assert "esb3" in table and "C7" in table
    with pytest.raises(ValueError):
        emit_report(rep, "xml")


def test_instance_file_is_read():
    rep = run_cycles(RunConfig("stableset", str(DATA / "C5.col"), k_schedule=(5,), cycles=1,
                               escs_per_cycle=5, bundle_iters=40), known_optimum=2)
    assert rep.n == 5 and rep.m == 5
    assert rep.final < rep.basic - 0.1


@pytest.mark.parametrize("problem,g", [("maxcut", complete(2)), ("maxcut", cycle(5)),
                                       ("stableset", cycle(5)), ("coloring", cycle(5))])
def test_verify_instance(problem, g):
    cert = verify_instance(problem, g, max_iters=300)
    assert cert.passed, cert.message


def test_verify_small_quick():
    certs = verify_small(n=6, trials=2, seed=7, n_min=5)
    assert len(certs) == 4 and all(c.passed for c in certs)


def test_natural_units_of_basic_bound():
    assert natural_value("maxcut", solve(build_basic("maxcut", complete(3)), 1e-8).value) == \
        pytest.approx(2.25, abs=1e-6)
