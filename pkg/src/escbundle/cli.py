"""Command-line interface: ``escbundle {solve,verify-small,theta,atoms}``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys

from .atlas import AtomCache, Problem
from .bundle import BundleConfig
from .driver import RunConfig, emit_report, run_cycles, verify_small
from .graph import ParseError, induced_subgraph, read_graph
from .sdp import build_basic, natural_value, solve

EXIT_OK, EXIT_PARSE, EXIT_SOLVER = 0, 2, 3

log = logging.getLogger("escbundle")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="escbundle",
                                 description="Exact subgraph bounds for Max-Cut, stable set and coloring.")
    ap.add_argument("-v", "--verbose", action="count", default=0, help="more logging (-v, -vv)")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="run the cutting-plane cycles on one instance")
    s.add_argument("--problem", required=True, choices=[p.value for p in Problem])
    s.add_argument("--instance", required=True)
    s.add_argument("--format", choices=["dimacs", "rudy"], default=None,
                   help="input format (default: guess from the file)")
    s.add_argument("--k-schedule", type=_int_list, default=None,
                   help="ascending subgraph orders, e.g. 3,5,7")
    s.add_argument("--cycles", type=int, default=10)
    s.add_argument("--escs-per-cycle", type=int, default=200)
    s.add_argument("--bundle-iters", type=int, default=30)
    s.add_argument("--tol", type=float, default=1e-6, help="bundle stopping tolerance")
    s.add_argument("--oracle-tol", type=float, default=1e-6, help="SDP tolerance inside the bundle")
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--known-optimum", type=float, default=None)
    s.add_argument("--out", default=None, help="report path (default: stdout)")
    s.add_argument("--report-format", choices=["json", "csv", "table"], default=None,
                   help="default: from the --out suffix, json otherwise")

    v = sub.add_parser("verify-small", help="check against brute force on random small graphs")
    v.add_argument("--n", type=int, default=8, help="largest graph order (at most 10)")
    v.add_argument("--n-min", type=int, default=5)
    v.add_argument("--trials", type=int, default=20)
    v.add_argument("--seed", type=int, default=1)
    v.add_argument("--problems", default="maxcut,stableset",
                   help="comma-separated subset of maxcut,stableset,coloring")
    v.add_argument("--out", default=None, help="write certificates as JSON")

    t = sub.add_parser("theta", help="basic SDP relaxation only")
    t.add_argument("--instance", required=True)
    t.add_argument("--format", choices=["dimacs", "rudy"], default=None)
    t.add_argument("--problem", choices=[p.value for p in Problem], default="stableset")
    t.add_argument("--tol", type=float, default=1e-8)

    a = sub.add_parser("atoms", help="dump the atoms of an induced subgraph as CSV")
    a.add_argument("--instance", required=True)
    a.add_argument("--format", choices=["dimacs", "rudy"], default=None)
    a.add_argument("--problem", required=True, choices=[p.value for p in Problem])
    a.add_argument("--subset", type=_int_list, required=True, help="vertex list, e.g. 0,1,2")
    a.add_argument("--out", default=None)
    return ap


def _cmd_solve(args) -> int:
    g = read_graph(args.instance, args.format)
    cfg = RunConfig(args.problem, args.instance, args.format, args.k_schedule, args.cycles,
                    args.escs_per_cycle, args.bundle_iters, args.tol, args.oracle_tol,
                    seed=args.seed, bundle=BundleConfig())
    report = run_cycles(cfg, g, args.known_optimum)
    fmt = args.report_format
    if fmt is None:
        suffix = (args.out or "").rsplit(".", 1)[-1].lower()
        fmt = suffix if suffix in ("json", "csv") else "json"
    text = emit_report(report, fmt, args.out)
    if args.out is None:
        sys.stdout.write(text)
    if not report.complete:
        return EXIT_SOLVER
    return EXIT_OK


def _cmd_verify(args) -> int:
    problems = [Problem(p.strip()) for p in args.problems.split(",") if p.strip()]
    certs = verify_small(args.n, args.trials, args.seed, problems, n_min=args.n_min)
    for c in certs:
        status = "PASS" if c.passed else "FAIL"
        print(f"{status} {c.problem:9s} n={c.n:2d} m={c.m:2d} seed={c.seed} {c.relation}")
    ok = all(c.passed for c in certs)
    print(f"{sum(c.passed for c in certs)}/{len(certs)} passed")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump([c.__dict__ for c in certs], fh, indent=2)
    return EXIT_OK if ok else EXIT_SOLVER


def _cmd_theta(args) -> int:
    g = read_graph(args.instance, args.format)
    problem = Problem(args.problem)
    res = solve(build_basic(problem, g), args.tol)
    print(f"{natural_value(problem, res.value):.8f}")
    return EXIT_OK if res.converged else EXIT_SOLVER


def _cmd_atoms(args) -> int:
    g = read_graph(args.instance, args.format)
    sub = induced_subgraph(g, args.subset)
    atoms = AtomCache().get(args.problem, sub)
    fh = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["atom", "row", "col", "value"])
        for i, M in enumerate(atoms.atoms):
            for r in range(M.shape[0]):
                for c in range(M.shape[1]):
                    w.writerow([i, r, c, f"{M[r, c]:g}"])
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


_COMMANDS = {"solve": _cmd_solve, "verify-small": _cmd_verify, "theta": _cmd_theta,
             "atoms": _cmd_atoms}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except (ParseError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except Exception as exc:  # solver failure
        log.exception("solver failure")
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
