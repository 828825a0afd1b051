"""Outer cutting-plane loop, reports and small-instance verification."""
from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .atlas import AtomCache, Problem
from .bundle import BundleConfig, run_bundle
from .exact import chromatic_number, max_cut, stability_number
from .graph import WeightedGraph, read_graph
from .operators import EscSystem, make_block
from .sdp import build_basic, natural_value, solve
from .separation import DEFAULT_THRESHOLD, separate

log = logging.getLogger(__name__)

DEFAULT_SCHEDULES = {
    Problem.MAXCUT: (3, 5, 7),
    Problem.STABLESET: (2, 3, 4, 5, 6),
    Problem.COLORING: (2, 3, 4, 5, 6),
}


@dataclass
class RunConfig:
    problem: Problem | str
    instance: str | None = None
    fmt: str | None = None
    k_schedule: tuple[int, ...] | None = None
    cycles: int = 10
    escs_per_cycle: int = 200
    bundle_iters: int = 30
    tol: float = 1e-6
    oracle_tol: float = 1e-6
    final_tol: float = 1e-8
    seed: int = 42
    n_candidates: int | None = None
    threshold: float = DEFAULT_THRESHOLD
    separate_on: str = "aggregate"
    bundle: BundleConfig | None = None

    def __post_init__(self):
        self.problem = Problem(self.problem)
        if self.k_schedule is None:
            self.k_schedule = DEFAULT_SCHEDULES[self.problem]
        self.k_schedule = tuple(int(k) for k in self.k_schedule)
        if any(not 2 <= k <= 8 for k in self.k_schedule):
            raise ValueError("subgraph orders must lie in [2, 8]")
        if list(self.k_schedule) != sorted(self.k_schedule):
            raise ValueError("k schedule must be ascending")
        if self.cycles < 0 or self.escs_per_cycle < 0 or self.bundle_iters < 1:
            raise ValueError("cycle, ESC and iteration counts must be positive")
        if self.separate_on not in ("aggregate", "last"):
            raise ValueError("separate_on must be 'aggregate' or 'last'")

    def bundle_config(self) -> BundleConfig:
        cfg = self.bundle or BundleConfig()
        return BundleConfig(**{**asdict(cfg), "tol": self.tol, "oracle_tol": self.oracle_tol,
                               "final_tol": self.final_tol})


@dataclass
class CycleRow:
    cycle: int
    k: int
    n_blocks: int
    b: int
    bound: float
    max_dist_start: float
    max_dist_end: float
    added: int
    serious: int
    null: int
    seconds: float


@dataclass
class LevelSummary:
    k: int
    esb: float
    cycles: int
    max_dist_first: float
    max_dist_last: float


@dataclass
class BoundReport:
    """Result of :func:`run_cycles`; bounds are in the problem's own units.

    Max-Cut bounds are cut weights, stable set bounds upper-bound the
    stability number, coloring bounds lower-bound the chromatic number.
    """

    name: str
    problem: str
    n: int
    m: int
    basic: float
    rows: list[CycleRow] = field(default_factory=list)
    levels: list[LevelSummary] = field(default_factory=list)
    final: float | None = None
    known_optimum: float | None = None
    complete: bool = True
    seconds: float = 0.0
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "BoundReport":
        d = dict(d)
        d["rows"] = [CycleRow(**r) for r in d.get("rows", [])]
        d["levels"] = [LevelSummary(**r) for r in d.get("levels", [])]
        return cls(**d)


def _level_seed(seed: int, k: int, cycle: int) -> list[int]:
    return [int(seed), int(k), int(cycle)]


def run_cycles(config: RunConfig, graph: WeightedGraph | None = None,
               known_optimum: float | None = None) -> BoundReport:
    """Alternate bundle runs and ESC separation over the configured subgraph orders."""
    t_start = time.perf_counter()
    problem = Problem(config.problem)
    g = graph if graph is not None else read_graph(config.instance, config.fmt)
    base = build_basic(problem, g)
    cache = AtomCache()
    bcfg = config.bundle_config()
    res0 = solve(base, config.final_tol)
    if not res0.converged:
        log.warning("basic relaxation did not converge to %.1e", config.final_tol)
    best = res0.value
    report = BoundReport(g.name, problem.value, g.n, g.m, natural_value(problem, res0.value),
                         known_optimum=known_optimum, seed=config.seed)
    report.final = report.basic
    if config.cycles == 0:
        report.seconds = time.perf_counter() - t_start
        return report
    system = EscSystem(problem, g, offset=base.offset)
    y = np.zeros(0)
    X = res0.X
    cycle = 0
    try:
        for k in config.k_schedule:
            if k > g.n:
                log.info("skipping k=%d > n=%d", k, g.n)
                continue
            level_rows: list[CycleRow] = []
            dist_first = None
            sep = None
            for c in range(config.cycles):
                sep = separate(X, problem, g, k, config.escs_per_cycle, system.subsets,
                               _level_seed(config.seed, k, c), config.n_candidates,
                               config.threshold, cache)
                if dist_first is None:
                    dist_first = sep.max_distance
                if level_rows:
                    level_rows[-1].max_dist_end = sep.max_distance
                if not sep.selected:
                    sep = None
                    break
                t0 = time.perf_counter()
                system = system.add(r.block for r in sep.selected)
                y = system.pad(y)
                br = run_bundle(system, base, config.bundle_iters, bcfg, y0=y)
                y = br.y
                X = br.primal_X if config.separate_on == "aggregate" else br.last_X
                best = min(best, br.bound)
                cycle += 1
                row = CycleRow(cycle, k, system.q, system.b, natural_value(problem, best),
                               sep.max_distance, float("nan"), len(sep.selected), br.serious,
                               br.null, time.perf_counter() - t0)
                level_rows.append(row)
                report.rows.append(row)
                log.info("cycle %d k=%d |J|=%d b=%d bound=%.6f dist=%.4f", cycle, k, system.q,
                         system.b, row.bound, row.max_dist_start)
            if sep is not None and level_rows:
                # budget exhausted: one more scan measures the distance at the end of the level
                fin = separate(X, problem, g, k, config.escs_per_cycle, (),
                               _level_seed(config.seed, k, config.cycles), config.n_candidates,
                               config.threshold, cache)
                level_rows[-1].max_dist_end = fin.max_distance
            last = level_rows[-1].max_dist_end if level_rows else (dist_first or 0.0)
            report.levels.append(LevelSummary(k, natural_value(problem, best), len(level_rows),
                                              float(dist_first or 0.0), float(last)))
    except Exception:
        log.exception("run aborted; returning partial report")
        report.complete = False
    report.final = natural_value(problem, best)
    report.seconds = time.perf_counter() - t_start
    return report


# ---------------------------------------------------------------- reports

_ROW_FIELDS = [f.name for f in fields(CycleRow)]


def emit_report(report: BoundReport, fmt: str = "json", path: str | Path | None = None) -> str:
    """Serialise a report as ``json``, ``csv`` (one line per cycle) or a summary ``table``."""
    if fmt == "json":
        text = json.dumps(report.to_dict(), indent=2, sort_keys=True, allow_nan=True) + "\n"
    elif fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(_ROW_FIELDS)
        for r in report.rows:
            w.writerow([getattr(r, f) for f in _ROW_FIELDS])
        text = buf.getvalue()
    elif fmt == "table":
        text = format_table([report])
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def format_table(reports: list[BoundReport]) -> str:
    """Plain-text table: name, n, m, basic bound, bound after each order, known optimum."""
    ks = sorted({lv.k for r in reports for lv in r.levels})
    head = ["name", "n", "m", "basic"] + [f"esb{k}" for k in ks] + ["opt"]
    lines = [head]
    for r in reports:
        by_k = {lv.k: lv.esb for lv in r.levels}
        row = [r.name or "-", str(r.n), str(r.m), f"{r.basic:.2f}"]
        row += [f"{by_k[k]:.2f}" if k in by_k else "-" for k in ks]
        row.append("-" if r.known_optimum is None else f"{r.known_optimum:g}")
        lines.append(row)
    widths = [max(len(line[i]) for line in lines) for i in range(len(head))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(line, widths)) for line in lines) + "\n"


# ---------------------------------------------------------------- verification

# Settings for driving the exhaustive block to convergence. A smaller start
# penalty, halving after consecutive serious steps and a slower increase on
# null steps avoid the long tail of the default schedule; the oracle must be
# solved more accurately than the stopping tolerance.
EXACT_BUNDLE = BundleConfig(mu0=0.1, serious_patience=2, null_patience=10, r_max=50,
                            tol=1e-8, oracle_tol=1e-9, final_tol=1e-9)


@dataclass
class Certificate:
    problem: str
    n: int
    m: int
    seed: int
    exact: float
    bound: float
    relation: str
    passed: bool
    evaluations: list[float] = field(default_factory=list)
    min_slack: float = 0.0
    message: str = ""


def exact_value(problem: Problem | str, g: WeightedGraph) -> float:
    """Combinatorial optimum in natural units (cut weight, stability number, chromatic number)."""
    problem = Problem(problem)
    if problem is Problem.MAXCUT:
        return max_cut(g)[0] / 4.0
    if problem is Problem.STABLESET:
        return float(stability_number(g))
    return float(chromatic_number(g))


def verify_instance(problem: Problem | str, g: WeightedGraph, seed: int = 0,
                    max_iters: int = 300, tol: float = 1e-4,
                    bundle: BundleConfig | None = None) -> Certificate:
    """Run the bundle with the exhaustive block ``I = N`` and check it against brute force.

    Max-Cut and stable set must reach the optimum within ``tol`` and every
    intermediate dual value must stay on the safe side of it; coloring
    must land between the basic bound and the chromatic number.
    """
    problem = Problem(problem)
    if g.n > 10:
        raise ValueError("verification is limited to n <= 10")
    exact = exact_value(problem, g)
    base = build_basic(problem, g)
    system = EscSystem(problem, g, [make_block(problem, g, range(g.n))], offset=base.offset)
    br = run_bundle(system, base, max_iters, bundle or EXACT_BUNDLE)
    vals = [natural_value(problem, v) for v in br.evaluations]
    bound = natural_value(problem, br.bound)
    safety = 1e-6
    if problem is Problem.COLORING:
        lower = natural_value(problem, solve(base, 1e-8).value)
        slack = min(exact - v for v in vals)
        passed = lower - 1e-6 <= bound <= exact + safety and slack >= -safety
        relation = f"{lower:.6f} <= {bound:.6f} <= chi={exact:g}"
    else:
        slack = min(v - exact for v in vals)
        passed = abs(bound - exact) <= tol and slack >= -safety
        relation = f"|{bound:.6f} - {exact:g}| <= {tol:g}"
    msg = "" if passed else f"violated: {relation} (min slack {slack:.2e}, seed {seed})"
    return Certificate(problem.value, g.n, g.m, seed, exact, bound, relation, passed, vals,
                       float(slack), msg)


def random_graph(n: int, p: float, seed: int) -> WeightedGraph:
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(n, 1)
    keep = rng.random(len(iu[0])) < p
    return WeightedGraph.from_edges(n, zip(iu[0][keep], iu[1][keep]), name=f"gnp{n}_{seed}")


def verify_small(n: int = 8, trials: int = 20, seed: int = 1,
                 problems=(Problem.MAXCUT, Problem.STABLESET), n_min: int = 5,
                 p: float = 0.5, max_iters: int = 300) -> list[Certificate]:
    """Seeded random graphs of order ``n_min..n`` checked for every problem in ``problems``."""
    rng = np.random.default_rng(seed)
    out = []
    for t in range(trials):
        order = int(rng.integers(n_min, n + 1))
        gseed = int(rng.integers(2**31))
        g = random_graph(order, p, gseed)
        for prob in problems:
            cert = verify_instance(prob, g, gseed, max_iters)
            out.append(cert)
            log.info("%s n=%d seed=%d exact=%g bound=%.6f %s", cert.problem, order, gseed,
                     cert.exact, cert.bound, "ok" if cert.passed else cert.message)
    return out
