"""Proximal bundle method for the partial Lagrangian dual.

The dual function is ``F(y) = h(y) + sum_I max_i [D_I(y_I)]_i``; ``h`` is
evaluated by the SDP oracle, the max-terms are explicit. Only ``h`` is
modelled by cutting planes, the max-terms enter the trial QP exactly.
Every evaluated ``F(y)`` is a valid upper bound, so the method reports the
smallest value seen.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .operators import EscSystem
from .qp import QPError, solve_trial_qp
from .sdp import OracleResult, SdpProblem, evaluate_h

log = logging.getLogger(__name__)


@dataclass
class BundleConfig:
    mu0: float = 1.0
    mu_min: float = 1e-4
    mu_max: float = 1e4
    r_max: int = 25
    m_ss: float = 0.1
    strong_decrease: float = 0.7
    null_patience: int = 3
    # optional extension: halve mu after this many consecutive serious steps
    serious_patience: int | None = None
    tol: float = 1e-6
    oracle_tol: float = 1e-6
    final_tol: float = 1e-8
    keep_primal: bool = True


@dataclass
class BundleElement:
    """One cutting plane ``h(y') >= h + <g, y' - y>``.

    ``h`` is the objective of the returned maximiser, so the plane is a true
    minorant even for an inexact solve; ``h_upper`` is the certified value.
    """

    y: np.ndarray
    h: float
    g: np.ndarray
    X: np.ndarray | None = None
    h_upper: float | None = None

    def error_at(self, ybar: np.ndarray, hbar: float) -> float:
        return hbar - self.h - float(self.g @ (ybar - self.y))


@dataclass
class BundleState:
    center: np.ndarray
    h_center: float
    F_center: float
    elements: list[BundleElement]
    mu: float
    center_index: int = 0
    nulls: int = 0
    seriouses: int = 0
    serious: int = 0
    null_total: int = 0

    def errors(self) -> np.ndarray:
        return np.array([el.error_at(self.center, self.h_center) for el in self.elements])


@dataclass
class TraceRecord:
    iter: int
    F_center: float
    model: float
    step: str
    mu: float
    g_norm: float
    oracle_seconds: float
    F_trial: float
    qp_kkt: float


@dataclass
class BundleResult:
    y: np.ndarray
    bound: float
    last_X: np.ndarray
    primal_X: np.ndarray
    trace: list[TraceRecord] = field(default_factory=list)
    evaluations: list[float] = field(default_factory=list)
    serious: int = 0
    null: int = 0
    min_error: float = 0.0
    certified: bool = False
    aborted: str = ""


def step_decision(F_center: float, F_trial: float, model_trial: float, m_ss: float = 0.1) -> str:
    """``serious`` iff the actual decrease is at least ``m_ss`` times the predicted one."""
    predicted = F_center - model_trial
    actual = F_center - F_trial
    return "serious" if actual >= m_ss * predicted else "null"


def update_state(state: BundleState, outcome: str, trial: BundleElement, F_trial: float,
                 model_trial: float, cfg: BundleConfig) -> BundleState:
    """Append the trial plane, move the center on serious steps, adapt ``mu``, evict."""
    predicted = state.F_center - model_trial
    actual = state.F_center - F_trial
    state.elements.append(trial)
    newest = len(state.elements) - 1
    if outcome == "serious":
        state.center = trial.y.copy()
        state.h_center = trial.h if trial.h_upper is None else trial.h_upper
        state.F_center = F_trial
        state.center_index = newest
        state.nulls = 0
        state.serious += 1
        state.seriouses += 1
        if actual >= cfg.strong_decrease * predicted:
            state.mu = max(state.mu / 2, cfg.mu_min)
            state.seriouses = 0
        elif cfg.serious_patience and state.seriouses >= cfg.serious_patience:
            state.mu = max(state.mu / 2, cfg.mu_min)
            state.seriouses = 0
    else:
        state.seriouses = 0
        state.nulls += 1
        state.null_total += 1
        if state.nulls >= cfg.null_patience:
            state.mu = min(2 * state.mu, cfg.mu_max)
            state.nulls = 0
    while len(state.elements) > cfg.r_max:
        e = state.errors()
        e[newest] = -np.inf
        e[state.center_index] = -np.inf
        drop = int(np.argmax(e))
        del state.elements[drop]
        if drop < state.center_index:
            state.center_index -= 1
        newest -= 1
    return state


def dual_value(y: np.ndarray, system: EscSystem, base: SdpProblem, tol: float = 1e-6) -> float:
    """``h(y) + sum_I max_i [D_I(y_I)]_i``; a valid upper bound for every ``y``."""
    res = evaluate_h(y, system, base, tol)
    return res.value + float(system.max_terms(y)[0].sum())


def _element(y: np.ndarray, res: OracleResult, keep_X: bool) -> BundleElement:
    return BundleElement(y.copy(), min(res.primal_value, res.value), res.g.copy(),
                         res.X if keep_X else None, res.value)


def _evaluate(y, system, base, tol) -> tuple[float, OracleResult]:
    res = evaluate_h(y, system, base, tol)
    F = res.value + (float(system.max_terms(y)[0].sum()) if system.q else 0.0)
    return F, res


def run_bundle(system: EscSystem, base: SdpProblem, max_iters: int = 30,
               cfg: BundleConfig | None = None, y0: np.ndarray | None = None,
               on_trial: Callable[[TraceRecord], None] | None = None) -> BundleResult:
    """Minimise the dual function starting from ``y0`` (default 0).

    ``max_iters`` counts oracle evaluations, so ``max_iters=1`` only
    evaluates the start point. A failing trial QP or oracle call ends the
    run early with the best bound found so far (``aborted`` says why).
    The returned ``primal_X`` is the convex combination of stored
    maximisers weighted by the last QP multipliers.
    """
    cfg = cfg or BundleConfig()
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    y = np.zeros(system.b) if y0 is None else np.asarray(y0, dtype=float).copy()
    t0 = time.perf_counter()
    F0, res = _evaluate(y, system, base, cfg.oracle_tol)
    el = _element(y, res, cfg.keep_primal)
    state = BundleState(y.copy(), res.value, F0, [el], cfg.mu0)
    best_F, best_y = F0, y.copy()
    last_X = res.X
    primal_X = res.X
    evaluations = [F0]
    trace = [TraceRecord(0, F0, F0, "init", cfg.mu0, float(np.linalg.norm(res.g)),
                         time.perf_counter() - t0, F0, 0.0)]
    min_error = 0.0
    aborted = ""
    for it in range(1, max_iters):
        if system.b == 0:
            break
        G = np.column_stack([e.g for e in state.elements])
        errs = state.errors()
        min_error = min(min_error, float(errs.min()))
        try:
            tp = solve_trial_qp(state.center, state.h_center, G, errs, system, state.mu)
        except (QPError, np.linalg.LinAlgError) as exc:
            log.warning("bundle stopped at iteration %d: %s", it, exc)
            aborted = f"trial QP: {exc}"
            break
        if cfg.keep_primal:
            Xs = [e.X for e in state.elements]
            primal_X = sum(a * X for a, X in zip(tp.alpha, Xs))
        predicted = state.F_center - tp.model
        if predicted <= cfg.tol * (1 + abs(state.F_center)):
            trace.append(TraceRecord(it, state.F_center, tp.model, "stop", state.mu, 0.0, 0.0,
                                     state.F_center, tp.kkt_residual))
            break
        t1 = time.perf_counter()
        try:
            F, res = _evaluate(tp.y, system, base, cfg.oracle_tol)
        except (np.linalg.LinAlgError, ValueError, FloatingPointError) as exc:
            log.warning("bundle stopped at iteration %d: %s", it, exc)
            aborted = f"oracle: {exc}"
            break
        dt = time.perf_counter() - t1
        evaluations.append(F)
        last_X = res.X
        if F < best_F:
            best_F, best_y = F, tp.y.copy()
        outcome = step_decision(state.F_center, F, tp.model, cfg.m_ss)
        rec = TraceRecord(it, state.F_center, tp.model, outcome, state.mu,
                          float(np.linalg.norm(res.g)), dt, F, tp.kkt_residual)
        trace.append(rec)
        if on_trial:
            on_trial(rec)
        log.debug("bundle %3d F_center=%.8g model=%.8g F=%.8g %s mu=%.3g", it, state.F_center,
                  tp.model, F, outcome, state.mu)
        trial = _element(tp.y, res, cfg.keep_primal)
        update_state(state, outcome, trial, F, tp.model, cfg)
    certified = False
    if cfg.final_tol < cfg.oracle_tol:
        try:
            F_fin, res_fin = _evaluate(best_y, system, base, cfg.final_tol)
            certified = res_fin.converged
            best_F = min(best_F, F_fin)
        except np.linalg.LinAlgError as exc:
            log.warning("final certification failed: %s", exc)
    return BundleResult(best_y, best_F, last_X, primal_X, trace, evaluations, state.serious,
                        state.null_total, min_error, certified, aborted)
