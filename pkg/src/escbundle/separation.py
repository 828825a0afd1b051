"""Separation of violated exact subgraph constraints.

Candidates are produced by a randomised local search that looks for
subsets where the current matrix has a small inner product with a
template atom; they are then ranked by the exact Frobenius distance of
``X_I`` to the hull of the atoms.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .atlas import AtomCache, Problem
from .graph import WeightedGraph
from .operators import EscBlock, make_block

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 1e-4


@dataclass(frozen=True)
class ViolationRecord:
    I: tuple[int, ...]
    distance: float
    lam: np.ndarray
    block: EscBlock | None = None


# ---------------------------------------------------------------- projection

def project_to_hull(X_I: np.ndarray, atoms: np.ndarray, tol: float = 1e-12,
                    max_iter: int = 2000) -> tuple[float, np.ndarray]:
    """Frobenius distance from ``X_I`` to ``conv(atoms)`` and optimal weights.

    Away-step Frank-Wolfe with exact line search on the simplex; after each
    step the objective is also minimised over the affine hull of the
    current support when that point stays feasible (a Wolfe-type
    correction that makes the method finite on well-posed faces). Stops
    when the Frank-Wolfe gap drops below ``tol``.
    """
    atoms = np.asarray(atoms, dtype=float)
    t = atoms.shape[0]
    F = atoms.reshape(t, -1)
    x = np.asarray(X_I, dtype=float).ravel()
    if F.shape[1] != x.size:
        raise ValueError("atom and matrix dimensions differ")
    Q = F @ F.T
    c = F @ x
    # start from the atom closest to X
    lam = np.zeros(t)
    lam[int(np.argmin(np.diag(Q) - 2 * c))] = 1.0
    grad = Q @ lam - c
    for _ in range(max_iter):
        s = int(np.argmin(grad))
        fw_gap = float(grad @ lam - grad[s])
        if fw_gap <= tol:
            break
        support = np.flatnonzero(lam > 0)
        v = support[int(np.argmax(grad[support]))]
        if grad[s] - grad @ lam <= -(grad[v] - grad @ lam) or lam[v] >= 1.0:
            d = -lam.copy()
            d[s] += 1.0
            gmax = 1.0
        else:
            d = lam.copy()
            d[v] -= 1.0
            gmax = lam[v] / (1.0 - lam[v])
        curv = float(d @ Q @ d)
        slope = float(grad @ d)
        step = gmax if curv <= 0 else min(gmax, -slope / curv)
        lam = lam + step * d
        lam[lam < 1e-15] = 0.0
        lam /= lam.sum()
        lam = _affine_correction(lam, Q, c)
        grad = Q @ lam - c
    dist = float(np.linalg.norm(F.T @ lam - x))
    return dist, lam


def _affine_correction(lam: np.ndarray, Q: np.ndarray, c: np.ndarray) -> np.ndarray:
    S = np.flatnonzero(lam > 0)
    if len(S) < 2:
        return lam
    m = len(S)
    K = np.zeros((m + 1, m + 1))
    K[:m, :m] = Q[np.ix_(S, S)]
    K[:m, m] = 1.0
    K[m, :m] = 1.0
    rhs = np.concatenate([c[S], [1.0]])
    sol = np.linalg.lstsq(K, rhs, rcond=None)[0][:m]
    d = sol - lam[S]
    neg = d < 0
    step = 1.0
    if neg.any():
        step = min(1.0, float(np.min(-lam[S][neg] / d[neg])))
    cand = lam.copy()
    cand[S] = lam[S] + step * d
    cand[cand < 1e-15] = 0.0
    if cand.min() < 0 or cand.sum() <= 0:
        return lam
    cand /= cand.sum()
    f_old = 0.5 * lam @ Q @ lam - c @ lam
    f_new = 0.5 * cand @ Q @ cand - c @ cand
    return cand if f_new <= f_old else lam


# ---------------------------------------------------------------- candidates

def _offset(problem: Problem) -> int:
    return 0 if problem is Problem.MAXCUT else 1


def _template(problem: Problem, k: int, rng: np.random.Generator) -> np.ndarray:
    """Random template of order k (k+1 with the homogenising corner for stable set)."""
    if problem is Problem.STABLESET:
        c = rng.choice([-1.0, 1.0], size=k + 1)
        c[0] = 1.0
        T = np.zeros((k + 1, k + 1))
        T[0, 0] = 1.0
        T[1:, 0] = -1.0
        T[1:, 1:] = 2.0 * np.eye(k)
        a = T.T @ c
        return np.outer(a, a)
    if problem is Problem.COLORING:
        # random sign pattern: +1 where the subgraph should have an edge
        # (X vanishes there), -1 where X should be large; covers odd-cycle
        # type violations that rank-one templates cannot express
        B = np.triu(rng.choice([-1.0, 1.0], size=(k, k)), 1)
        return B + B.T
    c = rng.choice([-1.0, 1.0], size=k)
    c[0] = 1.0
    return np.outer(c, c)


def _hill_climb(X: np.ndarray, B: np.ndarray, idx: np.ndarray, pool: np.ndarray,
                fixed: int, max_swaps: int = 50) -> np.ndarray:
    """Single-vertex swaps on the free positions of ``idx`` minimising ``<B, X[idx, idx]>``."""
    idx = idx.copy()
    free = np.arange(fixed, len(idx))
    diagX = np.diag(X)
    for _ in range(max_swaps):
        XV = X[np.ix_(pool, idx)]                     # (|pool|, len(idx))
        R = XV @ B                                     # R[u, p] = sum_q X[u, v_q] B[q, p]
        cur = X[np.ix_(idx, idx)] @ B                  # cur[v_p, p] row for current vertex
        bdiag = np.diag(B)
        best = (0.0, -1, -1)
        in_set = np.isin(pool, idx)
        for p in free:
            Rp = R[:, p] - bdiag[p] * X[pool, idx[p]]
            cp = cur[p, p] - bdiag[p] * X[idx[p], idx[p]]
            delta = 2 * (Rp - cp) + bdiag[p] * (diagX[pool] - diagX[idx[p]])
            delta[in_set] = np.inf
            u = int(np.argmin(delta))
            if delta[u] < best[0] - 1e-12:
                best = (float(delta[u]), p, u)
        if best[1] < 0:
            break
        idx[best[1]] = pool[best[2]]
    return idx


def local_search_candidates(X: np.ndarray, problem: Problem | str, g: WeightedGraph, k: int,
                            n_candidates: int, seed: int = 0) -> list[tuple[int, ...]]:
    """Deterministic (given ``seed``) list of distinct candidate subsets of size ``k``."""
    problem = Problem(problem)
    n = g.n
    if not 2 <= k <= n:
        raise ValueError(f"subset size {k} outside [2, {n}]")
    if n == k:
        return [tuple(range(n))]
    rng = np.random.default_rng(seed)
    off = _offset(problem)
    pool = np.arange(n) + off
    fixed = 1 if problem is Problem.STABLESET else 0
    seen: dict[tuple[int, ...], None] = {}
    for _ in range(n_candidates):
        B = _template(problem, k, rng)
        start = rng.choice(n, size=k, replace=False) + off
        idx = np.concatenate([[0], start]) if fixed else start
        idx = _hill_climb(X, B, idx, pool, fixed)
        I = tuple(sorted(int(v) - off for v in idx[fixed:]))
        seen.setdefault(I, None)
    return list(seen)


def score_subsets(X: np.ndarray, problem: Problem | str, g: WeightedGraph,
                  subsets: Iterable[tuple[int, ...]], cache: AtomCache | None = None,
                  tol: float = 1e-12) -> list[ViolationRecord]:
    """Projection distance of ``X_I`` for every subset ``I``."""
    problem = Problem(problem)
    off = _offset(problem)
    out = []
    for I in subsets:
        blk = make_block(problem, g, I, cache)
        idx = np.asarray(blk.I) + off
        dist, lam = project_to_hull(X[np.ix_(idx, idx)], blk.atoms.atoms, tol)
        out.append(ViolationRecord(blk.I, dist, lam, blk))
    return out


@dataclass
class SeparationResult:
    selected: list[ViolationRecord]
    max_distance: float
    n_candidates: int


def separate(X: np.ndarray, problem: Problem | str, g: WeightedGraph, k: int, max_new: int,
             existing: Iterable[tuple[int, ...]] = (), seed: int = 0,
             n_candidates: int | None = None, threshold: float = DEFAULT_THRESHOLD,
             cache: AtomCache | None = None) -> SeparationResult:
    """Generate, score and select the most violated new ESCs of order ``k``.

    ``max_distance`` is the largest distance among all scored candidates,
    including those already registered.
    """
    if max_new <= 0:
        return SeparationResult([], 0.0, 0)
    n_candidates = n_candidates or 20 * max_new
    cands = local_search_candidates(X, problem, g, k, n_candidates, seed)
    recs = score_subsets(X, problem, g, cands, cache)
    max_dist = max((r.distance for r in recs), default=0.0)
    known = set(existing)
    fresh = [r for r in recs if r.I not in known and r.distance > threshold and r.block.b > 0]
    fresh.sort(key=lambda r: (-r.distance, r.I))
    return SeparationResult(fresh[:max_new], max_dist, len(cands))


def select_escs(X: np.ndarray, problem: Problem | str, g: WeightedGraph, k: int, max_new: int,
                existing: Iterable[tuple[int, ...]] = (), seed: int = 0,
                n_candidates: int | None = None, threshold: float = DEFAULT_THRESHOLD,
                cache: AtomCache | None = None) -> list[EscBlock]:
    """Blocks of the most violated new ESCs, in descending distance order."""
    res = separate(X, problem, g, k, max_new, existing, seed, n_candidates, threshold, cache)
    return [r.block for r in res.selected]
