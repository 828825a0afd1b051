"""Basic SDP relaxations, a dense primal-dual interior-point solver and the dual oracle h(y).

All three relaxations are posed as ``max <C, Y> s.t. A(Y) = b, Y psd``.
Constraints are stored as *terms*: a term ``(i, p, q, c)`` with ``p <= q``
adds ``c * Y[p, q]`` to ``<A_i, Y>``, i.e. ``A_i`` carries ``c`` on the
diagonal or ``c/2`` in both off-diagonal slots.

The stable set and coloring models also admit an explicit parametrisation
``Y = F0 + sum_k v_k F_k`` of their affine hull. When it has fewer free
variables than there are constraints (dense graphs), the solver works on
that side instead; the Schur complement is then indexed by the free
variables.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .atlas import Problem
from .graph import WeightedGraph, laplacian
from .operators import EscSystem

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Terms:
    """Sparse list of symmetric unit-matrix terms ``(row, p, q, coef)`` with ``p <= q``."""

    row: np.ndarray
    p: np.ndarray
    q: np.ndarray
    coef: np.ndarray
    m: int

    @classmethod
    def from_list(cls, entries, m: int) -> "Terms":
        if entries:
            r, p, q, c = map(np.asarray, zip(*entries))
        else:
            r = p = q = np.zeros(0, dtype=np.int64)
            c = np.zeros(0)
        lo, hi = np.minimum(p, q), np.maximum(p, q)
        return cls(r.astype(np.int64), lo.astype(np.int64), hi.astype(np.int64), c.astype(float), m)

    def apply(self, Y: np.ndarray) -> np.ndarray:
        """``[<A_i, Y>]_i`` for symmetric ``Y``."""
        return np.bincount(self.row, self.coef * Y[self.p, self.q], minlength=self.m)

    def adjoint(self, u: np.ndarray, d: int) -> np.ndarray:
        """``sum_i u_i A_i`` as a dense symmetric matrix."""
        M = np.zeros((d, d))
        half = 0.5 * self.coef * u[self.row]
        np.add.at(M, (self.p, self.q), half)
        np.add.at(M, (self.q, self.p), half)
        return M

    def selector(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.coef, (self.row, np.arange(len(self.row)))),
                             shape=(self.m, len(self.row)))

    def schur(self, X: np.ndarray, Zi: np.ndarray, S: sp.csr_matrix | None = None) -> np.ndarray:
        """``M_ij = tr(A_i X A_j Z^{-1})`` assembled term by term."""
        p, q = self.p, self.q
        Xp, Xq = X[p], X[q]
        Zp, Zq = Zi[p], Zi[q]
        Xpq = Xp[:, q]
        Zpq = Zp[:, q]
        K = Xq[:, q] * Zp[:, p]
        K += Xp[:, p] * Zq[:, q]
        K += Xpq.T * Zpq
        K += Xpq * Zpq.T
        K *= 0.25
        if S is None:
            S = self.selector()
        M = S @ (S @ K.T).T
        return 0.5 * (M + M.T)

    def svec_rows(self, d: int) -> sp.csr_matrix:
        """Sparse ``svec`` representation; row products give ``<A_i, A_j>``."""
        col = self.p * d + self.q
        scale = np.where(self.p == self.q, 1.0, np.sqrt(0.5))
        return sp.csr_matrix((self.coef * scale, (self.row, col)), shape=(self.m, d * d))


@dataclass(frozen=True)
class FreeForm:
    """Parametrisation ``Y = F0 + sum_k v_k F_k``; ``entries`` lists ``(k, p, q, value)``."""

    F0: np.ndarray
    var: np.ndarray
    p: np.ndarray
    q: np.ndarray
    val: np.ndarray
    nvar: int

    def assemble(self, v: np.ndarray) -> np.ndarray:
        Y = self.F0.copy()
        vals = self.val * v[self.var]
        np.add.at(Y, (self.p, self.q), vals)
        off = self.p != self.q
        np.add.at(Y, (self.q[off], self.p[off]), vals[off])
        return Y

    def as_terms(self) -> Terms:
        """Terms of ``-F_k`` in the constraint convention."""
        coef = -self.val * np.where(self.p == self.q, 1.0, 2.0)
        return Terms(self.var, self.p, self.q, coef, self.nvar)


@dataclass(frozen=True)
class SdpProblem:
    """``max <C, Y> s.t. A(Y) = b, Y psd`` with ``Y`` of order ``d``.

    ``offset`` is where the ``n x n`` block X starts inside ``Y``.
    ``repair`` names how a slightly indefinite dual slack is turned into a
    certified upper bound: ``trace`` uses ``tr(Y) <= trace_bound``;
    ``diag_schur`` shifts the multipliers of ``diag(X) = 1``.
    """

    C: np.ndarray
    terms: Terms
    b: np.ndarray
    problem: Problem | None = None
    n: int = 0
    offset: int = 0
    free: FreeForm | None = None
    repair: str | None = None
    trace_bound: float | None = None
    name: str = ""

    @property
    def d(self) -> int:
        return self.C.shape[0]

    @property
    def m(self) -> int:
        return self.terms.m

    def with_cost(self, C: np.ndarray) -> "SdpProblem":
        return replace(self, C=C)


@dataclass
class OracleResult:
    """Outcome of one SDP solve.

    ``value`` is a certified upper bound on the optimum (dual objective plus
    an eigenvalue repair), ``primal_value`` is ``<C, X>`` at the returned
    maximiser. ``g`` holds the concatenated subgradients when an
    :class:`EscSystem` was supplied.
    """

    value: float
    primal_value: float
    dual_value: float
    X: np.ndarray
    u: np.ndarray
    g: np.ndarray | None
    pinf: float
    dinf: float
    relgap: float
    converged: bool
    iterations: int
    form: str
    seconds: float = 0.0
    min_eig_repair: float = 0.0


# ---------------------------------------------------------------- builders

def build_basic(problem: Problem | str, g: WeightedGraph) -> SdpProblem:
    """Basic relaxation: elliptope for Max-Cut, theta body, or the coloring spectrahedron."""
    problem = Problem(problem)
    n = g.n
    edges = g.edge_array()
    A = g.adjacency()
    nonedges = [(i, j) for i in range(n) for j in range(i + 1, n) if not A[i, j]]
    if problem is Problem.MAXCUT:
        terms = Terms.from_list([(i, i, i, 1.0) for i in range(n)], n)
        F0 = np.eye(n)
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        free = _free_form(F0, [[(i, j, 1.0)] for i, j in pairs])
        return SdpProblem(laplacian(g), terms, np.ones(n), problem, n, 0, free,
                          "trace", float(n), g.name)
    d = n + 1
    if problem is Problem.STABLESET:
        C = np.zeros((d, d))
        C[np.arange(1, d), np.arange(1, d)] = 1.0
        ent = [(0, 0, 0, 1.0)]
        ent += [(1 + i, 1 + i, 1 + i, 1.0) for i in range(n)]
        ent += [(1 + i, 0, 1 + i, -1.0) for i in range(n)]
        ent += [(1 + n + e, 1 + i, 1 + j, 1.0) for e, (i, j) in enumerate(edges)]
        b = np.zeros(1 + n + len(edges))
        b[0] = 1.0
        F0 = np.zeros((d, d))
        F0[0, 0] = 1.0
        cols = [[(0, 1 + i, 1.0), (1 + i, 1 + i, 1.0)] for i in range(n)]
        cols += [[(1 + i, 1 + j, 1.0)] for i, j in nonedges]
        return SdpProblem(C, Terms.from_list(ent, len(b)), b, problem, n, 1,
                          _free_form(F0, cols), "trace", float(n + 1), g.name)
    C = np.zeros((d, d))
    C[0, 0] = -1.0
    ent = [(i, 0, 1 + i, 1.0) for i in range(n)]
    ent += [(n + i, 1 + i, 1 + i, 1.0) for i in range(n)]
    ent += [(2 * n + e, 1 + i, 1 + j, 1.0) for e, (i, j) in enumerate(edges)]
    b = np.concatenate([np.ones(2 * n), np.zeros(len(edges))])
    F0 = np.zeros((d, d))
    F0[0, 1:] = F0[1:, 0] = 1.0
    F0[np.arange(1, d), np.arange(1, d)] = 1.0
    cols = [[(0, 0, 1.0)]] + [[(1 + i, 1 + j, 1.0)] for i, j in nonedges]
    return SdpProblem(C, Terms.from_list(ent, len(b)), b, problem, n, 1,
                      _free_form(F0, cols), "diag_schur", None, g.name)


def _free_form(F0: np.ndarray, cols) -> FreeForm:
    ent = [(k, p, q, v) for k, col in enumerate(cols) for p, q, v in col]
    if ent:
        k, p, q, v = map(np.asarray, zip(*ent))
    else:
        k = p = q = np.zeros(0, dtype=np.int64)
        v = np.zeros(0)
    return FreeForm(F0, k.astype(np.int64), p.astype(np.int64), q.astype(np.int64),
                    v.astype(float), len(cols))


def natural_value(problem: Problem | str | None, value: float) -> float:
    """Convert a max-form value to the problem's own objective.

    Max-Cut values ``<L, X>`` are four times a cut weight; coloring is a
    minimisation posed as ``max -t``.
    """
    if problem is None:
        return value
    problem = Problem(problem)
    if problem is Problem.MAXCUT:
        return value / 4.0
    if problem is Problem.COLORING:
        return -value
    return value


# ---------------------------------------------------------------- interior point

@dataclass
class _IpmOut:
    X: np.ndarray
    u: np.ndarray
    Z: np.ndarray
    pobj: float
    dobj: float
    pinf: float
    dinf: float
    relgap: float
    converged: bool
    iterations: int


def _max_step(X: np.ndarray, dX: np.ndarray) -> float:
    try:
        L = np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        return 0.0
    T = sla.solve_triangular(L, dX, lower=True)
    T = sla.solve_triangular(L, T.T, lower=True)
    lam = sla.eigvalsh(0.5 * (T + T.T), subset_by_index=[0, 0])[0]
    return np.inf if lam >= 0 else -1.0 / lam


def _inv_psd(Z: np.ndarray) -> np.ndarray:
    c = sla.cho_factor(Z, lower=True)
    return sla.cho_solve(c, np.eye(Z.shape[0]))


def _sym(M):
    return 0.5 * (M + M.T)


def hkm_ipm(C: np.ndarray, terms: Terms, b: np.ndarray, tol: float = 1e-8,
            max_iter: int = 100) -> _IpmOut:
    """Infeasible primal-dual path following with HKM direction and Mehrotra correction.

    Solves ``min <C, X> s.t. A(X) = b, X psd`` and its dual
    ``max b'u s.t. C - A^T u = Z psd``.
    """
    d = C.shape[0]
    m = terms.m
    S = terms.selector()
    normb = np.linalg.norm(b)
    normC = np.linalg.norm(C)
    Anorm = np.sqrt(np.bincount(terms.row, terms.coef ** 2 * np.where(terms.p == terms.q, 1.0, 0.5),
                                minlength=m))
    xi = max(10.0, np.sqrt(d), d * np.max((1 + np.abs(b)) / (1 + Anorm), initial=1.0))
    eta = max(10.0, np.sqrt(d), np.max(Anorm, initial=0.0), normC)
    X = xi * np.eye(d)
    Z = eta * np.eye(d)
    u = np.zeros(m)
    converged = False
    it = 0
    pobj = dobj = 0.0
    pinf = dinf = relgap = np.inf
    best = None
    for it in range(1, max_iter + 1):
        Rp = b - terms.apply(X)
        Rd = C - Z - terms.adjoint(u, d)
        pobj = float(np.vdot(C, X))
        dobj = float(b @ u)
        gap = float(np.vdot(X, Z))
        mu = gap / d
        relgap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
        pinf = np.linalg.norm(Rp) / (1 + normb)
        dinf = np.linalg.norm(Rd) / (1 + normC)
        score = max(relgap, pinf, dinf)
        if best is None or score < best[0]:
            best = (score, X.copy(), u.copy(), Z.copy(), pobj, dobj, pinf, dinf, relgap)
        if score <= tol:
            converged = True
            break
        try:
            Zi = _inv_psd(Z)
        except np.linalg.LinAlgError:
            break
        M = terms.schur(X, Zi, S)
        try:
            Mc = sla.cho_factor(M, lower=True)
            solve = lambda r: sla.cho_solve(Mc, r)
        except np.linalg.LinAlgError:
            reg = 1e-13 * max(1.0, np.abs(np.diag(M)).max())
            try:
                Mc = sla.cho_factor(M + reg * np.eye(m), lower=True)
                solve = lambda r: sla.cho_solve(Mc, r)
            except np.linalg.LinAlgError:
                solve = lambda r: np.linalg.lstsq(M, r, rcond=None)[0]
        XRdZi = X @ Rd @ Zi

        def direction(R):
            rhs = Rp - terms.apply(_sym(R - XRdZi))
            du = solve(rhs)
            dZ = Rd - terms.adjoint(du, d)
            dX = _sym(R - X @ dZ @ Zi)
            return dX, du, dZ

        dX, du, dZ = direction(-X)
        ap = min(1.0, _max_step(X, dX))
        ad = min(1.0, _max_step(Z, dZ))
        nxt = float(np.vdot(X + ap * dX, Z + ad * dZ))
        expon = max(1.0, 3 * min(ap, ad) ** 2)
        sigma = min(1.0, (nxt / gap) ** expon)
        R = sigma * mu * Zi - X - dX @ dZ @ Zi
        dX, du, dZ = direction(R)
        gamma = 0.9 + 0.09 * min(ap, ad)
        ap = min(1.0, gamma * _max_step(X, dX))
        ad = min(1.0, gamma * _max_step(Z, dZ))
        if ap < 1e-12 and ad < 1e-12:
            break
        X = X + ap * dX
        u = u + ad * du
        Z = Z + ad * dZ
    else:
        it = max_iter
    if not converged and best is not None:
        _, X, u, Z, pobj, dobj, pinf, dinf, relgap = best
    return _IpmOut(X, u, Z, pobj, dobj, pinf, dinf, relgap, converged, it)


# ---------------------------------------------------------------- oracle

def _choose_form(p: SdpProblem, form: str) -> str:
    if form != "auto":
        if form == "free" and p.free is None:
            raise ValueError("problem has no free-variable parametrisation")
        return form
    if p.free is not None and p.free.nvar < p.m:
        return "free"
    return "constraint"


def _multipliers_from_slack(p: SdpProblem, R: np.ndarray) -> np.ndarray:
    """Least-squares ``u`` with ``sum_i u_i A_i ~ R``."""
    d = p.d
    A = p.terms.svec_rows(d)
    scale = np.where(np.eye(d, dtype=bool), 1.0, np.sqrt(2.0)).ravel()
    rhs_vec = np.triu(R).ravel() * scale
    lhs = (A @ A.T).tocsc()
    rhs = A @ rhs_vec
    return np.atleast_1d(spla.spsolve(lhs, rhs))


def _certify(p: SdpProblem, C: np.ndarray, u: np.ndarray) -> tuple[float, float]:
    """Certified upper bound from multipliers ``u`` and the repair used."""
    Z = p.terms.adjoint(u, p.d) - C
    lam = float(sla.eigvalsh(Z, subset_by_index=[0, 0])[0])
    base = float(p.b @ u)
    if lam >= 0:
        return base, 0.0
    if p.repair == "trace" and p.trace_bound is not None:
        return base + p.trace_bound * (-lam), -lam
    if p.repair == "diag_schur" and Z[0, 0] > 0:
        z = Z[1:, 0]
        S = Z[1:, 1:] - np.outer(z, z) / Z[0, 0]
        delta = max(0.0, -float(sla.eigvalsh(S, subset_by_index=[0, 0])[0]))
        return base + p.n * delta, delta
    return base, -lam


def solve(p: SdpProblem, tol: float = 1e-8, form: str = "auto", max_iter: int = 100) -> OracleResult:
    """Solve the SDP ``p``; ``value`` is a certified upper bound on its optimum."""
    t0 = time.perf_counter()
    form = _choose_form(p, form)
    C = p.C
    if form == "constraint":
        out = hkm_ipm(-C, p.terms, p.b, tol, max_iter)
        X = out.X
        u = -out.u
    else:
        fr = p.free
        cvec = _free_costs(fr, C)
        out = hkm_ipm(fr.F0, fr.as_terms(), cvec, tol, max_iter)
        X = fr.assemble(out.u)
        u = _multipliers_from_slack(p, out.X + C)
    value, repair = _certify(p, C, u)
    primal = float(np.vdot(C, X))
    if not out.converged:
        log.warning("SDP solve did not converge (pinf=%.2e dinf=%.2e gap=%.2e)", out.pinf, out.dinf, out.relgap)
    return OracleResult(value, primal, float(p.b @ u), X, u, None, out.pinf, out.dinf, out.relgap,
                        out.converged, out.iterations, form, time.perf_counter() - t0, repair)


def _free_costs(fr: FreeForm, C: np.ndarray) -> np.ndarray:
    w = np.where(fr.p == fr.q, 1.0, 2.0)
    return np.bincount(fr.var, fr.val * w * C[fr.p, fr.q], minlength=fr.nvar)


def evaluate_h(y: np.ndarray, system: EscSystem, base: SdpProblem, tol: float = 1e-6,
               form: str = "auto") -> OracleResult:
    """``h(y) = max_{X} <C - sum_I P_I^T M_I(y_I), X>`` with subgradient ``-M_I^T P_I(X*)``."""
    y = np.asarray(y, dtype=float)
    if y.shape != (system.b,):
        raise ValueError(f"y has shape {y.shape}, system expects ({system.b},)")
    if system.b:
        p = base.with_cost(base.C - system.shift(y, base.d))
    else:
        p = base
    res = solve(p, tol, form)
    res.g = -system.gather(res.X)
    return res


def write_sdpa(p: SdpProblem, path) -> None:
    """Dump in SDPA sparse format (``max <F0, Y> s.t. <F_i, Y> = c_i``)."""
    lines = [f"{p.m}", "1", f"{p.d}", " ".join(repr(float(v)) for v in p.b)]
    iu = np.triu_indices(p.d)
    for i, j in zip(*iu):
        if p.C[i, j] != 0:
            lines.append(f"0 1 {i + 1} {j + 1} {p.C[i, j]!r}")
    t = p.terms
    for r, i, j, c in zip(t.row, t.p, t.q, t.coef):
        val = c if i == j else c / 2
        lines.append(f"{r + 1} 1 {i + 1} {j + 1} {val!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
