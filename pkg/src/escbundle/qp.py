"""Trial-point quadratic program of the proximal bundle method.

The primal problem in ``(y, w, v)`` is

    min  w + sum_I v_I + mu/2 ||y - ybar||^2
    s.t. w   >= hbar - e_j + <g_j, y - ybar>     for every bundle plane j
         v_I >= [D_I(y_I)]_i                      for every block I and atom i

Its Lagrangian dual lives on a product of simplices (one for the planes,
one per block), and ``y = ybar - (G alpha + sum_I B_I lambda_I) / mu``.
The dual is solved by a primal-dual interior-point method whose Newton
systems are reduced block by block: each block contributes a small
``b_I x b_I`` capacitance matrix, after which only an ``(r+1)``-dimensional
system in the plane weights remains.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .operators import EscSystem

log = logging.getLogger(__name__)


class QPError(RuntimeError):
    """The trial-point QP did not reach the requested accuracy."""


@dataclass
class TrialPoint:
    """Solution of the trial QP.

    ``model`` is ``w + sum_I v_I`` at ``y``, the cutting-plane model of the
    dual function; ``gap`` is the primal-dual objective gap of the QP and
    ``stationarity`` the residual of ``mu (y - ybar) + G alpha + B lambda``.
    """

    y: np.ndarray
    w: float
    v: np.ndarray
    model: float
    alpha: np.ndarray
    lam: np.ndarray
    gap: float
    stationarity: float
    iterations: int

    @property
    def kkt_residual(self) -> float:
        return max(self.gap, self.stationarity)


class _Ops:
    """Products with ``K = [G, blkdiag(B_I)]`` and its transpose."""

    def __init__(self, G: np.ndarray, system: EscSystem):
        self.G = G
        self.sys = system
        self.r = G.shape[1]
        self.b = G.shape[0]
        self.n = self.r + system.t

    def K(self, z: np.ndarray) -> np.ndarray:
        out = self.G @ z[:self.r]
        lam = z[self.r:]
        for grp in self.sys.groups:
            out[grp.seg] += lam[grp.lseg] @ grp.coords.T
        return out

    def KT(self, u: np.ndarray) -> np.ndarray:
        out = np.empty(self.n)
        out[:self.r] = self.G.T @ u
        lam = out[self.r:]
        for grp in self.sys.groups:
            lam[grp.lseg] = u[grp.seg] @ grp.coords
        return out


def _simplex_sum(x: np.ndarray, r: int, system: EscSystem) -> np.ndarray:
    """Per-simplex sums: entry 0 for the planes, then one per block."""
    out = np.empty(1 + system.q)
    out[0] = x[:r].sum()
    out[1:] = np.add.reduceat(x[r:], system.toffsets[:-1]) if system.q else []
    return out


def _simplex_expand(nu: np.ndarray, r: int, system: EscSystem) -> np.ndarray:
    sizes = np.diff(system.toffsets)
    return np.concatenate([np.full(r, nu[0]), np.repeat(nu[1:], sizes)])


def solve_trial_qp(ybar: np.ndarray, hbar: float, G: np.ndarray, e: np.ndarray,
                   system: EscSystem, mu: float, tol: float = 1e-11,
                   max_iter: int = 80, refine: int = 3) -> TrialPoint:
    """Minimise the bundle model plus the proximal term.

    ``G`` holds the plane subgradients as columns and ``e`` their
    linearisation errors at ``ybar`` (negative values are clipped to 0).
    """
    ybar = np.asarray(ybar, dtype=float)
    G = np.asarray(G, dtype=float).reshape(len(ybar), -1)
    e = np.maximum(np.asarray(e, dtype=float), 0.0)
    r = G.shape[1]
    if r == 0:
        raise ValueError("bundle is empty")
    ops = _Ops(G, system)
    N = ops.n
    q_vec = np.concatenate([-e, ops.KT(ybar)[r:]]) if system.q else -e.copy()

    def Hz(z):
        return ops.KT(ops.K(z)) / mu

    def objectives(z):
        Kz = ops.K(z)
        dual = hbar + q_vec @ z - Kz @ Kz / (2 * mu)
        y = ybar - Kz / mu
        w = hbar + float(np.max(-e + G.T @ (y - ybar)))
        v = system.max_terms(y)[0] if system.q else np.zeros(0)
        primal = w + v.sum() + 0.5 * mu * float((y - ybar) @ (y - ybar))
        return y, w, v, primal, dual

    sizes = np.concatenate([[r], np.diff(system.toffsets)])
    z = np.concatenate([np.full(s, 1.0 / s) for s in sizes])
    grad = Hz(z) - q_vec
    nu = np.array([grad[:r].min()] + ([*np.minimum.reduceat(grad[r:], system.toffsets[:-1])]
                                       if system.q else [])) - 1.0
    s = grad - _simplex_expand(nu, r, system)

    it = 0
    best = None
    for it in range(1, max_iter + 1):
        y, w, v, primal, dual = objectives(z)
        gap = primal - dual
        scale = 1.0 + abs(primal)
        if best is None or gap < best[0]:
            best = (gap, z.copy(), y, w, v)
        log.debug("qp it %d gap %.3e", it, gap)
        if gap <= tol * scale:
            break
        rd = Hz(z) - q_vec - _simplex_expand(nu, r, system) - s
        rp = _simplex_sum(z, r, system) - 1.0
        mu_c = z @ s / N
        log.debug("qp it %d comp %.3e dual-res %.3e primal-res %.3e", it, mu_c, np.abs(rd).max(), np.abs(rp).max())

        factors = _factor(z, s, G, system, mu)

        Dz = s / z

        def newton(rc):
            r1 = -rd - rc / z
            r2 = -rp
            dz, dnu = _solve_reduced(factors, r1, r2, G, system, mu)
            # iterative refinement against the unreduced Newton system
            for _ in range(refine):
                res1 = r1 - (Hz(dz) + Dz * dz - _simplex_expand(dnu, r, system))
                res2 = r2 - _simplex_sum(dz, r, system)
                if max(np.abs(res1).max(), np.abs(res2).max()) <= 1e-14 * (1 + np.abs(r1).max()):
                    break
                cz, cnu = _solve_reduced(factors, res1, res2, G, system, mu)
                dz += cz
                dnu += cnu
            # slack step from the stationarity row keeps the dual residual linear
            ds = Hz(dz) - _simplex_expand(dnu, r, system) + rd
            return dz, dnu, ds

        dz, dnu, ds = newton(z * s)
        step = min(_ratio(z, dz), _ratio(s, ds))
        mu_aff = (z + step * dz) @ (s + step * ds) / N
        sigma = min(1.0, (mu_aff / mu_c) ** 3)
        dz, dnu, ds = newton(z * s + dz * ds - sigma * mu_c)
        step = min(1.0, 0.995 * min(_ratio(z, dz), _ratio(s, ds)))
        z = z + step * dz
        nu = nu + step * dnu
        s = s + step * ds
    gap, z, y, w, v = best
    if gap > 1e-6 * (1.0 + abs(w + v.sum())):
        raise QPError(f"trial QP stalled after {it} iterations with gap {gap:.3e}")
    if gap > tol * (1.0 + abs(w + v.sum())):
        log.debug("trial QP stopped at gap %.2e after %d iterations", gap, it)
    Kz = ops.K(z)
    stat = float(np.linalg.norm(mu * (y - ybar) + Kz))
    return TrialPoint(y, w, v, w + float(v.sum()), z[:r].copy(), z[r:].copy(), max(gap, 0.0),
                      stat, it)


def _ratio(x: np.ndarray, dx: np.ndarray) -> float:
    neg = dx < 0
    if not neg.any():
        return np.inf
    return float(np.min(-x[neg] / dx[neg]))


# bordered blocks larger than this are LU-factored one by one instead of batch-inverted
_BATCH_INVERSE_MAX = 48


@dataclass
class _GroupFactor:
    Tinv: np.ndarray | None   # inverses of the bordered block matrices, (nm, t+1, t+1)
    lu: list | None           # LU factors for large blocks
    BG: np.ndarray            # B_I^T G_I / mu, (nm, t, r)
    TBG: np.ndarray           # T^{-1}[:, :, :t] @ BG, (nm, t+1, r)

    def apply(self, rhs: np.ndarray) -> np.ndarray:
        """``T_n^{-1} rhs_n`` for every member ``n``."""
        if self.Tinv is not None:
            return np.matmul(self.Tinv, rhs[:, :, None])[:, :, 0]
        return np.stack([f.solve(x) for f, x in zip(self.lu, rhs)])


class _DenseBordered:
    def __init__(self, T: np.ndarray):
        self.lu = sla.lu_factor(T, check_finite=False)

    def solve(self, R: np.ndarray) -> np.ndarray:
        return sla.lu_solve(self.lu, R, check_finite=False)


class _SplitBordered:
    """Solve ``[[D + B'B/mu, -1], [-1', 0]]`` for a block with many atoms.

    Atoms whose barrier weight ``D_i`` is small against the curvature of
    ``B'B/mu`` (the ones carrying weight) are kept in a dense Schur
    complement; the rest are eliminated with the Woodbury identity, which
    is well conditioned for them because ``1/D_i`` stays bounded.
    """

    def __init__(self, d: np.ndarray, B: np.ndarray, mu: float, A: np.ndarray, N: np.ndarray):
        self.t = len(d)
        self.mu = mu
        self.A, self.N = A, N
        self.BA, self.BN = B[:, A], B[:, N]
        self.dA = d[A]
        self.dNi = 1.0 / d[N]
        C = mu * np.eye(B.shape[0]) + (self.BN * self.dNi) @ self.BN.T
        self.C = sla.cho_factor(C, lower=True, check_finite=False)
        SA = np.diag(self.dA) + self.BA.T @ sla.cho_solve(self.C, self.BA, check_finite=False)
        self.SA = sla.cho_factor(SA, lower=True, check_finite=False)
        self.w1 = self._solve_W(np.ones((self.t, 1)))[:, 0]
        self.one_w1 = self.w1.sum()

    def _solve_W(self, F: np.ndarray) -> np.ndarray:
        FA, FN = F[self.A], F[self.N]
        w = self.BN @ (self.dNi[:, None] * FN)
        xA = sla.cho_solve(self.SA, FA - self.BA.T @ sla.cho_solve(self.C, w, check_finite=False),
                           check_finite=False)
        v = FN - self.BN.T @ (self.BA @ xA) / self.mu
        dv = self.dNi[:, None] * v
        xN = dv - self.dNi[:, None] * (self.BN.T @ sla.cho_solve(self.C, self.BN @ dv, check_finite=False))
        x = np.empty_like(F)
        x[self.A] = xA
        x[self.N] = xN
        return x

    def solve(self, R: np.ndarray) -> np.ndarray:
        vec = R.ndim == 1
        R2 = R[:, None] if vec else R
        f, g = R2[:self.t], R2[self.t]
        Wf = self._solve_W(f)
        nu = -(g + Wf.sum(axis=0)) / self.one_w1
        out = np.vstack([Wf + self.w1[:, None] * nu[None, :], nu[None, :]])
        return out[:, 0] if vec else out


def _bordered_solver(d: np.ndarray, B: np.ndarray, mu: float, BtB: np.ndarray):
    scale = np.diag(BtB).max(initial=0.0) / mu
    A = np.flatnonzero(d < max(scale, 1e-300))
    if len(A) == 0:
        A = np.array([int(np.argmin(d))])
    if len(A) > len(d) // 2:
        t = len(d)
        T = np.zeros((t + 1, t + 1))
        T[:t, :t] = BtB / mu
        T[np.arange(t), np.arange(t)] += d
        T[:t, t] = T[t, :t] = -1.0
        return _DenseBordered(T)
    N = np.setdiff1d(np.arange(len(d)), A)
    return _SplitBordered(d, B, mu, A, N)


def _factor(z, s, G, system: EscSystem, mu: float):
    """Eliminate every block's bordered system ``[[D_I + B_I'B_I/mu, -1], [-1', 0]]``."""
    r = G.shape[1]
    D = s / z
    facs = []
    Salpha = np.diag(D[:r])
    covered = np.zeros(G.shape[0], dtype=bool)
    for grp in system.groups:
        B = grp.coords
        t = B.shape[1]
        nm = len(grp.members)
        BtB = B.T @ B
        Dg = D[r:][grp.lseg]
        GI = G[grp.seg]                              # (nm, b, r)
        BG = np.matmul(B.T, GI) / mu                 # (nm, t, r)
        BGpad = np.concatenate([BG, np.zeros((nm, 1, r))], axis=1)
        if t + 1 <= _BATCH_INVERSE_MAX:
            T = np.zeros((nm, t + 1, t + 1))
            T[:, :t, :t] = BtB / mu
            T[:, np.arange(t), np.arange(t)] += Dg
            T[:, :t, t] = -1.0
            T[:, t, :t] = -1.0
            Tinv, lu = np.linalg.inv(T), None
            TBG = np.matmul(Tinv, BGpad)
        else:
            Tinv, lu = None, [_bordered_solver(dn, B, mu, BtB) for dn in Dg]
            TBG = np.stack([f.solve(x) for f, x in zip(lu, BGpad)])
        flatG = GI.reshape(-1, r)
        Salpha += flatG.T @ flatG / mu
        Salpha -= BG.reshape(-1, r).T @ TBG[:, :t].reshape(-1, r)
        covered[grp.seg.ravel()] = True
        facs.append(_GroupFactor(Tinv, lu, BG, TBG))
    free = ~covered
    if free.any():
        Salpha += G[free].T @ G[free] / mu
    return Salpha, facs


def _solve_reduced(factors, r1, r2, G, system: EscSystem, mu: float):
    Salpha, facs = factors
    r = G.shape[1]
    lam1 = r1[r:]
    rhs_a = r1[:r].copy()
    cache = []
    for grp, f in zip(system.groups, facs):
        t = grp.coords.shape[1]
        rhs = np.concatenate([lam1[grp.lseg], -r2[1 + grp.members][:, None]], axis=1)
        Tr = f.apply(rhs)
        rhs_a -= f.BG.reshape(-1, r).T @ Tr[:, :t].ravel()
        cache.append(Tr)
    A = np.zeros((r + 1, r + 1))
    A[:r, :r] = Salpha
    A[:r, r] = -1.0
    A[r, :r] = -1.0
    sol = np.linalg.solve(A, np.concatenate([rhs_a, [-r2[0]]]))
    da = sol[:r]
    dnu = np.empty(1 + system.q)
    dnu[0] = sol[r]
    dz = np.empty_like(r1)
    dz[:r] = da
    lam = dz[r:]
    for grp, f, Tr in zip(system.groups, facs, cache):
        t = grp.coords.shape[1]
        x = Tr - f.TBG @ da
        lam[grp.lseg] = x[:, :t]
        dnu[1 + grp.members] = x[:, t]
    return dz, dnu
