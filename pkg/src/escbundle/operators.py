"""Linear maps attached to exact subgraph constraints.

For a block on vertex set ``I`` the ESC reads
``extract(sum_i lambda_i C_i - X_I) = 0`` with ``lambda`` in the simplex.
``extract`` reads the ``b_I`` listed entries of a symmetric matrix and
``embed`` is its adjoint under the trace inner product, so off-diagonal
positions receive half of their coordinate in each symmetric slot.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Iterable, Sequence

import numpy as np

from .atlas import AtomCache, AtomSet, Problem, atoms_for
from .graph import WeightedGraph, induced_subgraph, vertex_subset


def positions_for(problem: Problem | str, g_I: WeightedGraph) -> tuple[tuple[int, int], ...]:
    """Entries ``(p, q)``, ``p <= q``, that carry an equality constraint, lexicographic."""
    problem = Problem(problem)
    k = g_I.n
    if k < 2:
        raise ValueError("subgraph order must be at least 2")
    A = g_I.adjacency()
    out = []
    for p in range(k):
        for q in range(p, k):
            if p == q:
                if problem is Problem.STABLESET:
                    out.append((p, q))
            elif problem is Problem.MAXCUT or not A[p, q]:
                out.append((p, q))
    return tuple(out)


def expected_b(problem: Problem | str, k: int, m_I: int) -> int:
    problem = Problem(problem)
    if problem is Problem.MAXCUT:
        return comb(k, 2)
    if problem is Problem.STABLESET:
        return comb(k + 1, 2) - m_I
    return comb(k, 2) - m_I


@dataclass(frozen=True, eq=False)
class EscBlock:
    """One exact subgraph constraint.

    ``coords`` is the ``(b_I, t_I)`` matrix whose columns are
    ``extract(C_i)``; ``apply_D`` is then ``coords.T @ y_I``.
    """

    I: tuple[int, ...]
    problem: Problem
    atoms: AtomSet
    positions: tuple[tuple[int, int], ...]
    m_I: int
    coords: np.ndarray = field(repr=False)

    @property
    def k(self) -> int:
        return len(self.I)

    @property
    def b(self) -> int:
        return len(self.positions)

    @property
    def t(self) -> int:
        return self.atoms.t


_COORDS: dict[tuple[AtomSet, tuple], np.ndarray] = {}


def make_block(problem: Problem | str, g: WeightedGraph, I: Iterable[int],
               cache: AtomCache | None = None) -> EscBlock:
    problem = Problem(problem)
    I = vertex_subset(I, g.n)
    g_I = induced_subgraph(g, I)
    atoms = atoms_for(problem, g_I, cache)
    positions = positions_for(problem, g_I)
    key = (atoms, positions)
    coords = _COORDS.get(key)
    if coords is None:
        P = np.array([p for p, _ in positions], dtype=np.int64)
        Q = np.array([q for _, q in positions], dtype=np.int64)
        coords = atoms.atoms[:, P, Q].T.copy()
        coords.setflags(write=False)
        _COORDS[key] = coords
    return EscBlock(I, problem, atoms, positions, g_I.m, coords)


def extract(block: EscBlock, S: np.ndarray) -> np.ndarray:
    """Read the constrained entries of a symmetric ``k x k`` matrix."""
    if not block.positions:
        return np.zeros(0)
    P, Q = zip(*block.positions)
    return np.asarray(S, dtype=float)[list(P), list(Q)]


def embed(block: EscBlock, y: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`extract`: a symmetric ``k x k`` matrix."""
    y = np.asarray(y, dtype=float)
    if y.shape != (block.b,):
        raise ValueError(f"expected {block.b} multipliers, got shape {y.shape}")
    M = np.zeros((block.k, block.k))
    for (p, q), v in zip(block.positions, y):
        if p == q:
            M[p, p] += v
        else:
            M[p, q] += v / 2
            M[q, p] += v / 2
    return M


def apply_D(block: EscBlock, y: np.ndarray) -> np.ndarray:
    """``[<embed(y), C_i>]_i`` for every atom ``C_i``."""
    return block.coords.T @ np.asarray(y, dtype=float)


def shifted_cost(C: np.ndarray, y: np.ndarray, blocks: Sequence[EscBlock], offset: int = 0) -> np.ndarray:
    """``C - sum_I P_I^T embed(y_I)``.

    ``offset`` is the row/column index where the ``n x n`` block of the SDP
    variable starts (1 for the arrow-shaped stable set and coloring models).
    """
    out = np.array(C, dtype=float, copy=True)
    at = 0
    for blk in blocks:
        idx = np.asarray(blk.I) + offset
        out[np.ix_(idx, idx)] -= embed(blk, y[at:at + blk.b])
        at += blk.b
    if at != len(y):
        raise ValueError(f"multiplier vector has length {len(y)}, blocks need {at}")
    return out


class EscSystem:
    """The registered set J of blocks together with the layout of ``y``.

    Holds vectorised index arrays so that the oracle shift, the subgradient
    and all max-terms are computed without Python loops over blocks. Blocks
    sharing an atom set are grouped for batched ``D`` evaluations.
    """

    def __init__(self, problem: Problem | str, graph: WeightedGraph,
                 blocks: Sequence[EscBlock] = (), offset: int = 0):
        self.problem = Problem(problem)
        self.graph = graph
        self.offset = offset
        self.blocks: list[EscBlock] = []
        self._subsets: set[tuple[int, ...]] = set()
        for blk in blocks:
            self._register(blk)
        self._build()

    def _register(self, blk: EscBlock):
        if blk.problem is not self.problem:
            raise ValueError("block problem does not match the system")
        if blk.I in self._subsets:
            raise ValueError(f"vertex set {blk.I} already registered")
        self._subsets.add(blk.I)
        self.blocks.append(blk)

    def _build(self):
        sizes = [blk.b for blk in self.blocks]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        self.toffsets = np.concatenate([[0], np.cumsum([blk.t for blk in self.blocks])]).astype(np.int64)
        rows, cols, diag = [], [], []
        for blk in self.blocks:
            I = np.asarray(blk.I) + self.offset
            P = np.array([p for p, _ in blk.positions], dtype=np.int64)
            Q = np.array([q for _, q in blk.positions], dtype=np.int64)
            rows.append(I[P])
            cols.append(I[Q])
            diag.append(P == Q)
        if rows:
            self.rows = np.concatenate(rows)
            self.cols = np.concatenate(cols)
            self.is_diag = np.concatenate(diag)
        else:
            self.rows = self.cols = np.zeros(0, dtype=np.int64)
            self.is_diag = np.zeros(0, dtype=bool)
        groups: dict[int, list[int]] = {}
        for idx, blk in enumerate(self.blocks):
            groups.setdefault(id(blk.coords), []).append(idx)
        self.groups = []
        for members in groups.values():
            coords = self.blocks[members[0]].coords
            starts = self.offsets[members]
            seg = starts[:, None] + np.arange(coords.shape[0])[None, :]
            lseg = self.toffsets[members][:, None] + np.arange(coords.shape[1])[None, :]
            self.groups.append(BlockGroup(np.asarray(members), coords, seg, lseg))

    def add(self, blocks: Iterable[EscBlock]) -> "EscSystem":
        """New system with ``blocks`` appended (existing layout is preserved as a prefix)."""
        out = EscSystem(self.problem, self.graph, self.blocks, self.offset)
        for blk in blocks:
            out._register(blk)
        out._build()
        return out

    def __len__(self):
        return len(self.blocks)

    @property
    def q(self) -> int:
        return len(self.blocks)

    @property
    def b(self) -> int:
        return int(self.offsets[-1])

    @property
    def t(self) -> int:
        """Total number of atoms, i.e. of simplex multipliers."""
        return int(self.toffsets[-1])

    @property
    def subsets(self) -> frozenset:
        return frozenset(self._subsets)

    def segment(self, y: np.ndarray, i: int) -> np.ndarray:
        return y[self.offsets[i]:self.offsets[i + 1]]

    def pad(self, y: np.ndarray) -> np.ndarray:
        """Extend a multiplier vector of a prefix system with zeros."""
        out = np.zeros(self.b)
        out[:len(y)] = y
        return out

    def shift(self, y: np.ndarray, d: int) -> np.ndarray:
        """Dense ``sum_I P_I^T embed(y_I)`` of size ``d x d``."""
        S = np.zeros((d, d))
        if self.b == 0:
            return S
        half = np.where(self.is_diag, y, y / 2)
        np.add.at(S, (self.rows, self.cols), half)
        off = ~self.is_diag
        np.add.at(S, (self.cols[off], self.rows[off]), half[off])
        return S

    def gather(self, X: np.ndarray) -> np.ndarray:
        """Concatenated ``extract(P_I(X))`` over all blocks."""
        return X[self.rows, self.cols]

    def max_terms(self, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per block ``max_i [D_I(y_I)]_i`` and the lowest maximising atom index."""
        vals = np.zeros(self.q)
        arg = np.zeros(self.q, dtype=np.int64)
        for grp in self.groups:
            D = y[grp.seg] @ grp.coords
            arg[grp.members] = np.argmax(D, axis=1)
            vals[grp.members] = D[np.arange(len(grp.members)), arg[grp.members]]
        return vals, arg


@dataclass(frozen=True)
class BlockGroup:
    """Blocks sharing one coordinate matrix.

    ``seg[r]`` indexes block ``members[r]`` inside ``y`` and ``lseg[r]``
    its atom weights inside the concatenated simplex multipliers.
    """

    members: np.ndarray
    coords: np.ndarray
    seg: np.ndarray
    lseg: np.ndarray
