"""Atom matrices of small subgraphs: cut, stable set and coloring matrices.

Atoms are the vertices of CUT_k, STAB^2(G_I) and COL(G_I); the exact
subgraph constraint asks X_I to be a convex combination of them. Every
enumeration has a fixed order so that multiplier indices are reproducible:

* cuts by a binary counter over c_2..c_k (c_1 = +1, bit j set means c_{j+2} = -1),
* stable sets by ascending subset bitmask (empty set first),
* coloring partitions by restricted-growth string in lexicographic order.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .graph import CANONICAL_MAX_ORDER, WeightedGraph, canonical_form, edge_mask

# Subgraphs up to order 8 are used by separation; orders 9 and 10 are only
# reached by the exhaustive block I = N in small verification runs.
MAX_ORDER = 10


class Problem(str, Enum):
    MAXCUT = "maxcut"
    STABLESET = "stableset"
    COLORING = "coloring"


@dataclass(frozen=True, eq=False)
class AtomSet:
    """Atoms of one polytope, stacked as a ``(t, k, k)`` array.

    ``generators`` records what produced each atom: the sign vector for cuts,
    the subset bitmask for stable sets, the restricted-growth string for
    colorings.
    """

    problem: Problem
    k: int
    atoms: np.ndarray
    generators: tuple

    @property
    def t(self) -> int:
        return self.atoms.shape[0]

    def __eq__(self, other):
        if not isinstance(other, AtomSet):
            return NotImplemented
        return (self.problem == other.problem and self.k == other.k
                and self.generators == other.generators
                and np.array_equal(self.atoms, other.atoms))

    def __hash__(self):
        return hash((self.problem, self.k, self.generators))


def _check_order(k: int):
    if not 1 <= k <= MAX_ORDER:
        raise ValueError(f"subgraph order {k} outside [1, {MAX_ORDER}]")


def cut_matrices(k: int) -> AtomSet:
    """All ``2^(k-1)`` cut matrices ``cc^T`` of order ``k`` (``c_1 = +1``)."""
    if not 2 <= k <= MAX_ORDER:
        raise ValueError(f"cut order {k} outside [2, {MAX_ORDER}]")
    counter = np.arange(2 ** (k - 1))
    bits = (counter[:, None] >> np.arange(k - 1)) & 1
    C = np.ones((len(counter), k))
    C[:, 1:] = 1 - 2 * bits
    atoms = np.einsum("ti,tj->tij", C, C)
    gens = tuple(tuple(int(x) for x in c) for c in C)
    return AtomSet(Problem.MAXCUT, k, atoms, gens)


def _stable_masks(A: np.ndarray) -> list[int]:
    k = A.shape[0]
    nbr = [int(sum(1 << j for j in range(k) if A[i, j])) for i in range(k)]
    out = []
    for s in range(1 << k):
        ok = True
        rest = s
        while rest:
            i = (rest & -rest).bit_length() - 1
            if nbr[i] & s:
                ok = False
                break
            rest &= rest - 1
        if ok:
            out.append(s)
    return out


def stable_set_matrices(g: WeightedGraph) -> AtomSet:
    """One atom ``ss^T`` per stable set of ``g``, including the empty set."""
    k = g.n
    _check_order(k)
    masks = _stable_masks(g.adjacency())
    S = ((np.array(masks)[:, None] >> np.arange(k)) & 1).astype(float)
    atoms = np.einsum("ti,tj->tij", S, S)
    return AtomSet(Problem.STABLESET, k, atoms, tuple(masks))


def _stable_partitions(A: np.ndarray) -> list[tuple[int, ...]]:
    """Restricted-growth strings of all partitions into stable blocks, lexicographic."""
    k = A.shape[0]
    out: list[tuple[int, ...]] = []
    labels = [0] * k
    blocks: list[list[int]] = []

    def place(v: int):
        if v == k:
            out.append(tuple(labels))
            return
        for b, members in enumerate(blocks):
            if not any(A[v, u] for u in members):
                labels[v] = b
                members.append(v)
                place(v + 1)
                members.pop()
        labels[v] = len(blocks)
        blocks.append([v])
        place(v + 1)
        blocks.pop()

    if k:
        place(0)
    return out


def _partition_matrix(rgs: tuple[int, ...]) -> np.ndarray:
    r = np.asarray(rgs)
    return (r[:, None] == r[None, :]).astype(float)


def coloring_matrices(g: WeightedGraph) -> AtomSet:
    """One atom ``SS^T`` per partition of the vertices into stable sets."""
    k = g.n
    _check_order(k)
    parts = _stable_partitions(g.adjacency())
    atoms = np.array([_partition_matrix(p) for p in parts]).reshape(len(parts), k, k)
    seen = set()
    for a in atoms:
        key = a.tobytes()
        if key in seen:
            raise AssertionError("distinct partitions produced the same coloring matrix")
        seen.add(key)
    return AtomSet(Problem.COLORING, k, atoms, tuple(parts))


_ENUMERATE = {
    Problem.STABLESET: stable_set_matrices,
    Problem.COLORING: coloring_matrices,
}


def _relabel(canon: AtomSet, perm: np.ndarray) -> AtomSet:
    """Transport atoms of the canonical graph back to the original labelling.

    Canonical vertex ``p`` is original vertex ``perm[p]``. The result is
    re-sorted into the order direct enumeration would produce.
    """
    k = canon.k
    inv = np.empty(k, dtype=np.int64)
    inv[perm] = np.arange(k)
    if canon.problem is Problem.STABLESET:
        gens = []
        for s in canon.generators:
            gens.append(sum(1 << int(perm[p]) for p in range(k) if s >> p & 1))
        order = np.argsort(gens, kind="stable")
        gens = [gens[i] for i in order]
        S = ((np.array(gens)[:, None] >> np.arange(k)) & 1).astype(float)
        atoms = np.einsum("ti,tj->tij", S, S)
        return AtomSet(canon.problem, k, atoms, tuple(gens))
    gens = []
    for rgs in canon.generators:
        raw = [rgs[inv[v]] for v in range(k)]
        relabel: dict[int, int] = {}
        gens.append(tuple(relabel.setdefault(b, len(relabel)) for b in raw))
    gens.sort()
    atoms = np.array([_partition_matrix(p) for p in gens]).reshape(len(gens), k, k)
    return AtomSet(canon.problem, k, atoms, tuple(gens))


class AtomCache:
    """Thread-safe memo of atom sets.

    Max-Cut atoms depend only on the order. Stable-set and coloring atoms
    are memoised per labelled edge pattern; a miss is served from a second
    memo keyed by canonical form (orders up to 8) and relabelled, so
    isomorphic subgraphs enumerate only once.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._by_order: dict[int, AtomSet] = {}
        self._by_mask: dict[tuple, AtomSet] = {}
        self._by_canon: dict[tuple, AtomSet] = {}

    def get(self, problem: Problem | str, g: WeightedGraph) -> AtomSet:
        problem = Problem(problem)
        if problem is Problem.MAXCUT:
            with self._lock:
                hit = self._by_order.get(g.n)
            if hit is None:
                hit = cut_matrices(g.n)
                with self._lock:
                    hit = self._by_order.setdefault(g.n, hit)
            return hit
        A = g.adjacency()
        key = (problem, g.n, edge_mask(A))
        with self._lock:
            hit = self._by_mask.get(key)
        if hit is not None:
            return hit
        if g.n <= CANONICAL_MAX_ORDER:
            ckey, perm = canonical_form(g)
            with self._lock:
                canon = self._by_canon.get((problem, ckey))
            if canon is None:
                canon_graph = _graph_from_mask(*ckey)
                canon = _ENUMERATE[problem](canon_graph)
                with self._lock:
                    canon = self._by_canon.setdefault((problem, ckey), canon)
            result = _relabel(canon, perm)
        else:
            result = _ENUMERATE[problem](g)
        with self._lock:
            return self._by_mask.setdefault(key, result)

    def clear(self):
        with self._lock:
            self._by_order.clear()
            self._by_mask.clear()
            self._by_canon.clear()


def _graph_from_mask(k: int, mask: int) -> WeightedGraph:
    P, Q = np.triu_indices(k, 1)
    pairs = [(int(p), int(q)) for b, (p, q) in enumerate(zip(P, Q)) if mask >> b & 1]
    return WeightedGraph.from_edges(k, pairs)


DEFAULT_CACHE = AtomCache()


def atoms_for(problem: Problem | str, g: WeightedGraph, cache: AtomCache | None = None) -> AtomSet:
    """Atoms of the ESC polytope for subgraph ``g``, served from the shared cache."""
    return (cache or DEFAULT_CACHE).get(problem, g)
