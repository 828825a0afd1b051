"""Graphs, instance parsers and small-graph canonical forms.

Vertices are 0-based everywhere inside the package. The DIMACS and rudy
readers/writers are the only places that see 1-based indices.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

CANONICAL_MAX_ORDER = 8


class ParseError(ValueError):
    """Malformed instance file; ``line`` is 1-based (0 when not line-specific)."""

    def __init__(self, message: str, line: int = 0):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass(frozen=True)
class WeightedGraph:
    """Undirected graph on vertices ``0..n-1`` with real edge weights.

    ``edges`` holds ``(i, j, w)`` with ``i < j``, sorted, without duplicates.
    Unweighted problems use ``w = 1.0``.
    """

    n: int
    edges: tuple[tuple[int, int, float], ...] = ()
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("vertex count must be non-negative")
        seen = set()
        clean = []
        for i, j, w in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop at vertex {i}")
            if i > j:
                i, j = j, i
            if i < 0 or j >= self.n:
                raise ValueError(f"edge ({i}, {j}) out of range for n={self.n}")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge ({i}, {j})")
            seen.add((i, j))
            clean.append((i, j, float(w)))
        object.__setattr__(self, "edges", tuple(sorted(clean)))

    @classmethod
    def from_edges(cls, n: int, pairs: Iterable[Sequence], name: str = "") -> "WeightedGraph":
        """Build from ``(i, j)`` or ``(i, j, w)`` tuples; duplicates are merged (weights summed)."""
        acc: dict[tuple[int, int], float] = {}
        for e in pairs:
            i, j = int(e[0]), int(e[1])
            w = float(e[2]) if len(e) > 2 else 1.0
            key = (min(i, j), max(i, j))
            acc[key] = acc.get(key, 0.0) + w
        return cls(n, tuple((i, j, w) for (i, j), w in acc.items()), name)

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def is_unweighted(self) -> bool:
        return all(w == 1.0 for _, _, w in self.edges)

    def edge_array(self) -> np.ndarray:
        """``(m, 2)`` int array of endpoints."""
        if not self.edges:
            return np.zeros((0, 2), dtype=np.int64)
        return np.array([(i, j) for i, j, _ in self.edges], dtype=np.int64)

    def adjacency(self) -> np.ndarray:
        """Boolean adjacency matrix."""
        A = np.zeros((self.n, self.n), dtype=bool)
        e = self.edge_array()
        A[e[:, 0], e[:, 1]] = True
        A[e[:, 1], e[:, 0]] = True
        return A

    def weight_matrix(self) -> np.ndarray:
        W = np.zeros((self.n, self.n))
        for i, j, w in self.edges:
            W[i, j] = W[j, i] = w
        return W

    def complement(self) -> "WeightedGraph":
        A = self.adjacency()
        pairs = [(i, j) for i, j in itertools.combinations(range(self.n), 2) if not A[i, j]]
        return WeightedGraph.from_edges(self.n, pairs, name=f"co-{self.name}" if self.name else "")


def vertex_subset(vertices: Iterable[int], n: int) -> tuple[int, ...]:
    """Validate and normalise a vertex subset to a strictly increasing tuple."""
    I = tuple(sorted(int(v) for v in vertices))
    if len(set(I)) != len(I):
        raise ValueError(f"repeated vertex in subset {I}")
    if not 2 <= len(I) <= n:
        raise ValueError(f"subset size {len(I)} outside [2, {n}]")
    if I[0] < 0 or I[-1] >= n:
        raise ValueError(f"subset {I} has vertices outside [0, {n})")
    return I


# ---------------------------------------------------------------- parsers

def _lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line:
            yield lineno, line


def parse_dimacs(text: str, name: str = "") -> WeightedGraph:
    """Parse DIMACS edge format (``c`` comments, ``p edge n m``, ``e i j`` lines).

    Repeated edges in either orientation collapse to one unweighted edge.
    """
    n = None
    pairs: set[tuple[int, int]] = set()
    for lineno, line in _lines(text):
        tok = line.split()
        if tok[0] == "c":
            continue
        if tok[0] == "p":
            if n is not None:
                raise ParseError("second problem line", lineno)
            if len(tok) < 4:
                raise ParseError("problem line must read 'p edge n m'", lineno)
            try:
                n = int(tok[2])
                int(tok[3])
            except ValueError:
                raise ParseError("non-integer size in problem line", lineno) from None
            continue
        if tok[0] == "e":
            if n is None:
                raise ParseError("edge line before 'p edge n m' header", lineno)
            if len(tok) < 3:
                raise ParseError("edge line must read 'e i j'", lineno)
            try:
                i, j = int(tok[1]), int(tok[2])
            except ValueError:
                raise ParseError("non-integer vertex index", lineno) from None
            if not (1 <= i <= n and 1 <= j <= n):
                raise ParseError(f"vertex index out of range 1..{n}", lineno)
            if i == j:
                raise ParseError(f"self-loop at vertex {i}", lineno)
            pairs.add((min(i, j) - 1, max(i, j) - 1))
            continue
        raise ParseError(f"unknown line type {tok[0]!r}", lineno)
    if n is None:
        raise ParseError("missing 'p edge n m' header")
    return WeightedGraph(n, tuple((i, j, 1.0) for i, j in sorted(pairs)), name)


def parse_rudy(text: str, name: str = "") -> WeightedGraph:
    """Parse rudy format: ``n m`` then ``m`` lines ``i j w``. Repeated edges sum their weights."""
    lines = list(_lines(text))
    if not lines:
        raise ParseError("empty rudy file")
    lineno, header = lines[0]
    tok = header.split()
    try:
        n, m = int(tok[0]), int(tok[1])
    except (ValueError, IndexError):
        raise ParseError("header must read 'n m'", lineno) from None
    body = lines[1:]
    if len(body) != m:
        raise ParseError(f"header announces {m} edges, found {len(body)}", lineno)
    acc: dict[tuple[int, int], float] = {}
    for lineno, line in body:
        tok = line.split()
        if len(tok) < 3:
            raise ParseError("edge line must read 'i j w'", lineno)
        try:
            i, j, w = int(tok[0]), int(tok[1]), float(tok[2])
        except ValueError:
            raise ParseError("malformed edge line", lineno) from None
        if not (1 <= i <= n and 1 <= j <= n):
            raise ParseError(f"vertex index out of range 1..{n}", lineno)
        if i == j:
            raise ParseError(f"self-loop at vertex {i}", lineno)
        key = (min(i, j) - 1, max(i, j) - 1)
        acc[key] = acc.get(key, 0.0) + w
    return WeightedGraph(n, tuple((i, j, w) for (i, j), w in acc.items()), name)


def to_dimacs(g: WeightedGraph) -> str:
    out = [f"p edge {g.n} {g.m}"]
    out += [f"e {i + 1} {j + 1}" for i, j, _ in g.edges]
    return "\n".join(out) + "\n"


def _fmt_weight(w: float) -> str:
    return str(int(w)) if float(w).is_integer() else repr(w)


def to_rudy(g: WeightedGraph) -> str:
    out = [f"{g.n} {g.m}"]
    out += [f"{i + 1} {j + 1} {_fmt_weight(w)}" for i, j, w in g.edges]
    return "\n".join(out) + "\n"


def read_graph(path, fmt: str | None = None) -> WeightedGraph:
    """Read an instance file; ``fmt`` is ``dimacs`` or ``rudy`` (guessed from content if None)."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if fmt is None:
        first = next((line for _, line in _lines(text)), "")
        fmt = "dimacs" if first[:1] in ("c", "p", "e") else "rudy"
    if fmt == "dimacs":
        return parse_dimacs(text, name=path.stem)
    if fmt == "rudy":
        return parse_rudy(text, name=path.stem)
    raise ValueError(f"unknown instance format {fmt!r}")


# ---------------------------------------------------------------- matrices

def laplacian(g: WeightedGraph) -> np.ndarray:
    """``Diag(W 1) - W`` for the weighted adjacency matrix ``W``."""
    W = g.weight_matrix()
    return np.diag(W.sum(axis=1)) - W


def induced_subgraph(g: WeightedGraph, I: Sequence[int]) -> WeightedGraph:
    """Subgraph on ``I`` relabelled so that ``I[a]`` becomes vertex ``a``."""
    pos = {v: a for a, v in enumerate(I)}
    sub = []
    for i, j, w in g.edges:
        if i in pos and j in pos:
            sub.append((pos[i], pos[j], w))
    return WeightedGraph.from_edges(len(I), sub)


def edge_mask(A: np.ndarray) -> int:
    """Bitmask of the upper-triangle adjacency pattern, pairs in lexicographic order."""
    k = A.shape[0]
    P, Q = np.triu_indices(k, 1)
    bits = A[P, Q].astype(np.int64)
    return int(bits @ (np.int64(1) << np.arange(len(bits), dtype=np.int64))) if len(bits) else 0


@lru_cache(maxsize=None)
def _perm_pairs(k: int):
    perms = np.array(list(itertools.permutations(range(k))), dtype=np.int64)
    P, Q = np.triu_indices(k, 1)
    weights = np.int64(1) << np.arange(len(P), dtype=np.int64)
    return perms, perms[:, P], perms[:, Q], weights


def canonical_form(g: WeightedGraph) -> tuple[tuple[int, int], np.ndarray]:
    """Canonical key and the permutation realising it.

    The key is ``(k, mask)`` with ``mask`` the smallest edge bitmask over all
    vertex relabellings. The permutation ``perm`` satisfies
    ``canon[p, q] == A[perm[p], perm[q]]``.
    """
    k = g.n
    if k > CANONICAL_MAX_ORDER:
        raise ValueError(f"canonical keys are supported up to order {CANONICAL_MAX_ORDER}, got {k}")
    if not g.is_unweighted:
        raise ValueError("canonical keys are defined for unweighted graphs only")
    if k <= 1:
        return (k, 0), np.arange(k)
    A = g.adjacency()
    perms, PP, QQ, weights = _perm_pairs(k)
    masks = A[PP, QQ].astype(np.int64) @ weights
    best = int(np.argmin(masks))
    return (k, int(masks[best])), perms[best]


def canonical_key(g: WeightedGraph) -> tuple[int, int]:
    """Isomorphism-invariant key of a small unweighted graph (order at most 8)."""
    return canonical_form(g)[0]
