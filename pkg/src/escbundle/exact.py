"""Brute-force combinatorial optima for small graphs (verification oracles)."""
from __future__ import annotations

import numpy as np

from .graph import WeightedGraph, laplacian


def max_cut(g: WeightedGraph, chunk: int = 1 << 16) -> tuple[float, np.ndarray]:
    """Largest ``c' L c`` over ``c`` in {-1, 1}^n (four times the cut weight) and a maximiser."""
    n = g.n
    if n == 0:
        return 0.0, np.zeros(0)
    if n > 26:
        raise ValueError("max_cut enumeration is limited to n <= 26")
    L = laplacian(g)
    best, arg = -np.inf, None
    total = 1 << (n - 1)
    for lo in range(0, total, chunk):
        cnt = np.arange(lo, min(total, lo + chunk))
        C = np.ones((len(cnt), n))
        C[:, 1:] = 1 - 2 * ((cnt[:, None] >> np.arange(n - 1)) & 1)
        vals = np.einsum("ti,ij,tj->t", C, L, C)
        i = int(np.argmax(vals))
        if vals[i] > best:
            best, arg = float(vals[i]), C[i].copy()
    return best, arg


def stability_number(g: WeightedGraph) -> int:
    """Size of a largest stable set (branching on a maximum-degree vertex)."""
    nbr = [0] * g.n
    for i, j, _ in g.edges:
        nbr[i] |= 1 << j
        nbr[j] |= 1 << i

    def solve(P: int) -> int:
        if P == 0:
            return 0
        best_v, best_d = -1, -1
        rest = P
        while rest:
            v = (rest & -rest).bit_length() - 1
            rest &= rest - 1
            d = bin(nbr[v] & P).count("1")
            if d > best_d:
                best_v, best_d = v, d
        if best_d <= 1:
            # disjoint edges and isolated vertices: one vertex per component
            count, rest = 0, P
            while rest:
                v = (rest & -rest).bit_length() - 1
                count += 1
                rest &= ~((1 << v) | nbr[v])
            return count
        v = best_v
        return max(solve(P & ~(1 << v)), 1 + solve(P & ~((1 << v) | nbr[v])))

    return solve((1 << g.n) - 1)


def chromatic_number(g: WeightedGraph) -> int:
    """Smallest number of colors in a proper coloring (backtracking, largest degree first)."""
    n = g.n
    if n == 0:
        return 0
    A = g.adjacency()
    order = list(np.argsort(-A.sum(axis=1), kind="stable"))
    colors = [-1] * n

    def feasible(k: int) -> bool:
        def place(pos: int, used: int) -> bool:
            if pos == n:
                return True
            v = order[pos]
            taken = {colors[u] for u in np.flatnonzero(A[v]) if colors[u] >= 0}
            for c in range(min(used + 1, k)):
                if c not in taken:
                    colors[v] = c
                    if place(pos + 1, max(used, c + 1)):
                        return True
                    colors[v] = -1
            return False

        return place(0, 0)

    for k in range(1, n + 1):
        if feasible(k):
            return k
    return n
