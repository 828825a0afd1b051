"""Regenerate the benchmark instances in this directory.

    python3 tests/data/make_instances.py
"""
from __future__ import annotations

import itertools
from pathlib import Path

import numpy as np

from escbundle.graph import WeightedGraph, to_dimacs, to_rudy

HERE = Path(__file__).resolve().parent


def cycle(n: int) -> WeightedGraph:
    return WeightedGraph.from_edges(n, [(i, (i + 1) % n) for i in range(n)], name=f"C{n}")


def generalized_petersen(n: int, k: int, name: str) -> WeightedGraph:
    edges = [(i, (i + 1) % n) for i in range(n)]
    edges += [(i, n + i) for i in range(n)]
    edges += [(n + i, n + (i + k) % n) for i in range(n)]
    return WeightedGraph.from_edges(2 * n, edges, name=name)


def hamming(bits: int, dist: int, name: str) -> WeightedGraph:
    """Words of length ``bits``; adjacent when their Hamming distance is below ``dist``."""
    words = range(1 << bits)
    edges = [(a, b) for a, b in itertools.combinations(words, 2) if bin(a ^ b).count("1") < dist]
    return WeightedGraph.from_edges(1 << bits, edges, name=name)


def mycielski(g: WeightedGraph, name: str) -> WeightedGraph:
    n = g.n
    edges = [(i, j) for i, j, _ in g.edges]
    edges += [(i, n + j) for i, j, _ in g.edges] + [(j, n + i) for i, j, _ in g.edges]
    edges += [(n + i, 2 * n) for i in range(n)]
    return WeightedGraph.from_edges(2 * n + 1, edges, name=name)


def torus(side: int, dim: int, name: str) -> WeightedGraph:
    """``side^dim`` toroidal grid."""
    cells = list(itertools.product(range(side), repeat=dim))
    index = {c: i for i, c in enumerate(cells)}
    edges = []
    for c in cells:
        for d in range(dim):
            nb = list(c)
            nb[d] = (nb[d] + 1) % side
            edges.append((index[c], index[tuple(nb)]))
    return WeightedGraph.from_edges(len(cells), edges, name=name)


def random_weighted(n: int, density: float, wmax: int, seed: int, name: str) -> WeightedGraph:
    """Random graph with integer weights uniform in ``1..wmax``."""
    rng = np.random.default_rng(seed)
    edges = [(i, j, int(rng.integers(1, wmax + 1)))
             for i, j in itertools.combinations(range(n), 2) if rng.random() < density]
    return WeightedGraph.from_edges(n, edges, name=name)


def main() -> None:
    myciel3 = mycielski(mycielski(WeightedGraph.from_edges(2, [(0, 1)]), "myciel2"), "myciel3")
    dimacs = {
        "C5.col": cycle(5),
        "petersen.col": generalized_petersen(5, 2, "petersen"),
        "CubicVT26_5.col": generalized_petersen(13, 5, "CubicVT26_5"),
        "hamming6_4.col": hamming(6, 4, "hamming6_4"),
        "myciel3.col": myciel3,
        "myciel4.col": mycielski(myciel3, "myciel4"),
        "spin5.col": torus(5, 3, "spin5"),
    }
    for fname, g in dimacs.items():
        (HERE / fname).write_text(to_dimacs(g), encoding="utf-8")
    rudy = {
        "pw_surrogate_100.rudy": random_weighted(100, 0.1, 10, 1, "pw_surrogate_100"),
        "torus_g3_4.rudy": torus(4, 3, "torus_g3_4"),
    }
    for fname, g in rudy.items():
        (HERE / fname).write_text(to_rudy(g), encoding="utf-8")


if __name__ == "__main__":
    main()
