from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from escbundle.graph import WeightedGraph

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

DATA = Path(__file__).resolve().parent / "data"


def cycle(n: int) -> WeightedGraph:
    return WeightedGraph.from_edges(n, [(i, (i + 1) % n) for i in range(n)], name=f"C{n}")


def complete(n: int) -> WeightedGraph:
    return WeightedGraph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)],
                                    name=f"K{n}")


def path_graph(n: int) -> WeightedGraph:
    return WeightedGraph.from_edges(n, [(i, i + 1) for i in range(n - 1)], name=f"P{n}")


def random_graph(n: int, p: float, seed: int) -> WeightedGraph:
    rng = np.random.default_rng(seed)
    return WeightedGraph.from_edges(
        n, [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p])


@pytest.fixture
def data_dir() -> Path:
    return DATA
