from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import complete, cycle, random_graph
from escbundle.atlas import AtomCache
from escbundle.sdp import build_basic, solve
from escbundle.separation import (local_search_candidates, project_to_hull, score_subsets,
                                  select_escs, separate)

CACHE = AtomCache()


def test_projection_of_atom_is_zero():
    atoms = CACHE.get("coloring", cycle(4)).atoms
    for i, A in enumerate(atoms):
        d, lam = project_to_hull(A, atoms)
        assert d <= 1e-9
        assert lam[i] == pytest.approx(1.0, abs=1e-6)


def test_projection_maxcut_identity_is_inside():
    atoms = CACHE.get("maxcut", complete(2)).atoms
    d, lam = project_to_hull(np.eye(2), atoms)
    assert d <= 1e-9
    assert np.allclose(lam, [0.5, 0.5], atol=1e-8)


def test_projection_stableset_edge():
    atoms = CACHE.get("stableset", complete(2)).atoms
    d, lam = project_to_hull(np.eye(2), atoms)
    assert d == pytest.approx(np.sqrt(2) / 2, abs=1e-9)
    assert np.allclose(lam, [0.0, 0.5, 0.5], atol=1e-8)


@pytest.mark.parametrize("problem", ["maxcut", "stableset", "coloring"])
def test_projection_reconstructs_interior_points(problem):
    rng = np.random.default_rng(5)
    atoms = CACHE.get(problem, cycle(5)).atoms
    for _ in range(100):
        lam0 = rng.dirichlet(np.ones(len(atoms)))
        X = np.einsum("t,tij->ij", lam0, atoms)
        d, lam = project_to_hull(X, atoms)
        assert d <= 1e-6
        assert lam.min() >= -1e-12 and lam.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.linalg.norm(np.einsum("t,tij->ij", lam, atoms) - X) <= 1e-6


@settings(max_examples=40)
@given(st.integers(0, 10**6))
def test_projection_is_optimal_and_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    atoms = CACHE.get("maxcut", complete(4)).atoms
    M = rng.standard_normal((4, 4))
    X = (M + M.T) / 2
    d, lam = project_to_hull(X, atoms)
    P = np.eye(4)[rng.permutation(4)]
    d2, _ = project_to_hull(P @ X @ P.T, atoms)    # maxcut hull is permutation invariant
    assert d2 == pytest.approx(d, abs=1e-6)
    # no atom, and no random hull point, is closer than the projection
    for _ in range(20):
        Y = np.einsum("t,tij->ij", rng.dirichlet(np.ones(len(atoms))), atoms)
        assert np.linalg.norm(X - Y) >= d - 1e-6


def _X(problem, g):
    return solve(build_basic(problem, g), 1e-8).X


def test_full_order_gives_single_subset():
    g = cycle(5)
    assert local_search_candidates(_X("stableset", g), "stableset", g, 5, 10, 0) == [tuple(range(5))]


def test_c5_stableset_full_subset_is_violated():
    g = cycle(5)
    blocks = select_escs(_X("stableset", g), "stableset", g, 5, 3, seed=0)
    assert [b.I for b in blocks] == [(0, 1, 2, 3, 4)]


def test_max_new_zero_and_existing_excluded():
    g = cycle(5)
    X = _X("stableset", g)
    assert separate(X, "stableset", g, 5, 0).selected == []
    assert separate(X, "stableset", g, 5, 4, existing=[(0, 1, 2, 3, 4)]).selected == []


def test_no_violation_when_X_is_an_atom_combination():
    # convex combination of cut matrices satisfies every ESC
    g = random_graph(8, 0.5, 3)
    rng = np.random.default_rng(0)
    cs = rng.choice([-1.0, 1.0], size=(5, 8))
    X = np.einsum("t,ti,tj->ij", rng.dirichlet(np.ones(5)), cs, cs)
    assert separate(X, "maxcut", g, 4, 10, seed=1).selected == []


@pytest.mark.parametrize("problem,k", [("maxcut", 3), ("stableset", 3), ("coloring", 4)])
def test_selection_deterministic_sorted_and_above_threshold(problem, k):
    g = random_graph(10, 0.5, 8)
    X = _X(problem, g)
    a = separate(X, problem, g, k, 6, seed=4)
    b = separate(X, problem, g, k, 6, seed=4)
    assert [r.I for r in a.selected] == [r.I for r in b.selected]
    d = [r.distance for r in a.selected]
    assert d == sorted(d, reverse=True)
    assert all(v > 1e-4 for v in d)
    assert len(a.selected) <= 6
    assert len({r.I for r in a.selected}) == len(a.selected)
    if d:
        assert a.max_distance == pytest.approx(d[0])
    rescored = score_subsets(X, problem, g, [r.I for r in a.selected])
    assert np.allclose([r.distance for r in rescored], d)
