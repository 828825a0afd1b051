from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import complete, cycle, random_graph
from escbundle.atlas import Problem
from escbundle.graph import WeightedGraph
from escbundle.operators import (EscSystem, apply_D, embed, expected_b, extract, make_block,
                                 positions_for, shifted_cost)

PROBLEMS = [p.value for p in Problem]


def sym(rng, k):
    A = rng.standard_normal((k, k))
    return A + A.T


# ---------------------------------------------------------------- positions

def test_positions_examples():
    assert positions_for("maxcut", WeightedGraph(3)) == ((0, 1), (0, 2), (1, 2))
    assert positions_for("stableset", complete(2)) == ((0, 0), (1, 1))
    assert positions_for("coloring", WeightedGraph(3)) == ((0, 1), (0, 2), (1, 2))


@settings(max_examples=50)
@given(st.integers(2, 7), st.integers(0, 2**31 - 1), st.sampled_from(PROBLEMS))
def test_positions_count_formula(k, seed, problem):
    g = random_graph(k, 0.5, seed)
    pos = positions_for(problem, g)
    assert len(pos) == expected_b(problem, k, g.m)
    assert list(pos) == sorted(pos)
    A = g.adjacency()
    for p, q in pos:
        assert p <= q
        if problem != "maxcut" and p != q:
            assert not A[p, q]
        if p == q:
            assert problem == "stableset"


# ---------------------------------------------------------------- extract / embed

def test_extract_examples():
    blk = make_block("maxcut", complete(2), (0, 1))
    assert np.array_equal(extract(blk, np.array([[1, -1], [-1, 1]])), [-1])
    sblk = make_block("stableset", complete(2), (0, 1))
    assert np.array_equal(extract(sblk, np.eye(2)), [1, 1])


def test_embed_examples():
    blk = make_block("maxcut", complete(2), (0, 1))
    assert np.array_equal(embed(blk, np.array([4.0])), [[0, 2], [2, 0]])
    sblk = make_block("stableset", complete(2), (0, 1))
    assert np.array_equal(embed(sblk, np.array([3.0, 5.0])), np.diag([3.0, 5.0]))


def test_empty_block_for_clique_coloring():
    blk = make_block("coloring", complete(3), (0, 1, 2))
    assert blk.b == 0 and blk.t == 1
    assert extract(blk, np.eye(3)).shape == (0,)
    assert not embed(blk, np.zeros(0)).any()


@pytest.mark.parametrize("problem", PROBLEMS)
def test_adjoint_identity_1000_trials(problem):
    rng = np.random.default_rng(7)
    worst = 0.0
    for trial in range(1000):
        k = int(rng.integers(2, 8))
        g = random_graph(k, 0.4, trial)
        blk = make_block(problem, g, range(k))
        y = rng.standard_normal(blk.b)
        S = sym(rng, k)
        worst = max(worst, abs(np.sum(embed(blk, y) * S) - y @ extract(blk, S)))
    assert worst <= 1e-12


def test_extract_embed_roundtrip_scaling():
    # off-diagonal entries receive y/2, diagonal y; extract reads literally
    blk = make_block("stableset", WeightedGraph(2), (0, 1))
    y = np.array([1.0, 2.0, 3.0])            # (0,0), (0,1), (1,1)
    assert np.array_equal(extract(blk, embed(blk, y)), [1.0, 1.0, 3.0])


# ---------------------------------------------------------------- D

def test_apply_D_examples():
    blk = make_block("maxcut", complete(2), (0, 1))
    assert not apply_D(blk, np.zeros(1)).any()
    # atoms in enumeration order: c=(1,1) -> J, c=(1,-1) -> flip
    assert np.array_equal(apply_D(blk, np.array([2.0])), [2.0, -2.0])


@pytest.mark.parametrize("problem", PROBLEMS)
def test_apply_D_matches_inner_products(problem):
    rng = np.random.default_rng(3)
    g = random_graph(5, 0.4, 11)
    blk = make_block(problem, g, range(5))
    y = rng.standard_normal(blk.b)
    M = embed(blk, y)
    expect = [np.sum(M * C) for C in blk.atoms.atoms]
    assert np.allclose(apply_D(blk, y), expect, atol=1e-12)
    # max over the simplex is attained at a vertex
    lam = rng.dirichlet(np.ones(blk.t), size=200)
    assert (lam @ apply_D(blk, y)).max() <= apply_D(blk, y).max() + 1e-12


@pytest.mark.parametrize("problem", PROBLEMS)
def test_exact_points_satisfy_block_equations(problem):
    rng = np.random.default_rng(5)
    g = random_graph(6, 0.4, 2)
    blk = make_block(problem, g, range(6))
    lam = rng.dirichlet(np.ones(blk.t))
    X_I = np.tensordot(lam, blk.atoms.atoms, axes=1)
    assert np.allclose(extract(blk, np.tensordot(lam, blk.atoms.atoms, axes=1) - X_I), 0)
    assert np.allclose(blk.coords @ lam, extract(blk, X_I), atol=1e-12)


# ---------------------------------------------------------------- shifted cost

def test_shifted_cost_examples():
    C = np.arange(16.0).reshape(4, 4)
    C = C + C.T
    blk = make_block("maxcut", WeightedGraph(4), range(4))
    assert np.array_equal(shifted_cost(C, np.zeros(blk.b), [blk]), C)
    y = np.arange(1.0, blk.b + 1)
    assert np.allclose(shifted_cost(C, y, [blk]), C - embed(blk, y))


@pytest.mark.parametrize("problem", PROBLEMS)
def test_overlapping_blocks_against_dense_loops(problem):
    rng = np.random.default_rng(9)
    g = random_graph(7, 0.3, 4)
    off = 0 if problem == "maxcut" else 1
    d = g.n + off
    blocks = [make_block(problem, g, I) for I in [(0, 1, 2, 3), (2, 3, 4), (1, 3, 5, 6)]]
    y = rng.standard_normal(sum(b.b for b in blocks))
    C = sym(rng, d)
    dense = C.copy()
    at = 0
    for blk in blocks:
        for e, (p, q) in enumerate(blk.positions):
            i, j = blk.I[p] + off, blk.I[q] + off
            v = y[at + e]
            if i == j:
                dense[i, i] -= v
            else:
                dense[i, j] -= v / 2
                dense[j, i] -= v / 2
        at += blk.b
    assert np.allclose(shifted_cost(C, y, blocks, off), dense, atol=1e-12)
    system = EscSystem(problem, g, blocks, offset=off)
    assert np.allclose(C - system.shift(y, d), dense, atol=1e-12)


@pytest.mark.parametrize("problem", PROBLEMS)
def test_projection_adjointness(problem):
    rng = np.random.default_rng(1)
    g = random_graph(8, 0.4, 6)
    off = 0 if problem == "maxcut" else 1
    blocks = [make_block(problem, g, I) for I in itertools.combinations(range(8), 4)][:20]
    system = EscSystem(problem, g, blocks, offset=off)
    for _ in range(20):
        y = rng.standard_normal(system.b)
        X = sym(rng, g.n + off)
        assert np.sum(system.shift(y, g.n + off) * X) == pytest.approx(y @ system.gather(X), abs=1e-10)


def test_system_registry():
    g = cycle(6)
    a = make_block("coloring", g, (0, 1, 2))
    b = make_block("coloring", g, (2, 3, 4))
    s = EscSystem("coloring", g, [a], offset=1)
    s2 = s.add([b])
    assert s.q == 1 and s2.q == 2 and s2.b == a.b + b.b
    y = np.arange(1.0, a.b + 1)
    assert np.array_equal(s2.pad(y), list(y) + [0.0] * b.b)
    with pytest.raises(ValueError):
        s2.add([make_block("coloring", g, (0, 1, 2))])
    with pytest.raises(ValueError):
        s2.add([make_block("stableset", g, (3, 4, 5))])


def test_max_terms_ties_lowest_index():
    g = WeightedGraph(3)
    blk = make_block("maxcut", g, range(3))
    s = EscSystem("maxcut", g, [blk])
    vals, arg = s.max_terms(np.zeros(blk.b))
    assert vals[0] == 0 and arg[0] == 0
