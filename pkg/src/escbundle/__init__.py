"""Exact subgraph constraint bounds for Max-Cut, stable set and coloring.

The package tightens the basic SDP relaxations of the three problems by
requiring small principal submatrices to lie in the convex hull of their
combinatorial atoms, and minimises the resulting partial Lagrangian dual
with a proximal bundle method.
"""
from __future__ import annotations

from .atlas import AtomSet, Problem, atoms_for, coloring_matrices, cut_matrices, stable_set_matrices
from .graph import ParseError, WeightedGraph, induced_subgraph, laplacian, parse_dimacs, parse_rudy, read_graph
from .operators import EscBlock, EscSystem, apply_D, embed, extract, make_block, positions_for, shifted_cost
from .bundle import BundleConfig, BundleResult, dual_value, run_bundle
from .driver import BoundReport, RunConfig, emit_report, run_cycles, verify_instance, verify_small
from .sdp import OracleResult, SdpProblem, build_basic, evaluate_h, natural_value, solve
from .separation import project_to_hull, select_escs, separate

__version__ = "0.1.0"

__all__ = [
    "AtomSet", "Problem", "atoms_for", "coloring_matrices", "cut_matrices", "stable_set_matrices",
    "ParseError", "WeightedGraph", "induced_subgraph", "laplacian", "parse_dimacs", "parse_rudy",
    "read_graph", "EscBlock", "EscSystem", "apply_D", "embed", "extract", "make_block",
    "positions_for", "shifted_cost", "OracleResult", "SdpProblem", "build_basic", "evaluate_h",
    "natural_value", "solve", "BundleConfig", "BundleResult", "dual_value", "run_bundle",
    "BoundReport", "RunConfig", "emit_report", "run_cycles", "verify_instance", "verify_small",
    "project_to_hull", "select_escs", "separate",
]
