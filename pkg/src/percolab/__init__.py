"""Percolab: a numerical lab for harmonic functions on percolation clusters.

Main modules:
- percolation: bond percolation samples, largest clusters, cluster graphs
- fields / solvers / linalg: vertex and edge fields, Dirichlet and Neumann
  solves, Green proxies, exact integer linear algebra
- harmonic: corrected planes, correctors, homogenized flux, edge sensitivity
- gadgets: the resistance gadgets and their exact resistances
- potential / topology: potentials of integer poles, level-set exploration,
  disjoint paths and diamond peeling
- sandpile: the abelian sandpile chain, toppling invariants and its spectrum
- experiments: the registry of reproducible experiments
"""

from .config import LabConfig
from .errors import (
    CapacityError,
    CompatibilityError,
    ConvergenceError,
    EmptyClusterError,
    IllPosedError,
    InternalError,
    ParameterError,
    PercolabError,
    PreconditionError,
    TopologyError,
)
from .experiments import ExperimentSpec, RunManifest, list_experiments, run_experiment
from .fields import EdgeField, ScalarField, SolveOptions
from .gadgets import gadget_table, resistance_by_solve, resistance_recurrence, sequence_AB
from .harmonic import corrected_plane, edge_flip_sensitivity, homogenized_flux
from .percolation import (
    BoxRegion,
    ClusterGraph,
    PercolationSample,
    largest_cluster,
    sample_percolation,
)
from .potential import PoleFunction, potential
from .sandpile import (
    SandpileState,
    l2_mixing_curve,
    run_chain,
    stabilize,
    toppling_invariants,
)
from .solvers import green_function, solve_dirichlet, solve_neumann
from .topology import block_cut_tree, count_disjoint_paths, diamond_peel, explore_level_set
from .version import VERSION

__all__ = [
    # ── version ──────────────────────────────────────────────────
    "VERSION",
    # ── errors ───────────────────────────────────────────────────
    "CapacityError",
    "CompatibilityError",
    "ConvergenceError",
    "EmptyClusterError",
    "IllPosedError",
    "InternalError",
    "ParameterError",
    "PercolabError",
    "PreconditionError",
    "TopologyError",
    # ── configuration ────────────────────────────────────────────
    "LabConfig",
    "SolveOptions",
    # ── percolation ──────────────────────────────────────────────
    "BoxRegion",
    "ClusterGraph",
    "PercolationSample",
    "largest_cluster",
    "sample_percolation",
    # ── fields and solvers ───────────────────────────────────────
    "EdgeField",
    "ScalarField",
    "green_function",
    "solve_dirichlet",
    "solve_neumann",
    # ── harmonic analysis ────────────────────────────────────────
    "corrected_plane",
    "edge_flip_sensitivity",
    "homogenized_flux",
    # ── gadgets ──────────────────────────────────────────────────
    "gadget_table",
    "resistance_by_solve",
    "resistance_recurrence",
    "sequence_AB",
    # ── potentials and topology ──────────────────────────────────
    "PoleFunction",
    "block_cut_tree",
    "count_disjoint_paths",
    "diamond_peel",
    "explore_level_set",
    "potential",
    # ── sandpile ─────────────────────────────────────────────────
    "SandpileState",
    "l2_mixing_curve",
    "run_chain",
    "stabilize",
    "toppling_invariants",
    # ── experiments ──────────────────────────────────────────────
    "ExperimentSpec",
    "RunManifest",
    "list_experiments",
    "run_experiment",
]
