"""Registry of named experiments and the harness that runs them.

Each experiment binds the library into one reproducible computation. It
validates its parameters with a pydantic model that rejects unknown keys,
writes CSV/JSON/SVG outputs into its own directory and records two kinds
of results in the run manifest:

- *assertions*, exact checks; any failure makes the run fail;
- *observations*, measured values and statistical trends that are
  reported but never decide the outcome.

All randomness derives from the configured top-level seed through
:func:`percolab.percolation.derive_seed`.

Public API
----------
- :class:`Experiment`, :func:`experiment`, :func:`list_experiments`,
  :func:`get_experiment`
- :class:`ExperimentSpec`, :class:`RunContext`, :func:`run_experiment`
- :class:`RunManifest` (re-exported from :mod:`percolab.tools.benchmark`)
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Iterator, Sequence
from dataclasses import dataclass
from fractions import Fraction
from itertools import pairwise
from pathlib import Path
from typing import Any, Literal

import matplotlib
import mpmath
import networkx as nx
import numpy as np
import pandas as pd
from matplotlib.figure import Figure
from pydantic import BaseModel, Field, ValidationError
from tqdm.auto import tqdm

from .config import LabConfig
from .errors import InternalError, ParameterError, PreconditionError
from .fields import ScalarField, SolveOptions
from .gadgets import (
    convergence_errors,
    escape_probability_mc,
    gadget_table,
    integer_harmonic_gap,
    resistance_result,
    sequence_AB,
)
from .harmonic import (
    HarmonicEmbedding,
    altered_environment,
    corrected_plane,
    corrector_stats,
    edge_flip_sensitivity,
    embedding_displacement,
    harmonic_embedding,
    homogenized_flux,
    write_embedding_svg,
)
from .linalg import bareiss_determinant
from .percolation import (
    BoxRegion,
    ClusterGraph,
    Edge,
    PercolationSample,
    Point,
    cluster_density,
    derive_seed,
    largest_cluster,
    modify_edges,
    sample_percolation,
    well_connected_report,
)
from .potential import (
    PoleFunction,
    divergence_representation,
    flip_edge_pairing,
    gradient_representation,
    level_set,
    log_growth_check,
    potential,
    sensitive_edges,
    two_scale_check,
    write_points_csv,
)
from .sandpile import (
    SandpileState,
    census_lower_bound,
    diamond_peel_bridge,
    find_slow_mixing_gadgets,
    l2_mixing_curve,
    mixing_upper_bound_time,
    run_chain,
    sandpile_degree,
    slow_mixing_frequency,
    slow_mixing_gadget_census,
    spanning_tree_count,
    stabilize,
    toppling_invariants,
)
from .solvers import fit_green_log_slope, laplacian_apply, left_half_flux_decomposition
from .tools.benchmark import RunManifest, RunTracker
from .topology import (
    count_disjoint_paths,
    diamond_peel,
    explore_level_set,
    tree_to_text,
    write_tree_graphml,
)

logger = logging.getLogger(__name__)

__all__ = [
    "Experiment",
    "ExperimentSpec",
    "RunContext",
    "RunManifest",
    "experiment",
    "get_experiment",
    "list_experiments",
    "run_experiment",
]

# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------


class ExperimentParams(BaseModel):
    """Base of every parameter model: frozen, unknown keys rejected."""

    model_config = {"extra": "forbid", "frozen": True}


@dataclass(frozen=True)
class Experiment:
    """A registered experiment."""

    name: str
    anchor: str
    params: type[ExperimentParams]
    runner: Callable[[Any, RunContext], None]

    @property
    def summary(self) -> str:
        """First line of the runner's docstring."""
        doc = self.runner.__doc__ or ""
        return doc.strip().splitlines()[0] if doc.strip() else ""


_REGISTRY: dict[str, Experiment] = {}


def experiment(
    name: str, anchor: str, params: type[ExperimentParams]
) -> Callable[[Callable[[Any, RunContext], None]], Callable[[Any, RunContext], None]]:
    """Register the decorated runner under *name*."""

    def wrap(fn: Callable[[Any, RunContext], None]) -> Callable[[Any, RunContext], None]:
        if name in _REGISTRY:
            raise ParameterError(f"experiment {name!r} is already registered")
        _REGISTRY[name] = Experiment(name=name, anchor=anchor, params=params, runner=fn)
        return fn

    return wrap


def list_experiments() -> list[Experiment]:
    """Registered experiments in registration order."""
    return list(_REGISTRY.values())


def get_experiment(name: str) -> Experiment:
    """Look up an experiment.

    Raises
    ------
    ParameterError
        If no experiment is registered under *name*.
    """
    try:
        return _REGISTRY[name]
    except KeyError:
        known = ", ".join(_REGISTRY)
        raise ParameterError(f"unknown experiment {name!r}; known: {known}") from None


# ---------------------------------------------------------------------------
# Harness
# ---------------------------------------------------------------------------


class ExperimentSpec(BaseModel):
    """What to run and where."""

    name: str
    params: dict[str, Any] = Field(default_factory=dict)
    output_dir: Path = Path("results")
    seed: int | None = Field(None, ge=0, lt=2**64)

    model_config = {"extra": "forbid"}


@dataclass
class RunContext:
    """Services handed to a runner: output paths, seeds and the manifest."""

    output_dir: Path
    seed: int
    config: LabConfig
    manifest: RunManifest
    progress: bool = False

    @property
    def solver(self) -> SolveOptions:
        """Solver options of the run configuration."""
        return self.config.solver

    def path(self, name: str) -> Path:
        """Path of *name* inside the experiment output directory."""
        return self.output_dir / name

    def output(self, label: str, path: str | Path) -> Path:
        """Register a written file."""
        return self.manifest.add_output(label, path)

    def check(self, name: str, condition: bool) -> bool:
        """Record an assertion that decides the run status."""
        return self.manifest.check(name, condition)

    def observe(self, name: str, value: Any) -> None:
        """Record a measured value that is reported only."""
        self.manifest.observe(name, value)

    def replicates(self, count: int, desc: str = "replicates") -> Iterator[tuple[int, int]]:
        """Yield ``(index, seed)`` for *count* replicates, recording the seeds."""
        seeds = [derive_seed(self.seed, i) for i in range(count)]
        self.manifest.replicate_seeds.extend(seeds)
        yield from enumerate(tqdm(seeds, desc=desc, disable=not self.progress, leave=False))


def run_experiment(
    spec: ExperimentSpec, config: LabConfig | None = None, progress: bool = False
) -> RunManifest:
    """Validate parameters, run the experiment and return its manifest.

    Parameters from *config* for this experiment are overridden by
    ``spec.params``. Outputs go to ``spec.output_dir / spec.name``.

    Raises
    ------
    ParameterError
        For an unknown experiment or invalid parameters; nothing is written.
    """
    config = config or LabConfig()
    exp = get_experiment(spec.name)
    merged = {**config.experiment_params(spec.name), **spec.params}
    try:
        params = exp.params.model_validate(merged)
    except ValidationError as exc:
        raise ParameterError(f"invalid parameters for {spec.name}: {exc}") from exc
    seed = config.seed if spec.seed is None else spec.seed
    out = Path(spec.output_dir) / spec.name
    tracker = RunTracker(out)
    logger.info("running %s into %s", spec.name, out)
    with tracker.track(spec.name, params.model_dump(mode="json"), seed) as manifest:
        ctx = RunContext(out, seed, config, manifest, progress)
        exp.runner(params, ctx)
    return manifest


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------

E1 = (1, 0)


def _cluster(
    p: float, radius: int, seed: int, d: int = 2
) -> tuple[PercolationSample, ClusterGraph]:
    sample = sample_percolation(BoxRegion(d=d, radius=radius), p, seed)
    return sample, largest_cluster(sample)


def _by_distance(graph: ClusterGraph) -> list[int]:
    """Interior vertices ordered by distance to the box center, then coordinates."""
    rel = np.abs(graph.relative).max(axis=1)
    order = np.lexsort((*graph.points.T[::-1], rel))
    return [int(i) for i in order if not graph.boundary[i]]


def _central_vertex(graph: ClusterGraph) -> Point:
    for i in _by_distance(graph):
        return graph.point(i)
    raise ParameterError("the cluster has no interior vertex")


def _central_edge(graph: ClusterGraph, axis: int = 0) -> Edge:
    """The ``e_axis`` edge of the graph closest to the box center."""
    for i in _by_distance(graph):
        x = graph.point(i)
        y = tuple(c + (k == axis) for k, c in enumerate(x))
        if graph.contains(y) and graph.has_edge(x, y) and not graph.boundary[graph.index(y)]:
            return (x, y)
    raise ParameterError("no interior edge near the center")


def _removable_edges(
    graph: ClusterGraph, count: int, rng: np.random.Generator, within: int
) -> list[Edge]:
    """Up to *count* edges within *within* of the center whose removal keeps the graph connected."""
    rel = np.abs(graph.relative).max(axis=1)
    near = np.flatnonzero((rel[graph.edges[:, 0]] <= within) & (rel[graph.edges[:, 1]] <= within))
    current = graph.nx_graph.copy()
    chosen: list[Edge] = []
    for k in rng.permutation(near).tolist():
        if len(chosen) == count:
            break
        i, j = graph.edges[k].tolist()
        current.remove_edge(i, j)
        if nx.has_path(current, i, j):
            chosen.append((graph.point(i), graph.point(j)))
        else:
            current.add_edge(i, j)
    return chosen


def _block_graph(rows: int, cols: int) -> ClusterGraph:
    """Full-lattice block ``[0, cols) x [0, rows)``."""
    pts = [(x, y) for x in range(cols) for y in range(rows)]
    edges = [((x, y), (x + 1, y)) for x in range(cols - 1) for y in range(rows)]
    edges += [((x, y), (x, y + 1)) for x in range(cols) for y in range(rows - 1)]
    return ClusterGraph.from_edges(edges, vertices=pts)


def _write_frame(ctx: RunContext, label: str, frame: pd.DataFrame, name: str) -> Path:
    path = ctx.path(name)
    frame.to_csv(path, index=False)
    return ctx.output(label, path)


def _save_svg(fig: Figure, path: Path) -> Path:
    with matplotlib.rc_context({"svg.hashsalt": "percolab"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    return path


# ---------------------------------------------------------------------------
# Parameter models
# ---------------------------------------------------------------------------


class BoxParams(ExperimentParams):
    p: float = Field(0.8, gt=0, le=1)
    radius: int = Field(32, ge=2)


class GadgetTableParams(ExperimentParams):
    n_max: int = Field(12, ge=1, le=40)
    identity_n: int = Field(50, ge=1)
    convergence_n: int = Field(25, ge=2)
    convergence_tol: float = Field(1e-9, gt=0)
    precision_bits: int = Field(200, ge=53)
    walks: int = Field(0, ge=0)
    walk_n: int = Field(3, ge=1)


class EmbeddingFlipParams(BoxParams):
    radius: int = Field(50, ge=2)
    margin: int = Field(1, ge=0)


class CorrectorParams(BoxParams):
    radius: int = Field(128, ge=2)
    d: int = Field(2, ge=2, le=3)
    radii: list[int] = Field(default_factory=lambda: [16, 32, 64])
    seeds: int = Field(16, ge=1)


class SensitivityParams(BoxParams):
    radius: int = Field(64, ge=4)
    flips: int = Field(3, ge=1)
    seeds: int = Field(4, ge=1)
    tolerance: float = Field(1e-12, gt=0)
    coarse_factor: float = Field(100.0, gt=1)
    include_full_lattice: bool = True
    bound: float = Field(1e-6, gt=0)


class FluxParams(BoxParams):
    radius: int = Field(128, ge=2)
    d: int = Field(2, ge=2, le=3)
    seeds: int = Field(16, ge=1)
    full_lattice_radius: int = Field(16, ge=2)


class TwoScaleParams(BoxParams):
    radius: int = Field(64, ge=8)
    pole: Literal["dipole", "delta"] = "dipole"
    direction: list[float] = Field(default_factory=lambda: [1.0, 1.0])
    radii: list[int] = Field(default_factory=lambda: [4, 8, 16])
    check_representations: bool = True
    bound: float = Field(1e-6, gt=0)


class SensitiveDensityParams(BoxParams):
    radius: int = Field(64, ge=4)
    seeds: int = Field(8, ge=1)
    min_density: float = Field(1e-4, gt=0)


class BlockCutParams(BoxParams):
    radius: int = Field(8, ge=2)
    exact: bool = True
    max_seeds: int = Field(20, ge=1)


class DisjointPathsParams(BoxParams):
    radius: int = Field(16, ge=2)
    seeds: int = Field(8, ge=1)


class DiamondParams(ExperimentParams):
    trials: int = Field(100, ge=1)
    radius: int = Field(10, ge=4)
    support: int = Field(3, ge=0)
    max_value: int = Field(3, ge=1)


class SandpileDensityParams(BoxParams):
    p: float = Field(0.75, gt=0, le=1)
    radius: int = Field(25, ge=2)
    units: int = Field(400, ge=1)
    steps_per_unit: int | None = Field(None, ge=1)
    compare_full_lattice: bool = True


class SpectrumParams(ExperimentParams):
    source: Literal["block", "percolation"] = "block"
    rows: int = Field(2, ge=1)
    cols: int = Field(2, ge=1)
    p: float = Field(0.8, gt=0, le=1)
    radius: int = Field(3, ge=1)
    t_max: int = Field(40, ge=0)
    cap: int | None = Field(None, ge=2)
    lower_bound: bool = False
    chain_steps: int = Field(1000, ge=0)
    tree_cap: int = Field(12, ge=1)


class CensusParams(ExperimentParams):
    p: float = Field(0.75, gt=0, le=1)
    radii: list[int] = Field(default_factory=lambda: [50, 100])
    seeds: int = Field(8, ge=1)
    planted_radius: int = Field(6, ge=4)


class WellConnectedParams(BoxParams):
    radius: int = Field(64, ge=4)
    d: int = Field(2, ge=2, le=3)
    seeds: int = Field(4, ge=1)


class GreenDecayParams(BoxParams):
    radius: int = Field(64, ge=8)
    compare_full_lattice: bool = True


# ---------------------------------------------------------------------------
# Gadgets
# ---------------------------------------------------------------------------


@experiment(
    "gadget-table",
    "resistance gadgets: R_n = A_{n+1}/B_n exactly, converging to 1 + sqrt 3",
    GadgetTableParams,
)
def _gadget_table(params: GadgetTableParams, ctx: RunContext) -> None:
    """Exact gadget resistances, integer gaps and their convergence."""
    table = gadget_table(params.n_max, check_solve=False)
    _write_frame(ctx, "table", table, "gadget_table.csv")

    results = [resistance_result(n, ctx.solver) for n in range(1, params.n_max + 1)]
    ctx.check("resistance_exact", all(r.consistent for r in results))
    ctx.check("exponential_growth", all(r.a > 3 ** (r.n - 1) for r in results))
    try:
        gaps_ok = all(
            integer_harmonic_gap(n, ctx.solver) == sequence_AB(n)[0]
            for n in range(1, params.n_max + 1)
        )
    except InternalError as exc:
        logger.warning("%s", exc)
        gaps_ok = False
    ctx.check("integer_gap_is_A", gaps_ok)

    first = second = True
    for n in range(1, params.identity_n + 1):
        a_n, b_prev = sequence_AB(n - 1)
        a_next, b_n = sequence_AB(n)
        first &= a_n + b_prev == b_n
        second &= 3 * a_n + 2 * b_prev == a_next
    ctx.check("numerator_denominator_identities", first and second)

    errors = convergence_errors(params.convergence_n, params.precision_bits)
    frame = pd.DataFrame(
        {
            "n": range(1, params.convergence_n + 1),
            "abs_error": [mpmath.nstr(e, 15) for e in errors],
        }
    )
    _write_frame(ctx, "convergence", frame, "convergence.csv")
    ctx.check("convergence_monotone", all(b < a for a, b in pairwise(errors)))
    ctx.check("convergence_tolerance", bool(errors[-1] < params.convergence_tol))

    if params.walks:
        estimate = escape_probability_mc(params.walk_n, params.walks, ctx.seed)
        exact = 1 / float(resistance_result(params.walk_n).r_recurrence)
        ctx.observe("escape_probability", {"estimate": estimate, "exact": exact})


# ---------------------------------------------------------------------------
# Corrected planes
# ---------------------------------------------------------------------------


@experiment(
    "embedding-flip",
    "harmonic embedding before and after thinning the center column",
    EmbeddingFlipParams,
)
def _embedding_flip(params: EmbeddingFlipParams, ctx: RunContext) -> None:
    """Draw the harmonic embedding and its image after the edge thinning."""
    _, graph = _cluster(params.p, params.radius, ctx.seed)
    base = harmonic_embedding(graph, ctx.solver)
    altered = altered_environment(graph, params.margin)
    flipped = harmonic_embedding(altered.graph, ctx.solver)
    svg = ctx.output("drawing", write_embedding_svg(base, ctx.path("embedding.svg"), flipped))
    moved = embedding_displacement(base, flipped)
    frame = pd.DataFrame(graph.points, columns=["x1", "x2"])
    frame["displacement"] = moved
    _write_frame(ctx, "displacement", frame, "displacement.csv")

    def lipschitz(emb: HarmonicEmbedding) -> float:
        e = emb.graph.edges
        return float(np.abs(emb.coords[e[:, 1], 0] - emb.coords[e[:, 0], 0]).max(initial=0.0))

    ctx.check("drawing_written", svg.exists() and svg.stat().st_size > 0)
    ctx.check("displacement_finite", bool(np.all(np.isfinite(moved))))
    ctx.observe("removed_edges", len(altered.removed))
    ctx.observe("lipschitz_e1", {"base": lipschitz(base), "thinned": lipschitz(flipped)})


@experiment(
    "corrector-sublinearity",
    "first-order corrector: osc(chi, B_r) / r decreases with r",
    CorrectorParams,
)
def _corrector_sublinearity(params: CorrectorParams, ctx: RunContext) -> None:
    """Oscillation of the corrector over growing balls, across replicates."""
    unit = tuple(int(k == 0) for k in range(params.d))
    frames = []
    for i, seed in ctx.replicates(params.seeds, "correctors"):
        _, graph = _cluster(params.p, params.radius, seed, params.d)
        plane = corrected_plane(graph, unit, ctx.solver)
        frame = corrector_stats(plane, params.radii).to_frame()
        frame.insert(0, "replicate", i)
        frames.append(frame)
    table = pd.concat(frames, ignore_index=True)
    table["osc_over_r"] = table["osc"] / table["radius"]
    _write_frame(ctx, "corrector", table, "corrector.csv")
    medians = table.groupby("radius")["osc_over_r"].median()
    ctx.check("corrector_finite", bool(np.all(np.isfinite(table["osc"]))))
    ctx.observe("median_osc_over_r", {int(r): float(v) for r, v in medians.items()})
    ctx.observe(
        "median_nonincreasing", bool(all(b <= a for a, b in pairwise(medians.tolist())))
    )


@experiment(
    "sensitivity-identity",
    "edge deletion changes the corrected plane by a sum of Green dipoles",
    SensitivityParams,
)
def _sensitivity_identity(params: SensitivityParams, ctx: RunContext) -> None:
    """Both sides of the plane comparison identity at two solver tolerances."""
    fine_opts = ctx.solver.model_copy(update={"tolerance": params.tolerance, "exact": False})
    coarse_opts = fine_opts.model_copy(
        update={"tolerance": params.tolerance * params.coarse_factor}
    )
    probabilities = ([1.0] if params.include_full_lattice and params.p < 1 else []) + [params.p]
    rows = []
    pairing_checked = False
    for i, seed in ctx.replicates(params.seeds, "sensitivity"):
        for p in probabilities:
            _, graph = _cluster(p, params.radius, seed)
            removed = _removable_edges(
                graph, params.flips, np.random.default_rng(seed), params.radius // 4
            )
            fine = edge_flip_sensitivity(graph, removed, E1, fine_opts)
            coarse = edge_flip_sensitivity(graph, removed, E1, coarse_opts)
            rows.append(
                {
                    "replicate": i,
                    "p": p,
                    "removed": len(removed),
                    "discrepancy": fine.max_abs_discrepancy,
                    "coarse_discrepancy": coarse.max_abs_discrepancy,
                }
            )
            if not pairing_checked and removed:
                f = PoleFunction.dipole(*_central_edge(graph))
                pot = potential(graph, f, fine_opts)
                pairing = flip_edge_pairing(pot, removed[0], E1, fine_opts)
                ctx.check("flip_pairing", pairing.discrepancy <= params.bound)
                pairing_checked = True
    table = pd.DataFrame(rows)
    _write_frame(ctx, "sensitivity", table, "sensitivity.csv")
    ctx.check("identity_within_bound", bool((table["discrepancy"] <= params.bound).all()))
    shrinks = (table["coarse_discrepancy"] >= 10 * table["discrepancy"]) | (
        table["coarse_discrepancy"] < 1e-13
    )
    ctx.observe("tightening_shrinks_discrepancy", bool(shrinks.all()))


@experiment(
    "flux-ahat",
    "homogenized coefficient as the normalized left-face flux of the e_1 plane",
    FluxParams,
)
def _flux_ahat(params: FluxParams, ctx: RunContext) -> None:
    """Monte Carlo estimate of the homogenized coefficient."""
    unit = tuple(int(k == 0) for k in range(params.d))
    planes = []
    for _, seed in ctx.replicates(params.seeds, "flux"):
        _, graph = _cluster(params.p, params.radius, seed, params.d)
        planes.append(corrected_plane(graph, unit, ctx.solver))
    est = homogenized_flux(planes)
    frame = pd.DataFrame(
        {
            "replicate": range(len(est.values)),
            "flux": est.values,
            "transverse": est.transverse_values,
        }
    )
    _write_frame(ctx, "flux", frame, "flux.csv")
    if params.p < 1:
        ctx.check("ahat_in_unit_interval", 0 < est.mean < 1)
    split = left_half_flux_decomposition(planes[0].field)
    ctx.observe(
        "left_half_flux",
        {"left": float(split.left), "sides": float(split.sides), "center": float(split.center)},
    )
    ctx.observe("ahat", {"mean": est.mean, "standard_error": est.standard_error})
    ctx.observe(
        "transverse_within_3se",
        bool(abs(est.transverse_mean) <= 3 * max(est.transverse_standard_error, 1e-15)),
    )

    _, full = _cluster(1.0, params.full_lattice_radius, ctx.seed, params.d)
    full_est = homogenized_flux(corrected_plane(full, unit, ctx.solver))
    ctx.check("full_lattice_unit_flux", abs(full_est.per_edge_mean - 1) <= 1e-8)


@experiment(
    "green-decay",
    "logarithmic growth of the Green proxy, fitted constant kappa",
    GreenDecayParams,
)
def _green_decay(params: GreenDecayParams, ctx: RunContext) -> None:
    """Fit ``G(y, y) - G(x, y)`` against ``log |x - y|``."""
    radii = range(2, max(3, params.radius // 4) + 1)
    rows = []
    probabilities = [params.p] + ([1.0] if params.compare_full_lattice and params.p < 1 else [])
    for p in probabilities:
        _, graph = _cluster(p, params.radius, ctx.seed)
        fit = fit_green_log_slope(graph, _central_vertex(graph), radii, ctx.solver)
        rows.extend({"p": p, "radius": r, "drop": v} for r, v in zip(fit.radii, fit.values))
        ctx.observe(f"kappa_p{p:g}", 2 * math.pi * fit.slope)
        ctx.check(f"green_grows_p{p:g}", fit.slope > 0)
    _write_frame(ctx, "green", pd.DataFrame(rows), "green.csv")


# ---------------------------------------------------------------------------
# Potentials and level sets
# ---------------------------------------------------------------------------


@experiment(
    "potential-two-scale",
    "potentials of integer poles: two-scale dipole term and representations",
    TwoScaleParams,
)
def _potential_two_scale(params: TwoScaleParams, ctx: RunContext) -> None:
    """Laplacian, representations and the two-scale expansion of ``u_f``."""
    _, graph = _cluster(params.p, params.radius, ctx.seed)
    a, b = _central_edge(graph)
    f = PoleFunction.dipole(a, b) if params.pole == "dipole" else PoleFunction.delta(a)
    pot = potential(graph, f, ctx.solver)
    residual = laplacian_apply(graph, pot.field).as_float() + f.as_field(graph)
    inner = residual.values[graph.interior]
    ctx.check("laplacian_is_minus_f", float(np.abs(inner).max(initial=0.0)) <= params.bound)

    if params.pole == "dipole":
        report = two_scale_check(pot, None, params.direction, params.radii, opts=ctx.solver)
        _write_frame(ctx, "two_scale", report.table, "two_scale.csv")
        ctx.observe("kappa", report.kappa)
        ctx.observe("sign_agreement", report.sign_agreement())
        ctx.observe(
            "median_scaled_error",
            {int(r): float(v) for r, v in report.median_scaled_error().items()},
        )
        if params.check_representations:
            flow = divergence_representation(graph, f, ctx.solver)
            rebuilt = gradient_representation(graph, flow, ctx.solver)
            gap = float(np.abs(rebuilt.as_float().values - pot.field.as_float().values).max())
            ctx.check("gradient_representation_matches", gap <= params.bound)
    else:
        growth = log_growth_check(pot, params.radii)
        ctx.observe("log_slope", {"fitted": growth.slope, "expected": growth.expected_slope})


@experiment(
    "sensitive-density",
    "sensitive edges of a dipole potential and their dyadic densities",
    SensitiveDensityParams,
)
def _sensitive_density(params: SensitiveDensityParams, ctx: RunContext) -> None:
    """Density of edges where both the potential and the plane change."""
    rows = []
    hits = 0
    for i, seed in ctx.replicates(params.seeds, "sensitive edges"):
        _, graph = _cluster(params.p, params.radius, seed)
        pot = potential(graph, PoleFunction.dipole(*_central_edge(graph)), ctx.solver)
        plane = corrected_plane(graph, E1, ctx.solver)
        found = sensitive_edges(pot, plane)
        rows.extend(
            {"replicate": i, "scale": k, "density": v} for k, v in sorted(found.densities.items())
        )
        if found.densities:
            hits += found.densities[max(found.densities)] >= params.min_density
        if i == 0:
            _write_frame(ctx, "edges", found.to_frame(), "sensitive_edges.csv")
    _write_frame(ctx, "densities", pd.DataFrame(rows), "densities.csv")
    ctx.check("densities_in_unit_interval", all(0 <= r["density"] <= 1 for r in rows))
    ctx.observe("seeds_above_min_density", f"{hits}/{params.seeds}")


@experiment(
    "blockcut-explore",
    "block-cut tree exploration of a level set towards a sensitive edge",
    BlockCutParams,
)
def _blockcut_explore(params: BlockCutParams, ctx: RunContext) -> None:
    """Explore level sets from seed edges where the plane increases and ``u_f`` does not."""
    opts = ctx.solver.model_copy(update={"exact": params.exact})
    _, graph = _cluster(params.p, params.radius, ctx.seed)
    pot = potential(graph, PoleFunction.dipole(*_central_edge(graph)), opts)
    plane = corrected_plane(graph, E1, opts)
    u, ell = pot.field, plane.field
    eps = Fraction(0) if params.exact else 1e-9 * max(1.0, float(u.abs_max()))
    seeds: list[Edge] = []
    for i in _by_distance(graph):
        x0 = graph.point(i)
        x1 = (x0[0] + 1, *x0[1:])
        if not (graph.contains(x1) and graph.has_edge(x0, x1)):
            continue
        if ell.at(x1) > ell.at(x0) and abs(u.at(x1) - u.at(x0)) <= eps:
            seeds.append((x0, x1))
        if len(seeds) == params.max_seeds:
            break
    ctx.observe("seed_edges", len(seeds))

    rows = []
    inequalities_ok = telescoping_ok = True
    for k, seed in enumerate(seeds):
        res = explore_level_set(pot, plane, seed)
        if res.inequalities is not None:
            inequalities_ok &= res.inequalities.holds
        if res.telescoping is not None and res.exploration is not None:
            if res.exploration.reached_leaf:
                telescoping_ok &= res.telescoping.holds
        rows.append(
            {
                "x0": str(seed[0]),
                "x1": str(seed[1]),
                "witness": "" if res.witness is None else str(res.witness),
                "tree_nodes": 0 if res.tree is None else len(res.tree.nodes),
                "reached_leaf": bool(res.exploration and res.exploration.reached_leaf),
            }
        )
        if k == 0 and res.tree is not None:
            text = ctx.path("tree.txt")
            text.write_text(tree_to_text(res.tree), encoding="utf-8")
            ctx.output("tree_text", text)
            ctx.output("tree_graphml", write_tree_graphml(res.tree, ctx.path("tree.graphml")))
            ctx.output(
                "level_set",
                write_points_csv(graph, level_set(pot, res.level), ctx.path("level_set.csv")),
            )
    frame = pd.DataFrame(rows, columns=["x0", "x1", "witness", "tree_nodes", "reached_leaf"])
    _write_frame(ctx, "explorations", frame, "explorations.csv")
    ctx.check("flux_inequalities", inequalities_ok)
    ctx.check("telescoping_bound", telescoping_ok)


@experiment(
    "disjoint-paths",
    "vertex-disjoint paths from the center to the box boundary",
    DisjointPathsParams,
)
def _disjoint_paths(params: DisjointPathsParams, ctx: RunContext) -> None:
    """Count disjoint paths by max-flow from a central vertex."""
    rows = []
    for i, seed in ctx.replicates(params.seeds, "paths"):
        _, graph = _cluster(params.p, params.radius, seed)
        x = _central_vertex(graph)
        rows.append(
            {
                "replicate": i,
                "paths": count_disjoint_paths(graph, [x]),
                "degree": int(graph.degree[graph.index(x)]),
            }
        )
    table = pd.DataFrame(rows)
    _write_frame(ctx, "paths", table, "paths.csv")
    ctx.check("bounded_by_degree", bool((table["paths"] <= table["degree"]).all()))
    _, full = _cluster(1.0, min(params.radius, 4), ctx.seed)
    ctx.check("full_lattice_four_paths", count_disjoint_paths(full, [_central_vertex(full)]) == 4)


@experiment(
    "diamond-peel",
    "compactly supported planar fields with integer Laplacian are integers",
    DiamondParams,
)
def _diamond_peel(params: DiamondParams, ctx: RunContext) -> None:
    """Certify random integer fields and reject half-integer perturbations."""
    if params.support > params.radius - 2:
        raise ParameterError("the support must stay two layers away from the box faces")
    _, graph = _cluster(1.0, params.radius, ctx.seed)
    rng = np.random.default_rng(ctx.seed)
    cells = [
        (x, y)
        for x in range(-params.support, params.support + 1)
        for y in range(-params.support, params.support + 1)
        if abs(x) + abs(y) <= params.support
    ]
    rows = []
    for trial in range(params.trials):
        values = rng.integers(-params.max_value, params.max_value + 1, size=len(cells))
        mapping = {pt: Fraction(int(v)) for pt, v in zip(cells, values, strict=True)}
        u = ScalarField.from_mapping(graph, mapping, "rational", Fraction(0))
        certified = diamond_peel(u).integer_valued
        z = cells[int(rng.integers(len(cells)))]
        mapping[z] = mapping[z] + Fraction(1, 2)
        try:
            diamond_peel(ScalarField.from_mapping(graph, mapping, "rational", Fraction(0)))
            rejected = False
        except PreconditionError as exc:
            rejected = exc.witness == (z[0] - 1, z[1])
        rows.append({"trial": trial, "certified": certified, "perturbation_rejected": rejected})
    table = pd.DataFrame(rows)
    _write_frame(ctx, "trials", table, "diamond.csv")
    ctx.check("integer_fields_certified", bool(table["certified"].all()))
    ctx.check("perturbations_rejected", bool(table["perturbation_rejected"].all()))


# ---------------------------------------------------------------------------
# Sandpiles
# ---------------------------------------------------------------------------


@experiment(
    "sandpile-density",
    "mean chip density of the sandpile chain started from saturation",
    SandpileDensityParams,
)
def _sandpile_density(params: SandpileDensityParams, ctx: RunContext) -> None:
    """Density traces on the cluster and, for comparison, on the full lattice."""
    side = 2 * params.radius + 1
    per_unit = params.steps_per_unit or side
    probabilities = [params.p] + ([1.0] if params.compare_full_lattice and params.p < 1 else [])
    fig = Figure(figsize=(8, 4))
    ax = fig.add_subplot()
    for p in probabilities:
        sample, graph = _cluster(p, params.radius, ctx.seed)
        degree = sandpile_degree(graph, sample)
        trace = run_chain(graph, params.units * per_unit, ctx.seed, per_unit, degree)
        ctx.output(f"trace_p{p:g}", trace.to_csv(ctx.path(f"trace_p{p:g}.csv")))
        ax.plot(trace.times / per_unit, trace.mean_chips, label=f"p = {p:g}", linewidth=0.8)
        saturated = float((degree - 1).mean())
        ctx.check(f"starts_saturated_p{p:g}", abs(trace.mean_chips[0] - saturated) < 1e-9)
        ctx.check(f"density_stable_p{p:g}", bool(np.all(trace.mean_chips < degree.max())))
        ctx.observe(f"settled_p{p:g}", trace.is_settled())
        ctx.observe(f"final_density_p{p:g}", float(trace.mean_chips[-1]))
    ax.set_xlabel(f"steps / {per_unit}")
    ax.set_ylabel("mean chips")
    ax.legend()
    ctx.output("plot", _save_svg(fig, ctx.path("density.svg")))


@experiment(
    "spectrum-table",
    "toppling invariants, their eigenvalues and the l2 distance to uniform",
    SpectrumParams,
)
def _spectrum_table(params: SpectrumParams, ctx: RunContext) -> None:
    """Dual group, exact spectrum and the l2 mixing curve of a small graph."""
    if params.source == "block":
        graph = _block_graph(params.rows, params.cols)
        degree = sandpile_degree(graph)
    else:
        sample, graph = _cluster(params.p, params.radius, ctx.seed)
        degree = sandpile_degree(graph, sample)
    group = toppling_invariants(graph, degree)
    ctx.output("group", group.write_json(ctx.path("group.json")))
    determinant = abs(bareiss_determinant(group.reduced_laplacian))
    ctx.check("order_is_determinant", group.order == determinant)
    ctx.check("generators_invariant", all(group.is_invariant(g) for g in group.generators))
    if graph.n_vertices <= params.tree_cap:
        trees = spanning_tree_count(graph, degree, params.tree_cap)
        ctx.check("order_counts_spanning_trees", group.order == trees)

    cap = params.cap or ctx.config.sandpile.enumeration_cap
    report = l2_mixing_curve(group, range(params.t_max + 1), cap, params.lower_bound)
    ctx.output("spectrum", report.to_csv(ctx.path("spectrum.csv")))
    _write_frame(ctx, "curve", report.curve_frame(), "curve.csv")
    ctx.check("curve_nonincreasing", all(b <= a + 1e-12 for a, b in pairwise(report.curve)))
    ctx.check("moduli_at_most_one", report.max_modulus <= 1 + 1e-12)
    if report.exact and report.enumerated <= 20000:
        ctx.check("conjugation_closed", report.is_conjugation_closed())
    ctx.observe("exact", report.exact)
    ctx.observe("unimodular_count", report.unimodular_count())
    ctx.observe("first_time_below_1e-6", report.first_time_below())
    ctx.observe("mixing_upper_bound_time", mixing_upper_bound_time(max(graph.n_vertices, 2), 0.01))

    rng = np.random.default_rng(ctx.seed)
    state = SandpileState.saturated(graph, degree)
    conserved = True
    for _ in range(params.chain_steps):
        v = int(rng.integers(graph.n_vertices))
        loaded = state.add_chip(v)
        state, _ = stabilize(loaded)
        conserved &= group.pairing(loaded.chips) == group.pairing(state.chips)
    ctx.check("invariants_conserved", conserved)


@experiment(
    "gadget-census",
    "slow-mixing gadgets: half-integer frequencies on degree-two squares",
    CensusParams,
)
def _gadget_census(params: CensusParams, ctx: RunContext) -> None:
    """Planted gadget in exact arithmetic and gadget counts on random clusters."""
    sample = sample_percolation(BoxRegion(d=2, radius=params.planted_radius), 1.0, ctx.seed)
    full = largest_cluster(sample)
    ctx.check(
        "full_lattice_has_no_frequency",
        slow_mixing_frequency(full, (0, 0), 0, sandpile_degree(full, sample)) is None,
    )
    half = ScalarField.from_mapping(
        full, {(0, 0): Fraction(1, 2), (1, 1): Fraction(1, 2)}, "rational", Fraction(0)
    )
    try:
        diamond_peel_bridge(half)
        rejected = False
    except PreconditionError:
        rejected = True
    ctx.check("full_lattice_rejects_half_frequency", rejected)

    closures = [((-1, 0), (0, 0)), ((0, -1), (0, 0)), ((1, 1), (2, 1)), ((1, 1), (1, 2))]
    planted_sample = modify_edges(sample, [(edge, False) for edge in closures])
    planted = largest_cluster(planted_sample)
    degree = sandpile_degree(planted, planted_sample)
    census = slow_mixing_gadget_census(planted, degree)
    m = planted.n_vertices
    ctx.check("planted_single_occurrence", census.multiplicity == 1)
    ctx.check("planted_eigenvalue", census.eigenvalue == Fraction(m - 4, m))
    ctx.check("planted_unaffected_fraction", census.unaffected_fraction == Fraction(m - 2, m))
    xi = slow_mixing_frequency(planted, (0, 0), 0, degree)
    ctx.check(
        "planted_two_half_phases",
        xi is not None and sorted(x for x in xi if x) == [Fraction(1, 2)] * 2,
    )

    rows = []
    for radius in params.radii:
        for i, seed in ctx.replicates(params.seeds, f"census N={radius}"):
            sample, graph = _cluster(params.p, radius, seed)
            found = find_slow_mixing_gadgets(graph, sandpile_degree(graph, sample))
            side = 2 * radius + 1
            rows.append(
                {
                    "radius": radius,
                    "replicate": i,
                    "m": graph.n_vertices,
                    "density": cluster_density(sample),
                    "multiplicity": len(found),
                    "per_area": len(found) / side**2,
                    "lower_bound_t_m": census_lower_bound(
                        graph.n_vertices, len(found), graph.n_vertices
                    ),
                }
            )
    table = pd.DataFrame(rows)
    _write_frame(ctx, "census", table, "census.csv")
    means = table.groupby("radius")["per_area"].mean()
    ratio = float(means.max() / means.min()) if means.min() > 0 else float("inf")
    ctx.observe("per_area_ratio_across_sizes", ratio)
    ctx.observe("per_area_within_factor_2", ratio <= 2)
    largest = table[table["radius"] == max(params.radii)]["multiplicity"]
    spread = float(largest.std(ddof=0) / largest.mean()) if largest.mean() > 0 else float("inf")
    ctx.observe("relative_spread_largest", spread)


# ---------------------------------------------------------------------------
# Percolation
# ---------------------------------------------------------------------------


@experiment(
    "well-connected",
    "crossing and absorption checks over mesoscale sub-cubes",
    WellConnectedParams,
)
def _well_connected(params: WellConnectedParams, ctx: RunContext) -> None:
    """Well-connectedness diagnostic and cluster density across replicates."""
    rows = []
    for i, seed in ctx.replicates(params.seeds, "well-connected"):
        sample = sample_percolation(BoxRegion(d=params.d, radius=params.radius), params.p, seed)
        report = well_connected_report(sample, sample.region, ctx.config.well_connected)
        rows.append(
            {
                "replicate": i,
                "density": cluster_density(sample),
                "checked": report.checked,
                "failures": report.failure_count,
                "well_connected": report.is_well_connected,
            }
        )
    table = pd.DataFrame(rows)
    _write_frame(ctx, "report", table, "well_connected.csv")
    ctx.check("density_in_unit_interval", bool(table["density"].between(0, 1).all()))
    ctx.observe("well_connected_fraction", float(table["well_connected"].mean()))


def describe(experiments: Sequence[Experiment] | None = None) -> pd.DataFrame:
    """Catalogue with name, anchor and summary of each experiment."""
    items = list_experiments() if experiments is None else list(experiments)
    return pd.DataFrame(
        [{"name": e.name, "anchor": e.anchor, "summary": e.summary} for e in items],
        columns=["name", "anchor", "summary"],
    )
