"""Corrected planes, correctors and their statistics.

The finite-volume corrected plane ``ℓ_p`` is the solution on a cluster graph
that equals ``p·x`` on the inner boundary and is harmonic inside; the
corrector is ``χ_p = ℓ_p - p·x``.

Public API
----------
- :class:`CorrectedPlane`, :func:`corrected_plane`, :func:`corrector`
- :func:`oscillation`, :func:`lipschitz_constant`
- :class:`CorrectorStats`, :func:`corrector_stats`
- :class:`FluxEstimate`, :func:`homogenized_flux`
- :func:`mixed_green_difference`, :class:`SensitivityReport`,
  :func:`edge_flip_sensitivity`
- :class:`AlteredEnvironment`, :func:`altered_environment`
- :class:`HarmonicEmbedding`, :func:`harmonic_embedding`,
  :func:`embedding_displacement`, :func:`write_embedding_svg`
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal

import matplotlib
import networkx as nx
import numpy as np
import pandas as pd
from matplotlib.collections import LineCollection
from matplotlib.figure import Figure

from .errors import ParameterError
from .fields import EdgeField, ScalarField, SolveOptions
from .percolation import BoxRegion, ClusterGraph, Edge
from .solvers import gradient, solve_dirichlet

logger = logging.getLogger(__name__)

__all__ = [
    "AlteredEnvironment",
    "CorrectedPlane",
    "CorrectorStats",
    "FluxEstimate",
    "HarmonicEmbedding",
    "SensitivityReport",
    "altered_environment",
    "corrected_plane",
    "corrector",
    "corrector_stats",
    "edge_flip_sensitivity",
    "embedding_displacement",
    "harmonic_embedding",
    "homogenized_flux",
    "lipschitz_constant",
    "mixed_green_difference",
    "oscillation",
    "write_embedding_svg",
]

RegionLike = BoxRegion | np.ndarray | Iterable[Sequence[int]]

# ---------------------------------------------------------------------------
# Corrected planes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CorrectedPlane:
    """A finite-volume corrected plane and how it was built."""

    graph: ClusterGraph
    slope: tuple[Any, ...]
    field: ScalarField
    box_radius: int | None
    boundary_recipe: Literal["affine-Dirichlet"] = "affine-Dirichlet"

    def at(self, point: Sequence[int]) -> Any:
        """Plane value at a vertex."""
        return self.field.at(point)


def corrected_plane(
    graph: ClusterGraph,
    slope: Sequence[Any],
    opts: SolveOptions | None = None,
) -> CorrectedPlane:
    """Harmonic function on *graph* equal to ``slope · x`` on the inner boundary.

    Raises
    ------
    ParameterError
        If *slope* is zero or has the wrong dimension.
    IllPosedError
        If the graph does not touch its boundary.
    """
    opts = opts or SolveOptions()
    if len(slope) != graph.dim or not any(slope):
        raise ParameterError(f"slope must be a nonzero vector of dimension {graph.dim}")
    data = ScalarField.linear(graph, slope, opts.kind)
    solution = solve_dirichlet(graph, None, data, None, opts)
    radius = graph.region.radius if graph.region else None
    return CorrectedPlane(
        graph=graph,
        slope=tuple(slope),
        field=solution.with_metadata(slope=tuple(slope), box_radius=radius),
        box_radius=radius,
    )


def corrector(plane: CorrectedPlane) -> ScalarField:
    """``χ_p(x) = ℓ_p(x) - p·x``."""
    return plane.field - ScalarField.linear(plane.graph, plane.slope, plane.field.kind)


def _region_mask(graph: ClusterGraph, region: RegionLike) -> np.ndarray:
    if isinstance(region, BoxRegion):
        return region.contains(graph.points)
    if isinstance(region, np.ndarray) and region.dtype == bool:
        return region
    idx = graph.indices(np.asarray(list(region), dtype=np.int64).reshape(-1, graph.dim))
    mask = np.zeros(graph.n_vertices, dtype=bool)
    mask[idx[idx >= 0]] = True
    return mask


def oscillation(u: ScalarField, region: RegionLike) -> Any:
    """``max - min`` of *u* over the vertices of *region*.

    Raises
    ------
    ParameterError
        If *region* contains no vertex of the graph.
    """
    mask = _region_mask(u.graph, region)
    if not mask.any():
        raise ParameterError("region does not meet the graph")
    values = u.values[mask]
    if u.kind == "rational":
        return max(values) - min(values)
    return float(values.max() - values.min())


def lipschitz_constant(u: ScalarField) -> Any:
    """Largest ``|∇u(e)|`` over the edges of the graph."""
    return gradient(u).abs_max()


# ---------------------------------------------------------------------------
# Corrector statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CorrectorStats:
    """Oscillation of the corrector and maximal plane gradient per ball radius."""

    radii: tuple[int, ...]
    oscillation: tuple[float, ...]
    max_gradient: tuple[float, ...]
    box_radius: int

    def to_frame(self) -> pd.DataFrame:
        """Columns ``radius, osc, maxgrad``."""
        return pd.DataFrame(
            {"radius": self.radii, "osc": self.oscillation, "maxgrad": self.max_gradient}
        )

    def to_csv(self, path: str | Path) -> Path:
        """Write :meth:`to_frame` as CSV."""
        out = Path(path)
        self.to_frame().to_csv(out, index=False)
        return out


def corrector_stats(plane: CorrectedPlane, radii: Iterable[int]) -> CorrectorStats:
    """Measure ``osc(χ_p, B_r)`` and ``max |∇ℓ_p|`` on ``B_r`` around the box center.

    Raises
    ------
    ParameterError
        If the graph has no box, or radii are not increasing, or exceed half
        the box radius.
    """
    graph = plane.graph
    if graph.region is None or plane.box_radius is None:
        raise ParameterError("corrector statistics need a graph cut from a box")
    rs = tuple(int(r) for r in radii)
    if not rs or any(b <= a for a, b in zip(rs, rs[1:], strict=False)):
        raise ParameterError(f"radii must be increasing, got {rs}")
    if rs[-1] > plane.box_radius / 2 or rs[0] < 1:
        raise ParameterError(f"radii must lie in [1, {plane.box_radius // 2}]")
    chi = corrector(plane).as_float()
    grad = np.abs(gradient(plane.field.as_float()).values)
    dist = np.abs(graph.relative).max(axis=1)
    osc: list[float] = []
    maxgrad: list[float] = []
    for r in rs:
        inside = dist <= r
        osc.append(oscillation(chi, inside) if inside.any() else 0.0)
        in_edges = inside[graph.edges[:, 0]] & inside[graph.edges[:, 1]]
        maxgrad.append(float(grad[in_edges].max()) if in_edges.any() else 0.0)
    return CorrectorStats(rs, tuple(osc), tuple(maxgrad), plane.box_radius)


# ---------------------------------------------------------------------------
# Flux of the e_1 plane
# ---------------------------------------------------------------------------


def _face_edges(graph: ClusterGraph, axis: int) -> np.ndarray:
    """Edges ``(x, x + e_axis)`` of the graph with ``x`` on the lower face of that axis."""
    assert graph.region is not None
    tails = np.flatnonzero(graph.relative[:, axis] == -graph.region.radius)
    unit = np.zeros(graph.dim, dtype=np.int64)
    unit[axis] = 1
    heads = graph.indices(graph.points[tails] + unit)
    keep = [
        k
        for k, (t, h) in enumerate(zip(tails.tolist(), heads.tolist(), strict=True))
        if h >= 0 and (min(t, h), max(t, h)) in graph.edge_lookup
    ]
    return np.column_stack([tails[keep], heads[keep]]).astype(np.int64).reshape(-1, 2)


@dataclass(frozen=True)
class FluxEstimate:
    """Monte Carlo estimate of the homogenized coefficient from left-face fluxes.

    ``values`` are fluxes divided by ``N^(d-1)``; ``per_edge_mean`` divides by
    the number of face positions ``(2N+1)^(d-1)`` instead. The transverse
    entries use the bottom face in direction ``e_2`` and average to zero.
    """

    values: tuple[float, ...]
    mean: float
    standard_error: float
    per_edge_mean: float
    transverse_values: tuple[float, ...]
    transverse_mean: float
    transverse_standard_error: float
    box_radius: int
    normalization: str = "N^(d-1)"
    replicates: int = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "replicates", len(self.values))


def _mean_se(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
    return float(arr.mean()), se


def homogenized_flux(planes: CorrectedPlane | Sequence[CorrectedPlane]) -> FluxEstimate:
    """Normalized flux of ``ℓ_{e_1}`` through the left face, averaged over replicates.

    Raises
    ------
    ParameterError
        If a plane is not the ``e_1`` plane or the replicates use different boxes.
    """
    items = [planes] if isinstance(planes, CorrectedPlane) else list(planes)
    if not items:
        raise ParameterError("no plane given")
    radii = {p.box_radius for p in items}
    if len(radii) != 1 or None in radii:
        raise ParameterError("replicates must share one box radius")
    n = int(items[0].box_radius)  # type: ignore[arg-type]
    values: list[float] = []
    per_edge: list[float] = []
    transverse: list[float] = []
    for plane in items:
        unit = tuple(int(i == 0) for i in range(plane.graph.dim))
        if tuple(float(c) for c in plane.slope) != tuple(float(c) for c in unit):
            raise ParameterError("flux estimation uses the e_1 plane")
        d = plane.graph.dim
        u = plane.field.as_float().values
        left = _face_edges(plane.graph, 0)
        flux = float((u[left[:, 1]] - u[left[:, 0]]).sum())
        values.append(flux / n ** (d - 1))
        per_edge.append(flux / (2 * n + 1) ** (d - 1))
        bottom = _face_edges(plane.graph, 1)
        transverse.append(float((u[bottom[:, 1]] - u[bottom[:, 0]]).sum()) / n ** (d - 1))
    mean, se = _mean_se(values)
    t_mean, t_se = _mean_se(transverse)
    logger.info("flux estimate %.4f +- %.4f over %d replicates", mean, se, len(values))
    return FluxEstimate(
        values=tuple(values),
        mean=mean,
        standard_error=se,
        per_edge_mean=float(np.mean(per_edge)),
        transverse_values=tuple(transverse),
        transverse_mean=t_mean,
        transverse_standard_error=t_se,
        box_radius=n,
    )


# ---------------------------------------------------------------------------
# Green differences and edge sensitivity
# ---------------------------------------------------------------------------


def _dipole_potential(
    graph: ClusterGraph, a: int, b: int, opts: SolveOptions
) -> ScalarField:
    """``G(·, a) - G(·, b)`` for the zero-boundary Green proxy."""
    rhs = [0] * graph.n_vertices
    rhs[a] += 1
    rhs[b] -= 1
    return solve_dirichlet(graph, None, None, ScalarField(graph, rhs, opts.kind), opts)


def _check_far_from_faces(graph: ClusterGraph, points: Iterable[Sequence[int]]) -> None:
    if graph.region is None:
        return
    limit = graph.region.radius - graph.region.radius / 4
    center = np.asarray(graph.region.center)
    for pt in points:
        if np.abs(np.asarray(pt) - center).max() > limit:
            raise ParameterError(
                f"{tuple(pt)} is closer than N/4 to the faces of {graph.region}"
            )


def mixed_green_difference(
    graph: ClusterGraph,
    e: Edge,
    e_prime: Edge,
    opts: SolveOptions | None = None,
    check_proximity: bool = True,
) -> Any:
    """Mixed second difference ``∇_x ∇_y G(e', e)`` of the Green proxy.

    With ``e = (a, b)`` and ``e' = (x, y)`` this is
    ``G(y, b) - G(x, b) - G(y, a) + G(x, a)``.

    Raises
    ------
    ParameterError
        If an edge is not in the graph or an endpoint lies within ``N/4`` of
        the box faces (when *check_proximity*).
    """
    opts = opts or SolveOptions()
    (pa, pb), (px, py) = e, e_prime
    a, b, x, y = (graph.index(p) for p in (pa, pb, px, py))
    graph.edge_id(a, b)
    graph.edge_id(x, y)
    if check_proximity:
        _check_far_from_faces(graph, (pa, pb, px, py))
    w = _dipole_potential(graph, a, b, opts)
    return -(w.values[y] - w.values[x])


@dataclass(frozen=True)
class SensitivityReport:
    """Both sides of the plane comparison identity for a set of removed edges.

    ``left`` is ``∇ℓ_p - ∇ℓ'_p`` and ``right`` is
    ``Σ_{e=(a,b) in B} ∇ℓ'_p(e) ∇[G(·, a) - G(·, b)]`` on the original graph.
    """

    removed: tuple[Edge, ...]
    left: EdgeField
    right: EdgeField
    max_abs_discrepancy: float


def edge_flip_sensitivity(
    graph: ClusterGraph,
    removed: Iterable[Edge],
    slope: Sequence[Any],
    opts: SolveOptions | None = None,
) -> SensitivityReport:
    """Compare corrected planes before and after deleting *removed*.

    Raises
    ------
    TopologyError
        If deleting the edges disconnects the graph.
    ParameterError
        If an edge is not in the graph.
    """
    opts = opts or SolveOptions()
    edges = tuple(tuple(tuple(int(c) for c in p) for p in e) for e in removed)
    base = corrected_plane(graph, slope, opts)
    if not edges:
        zero = EdgeField.zeros(graph, opts.kind)
        return SensitivityReport((), zero, zero, 0.0)
    thinned = graph.without_edges(edges)  # type: ignore[arg-type]
    flipped = corrected_plane(thinned, slope, opts)
    on_graph = ScalarField(graph, flipped.field.values, opts.kind)
    left = gradient(base.field) - gradient(on_graph)
    right = EdgeField.zeros(graph, opts.kind)
    for pa, pb in edges:
        a, b = graph.index(pa), graph.index(pb)
        weight = flipped.field.values[b] - flipped.field.values[a]
        right = right + gradient(_dipole_potential(graph, a, b, opts)) * weight
    discrepancy = float((left - right).abs_max())
    logger.debug("sensitivity identity over %d edges: discrepancy %.3e", len(edges), discrepancy)
    return SensitivityReport(edges, left, right, discrepancy)  # type: ignore[arg-type]


# ---------------------------------------------------------------------------
# Altered environment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AlteredEnvironment:
    """Graph with horizontal center edges removed where that keeps it connected."""

    graph: ClusterGraph
    removed: tuple[Edge, ...]
    retained: tuple[Edge, ...]


def altered_environment(
    graph: ClusterGraph,
    margin: int = 1,
    keep: Iterable[Edge] = (),
) -> AlteredEnvironment:
    """Thin the edges ``{(0, x'), (1, x')}`` crossing the center column.

    Edges are visited in lexicographic order; an edge is deleted unless that
    disconnects the current graph, it touches the layer of width *margin*
    along the box faces, or it is listed in *keep*.

    Raises
    ------
    ParameterError
        If the graph carries no box region.
    """
    if graph.region is None:
        raise ParameterError("the altered environment needs a graph cut from a box")
    kept = {tuple(sorted((tuple(a), tuple(b)))) for a, b in keep}
    inner = graph.region.radius - margin
    rel = graph.relative
    current = graph.nx_graph.copy()
    removed: list[Edge] = []
    retained: list[Edge] = []
    for i, j in graph.edges.tolist():
        if not (rel[i, 0] == 0 and rel[j, 0] == 1):
            continue
        if max(np.abs(rel[i]).max(), np.abs(rel[j]).max()) > inner:
            continue
        edge = (graph.point(i), graph.point(j))
        if edge in kept:
            retained.append(edge)
            continue
        current.remove_edge(i, j)
        if nx.has_path(current, i, j):
            removed.append(edge)
        else:
            current.add_edge(i, j)
            retained.append(edge)
    thinned = graph.without_edges(removed) if removed else graph
    logger.info("altered environment: removed %d, kept %d", len(removed), len(retained))
    return AlteredEnvironment(thinned, tuple(removed), tuple(retained))


# ---------------------------------------------------------------------------
# Harmonic embedding
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HarmonicEmbedding:
    """Vertex placement ``x -> (ℓ_{e_1}(x), ℓ_{e_2}(x))`` of a planar cluster."""

    graph: ClusterGraph
    coords: np.ndarray

    def segments(self) -> np.ndarray:
        """Edge segments as an ``(m, 2, 2)`` array."""
        return self.coords[self.graph.edges]


def harmonic_embedding(
    graph: ClusterGraph, opts: SolveOptions | None = None
) -> HarmonicEmbedding:
    """Place each vertex at its pair of corrected-plane values.

    Raises
    ------
    ParameterError
        If the graph is not two-dimensional.
    """
    if graph.dim != 2:
        raise ParameterError("the harmonic embedding is drawn in d = 2")
    opts = opts or SolveOptions()
    first = corrected_plane(graph, (1, 0), opts).field.as_float().values
    second = corrected_plane(graph, (0, 1), opts).field.as_float().values
    return HarmonicEmbedding(graph, np.column_stack([first, second]))


def embedding_displacement(base: HarmonicEmbedding, other: HarmonicEmbedding) -> np.ndarray:
    """Euclidean displacement of every vertex between two embeddings.

    Raises
    ------
    ParameterError
        If the embeddings do not share their vertices.
    """
    if not np.array_equal(base.graph.points, other.graph.points):
        raise ParameterError("embeddings have different vertex sets")
    return np.linalg.norm(base.coords - other.coords, axis=1)


def write_embedding_svg(
    base: HarmonicEmbedding,
    path: str | Path,
    flipped: HarmonicEmbedding | None = None,
) -> Path:
    """Draw the embedding as SVG, one segment per edge, in layers ``base`` and ``flipped``."""
    out = Path(path)
    fig = Figure(figsize=(8, 8))
    ax = fig.add_subplot()
    layer = LineCollection(base.segments(), colors="tab:blue", linewidths=0.6)
    layer.set_gid("base")
    ax.add_collection(layer)
    if flipped is not None:
        over = LineCollection(flipped.segments(), colors="tab:red", linewidths=0.6)
        over.set_gid("flipped")
        ax.add_collection(over)
    ax.autoscale()
    ax.set_aspect("equal")
    ax.set_axis_off()
    with matplotlib.rc_context({"svg.hashsalt": "percolab"}):
        fig.savefig(out, format="svg", metadata={"Date": None})
    return out
