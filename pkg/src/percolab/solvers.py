"""Elliptic solvers and discrete calculus on cluster graphs.

Sign conventions: ``Δu(x) = Σ_{y~x} (u(y) - u(x))``, ``∇u(x, y) = u(y) - u(x)``
and ``(div F)(x) = Σ_{y~x} F(x, y)``, so that ``div ∇ = Δ``. Dirichlet and
Neumann solves return the ``u`` with ``Δu = -rhs``.

Float solves use preconditioned conjugate gradients
(:func:`scipy.sparse.linalg.cg`); exact solves use rational elimination
from :mod:`percolab.linalg`.

Public API
----------
- :func:`laplacian_apply`, :func:`gradient`, :func:`divergence`
- :func:`solve_dirichlet`, :func:`solve_neumann`, :func:`green_function`
- :func:`edge_boundary`, :func:`flux_through_edge_cut`,
  :func:`left_half_flux_decomposition`
- :func:`fit_green_log_slope`
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from fractions import Fraction
from typing import Any

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import LinearOperator, cg

from .errors import (
    CapacityError,
    CompatibilityError,
    ConvergenceError,
    IllPosedError,
    ParameterError,
)
from .fields import EdgeField, NumericKind, ScalarField, SolveOptions
from .linalg import solve_sparse_exact
from .percolation import ClusterGraph

logger = logging.getLogger(__name__)

__all__ = [
    "FluxDecomposition",
    "GreenSlopeFit",
    "divergence",
    "edge_boundary",
    "fit_green_log_slope",
    "flux_through_edge_cut",
    "gradient",
    "green_function",
    "laplacian_apply",
    "left_half_flux_decomposition",
    "solve_dirichlet",
    "solve_neumann",
]

VertexSet = np.ndarray | Iterable[Sequence[int]]


def _require_graph(graph: ClusterGraph, fld: ScalarField) -> None:
    if not graph.is_same(fld.graph):
        raise ParameterError("field is not defined on this graph")


# ---------------------------------------------------------------------------
# Calculus
# ---------------------------------------------------------------------------


def laplacian_apply(graph: ClusterGraph, u: ScalarField) -> ScalarField:
    """Return ``Δu``; exact when *u* is rational.

    Raises
    ------
    ParameterError
        If *u* lives on another graph.
    """
    _require_graph(graph, u)
    if u.kind == "float64":
        return ScalarField(graph, -(graph.laplacian @ u.values), "float64")
    out = [Fraction(0)] * graph.n_vertices
    vals = u.values
    for i, j in graph.edges.tolist():
        diff = vals[j] - vals[i]
        out[i] += diff
        out[j] -= diff
    return ScalarField(graph, out, "rational")


def gradient(u: ScalarField) -> EdgeField:
    """Edge field ``∇u(x, y) = u(y) - u(x)`` over the edges of ``u.graph``."""
    edges = u.graph.edges
    if u.kind == "float64":
        return EdgeField(u.graph, u.values[edges[:, 1]] - u.values[edges[:, 0]], "float64")
    vals = u.values
    return EdgeField(u.graph, [vals[j] - vals[i] for i, j in edges.tolist()], "rational")


def divergence(flow: EdgeField) -> ScalarField:
    """``(div F)(x) = Σ_{y~x} F(x, y)``."""
    graph = flow.graph
    if flow.kind == "float64":
        out = np.zeros(graph.n_vertices)
        np.add.at(out, graph.edges[:, 0], flow.values)
        np.subtract.at(out, graph.edges[:, 1], flow.values)
        return ScalarField(graph, out, "float64")
    acc = [Fraction(0)] * graph.n_vertices
    for (i, j), v in zip(graph.edges.tolist(), flow.values, strict=True):
        acc[i] += v
        acc[j] -= v
    return ScalarField(graph, acc, "rational")


# ---------------------------------------------------------------------------
# Linear systems
# ---------------------------------------------------------------------------


def _solve_spd(
    matrix: sparse.csr_matrix, b: Sequence[Any], opts: SolveOptions
) -> list[Fraction] | np.ndarray:
    """Solve a symmetric positive definite system in the kind chosen by *opts*."""
    n = matrix.shape[0]
    if n == 0:
        return [] if opts.exact else np.zeros(0)
    if opts.exact:
        if n > opts.exact_cap:
            raise CapacityError(
                f"exact solve of {n} unknowns exceeds the cap of {opts.exact_cap}"
            )
        return solve_sparse_exact(matrix.astype(np.int64), b)

    rhs = np.asarray([float(v) for v in b], dtype=np.float64)
    norm = float(np.linalg.norm(rhs))
    if norm == 0.0:
        return np.zeros(n)
    maxiter = opts.max_iterations or 10 * n
    precond = None
    if opts.preconditioner == "diagonal":
        inv_diag = 1.0 / matrix.diagonal()
        precond = LinearOperator((n, n), matvec=lambda v: inv_diag * v, dtype=np.float64)
    iterations = 0

    def _count(_: np.ndarray) -> None:
        nonlocal iterations
        iterations += 1

    x, info = cg(
        matrix,
        rhs,
        rtol=opts.tolerance,
        atol=0.0,
        maxiter=maxiter,
        M=precond,
        callback=_count,
    )
    residual = float(np.linalg.norm(rhs - matrix @ x)) / norm
    logger.debug("cg: n=%d iterations=%d residual=%.3e", n, iterations, residual)
    if info > 0 or residual > 10 * opts.tolerance:
        raise ConvergenceError(
            f"conjugate gradients stopped after {iterations} iterations "
            f"with relative residual {residual:.3e}",
            residual=residual,
            iterations=iterations,
        )
    return x


def _vertex_mask(graph: ClusterGraph, vertices: VertexSet | None) -> np.ndarray:
    if vertices is None:
        return graph.boundary.copy()
    if isinstance(vertices, np.ndarray) and vertices.dtype == bool:
        if vertices.shape != (graph.n_vertices,):
            raise ParameterError("vertex mask does not match the graph")
        return vertices.copy()
    mask = np.zeros(graph.n_vertices, dtype=bool)
    for pt in vertices:
        mask[graph.index(pt)] = True
    return mask


def _as_field(
    graph: ClusterGraph,
    data: ScalarField | Mapping[Sequence[int], Any] | None,
    kind: NumericKind,
) -> ScalarField:
    if data is None:
        return ScalarField.zeros(graph, kind)
    if isinstance(data, ScalarField):
        _require_graph(graph, data)
        if data.kind == kind:
            return data
        if kind == "float64":
            return data.as_float()
        return ScalarField(graph, [Fraction(v) for v in data.values], "rational")
    return ScalarField.from_mapping(graph, data, kind)


def solve_dirichlet(
    graph: ClusterGraph,
    boundary: VertexSet | None = None,
    boundary_values: ScalarField | Mapping[Sequence[int], Any] | None = None,
    rhs: ScalarField | Mapping[Sequence[int], Any] | None = None,
    opts: SolveOptions | None = None,
) -> ScalarField:
    """Solve ``Δu = -rhs`` off *boundary* with ``u = boundary_values`` on it.

    Parameters
    ----------
    graph:
        The cluster graph.
    boundary:
        Dirichlet vertices as a mask or point list; the graph's inner
        boundary when omitted.
    boundary_values:
        Values read on the boundary vertices (zero when omitted).
    rhs:
        Source read on the interior vertices (zero when omitted).
    opts:
        Solver options; the kind of the result follows ``opts.exact``.

    Raises
    ------
    IllPosedError
        If some interior component does not touch the boundary.
    ConvergenceError
        If the iterative solve runs out of budget.
    CapacityError
        If an exact solve exceeds ``opts.exact_cap`` unknowns.
    """
    opts = opts or SolveOptions()
    kind = opts.kind
    mask = _vertex_mask(graph, boundary)
    g = _as_field(graph, boundary_values, kind)
    f = _as_field(graph, rhs, kind)
    interior = np.flatnonzero(~mask)
    if interior.size == 0:
        return g

    labels = graph.component_labels()
    touching = np.zeros(labels.max() + 1, dtype=bool)
    touching[labels[mask]] = True
    stranded = interior[~touching[labels[interior]]]
    if stranded.size:
        raise IllPosedError(
            f"{stranded.size} interior vertices, e.g. {graph.point(int(stranded[0]))}, "
            "have no path to the boundary"
        )

    lap = graph.laplacian
    l_ii = lap[interior][:, interior].tocsr()
    coupling = graph.adjacency[interior][:, np.flatnonzero(mask)].tocsr()
    gb = g.values[mask]
    if kind == "float64":
        b: Sequence[Any] = f.values[interior] + coupling @ gb
    else:
        coo = coupling.tocoo()
        acc = [f.values[k] for k in interior.tolist()]
        for r, c in zip(coo.row.tolist(), coo.col.tolist(), strict=True):
            acc[r] += gb[c]
        b = acc
    solution = _solve_spd(l_ii, b, opts)
    values = list(g.values)
    for k, v in zip(interior.tolist(), solution, strict=True):
        values[k] = v
    return ScalarField(graph, values, kind)


def solve_neumann(
    graph: ClusterGraph,
    rhs: ScalarField,
    opts: SolveOptions | None = None,
) -> ScalarField:
    """Solve ``Δv = -rhs`` with no flux leaving the graph and ``Σ v = 0`` per component.

    Raises
    ------
    CompatibilityError
        If *rhs* does not sum to zero on some component (exactly in rational
        mode, to ``1e-12 * ||rhs||_1`` in float mode).
    """
    opts = opts or SolveOptions(exact=rhs.kind == "rational")
    kind = opts.kind
    f = _as_field(graph, rhs, kind)
    labels = graph.component_labels()
    n_comp = int(labels.max()) + 1
    scale = float(sum(abs(float(v)) for v in f.values))
    anchors = np.full(n_comp, -1, dtype=np.int64)
    for comp in range(n_comp):
        members = np.flatnonzero(labels == comp)
        anchors[comp] = members[0]
        total = sum(f.values[members], Fraction(0) if kind == "rational" else 0.0)
        if (kind == "rational" and total != 0) or (
            kind == "float64" and abs(total) > 1e-12 * max(scale, 1.0)
        ):
            raise CompatibilityError(
                f"rhs sums to {total} on the component of {graph.point(int(members[0]))}"
            )
    grounded = np.zeros(graph.n_vertices, dtype=bool)
    grounded[anchors] = True
    raw = solve_dirichlet(graph, grounded, None, f, opts)

    values = list(raw.values)
    for comp in range(n_comp):
        members = np.flatnonzero(labels == comp).tolist()
        if kind == "rational":
            mean = sum((values[k] for k in members), Fraction(0)) / len(members)
        else:
            mean = float(np.mean([values[k] for k in members]))
        for k in members:
            values[k] -= mean
    return ScalarField(graph, values, kind)


def green_function(
    graph: ClusterGraph,
    pole: Sequence[int],
    opts: SolveOptions | None = None,
    normalize: bool = True,
) -> ScalarField:
    """Finite-volume Green proxy ``G(·, pole)``.

    Solves ``ΔG = -δ_pole`` with zero data on the inner boundary. In ``d = 2``
    the result is shifted so that ``G(pole, pole) = 0`` unless *normalize* is
    false. Metadata records the pole, the shift and the proxy radius.

    Raises
    ------
    ParameterError
        If *pole* is a boundary vertex.
    """
    opts = opts or SolveOptions()
    k = graph.index(pole)
    if graph.boundary[k]:
        raise ParameterError(f"pole {tuple(pole)} lies on the boundary")
    kind = opts.kind
    delta = [0] * graph.n_vertices
    delta[k] = 1
    raw = solve_dirichlet(graph, None, None, ScalarField(graph, delta, kind), opts)
    metadata: dict[str, Any] = {
        "pole": tuple(int(c) for c in pole),
        "proxy_radius": graph.region.radius if graph.region else None,
        "shift": 0,
    }
    if graph.region is not None:
        rel = np.asarray(pole) - np.asarray(graph.region.center)
        face_distance = graph.region.radius - int(np.abs(rel).max())
        metadata["pole_face_distance"] = face_distance
        if face_distance < graph.region.radius // 2:
            logger.warning(
                "pole %s is %d steps from the box faces; the proxy is unreliable",
                tuple(pole),
                face_distance,
            )
    if graph.dim == 2 and normalize:
        shift = raw.values[k]
        metadata["shift"] = shift
        raw = ScalarField(graph, raw.values - shift, kind)
    return ScalarField(graph, raw.values, kind, metadata)


# ---------------------------------------------------------------------------
# Flux
# ---------------------------------------------------------------------------


def edge_boundary(graph: ClusterGraph, region_mask: np.ndarray) -> np.ndarray:
    """Oriented edges ``(x, y)`` with ``x`` in *region_mask* and ``y`` outside, as index pairs."""
    inside = np.asarray(region_mask, dtype=bool)
    a, b = graph.edges[:, 0], graph.edges[:, 1]
    forward = graph.edges[inside[a] & ~inside[b]]
    backward = graph.edges[inside[b] & ~inside[a]][:, ::-1]
    out = np.vstack([forward, backward])
    return out[np.lexsort((out[:, 1], out[:, 0]))]


def flux_through_edge_cut(u: ScalarField, cut: Any) -> Any:
    """``Σ_{(x, y) in cut} (u(y) - u(x))``.

    *cut* is an ``(k, 2)`` array of vertex indices or an iterable of point
    pairs.

    Raises
    ------
    ParameterError
        If a cut pair is not an edge of the graph.
    """
    graph = u.graph
    if isinstance(cut, np.ndarray) and cut.dtype.kind == "i":
        pairs = cut.reshape(-1, 2).tolist()
    else:
        pairs = [(graph.index(x), graph.index(y)) for x, y in cut]
    total: Any = Fraction(0) if u.kind == "rational" else 0.0
    for i, j in pairs:
        graph.edge_id(i, j)
        total += u.values[j] - u.values[i]
    return total


@dataclass(frozen=True)
class FluxDecomposition:
    """Outward flux of the interior left half, split by where the cut edge lands."""

    left: Any
    sides: Any
    center: Any

    @property
    def total(self) -> Any:
        """Sum of the three parts (zero for harmonic fields)."""
        return self.left + self.sides + self.center


def left_half_flux_decomposition(u: ScalarField) -> FluxDecomposition:
    """Split the flux out of ``{interior, x_1 <= 0}`` into left, sides and center.

    A cut edge belongs to ``center`` when its outer endpoint has ``x_1 > 0``,
    to ``left`` when the outer endpoint lies on the face ``x_1 = -N`` and to
    ``sides`` otherwise.

    Raises
    ------
    ParameterError
        If the graph carries no box region.
    """
    graph = u.graph
    if graph.region is None:
        raise ParameterError("flux decomposition needs a graph cut from a box")
    region_mask = graph.interior & graph.in_left_half
    cut = edge_boundary(graph, region_mask)
    outer = cut[:, 1]
    x1 = graph.relative[outer, 0]
    groups = {
        "center": x1 > 0,
        "left": x1 == -graph.region.radius,
    }
    groups["sides"] = ~(groups["center"] | groups["left"])
    parts = {name: flux_through_edge_cut(u, cut[sel]) for name, sel in groups.items()}
    return FluxDecomposition(**parts)


# ---------------------------------------------------------------------------
# Green slope
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GreenSlopeFit:
    """Least-squares fit of ``G(y, y) - G(y + r e_1, y)`` against ``log r``."""

    slope: float
    intercept: float
    radii: tuple[int, ...]
    values: tuple[float, ...]


def fit_green_log_slope(
    graph: ClusterGraph,
    pole: Sequence[int],
    radii: Iterable[int],
    opts: SolveOptions | None = None,
) -> GreenSlopeFit:
    """Fit the logarithmic growth of the Green proxy along the first axis.

    Radii whose point is not a vertex are skipped.

    Raises
    ------
    ParameterError
        If fewer than two radii remain.
    """
    green = green_function(graph, pole, opts, normalize=False).as_float()
    at_pole = green.at(pole)
    used: list[int] = []
    values: list[float] = []
    for r in radii:
        pt = (pole[0] + r, *pole[1:])
        if graph.contains(pt):
            used.append(int(r))
            values.append(float(at_pole - green.at(pt)))
    if len(used) < 2:
        raise ParameterError("need at least two radii on the graph to fit a slope")
    slope, intercept = np.polyfit(np.log(used), values, 1)
    return GreenSlopeFit(float(slope), float(intercept), tuple(used), tuple(values))
