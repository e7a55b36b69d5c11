"""Integer-Laplacian potentials ``u_f`` of finitely supported pole functions.

``u_f(x) = Σ_y f(y) G(x, y)`` with the zero-boundary Green proxy of the
cluster graph, so that ``Δu_f = -f`` off the inner boundary.

Public API
----------
- :class:`PoleFunction`, :class:`Potential`, :func:`potential`
- :func:`divergence_representation`, :func:`gradient_representation`
- :class:`TwoScaleReport`, :func:`two_scale_check`, :func:`calibrate_kappa`
- :class:`LogGrowth`, :func:`log_growth_check`
- :func:`level_set`, :class:`SensitiveEdges`, :func:`sensitive_edges`
- :class:`FlipPairing`, :func:`flip_edge_pairing`
- :func:`write_points_csv`
"""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from .errors import CompatibilityError, ParameterError
from .fields import EdgeField, ScalarField, SolveOptions
from .harmonic import CorrectedPlane, corrected_plane
from .percolation import BoxRegion, ClusterGraph, Edge, Point, canonical_edge
from .solvers import (
    fit_green_log_slope,
    gradient,
    green_function,
    solve_dirichlet,
    solve_neumann,
)

logger = logging.getLogger(__name__)

__all__ = [
    "FlipPairing",
    "LogGrowth",
    "PoleFunction",
    "Potential",
    "SensitiveEdges",
    "TwoScaleReport",
    "calibrate_kappa",
    "divergence_representation",
    "flip_edge_pairing",
    "gradient_representation",
    "level_set",
    "log_growth_check",
    "potential",
    "sensitive_edges",
    "two_scale_check",
    "write_points_csv",
]

# ---------------------------------------------------------------------------
# Pole functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PoleFunction:
    """A finitely supported integer function ``f`` on the lattice.

    Zero entries are dropped; the support is kept sorted.
    """

    support: Mapping[Point, int]

    def __post_init__(self) -> None:
        clean: dict[Point, int] = {}
        for pt, value in self.support.items():
            if int(value) != value:
                raise ParameterError(f"pole weights must be integers, got {value!r} at {pt}")
            if value:
                clean[tuple(int(c) for c in pt)] = int(value)
        object.__setattr__(self, "support", dict(sorted(clean.items())))

    @classmethod
    def delta(cls, z: Sequence[int], weight: int = 1) -> PoleFunction:
        """``weight · δ_z``."""
        return cls({tuple(z): weight})

    @classmethod
    def dipole(cls, z: Sequence[int], w: Sequence[int]) -> PoleFunction:
        """``δ_z - δ_w``."""
        return cls({tuple(z): 1, tuple(w): -1})

    @property
    def total(self) -> int:
        """``Σ f``."""
        return sum(self.support.values())

    @property
    def points(self) -> list[Point]:
        """Support points in lexicographic order."""
        return list(self.support)

    @property
    def box_fit(self) -> BoxRegion | None:
        """Smallest cube containing the support (``None`` for ``f ≡ 0``)."""
        if not self.support:
            return None
        arr = np.asarray(self.points, dtype=np.int64)
        lo, hi = arr.min(axis=0), arr.max(axis=0)
        center = (lo + hi) // 2
        radius = int(np.maximum(hi - center, center - lo).max())
        return BoxRegion(d=arr.shape[1], radius=radius, center=tuple(int(c) for c in center))

    def on_graph(self, graph: ClusterGraph) -> dict[Point, int]:
        """The part of the support lying on *graph*."""
        return {pt: v for pt, v in self.support.items() if graph.contains(pt)}

    def cluster_total(self, graph: ClusterGraph) -> int:
        """``Σ_{x in graph} f(x)``."""
        return sum(self.on_graph(graph).values())

    def as_field(self, graph: ClusterGraph, kind: str = "float64") -> ScalarField:
        """``f`` restricted to *graph* as a vertex field."""
        return ScalarField.from_mapping(graph, self.support, kind)  # type: ignore[arg-type]


@dataclass(frozen=True)
class Potential:
    """``u_f`` on a cluster graph together with how it was built."""

    f: PoleFunction
    field: ScalarField
    green_config: Mapping[str, Any] = field(default_factory=dict)
    mean_zero_on_cluster: bool = False

    @property
    def graph(self) -> ClusterGraph:
        """Graph the potential lives on."""
        return self.field.graph


def potential(
    graph: ClusterGraph, f: PoleFunction, opts: SolveOptions | None = None
) -> Potential:
    """Superpose finite-volume Green solves: ``u_f = Σ_y f(y) G(·, y)``.

    Poles off the graph contribute nothing; poles on the inner boundary
    contribute nothing either (the zero-boundary proxy vanishes there) and
    are recorded as proxy warnings, as are poles close to the box faces.
    """
    opts = opts or SolveOptions()
    kind = opts.kind
    on_graph = f.on_graph(graph)
    total = ScalarField.zeros(graph, kind)
    warnings: list[str] = []
    for pt, weight in on_graph.items():
        if graph.boundary[graph.index(pt)]:
            warnings.append(f"pole {pt} lies on the inner boundary")
            logger.warning("pole %s lies on the inner boundary and is dropped", pt)
            continue
        green = green_function(graph, pt, opts, normalize=False)
        face = green.metadata.get("pole_face_distance")
        if face is not None and graph.region is not None and face < graph.region.radius // 2:
            warnings.append(f"pole {pt} is {face} steps from the box faces")
        total = total + green * weight
    config = {
        "proxy": "zero-boundary",
        "proxy_radius": graph.region.radius if graph.region else None,
        "poles_on_graph": len(on_graph),
        "warnings": tuple(warnings),
    }
    mean_zero = sum(on_graph.values()) == 0
    logger.debug("potential with %d poles on the graph, mean zero: %s", len(on_graph), mean_zero)
    return Potential(
        f=f,
        field=total.with_metadata(proxy_warnings=tuple(warnings)),
        green_config=config,
        mean_zero_on_cluster=mean_zero,
    )


# ---------------------------------------------------------------------------
# Representations
# ---------------------------------------------------------------------------


def _absorbing_box(graph: ClusterGraph, f_points: list[Point]) -> np.ndarray:
    """Vertex mask of the largest component of the smallest cube absorbing *f_points*."""
    fit = PoleFunction({pt: 1 for pt in f_points}).box_fit
    if fit is None:
        raise ParameterError("empty support")
    limit = graph.region.radius if graph.region is not None else None
    radius = fit.radius
    targets = graph.indices(f_points)
    while True:
        cube = BoxRegion(d=graph.dim, radius=radius, center=fit.center)
        mask = cube.contains(graph.points)
        local = graph.subgraph(mask)
        labels = local.component_labels()
        sizes = np.bincount(labels)
        slot = np.full(graph.n_vertices, -1, dtype=np.int64)
        slot[mask] = np.arange(int(mask.sum()))
        biggest = int(np.argmax(sizes))
        if np.all(labels[slot[targets]] == biggest):
            keep = np.zeros(graph.n_vertices, dtype=bool)
            keep[np.flatnonzero(mask)[labels == biggest]] = True
            return keep
        radius += 1
        if limit is not None and radius > 2 * limit:
            raise ParameterError("the support of f is not absorbed by one cluster in the region")
        if limit is None and radius > graph.n_vertices:
            raise ParameterError("the support of f is not absorbed by one cluster of the graph")


def divergence_representation(
    graph: ClusterGraph, f: PoleFunction, opts: SolveOptions | None = None
) -> EdgeField:
    """A finitely supported edge field ``F`` with ``div F = f`` on *graph*.

    Solves the Neumann problem ``Δv = f`` on the largest cluster of the
    smallest cube around ``supp f`` that contains the support, and returns
    ``F = ∇v`` there, zero elsewhere.

    Raises
    ------
    CompatibilityError
        If ``Σ f`` over the graph is not zero.
    ParameterError
        If no cube inside the region absorbs the support into one cluster.
    """
    opts = opts or SolveOptions()
    kind = opts.kind
    on_graph = f.on_graph(graph)
    if sum(on_graph.values()):
        raise CompatibilityError(f"Σ f = {sum(on_graph.values())} on the cluster, expected 0")
    if not on_graph:
        return EdgeField.zeros(graph, kind)
    keep = _absorbing_box(graph, list(on_graph))
    local = graph.subgraph(keep, boundary=np.zeros(int(keep.sum()), dtype=bool))
    rhs = ScalarField.from_mapping(local, {pt: -v for pt, v in on_graph.items()}, kind)
    v = solve_neumann(local, rhs, opts)
    grad = gradient(v)
    mapping: dict[tuple[Point, Point], Any] = {}
    for (i, j), value in zip(local.edges.tolist(), grad.values, strict=True):
        if value:
            mapping[(local.point(i), local.point(j))] = value
    logger.debug("divergence representation on %d vertices", local.n_vertices)
    return EdgeField.from_mapping(graph, mapping, kind)


def gradient_representation(
    graph: ClusterGraph, flow: EdgeField, opts: SolveOptions | None = None
) -> ScalarField:
    """``Σ_e F(e) (G(·, a) - G(·, b))`` over the support of *flow*, ``e = (a, b)``.

    Equals ``u_{div F}`` and is assembled edge by edge.
    """
    opts = opts or SolveOptions()
    kind = opts.kind
    if not flow.graph.is_same(graph):
        raise ParameterError("the edge field lives on a different graph")
    total = ScalarField.zeros(graph, kind)
    for k in np.flatnonzero(flow.support).tolist():
        a, b = (int(v) for v in graph.edges[k])
        rhs = [0] * graph.n_vertices
        rhs[a] += 1
        rhs[b] -= 1
        dipole = solve_dirichlet(graph, None, None, ScalarField(graph, rhs, kind), opts)
        total = total + dipole * flow.values[k]
    return total


# ---------------------------------------------------------------------------
# Asymptotics
# ---------------------------------------------------------------------------


def calibrate_kappa(
    graph: ClusterGraph, pole: Sequence[int], opts: SolveOptions | None = None
) -> float:
    """Multiplicative constant of ``-log|x| / (2π)`` fitted from the Green proxy.

    Uses radii ``2 .. N/4`` along the first axis from *pole*.
    """
    top = max(3, (graph.region.radius // 4) if graph.region else 8)
    fit = fit_green_log_slope(graph, pole, range(2, top + 1), opts)
    return float(2 * math.pi * fit.slope)


def _origin(f: PoleFunction, graph: ClusterGraph) -> np.ndarray:
    fit = f.box_fit
    if fit is not None:
        return np.asarray(fit.center, dtype=np.float64)
    if graph.region is not None:
        return np.asarray(graph.region.center, dtype=np.float64)
    return np.zeros(graph.dim)


@dataclass(frozen=True)
class TwoScaleReport:
    """Errors of the leading dipole term ``κ (c·x) / (2π|x|²)`` along a ray."""

    coefficients: tuple[float, ...]
    kappa: float
    direction: tuple[float, ...]
    table: pd.DataFrame

    def median_scaled_error(self) -> pd.Series:
        """Median of ``error · |x|`` per radius."""
        return self.table.groupby("radius")["scaled_error"].median()

    def sign_agreement(self) -> float:
        """Fraction of points with ``u_f · sign(c · x) > 0`` (NaN if ``c · x`` vanishes)."""
        signed = np.sign(self.table["prediction"]) * self.table["u"]
        nonzero = np.sign(self.table["prediction"]) != 0
        if not nonzero.any():
            return float("nan")
        return float((signed[nonzero] > 0).mean())


def two_scale_check(
    pot: Potential,
    planes: Sequence[CorrectedPlane] | None,
    direction: Sequence[float],
    radii: Sequence[int],
    kappa: float | None = None,
    opts: SolveOptions | None = None,
) -> TwoScaleReport:
    """Compare ``u_f`` with the two-scale leading term at points near a ray.

    The ray starts at the center of ``supp f``; at each radius the cluster
    points within ℓ¹ distance 1 of the rounded ray point are used.
    ``c_i = Σ f ℓ_{e_i}`` uses one corrected plane per axis (computed when
    *planes* is ``None``) and ``κ`` is calibrated once from the Green proxy
    unless given.

    Raises
    ------
    ParameterError
        If a radius exceeds ``N/4`` or the ray leaves the box.
    """
    graph = pot.graph
    u = pot.field.as_float()
    dirv = np.asarray(direction, dtype=np.float64)
    norm = float(np.linalg.norm(dirv))
    if norm == 0 or dirv.size != graph.dim:
        raise ParameterError(f"direction must be a nonzero vector of dimension {graph.dim}")
    dirv = dirv / norm
    origin = _origin(pot.f, graph)
    if graph.region is not None:
        for r in radii:
            if r > graph.region.radius / 4:
                raise ParameterError(f"radius {r} exceeds N/4 = {graph.region.radius / 4}")
            tip = np.rint(origin + r * dirv)
            if not graph.region.contains([tip.astype(np.int64)]).all():
                raise ParameterError(f"the ray leaves {graph.region} at radius {r}")

    on_graph = pot.f.on_graph(graph)
    if not on_graph:
        coeffs = np.zeros(graph.dim)
    else:
        if planes is None:
            planes = [
                corrected_plane(graph, tuple(int(i == k) for i in range(graph.dim)), opts)
                for k in range(graph.dim)
            ]
        coeffs = np.asarray(
            [
                sum(float(w) * float(plane.at(pt)) for pt, w in on_graph.items())
                for plane in planes
            ]
        )
    if kappa is None:
        kappa = 1.0
        if on_graph and graph.region is not None:
            pole = tuple(int(c) for c in np.rint(origin))
            if graph.contains(pole) and not graph.boundary[graph.index(pole)]:
                kappa = calibrate_kappa(graph, pole, opts)

    rows = []
    for r in radii:
        tip = np.rint(origin + r * dirv).astype(np.int64)
        near = np.abs(graph.points - tip).sum(axis=1) <= 1
        for k in np.flatnonzero(near).tolist():
            x = graph.points[k] - origin
            dist2 = float(x @ x)
            pred = kappa * float(coeffs @ x) / (2 * math.pi * dist2) if dist2 else 0.0
            err = abs(float(u.values[k]) - pred)
            rows.append(
                {
                    "radius": int(r),
                    **{f"x{i + 1}": int(c) for i, c in enumerate(graph.points[k])},
                    "u": float(u.values[k]),
                    "prediction": pred,
                    "error": err,
                    "scaled_error": err * math.sqrt(dist2),
                }
            )
    columns = ["radius", *[f"x{i + 1}" for i in range(graph.dim)], "u", "prediction"]
    table = pd.DataFrame(rows, columns=[*columns, "error", "scaled_error"])
    return TwoScaleReport(
        coefficients=tuple(float(c) for c in coeffs),
        kappa=float(kappa),
        direction=tuple(float(c) for c in dirv),
        table=table,
    )


@dataclass(frozen=True)
class LogGrowth:
    """Least-squares slope of ``u_f`` against ``log r`` along the first axis."""

    slope: float
    expected_slope: float
    radii: tuple[int, ...]
    values: tuple[float, ...]


def log_growth_check(
    pot: Potential, radii: Sequence[int], kappa: float = 1.0
) -> LogGrowth:
    """Fit the logarithmic growth of ``u_f`` for ``Σ f ≠ 0``.

    The expected slope is ``-κ Σ f / (2π)``.

    Raises
    ------
    ParameterError
        If ``f`` is mean zero on the cluster or fewer than two radii hit the graph.
    """
    graph = pot.graph
    total = pot.f.cluster_total(graph)
    if total == 0:
        raise ParameterError("log growth needs Σ f ≠ 0 on the cluster")
    u = pot.field.as_float()
    origin = np.rint(_origin(pot.f, graph)).astype(np.int64)
    used: list[int] = []
    values: list[float] = []
    for r in radii:
        pt = (int(origin[0]) + int(r), *(int(c) for c in origin[1:]))
        if graph.contains(pt):
            used.append(int(r))
            values.append(float(u.at(pt)))
    if len(used) < 2:
        raise ParameterError("need at least two radii on the graph to fit a slope")
    slope, _ = np.polyfit(np.log(used), values, 1)
    return LogGrowth(
        slope=float(slope),
        expected_slope=-kappa * total / (2 * math.pi),
        radii=tuple(used),
        values=tuple(values),
    )


# ---------------------------------------------------------------------------
# Level sets and sensitive edges
# ---------------------------------------------------------------------------


def _default_tol(u: ScalarField) -> Any:
    if u.kind == "rational":
        return Fraction(0)
    return 1e-9 * max(1.0, float(u.abs_max()))


def level_set(pot: Potential, a: Any, tol: Any = None) -> np.ndarray:
    """Mask of the vertices with ``|u_f - a| <= tol``.

    *tol* defaults to zero for rational fields and ``1e-9`` times the field
    scale otherwise.
    """
    u = pot.field
    if tol is None:
        tol = _default_tol(u)
    if tol < 0:
        raise ParameterError(f"tolerance must be nonnegative, got {tol}")
    if u.kind == "rational":
        a, tol = Fraction(a), Fraction(tol)
        return np.fromiter((abs(v - a) <= tol for v in u.values), dtype=bool, count=len(u.values))
    return np.abs(u.values - float(a)) <= float(tol)


@dataclass(frozen=True)
class SensitiveEdges:
    """Edges where both ``∇u_f`` and ``∇ℓ_p`` are nonzero, with dyadic densities."""

    graph: ClusterGraph
    edges: np.ndarray
    densities: Mapping[int, float]

    def points(self) -> list[Edge]:
        """The sensitive edges as point pairs."""
        return [(self.graph.point(i), self.graph.point(j)) for i, j in self.edges.tolist()]

    def to_frame(self) -> pd.DataFrame:
        """Per-edge table with columns ``x1..xd`` for one end and ``y1..yd`` for the other."""
        d = self.graph.dim
        rows = [
            [*self.graph.points[i].tolist(), *self.graph.points[j].tolist()]
            for i, j in self.edges.tolist()
        ]
        cols = [f"x{k + 1}" for k in range(d)] + [f"y{k + 1}" for k in range(d)]
        return pd.DataFrame(rows, columns=cols)


def sensitive_edges(
    pot: Potential, plane: CorrectedPlane, tol: Any = None
) -> SensitiveEdges:
    """Sensitive edges of ``u_f`` against ``ℓ_p`` and their density in dyadic balls.

    The density at scale ``k`` is the number of sensitive edges with both
    endpoints in the cube of radius ``2^k`` around the center of ``supp f``
    divided by the number of lattice points of that cube; only cubes inside
    the box are reported.
    """
    graph = pot.graph
    if not graph.is_same(plane.graph):
        raise ParameterError("potential and plane live on different graphs")
    du = gradient(pot.field)
    dl = gradient(plane.field)
    if tol is None:
        tol_u, tol_l = _default_tol(pot.field), _default_tol(plane.field)
    else:
        tol_u = tol_l = tol
    mask = np.fromiter(
        (abs(x) > tol_u and abs(y) > tol_l for x, y in zip(du.values, dl.values, strict=True)),
        dtype=bool,
        count=graph.n_edges,
    )
    picked = graph.edges[mask]
    densities: dict[int, float] = {}
    if graph.region is not None:
        origin = np.rint(_origin(pot.f, graph)).astype(np.int64)
        room = graph.region.radius - int(
            np.abs(origin - np.asarray(graph.region.center)).max()
        )
        k = 0
        while 2**k <= room:
            r = 2**k
            inside = np.abs(graph.points - origin).max(axis=1) <= r
            count = int((inside[picked[:, 0]] & inside[picked[:, 1]]).sum())
            densities[k] = count / (2 * r + 1) ** graph.dim
            k += 1
    return SensitiveEdges(graph=graph, edges=picked, densities=densities)


def write_points_csv(graph: ClusterGraph, mask: np.ndarray, path: str | Path) -> Path:
    """Write the coordinates of the masked vertices as CSV."""
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(
        graph.points[np.asarray(mask, dtype=bool)],
        columns=[f"x{k + 1}" for k in range(graph.dim)],
    )
    frame.to_csv(out, index=False)
    return out


# ---------------------------------------------------------------------------
# Single-edge flips
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FlipPairing:
    """Both sides of ``Σ f (ℓ - ℓ^e) = -∇u_f(e) ∇ℓ^e(e)`` for a removed edge ``e``."""

    edge: Edge
    left: Any
    right: Any

    @property
    def discrepancy(self) -> float:
        """Absolute difference of the two sides."""
        return float(abs(self.left - self.right))


def flip_edge_pairing(
    pot: Potential,
    edge: Sequence[Sequence[int]],
    slope: Sequence[Any],
    opts: SolveOptions | None = None,
) -> FlipPairing:
    """Change of the pairing ``Σ f ℓ_p`` when the open edge ``e = (a, b)`` is closed.

    ``ℓ^e`` is the corrected plane of the graph without ``e`` and
    ``∇ℓ^e(e) = ℓ^e(b) - ℓ^e(a)``; ``u_f`` is taken on the original graph.

    Raises
    ------
    ParameterError
        If *edge* is not an edge of the graph.
    TopologyError
        If removing it disconnects the graph.
    """
    graph = pot.graph
    a, b = canonical_edge(*edge)
    if not graph.has_edge(a, b):
        raise ParameterError(f"{a}-{b} is not an edge of the graph")
    opts = opts or SolveOptions(exact=pot.field.kind == "rational")
    plane = corrected_plane(graph, slope, opts)
    flipped = corrected_plane(graph.without_edges([(a, b)]), slope, opts)
    on_graph = pot.f.on_graph(graph)
    left = sum(
        (w * (plane.at(pt) - flipped.at(pt)) for pt, w in on_graph.items()),
        Fraction(0) if opts.exact else 0.0,
    )
    grad_u = pot.field.at(b) - pot.field.at(a)
    right = -grad_u * (flipped.at(b) - flipped.at(a))
    logger.debug("flip pairing at %s-%s: %s vs %s", a, b, left, right)
    return FlipPairing(edge=(a, b), left=left, right=right)
