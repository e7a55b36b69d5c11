"""Bond percolation samples, their clusters and connectivity diagnostics.

Edge states come from a counter-based generator: the uniform attached to an
edge is a hash of ``(seed, direction, lower endpoint)``, so a state never
depends on enumeration order or on the size of the box it is sampled in.

Public API
----------
- :class:`BoxRegion` - the box ``Q_N`` around a center.
- :class:`PercolationSample` - seeded edge states plus recorded overrides.
- :class:`ClusterGraph` - immutable finite graph every solver runs on.
- :func:`sample_percolation`, :func:`modify_edges`
- :func:`largest_cluster`, :func:`cluster_density`
- :func:`is_crossing`, :func:`crossing_directions`, :func:`well_connected_report`
- :func:`graph_distance`
- :func:`derive_seed`, :func:`dump_sample`, :func:`load_sample`
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field, replace
from functools import cached_property
from itertools import product
from typing import TYPE_CHECKING, Any, Literal

import networkx as nx
import numpy as np
import yaml
from pydantic import BaseModel, Field, model_validator
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .errors import EmptyClusterError, ParameterError, TopologyError

if TYPE_CHECKING:
    from .config import WellConnectedSettings

logger = logging.getLogger(__name__)

__all__ = [
    "BoxRegion",
    "CheckFailure",
    "ClusterGraph",
    "Edge",
    "PercolationSample",
    "Point",
    "WellConnectedReport",
    "canonical_edge",
    "cluster_density",
    "crossing_directions",
    "derive_seed",
    "dump_sample",
    "graph_distance",
    "is_crossing",
    "largest_cluster",
    "load_sample",
    "modify_edges",
    "sample_percolation",
    "well_connected_report",
]

Point = tuple[int, ...]
Edge = tuple[Point, Point]

SAMPLE_FORMAT = "percolab-sample/1"

# ---------------------------------------------------------------------------
# Counter-based randomness
# ---------------------------------------------------------------------------

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = np.uint64(30), np.uint64(27), np.uint64(31), np.uint64(11)
_TWO53 = float(2**53)


def _mix64(z: np.ndarray) -> np.ndarray:
    """Splitmix64 finalizer applied elementwise to a uint64 array."""
    with np.errstate(over="ignore"):
        z = z + _GOLDEN
        z = (z ^ (z >> _S30)) * _MIX1
        z = (z ^ (z >> _S27)) * _MIX2
        return z ^ (z >> _S31)


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ParameterError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def derive_seed(seed: int, index: int) -> int:
    """Return the child seed of replicate *index* under *seed*.

    All sweeps derive replicate seeds this way, so the same top-level seed
    always produces the same replicates.
    """
    base = _mix64(np.asarray([_check_seed(seed)], dtype=np.uint64))
    child = _mix64(base ^ np.asarray([int(index) % 2**64], dtype=np.uint64))
    return int(child[0])


def _edge_uniforms(seed: int, lower: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """Uniforms in [0, 1) keyed by ``(seed, direction, lower endpoint)``."""
    lower = np.atleast_2d(np.asarray(lower, dtype=np.int64))
    h = _mix64(np.full(lower.shape[0], seed, dtype=np.uint64))
    h = _mix64(h ^ np.asarray(direction, dtype=np.int64).view(np.uint64))
    coords = np.ascontiguousarray(lower).view(np.uint64)
    for k in range(lower.shape[1]):
        h = _mix64(h ^ coords[:, k])
    return (h >> _S11).astype(np.float64) / _TWO53


# ---------------------------------------------------------------------------
# Regions and edges
# ---------------------------------------------------------------------------


class BoxRegion(BaseModel):
    """The box ``Q_N = center + [-N, N]^d`` of the lattice.

    Attributes
    ----------
    d:
        Dimension, 2 or 3.
    radius:
        Half side length ``N``.
    center:
        Lattice point at the middle of the box (origin by default).
    """

    d: int = Field(2, ge=2, le=3)
    radius: int = Field(..., ge=1)
    center: tuple[int, ...] = ()

    model_config = {"frozen": True, "extra": "forbid"}

    @model_validator(mode="before")
    @classmethod
    def _default_center(cls, data: Any) -> Any:
        """Fill in the origin when no center is given."""
        if isinstance(data, dict) and not data.get("center"):
            data = {**data, "center": (0,) * int(data.get("d", 2))}
        return data

    @model_validator(mode="after")
    def _check_center(self) -> BoxRegion:
        """Require a center of matching dimension."""
        if len(self.center) != self.d:
            raise ValueError(f"center {self.center} does not have dimension {self.d}")
        return self

    @property
    def side(self) -> int:
        """Number of lattice points along one axis."""
        return 2 * self.radius + 1

    @property
    def vertex_count(self) -> int:
        """Number of lattice points ``(2N+1)^d``."""
        return int(self.side**self.d)

    @property
    def lower(self) -> np.ndarray:
        """Lowest corner of the box."""
        return np.asarray(self.center, dtype=np.int64) - self.radius

    @property
    def upper(self) -> np.ndarray:
        """Highest corner of the box."""
        return np.asarray(self.center, dtype=np.int64) + self.radius

    def points(self) -> np.ndarray:
        """All lattice points of the box as an ``(n, d)`` array, lexicographic."""
        grid = np.indices((self.side,) * self.d).reshape(self.d, -1).T
        return grid.astype(np.int64) + self.lower

    def contains(self, pts: Any) -> np.ndarray:
        """Vectorized membership test for one point or an ``(k, d)`` array."""
        arr = np.atleast_2d(np.asarray(pts, dtype=np.int64))
        return np.all((arr >= self.lower) & (arr <= self.upper), axis=1)

    def contains_region(self, other: BoxRegion) -> bool:
        """Return whether *other* lies inside this box."""
        return (
            other.d == self.d
            and bool(np.all(other.lower >= self.lower))
            and bool(np.all(other.upper <= self.upper))
        )

    def index_of(self, pts: Any) -> np.ndarray:
        """Lexicographic (mixed radix) index of points inside the box."""
        arr = np.atleast_2d(np.asarray(pts, dtype=np.int64)) - self.lower
        strides = self.side ** np.arange(self.d - 1, -1, -1, dtype=np.int64)
        return arr @ strides

    def on_faces(self, pts: Any) -> np.ndarray:
        """Return which points sit on a face of the box (``|x - c|_inf = N``)."""
        arr = np.atleast_2d(np.asarray(pts, dtype=np.int64)) - np.asarray(self.center)
        return np.abs(arr).max(axis=1) == self.radius


def canonical_edge(x: Sequence[int], y: Sequence[int]) -> Edge:
    """Return the undirected nearest-neighbor edge ``{x, y}`` with sorted endpoints.

    Raises
    ------
    ParameterError
        If *x* and *y* are not lattice neighbors.
    """
    a, b = tuple(int(c) for c in x), tuple(int(c) for c in y)
    if len(a) != len(b) or sum(abs(p - q) for p, q in zip(a, b, strict=True)) != 1:
        raise ParameterError(f"{a} and {b} are not nearest neighbors")
    return (a, b) if a < b else (b, a)


def _edge_direction(edge: Edge) -> int:
    lower, upper = edge
    return next(i for i, (p, q) in enumerate(zip(lower, upper, strict=True)) if p != q)


# ---------------------------------------------------------------------------
# Samples
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PercolationSample:
    """Seeded Bernoulli bond states on a box, plus recorded overrides.

    The random states are never rewritten: :attr:`overrides` is replayed on
    top of them, last write winning, whenever :attr:`edge_states` is built.
    """

    region: BoxRegion
    p: float
    seed: int
    overrides: tuple[tuple[Edge, bool], ...] = field(default=())

    @cached_property
    def valid_slots(self) -> np.ndarray:
        """``(n, d)`` mask of slots ``(x, x + e_i)`` lying inside the box."""
        pts = self.region.points()
        return pts < self.region.upper

    @cached_property
    def edge_states(self) -> np.ndarray:
        """``(n, d)`` open mask: slot ``[v, i]`` is the edge ``(x_v, x_v + e_i)``."""
        pts = self.region.points()
        valid = self.valid_slots
        states = np.zeros(valid.shape, dtype=bool)
        for i in range(self.region.d):
            rows = np.flatnonzero(valid[:, i])
            uniforms = _edge_uniforms(self.seed, pts[rows], np.full(rows.size, i))
            states[rows, i] = uniforms < self.p
        for edge, state in self.overrides:
            v, i = self._slot_of(edge)
            states[v, i] = state
        states.setflags(write=False)
        return states

    @property
    def open_edge_count(self) -> int:
        """Number of open edges with both endpoints in the box."""
        return int(self.edge_states.sum())

    @property
    def edge_count(self) -> int:
        """Number of edges with both endpoints in the box."""
        return int(self.valid_slots.sum())

    def _slot_of(self, edge: Edge) -> tuple[int, int]:
        lower, upper = canonical_edge(*edge)
        if len(lower) != self.region.d or not self.region.contains([lower, upper]).all():
            raise ParameterError(f"edge {lower}-{upper} is not inside {self.region}")
        return int(self.region.index_of(lower)[0]), _edge_direction((lower, upper))

    def is_open(self, edge: Edge) -> bool:
        """State of any lattice edge; edges leaving the box use the raw generator."""
        lower, upper = canonical_edge(*edge)
        if self.region.contains([lower, upper]).all():
            v, i = self._slot_of((lower, upper))
            return bool(self.edge_states[v, i])
        direction = _edge_direction((lower, upper))
        uniform = _edge_uniforms(self.seed, np.asarray([lower]), np.asarray([direction]))[0]
        return bool(uniform < self.p)

    def open_edges(self) -> np.ndarray:
        """Open edges as ``(k, 2)`` region indices ``(lower, upper)``, lexicographic."""
        v, i = np.nonzero(self.edge_states)
        strides = self.region.side ** np.arange(self.region.d - 1, -1, -1, dtype=np.int64)
        pairs = np.column_stack([v, v + strides[i]]).astype(np.int64)
        order = np.lexsort((pairs[:, 1], pairs[:, 0]))
        return pairs[order]

    def open_degree(self, pts: Any) -> np.ndarray:
        """Number of open lattice edges at each point, edges leaving the box included."""
        arr = np.atleast_2d(np.asarray(pts, dtype=np.int64))
        degree = np.zeros(arr.shape[0], dtype=np.int64)
        for i in range(self.region.d):
            unit = np.zeros(self.region.d, dtype=np.int64)
            unit[i] = 1
            for lower, upper in ((arr, arr + unit), (arr - unit, arr)):
                state = _edge_uniforms(self.seed, lower, np.full(arr.shape[0], i)) < self.p
                inside = self.region.contains(lower) & self.region.contains(upper)
                if inside.any():
                    slots = self.region.index_of(lower[inside])
                    state[inside] = self.edge_states[slots, i]
                degree += state
        return degree

    def restrict(self, subcube: BoxRegion) -> PercolationSample:
        """The same environment seen inside *subcube*."""
        if not self.region.contains_region(subcube):
            raise ParameterError(f"{subcube} is not inside {self.region}")
        kept = tuple(
            (edge, state) for edge, state in self.overrides if subcube.contains(list(edge)).all()
        )
        return PercolationSample(region=subcube, p=self.p, seed=self.seed, overrides=kept)


def sample_percolation(region: BoxRegion, p: float, seed: int) -> PercolationSample:
    """Sample i.i.d. Bernoulli(*p*) bond states on *region*.

    Raises
    ------
    ParameterError
        If *p* is outside ``(0, 1]`` or *seed* is not a 64-bit unsigned integer.
    """
    if not 0.0 < p <= 1.0:
        raise ParameterError(f"p must lie in (0, 1], got {p}")
    sample = PercolationSample(region=region, p=float(p), seed=_check_seed(seed))
    logger.debug("sampled %s p=%s seed=%d", region, p, seed)
    return sample


def modify_edges(
    sample: PercolationSample, edits: Iterable[tuple[Edge, bool | int]]
) -> PercolationSample:
    """Return a copy of *sample* with *edits* appended to its overrides.

    Edits that leave an edge in its current state are dropped and never
    reach ``overrides``, so applying the same edits twice returns an equal
    sample. :func:`dump_sample` therefore records the effective edits only;
    it round-trips the sample, not the caller's edit list.

    Raises
    ------
    ParameterError
        If an edited edge is not a nearest-neighbor edge inside the region.
    """
    current: dict[Edge, bool] = {}
    new: list[tuple[Edge, bool]] = []
    for edge, state in edits:
        canonical = canonical_edge(*edge)
        v, i = sample._slot_of(canonical)
        before = current.get(canonical, bool(sample.edge_states[v, i]))
        if before == bool(state):
            continue
        current[canonical] = bool(state)
        new.append((canonical, bool(state)))
    if not new:
        return sample
    return replace(sample, overrides=sample.overrides + tuple(new))


# ---------------------------------------------------------------------------
# Cluster graphs
# ---------------------------------------------------------------------------

FaceTag = Literal["", "left", "sides", "center"]


@dataclass(frozen=True, eq=False)
class ClusterGraph:
    """Immutable finite graph on lattice points.

    Vertices are sorted lexicographically and edges are index pairs ``i < j``
    sorted lexicographically, so both orderings depend on coordinates only.
    ``boundary`` marks the inner boundary used as Dirichlet set; when the
    graph comes from a box it is the set of vertices on the box faces.
    """

    points: np.ndarray
    edges: np.ndarray
    boundary: np.ndarray
    region: BoxRegion | None = None

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=np.int64)
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        boundary = np.asarray(self.boundary, dtype=bool)
        if points.ndim != 2 or boundary.shape != (points.shape[0],):
            raise ParameterError("points must be (n, d) and boundary a length-n mask")
        if edges.size and (np.any(edges[:, 0] >= edges[:, 1]) or edges.max() >= len(points)):
            raise ParameterError("edges must be index pairs i < j of listed vertices")
        for arr in (points, edges, boundary):
            arr.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "boundary", boundary)

    # ── construction ──

    @classmethod
    def from_edges(
        cls,
        edges: Iterable[Edge],
        vertices: Iterable[Sequence[int]] | None = None,
        boundary: Iterable[Sequence[int]] | None = None,
        region: BoxRegion | None = None,
        check_connected: bool = True,
    ) -> ClusterGraph:
        """Build a graph from point pairs (and optionally extra isolated vertices).

        Raises
        ------
        ParameterError
            If an edge is not a nearest-neighbor pair.
        TopologyError
            If *check_connected* and the graph is disconnected.
        """
        pairs = [canonical_edge(x, y) for x, y in edges]
        pool = {pt for pair in pairs for pt in pair}
        if vertices is not None:
            pool |= {tuple(int(c) for c in v) for v in vertices}
        if not pool:
            raise ParameterError("a graph needs at least one vertex")
        ordered = sorted(pool)
        index = {pt: k for k, pt in enumerate(ordered)}
        idx = sorted({(index[a], index[b]) for a, b in pairs})
        mask = np.zeros(len(ordered), dtype=bool)
        for pt in boundary or ():
            key = tuple(int(c) for c in pt)
            if key not in index:
                raise ParameterError(f"boundary vertex {key} is not a vertex")
            mask[index[key]] = True
        graph = cls(
            points=np.asarray(ordered, dtype=np.int64),
            edges=np.asarray(idx, dtype=np.int64).reshape(-1, 2),
            boundary=mask,
            region=region,
        )
        if check_connected and not graph.is_connected:
            raise TopologyError("graph is not connected")
        return graph

    @classmethod
    def from_region_mask(
        cls, region: BoxRegion, keep: np.ndarray, region_edges: np.ndarray
    ) -> ClusterGraph:
        """Subgraph of a box on the kept region indices with the given region edges."""
        slot = np.full(region.vertex_count, -1, dtype=np.int64)
        slot[keep] = np.arange(int(keep.sum()))
        inside = keep[region_edges[:, 0]] & keep[region_edges[:, 1]]
        edges = slot[region_edges[inside]]
        edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]
        points = region.points()[keep]
        return cls(points=points, edges=edges, boundary=region.on_faces(points), region=region)

    # ── basic shape ──

    @property
    def dim(self) -> int:
        """Lattice dimension."""
        return int(self.points.shape[1])

    @property
    def n_vertices(self) -> int:
        """Number of vertices."""
        return int(self.points.shape[0])

    @property
    def n_edges(self) -> int:
        """Number of edges."""
        return int(self.edges.shape[0])

    @property
    def interior(self) -> np.ndarray:
        """Mask of vertices off the boundary."""
        return ~self.boundary

    @cached_property
    def degree(self) -> np.ndarray:
        """Number of listed edges at each vertex."""
        return np.bincount(self.edges.ravel(), minlength=self.n_vertices).astype(np.int64)

    @cached_property
    def adjacency(self) -> sparse.csr_matrix:
        """Symmetric 0/1 adjacency matrix."""
        n = self.n_vertices
        rows = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        cols = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        data = np.ones(rows.size, dtype=np.float64)
        return sparse.csr_matrix((data, (rows, cols)), shape=(n, n))

    @cached_property
    def laplacian(self) -> sparse.csr_matrix:
        """The matrix ``D - A``, so that ``Δu = -(D - A) u``."""
        return (sparse.diags(self.degree.astype(np.float64)) - self.adjacency).tocsr()

    @cached_property
    def nx_graph(self) -> nx.Graph:
        """The graph as a :class:`networkx.Graph` on vertex indices."""
        g = nx.Graph()
        g.add_nodes_from(range(self.n_vertices))
        g.add_edges_from(map(tuple, self.edges.tolist()))
        return g

    @cached_property
    def is_connected(self) -> bool:
        """Whether the graph has a single connected component."""
        return bool(self.component_labels().max(initial=0) == 0)

    def component_labels(self) -> np.ndarray:
        """Connected-component label of every vertex."""
        _, labels = connected_components(self.adjacency, directed=False)
        return labels

    # ── lookups ──

    @cached_property
    def _lookup(self) -> dict[Point, int]:
        return {tuple(pt): k for k, pt in enumerate(self.points.tolist())}

    @cached_property
    def _region_slot(self) -> np.ndarray | None:
        if self.region is None or not self.region.contains(self.points).all():
            return None
        slot = np.full(self.region.vertex_count, -1, dtype=np.int64)
        slot[self.region.index_of(self.points)] = np.arange(self.n_vertices)
        return slot

    def contains(self, point: Sequence[int]) -> bool:
        """Whether *point* is a vertex."""
        return tuple(int(c) for c in point) in self._lookup

    def index(self, point: Sequence[int]) -> int:
        """Index of the vertex at *point*.

        Raises
        ------
        ParameterError
            If *point* is not a vertex.
        """
        key = tuple(int(c) for c in point)
        try:
            return self._lookup[key]
        except KeyError:
            raise ParameterError(f"{key} is not a vertex of the graph") from None

    def indices(self, pts: Any) -> np.ndarray:
        """Vectorized vertex indices, ``-1`` for points that are not vertices."""
        arr = np.atleast_2d(np.asarray(pts, dtype=np.int64))
        slot = self._region_slot
        if slot is not None and self.region is not None:
            out = np.full(arr.shape[0], -1, dtype=np.int64)
            inside = self.region.contains(arr)
            out[inside] = slot[self.region.index_of(arr[inside])]
            return out
        return np.asarray([self._lookup.get(tuple(row), -1) for row in arr.tolist()])

    def point(self, i: int) -> Point:
        """Coordinates of vertex *i*."""
        return tuple(int(c) for c in self.points[i])

    @cached_property
    def edge_lookup(self) -> dict[tuple[int, int], int]:
        """Map from index pair ``(i, j)``, ``i < j``, to edge id."""
        return {(int(a), int(b)): k for k, (a, b) in enumerate(self.edges.tolist())}

    def edge_id(self, i: int, j: int) -> tuple[int, int]:
        """Edge id and orientation sign (+1 when ``i < j``) of the edge ``{i, j}``.

        Raises
        ------
        ParameterError
            If ``{i, j}`` is not an edge.
        """
        key = (i, j) if i < j else (j, i)
        if key not in self.edge_lookup:
            raise ParameterError(f"{self.point(i)}-{self.point(j)} is not an edge of the graph")
        return self.edge_lookup[key], (1 if i < j else -1)

    def has_edge(self, x: Sequence[int], y: Sequence[int]) -> bool:
        """Whether the points *x* and *y* are joined by an edge."""
        if not (self.contains(x) and self.contains(y)):
            return False
        i, j = self.index(x), self.index(y)
        return (min(i, j), max(i, j)) in self.edge_lookup

    # ── box decomposition ──

    @cached_property
    def relative(self) -> np.ndarray:
        """Coordinates relative to the region center (raw points without a region)."""
        if self.region is None:
            return self.points
        return self.points - np.asarray(self.region.center, dtype=np.int64)

    @cached_property
    def face_tags(self) -> np.ndarray:
        """Per-vertex tag ``left`` / ``center`` / ``sides`` / ``""`` of the left half.

        ``left`` is the face ``x_1 = -N``, ``center`` the column ``x_1 = 0``
        and ``sides`` the remaining boundary of the left half; ties resolve in
        that order.
        """
        tags = np.full(self.n_vertices, "", dtype="<U6")
        if self.region is None:
            return tags
        x1 = self.relative[:, 0]
        n = self.region.radius
        tags[self.boundary & (x1 < 0)] = "sides"
        tags[x1 == 0] = "center"
        tags[x1 == -n] = "left"
        return tags

    @property
    def in_left_half(self) -> np.ndarray:
        """Mask of vertices with ``x_1 <= 0`` relative to the center."""
        return self.relative[:, 0] <= 0

    # ── derived graphs ──

    def subgraph(
        self,
        vertex_mask: np.ndarray,
        boundary: np.ndarray | None = None,
        check_connected: bool = False,
    ) -> ClusterGraph:
        """Induced subgraph on *vertex_mask* (boundary restricted unless given)."""
        keep = np.asarray(vertex_mask, dtype=bool)
        slot = np.full(self.n_vertices, -1, dtype=np.int64)
        slot[keep] = np.arange(int(keep.sum()))
        inside = keep[self.edges[:, 0]] & keep[self.edges[:, 1]]
        bnd = self.boundary[keep] if boundary is None else np.asarray(boundary, dtype=bool)
        graph = ClusterGraph(
            points=self.points[keep],
            edges=slot[self.edges[inside]],
            boundary=bnd,
            region=self.region,
        )
        if check_connected and not graph.is_connected:
            raise TopologyError("induced subgraph is not connected")
        return graph

    def edge_subgraph(self, edge_mask: np.ndarray, check_connected: bool = True) -> ClusterGraph:
        """Same vertices, only the edges selected by *edge_mask*."""
        graph = ClusterGraph(
            points=self.points,
            edges=self.edges[np.asarray(edge_mask, dtype=bool)],
            boundary=self.boundary,
            region=self.region,
        )
        if check_connected and not graph.is_connected:
            raise TopologyError("removing the edges disconnects the graph")
        return graph

    def without_edges(self, removed: Iterable[Edge]) -> ClusterGraph:
        """Same vertices with the point-pair edges in *removed* deleted.

        Raises
        ------
        TopologyError
            If the deletion disconnects the graph.
        """
        mask = np.ones(self.n_edges, dtype=bool)
        for x, y in removed:
            k, _ = self.edge_id(self.index(x), self.index(y))
            mask[k] = False
        return self.edge_subgraph(mask, check_connected=True)

    def is_same(self, other: ClusterGraph) -> bool:
        """Whether *other* has identical vertices, edges and boundary."""
        return self is other or (
            np.array_equal(self.points, other.points)
            and np.array_equal(self.edges, other.edges)
            and np.array_equal(self.boundary, other.boundary)
        )


def largest_cluster(sample: PercolationSample) -> ClusterGraph:
    """Return the largest open cluster ``C_*(Q_N)`` of *sample*.

    Ties in size go to the component with the lexicographically smallest
    vertex. Boundary tags mark the vertices on the faces of the box.

    Raises
    ------
    EmptyClusterError
        If the sample has no open edge.
    """
    region = sample.region
    pairs = sample.open_edges()
    if pairs.shape[0] == 0:
        raise EmptyClusterError(f"no open edge in {region} (p={sample.p}, seed={sample.seed})")
    n = region.vertex_count
    adjacency = sparse.coo_matrix(
        (np.ones(pairs.shape[0]), (pairs[:, 0], pairs[:, 1])), shape=(n, n)
    )
    n_comp, labels = connected_components(adjacency, directed=False)
    touched = np.zeros(n, dtype=bool)
    touched[pairs.ravel()] = True
    sizes = np.bincount(labels[touched], minlength=n_comp)
    first = np.full(n_comp, n, dtype=np.int64)
    np.minimum.at(first, labels, np.arange(n, dtype=np.int64))
    best = np.lexsort((first, -sizes))[0]
    graph = ClusterGraph.from_region_mask(region, labels == best, pairs)
    logger.debug("largest cluster: %d of %d vertices", graph.n_vertices, n)
    return graph


def cluster_density(sample: PercolationSample) -> float:
    """Fraction of the box occupied by the largest cluster (0 without open edges)."""
    try:
        return largest_cluster(sample).n_vertices / sample.region.vertex_count
    except EmptyClusterError:
        return 0.0


# ---------------------------------------------------------------------------
# Connectivity diagnostics
# ---------------------------------------------------------------------------


def crossing_directions(sample: PercolationSample, subcube: BoxRegion) -> tuple[bool, ...]:
    """Per axis, whether the subcube's largest cluster joins the two opposite faces.

    Raises
    ------
    ParameterError
        If *subcube* is not inside the sample region.
    """
    local = sample.restrict(subcube)
    try:
        cluster = largest_cluster(local)
    except EmptyClusterError:
        return (False,) * subcube.d
    rel = cluster.points - np.asarray(subcube.center)
    m = subcube.radius
    return tuple(
        bool((rel[:, i] == -m).any() and (rel[:, i] == m).any()) for i in range(subcube.d)
    )


def is_crossing(sample: PercolationSample, subcube: BoxRegion) -> bool:
    """Whether every pair of opposite faces of *subcube* is crossed by its largest cluster."""
    return all(crossing_directions(sample, subcube))


@dataclass(frozen=True)
class CheckFailure:
    """One failed sub-cube check of a well-connectedness diagnostic."""

    scale: int
    center: Point
    kind: Literal["crossing", "absorption"]


@dataclass(frozen=True)
class WellConnectedReport:
    """Outcome of :func:`well_connected_report`; no failures means well-connected."""

    cube: BoxRegion
    scales: tuple[int, ...]
    checked: int
    failures: tuple[CheckFailure, ...]

    @property
    def is_well_connected(self) -> bool:
        """Whether every check passed at the configured scales."""
        return not self.failures

    @property
    def failure_count(self) -> int:
        """Number of failed checks."""
        return len(self.failures)


def _mesoscales(radius: int, settings: WellConnectedSettings) -> tuple[int, ...]:
    low = max(1, math.ceil(radius**settings.lower_exponent))
    high = math.floor(radius * settings.upper_fraction)
    scales: list[int] = []
    m = low
    while m <= high:
        scales.append(m)
        m *= 2
    if not scales:
        raise ParameterError(
            f"empty mesoscale range [{low}, {high}] for cube radius {radius}; use a larger cube"
        )
    return tuple(scales)


def _absorbs_paths(local: PercolationSample, min_length: int) -> bool:
    """Whether every open component other than the largest has diameter below *min_length*."""
    try:
        cluster = largest_cluster(local)
    except EmptyClusterError:
        return False
    keep = np.zeros(local.region.vertex_count, dtype=bool)
    keep[local.region.index_of(cluster.points)] = True
    g = nx.Graph()
    g.add_edges_from(
        (a, b) for a, b in local.open_edges().tolist() if not (keep[a] and keep[b])
    )
    for comp in nx.connected_components(g):
        if len(comp) > min_length and nx.diameter(g.subgraph(comp)) >= min_length:
            return False
    return True


def well_connected_report(
    sample: PercolationSample,
    cube: BoxRegion,
    settings: WellConnectedSettings | None = None,
) -> WellConnectedReport:
    """Crossing and path-absorption checks over the mesoscale sub-cubes of *cube*.

    Scales run from ``ceil(R^a)`` doubling up to ``floor(R * upper_fraction)``;
    sub-cubes of radius ``M`` are centered on the grid of step ``M`` that
    keeps them inside *cube*. A sub-cube fails absorption when an open
    component other than its largest cluster has graph diameter at least
    ``max(1, ceil(M * absorption_fraction))`` or when it has no cluster.

    Raises
    ------
    ParameterError
        If the scale range is empty or *cube* is not inside the sample region.
    """
    from .config import WellConnectedSettings

    settings = settings or WellConnectedSettings()
    if not sample.region.contains_region(cube):
        raise ParameterError(f"{cube} is not inside {sample.region}")
    scales = _mesoscales(cube.radius, settings)
    failures: list[CheckFailure] = []
    checked = 0
    for m in scales:
        reach = (cube.radius - m) // m
        min_length = max(1, math.ceil(m * settings.absorption_fraction))
        for offset in product(range(-reach, reach + 1), repeat=cube.d):
            center = tuple(int(c + m * k) for c, k in zip(cube.center, offset, strict=True))
            sub = BoxRegion(d=cube.d, radius=m, center=center)
            local = sample.restrict(sub)
            checked += 2
            if not is_crossing(local, sub):
                failures.append(CheckFailure(scale=m, center=center, kind="crossing"))
            if not _absorbs_paths(local, min_length):
                failures.append(CheckFailure(scale=m, center=center, kind="absorption"))
    logger.info("well-connected check on %s: %d/%d failed", cube, len(failures), checked)
    return WellConnectedReport(
        cube=cube, scales=scales, checked=checked, failures=tuple(failures)
    )


def graph_distance(graph: ClusterGraph, x: Sequence[int], y: Sequence[int]) -> int | None:
    """Breadth-first distance between two vertices, ``None`` if unreachable.

    Raises
    ------
    ParameterError
        If *x* or *y* is not a vertex.
    """
    i, j = graph.index(x), graph.index(y)
    try:
        return int(nx.shortest_path_length(graph.nx_graph, i, j))
    except nx.NetworkXNoPath:
        return None


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _format_point(pt: Point) -> str:
    return ",".join(str(c) for c in pt)


def dump_sample(sample: PercolationSample) -> str:
    """Textual form: a YAML header plus one ``"x1,y1;x2,y2=0|1"`` line per override."""
    doc = {
        "format": SAMPLE_FORMAT,
        "d": sample.region.d,
        "radius": sample.region.radius,
        "center": list(sample.region.center),
        "p": sample.p,
        "seed": sample.seed,
        "overrides": [
            f"{_format_point(a)};{_format_point(b)}={int(state)}"
            for (a, b), state in sample.overrides
        ],
    }
    return yaml.safe_dump(doc, sort_keys=False)


def load_sample(text: str) -> PercolationSample:
    """Inverse of :func:`dump_sample`.

    Raises
    ------
    ParameterError
        If the document is not a percolab sample.
    """
    doc = yaml.safe_load(text)
    if not isinstance(doc, dict) or doc.get("format") != SAMPLE_FORMAT:
        raise ParameterError(f"not a {SAMPLE_FORMAT} document")
    region = BoxRegion(d=doc["d"], radius=doc["radius"], center=tuple(doc["center"]))
    sample = sample_percolation(region, doc["p"], doc["seed"])
    edits: list[tuple[Edge, bool]] = []
    for line in doc.get("overrides") or ():
        try:
            pair, state = line.split("=")
            a, b = (tuple(int(c) for c in part.split(",")) for part in pair.split(";"))
        except ValueError:
            raise ParameterError(f"malformed override line {line!r}") from None
        edits.append(((a, b), state.strip() == "1"))
    return modify_edges(sample, edits)
