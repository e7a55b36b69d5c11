"""Block-cut trees of level-set subgraphs and the flux-maximizing exploration.

Starting from an edge ``(x0, x0 + e_1)`` of a level set ``L_a`` of ``u_f``
along which the corrected plane increases, :func:`increasing_subgraph`
collects the vertices of ``L_a`` reachable by strictly increasing paths.
Its block-cut tree is pruned, annotated with the incoming and outgoing
fluxes of the plane through every cut-vertex, and explored greedily towards
a leaf, where an edge with both gradients nonzero must sit.

Public API
----------
- :class:`TreeNode`, :class:`BlockCutTree`, :func:`block_cut_tree`
- :func:`cut_vertex_flux`, :func:`prune_tree`
- :func:`increasing_subgraph`, :class:`Exploration`, :func:`flux_exploration`
- :class:`FluxInequalityReport`, :func:`check_flux_inequalities`
- :class:`TelescopingCheck`, :func:`telescoping_bound`
- :class:`LevelSetExploration`, :func:`explore_level_set`
- :func:`tree_to_text`, :func:`write_tree_graphml`
- :func:`count_disjoint_paths`
- :class:`Diamond`, :class:`DiamondVerdict`, :func:`peel_diamond`, :func:`diamond_peel`
"""

from __future__ import annotations

import logging
from collections import deque
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Literal

import networkx as nx
import numpy as np

from .errors import InternalError, ParameterError, PreconditionError
from .fields import ScalarField
from .harmonic import CorrectedPlane
from .percolation import ClusterGraph, Edge, Point, canonical_edge
from .potential import Potential, level_set

logger = logging.getLogger(__name__)

__all__ = [
    "BlockCutTree",
    "Diamond",
    "DiamondVerdict",
    "Exploration",
    "FluxInequalityReport",
    "LevelSetExploration",
    "TelescopingCheck",
    "TreeNode",
    "block_cut_tree",
    "check_flux_inequalities",
    "count_disjoint_paths",
    "cut_vertex_flux",
    "diamond_peel",
    "explore_level_set",
    "flux_exploration",
    "increasing_subgraph",
    "peel_diamond",
    "prune_tree",
    "telescoping_bound",
    "tree_to_text",
    "write_tree_graphml",
]

NodeKind = Literal["block", "cut"]

# ---------------------------------------------------------------------------
# Block-cut trees
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TreeNode:
    """A biconnected component (``block``) or a cut-vertex (``cut``)."""

    node_id: int
    kind: NodeKind
    vertices: tuple[Point, ...]
    edges: tuple[Edge, ...] = ()

    @property
    def label(self) -> str:
        """One-line description used by the text and GraphML exports."""
        if self.kind == "cut":
            return f"cut {self.vertices[0]}"
        return f"block #{self.node_id} ({len(self.vertices)} vertices, {len(self.edges)} edges)"


@dataclass(frozen=True)
class BlockCutTree:
    """Rooted block-cut tree of a connected graph.

    Blocks take the ids ``0 .. B-1`` ordered by their smallest vertex, cut
    vertices the ids ``B ..`` in lexicographic order. ``incoming`` maps a
    cut id to ``i_in``; ``outgoing`` maps ``(cut id, block id)`` to ``i_out``.
    Both are empty until :func:`cut_vertex_flux` fills them.
    """

    source: ClusterGraph
    nodes: Mapping[int, TreeNode]
    root: int
    parent: Mapping[int, int | None]
    children: Mapping[int, tuple[int, ...]]
    incoming: Mapping[int, Any] = field(default_factory=dict)
    outgoing: Mapping[tuple[int, int], Any] = field(default_factory=dict)

    @property
    def blocks(self) -> list[TreeNode]:
        """The block nodes in id order."""
        return [n for n in self.nodes.values() if n.kind == "block"]

    @property
    def cut_vertices(self) -> list[Point]:
        """Points of the cut-vertex nodes."""
        return [n.vertices[0] for n in self.nodes.values() if n.kind == "cut"]

    def is_leaf(self, node_id: int) -> bool:
        """Whether *node_id* has no children."""
        return not self.children[node_id]

    def descendants(self, node_id: int) -> list[int]:
        """All nodes below *node_id*, breadth first."""
        out: list[int] = []
        queue = deque(self.children[node_id])
        while queue:
            k = queue.popleft()
            out.append(k)
            queue.extend(self.children[k])
        return out

    def as_nx(self) -> nx.Graph:
        """The tree as an undirected :class:`networkx.Graph` on node ids."""
        g = nx.Graph()
        g.add_nodes_from(self.nodes)
        g.add_edges_from((p, k) for k, p in self.parent.items() if p is not None)
        return g


def block_cut_tree(subgraph: ClusterGraph, root_vertex: Sequence[int]) -> BlockCutTree:
    """Block-cut tree of *subgraph* rooted at a block containing *root_vertex*.

    Uses the linear-time biconnected decomposition of networkx. When the root
    vertex is a cut-vertex the block with the smallest id is chosen. A single
    vertex without edges forms one block.

    Raises
    ------
    ParameterError
        If *subgraph* is disconnected or *root_vertex* is not one of its vertices.
    """
    if not subgraph.is_connected:
        raise ParameterError("block-cut trees need a connected graph")
    root_point = tuple(int(c) for c in root_vertex)
    subgraph.index(root_point)
    g = subgraph.nx_graph
    raw_blocks: list[tuple[tuple[Point, ...], tuple[Edge, ...]]] = []
    for comp in nx.biconnected_component_edges(g):
        edges = sorted(canonical_edge(subgraph.point(i), subgraph.point(j)) for i, j in comp)
        verts = sorted({pt for e in edges for pt in e})
        raw_blocks.append((tuple(verts), tuple(edges)))
    if not raw_blocks:
        raw_blocks.append(((subgraph.point(0),), ()))
    raw_blocks.sort(key=lambda b: (b[0][0], b[0]))
    cuts = sorted(subgraph.point(i) for i in nx.articulation_points(g))

    nodes: dict[int, TreeNode] = {}
    for k, (verts, edges) in enumerate(raw_blocks):
        nodes[k] = TreeNode(k, "block", verts, edges)
    cut_id: dict[Point, int] = {}
    for k, pt in enumerate(cuts, start=len(raw_blocks)):
        nodes[k] = TreeNode(k, "cut", (pt,))
        cut_id[pt] = k

    adjacency: dict[int, list[int]] = {k: [] for k in nodes}
    for k, (verts, _) in enumerate(raw_blocks):
        for pt in verts:
            if pt in cut_id:
                adjacency[k].append(cut_id[pt])
                adjacency[cut_id[pt]].append(k)

    root = min(k for k, (verts, _) in enumerate(raw_blocks) if root_point in verts)
    parent: dict[int, int | None] = {root: None}
    children: dict[int, list[int]] = {k: [] for k in nodes}
    queue = deque([root])
    while queue:
        k = queue.popleft()
        for nb in sorted(adjacency[k]):
            if nb not in parent:
                parent[nb] = k
                children[k].append(nb)
                queue.append(nb)
    logger.debug("block-cut tree: %d blocks, %d cut-vertices", len(raw_blocks), len(cuts))
    return BlockCutTree(
        source=subgraph,
        nodes=nodes,
        root=root,
        parent=parent,
        children={k: tuple(v) for k, v in children.items()},
    )


def _plane_neighbors(plane: CorrectedPlane, pt: Point) -> list[int]:
    graph = plane.graph
    return list(graph.nx_graph.neighbors(graph.index(pt)))


def cut_vertex_flux(tree: BlockCutTree, plane: CorrectedPlane) -> BlockCutTree:
    """Annotate every cut-vertex with its incoming and outgoing plane fluxes.

    ``i_in(x) = Σ (ℓ(x) - ℓ(y))`` over neighbors ``y`` of ``x`` in the parent
    block and ``i_out(x, B) = Σ (ℓ(y) - ℓ(x))`` over neighbors ``y`` in a
    child block ``B``; neighbors are taken in the plane's graph.
    """
    graph = plane.graph
    values = plane.field.values
    incoming: dict[int, Any] = {}
    outgoing: dict[tuple[int, int], Any] = {}
    for k, node in tree.nodes.items():
        if node.kind != "cut":
            continue
        x = node.vertices[0]
        lx = values[graph.index(x)]
        nbrs = {graph.point(j): values[j] for j in _plane_neighbors(plane, x)}
        parent = tree.parent[k]
        if parent is not None:
            members = set(tree.nodes[parent].vertices)
            incoming[k] = sum((lx - v for pt, v in nbrs.items() if pt in members), lx * 0)
        for child in tree.children[k]:
            members = set(tree.nodes[child].vertices)
            outgoing[(k, child)] = sum((v - lx for pt, v in nbrs.items() if pt in members), lx * 0)
    return replace(tree, incoming=incoming, outgoing=outgoing)


def prune_tree(
    tree: BlockCutTree, pot: Potential, plane: CorrectedPlane, a: Any, tol: Any = None
) -> BlockCutTree:
    """Erase the descendants of blocks touching the outside of ``L_a``.

    A block is marked when one of its vertices has a neighbor ``z`` with
    ``u_f(z) ≠ a`` and ``ℓ(z) ≠ ℓ(y)``; annotations of erased nodes go too.
    """
    graph = plane.graph
    in_level = level_set(pot, a, tol)
    values = plane.field.values
    eps = _tol(plane.field, tol)
    erased: set[int] = set()
    for k, node in tree.nodes.items():
        if node.kind != "block" or k in erased:
            continue
        marked = False
        for pt in node.vertices:
            i = graph.index(pt)
            for j in graph.nx_graph.neighbors(i):
                if not in_level[j] and abs(values[j] - values[i]) > eps:
                    marked = True
                    break
            if marked:
                break
        if marked:
            erased.update(tree.descendants(k))
    if not erased:
        return tree
    keep = [k for k in tree.nodes if k not in erased]
    logger.debug("pruning erased %d of %d tree nodes", len(erased), len(tree.nodes))
    return replace(
        tree,
        nodes={k: tree.nodes[k] for k in keep},
        parent={k: tree.parent[k] for k in keep},
        children={k: tuple(c for c in tree.children[k] if c not in erased) for k in keep},
        incoming={k: v for k, v in tree.incoming.items() if k not in erased},
        outgoing={kb: v for kb, v in tree.outgoing.items() if kb[1] not in erased},
    )


def _tol(u: ScalarField, tol: Any) -> Any:
    if tol is not None:
        return tol
    return Fraction(0) if u.kind == "rational" else 1e-9 * max(1.0, float(u.abs_max()))


# ---------------------------------------------------------------------------
# Increasing subgraph
# ---------------------------------------------------------------------------


def increasing_subgraph(
    pot: Potential,
    plane: CorrectedPlane,
    seed_edge: Sequence[Sequence[int]],
    a: Any,
    tol: Any = None,
) -> ClusterGraph:
    """Vertices of ``L_a`` reached from the seed by paths along which ``ℓ`` increases.

    The seed edge ``(x0, x1)`` is oriented; paths start with it, so ``x0``
    itself is not part of the result. Edges are the graph edges between the
    collected vertices along which ``ℓ`` is not constant. Boundary tags are
    inherited from the plane's graph.

    Raises
    ------
    ParameterError
        If an endpoint of the seed is not in ``L_a`` or ``ℓ`` does not
        increase along it.
    """
    graph = plane.graph
    if not graph.is_same(pot.graph):
        raise ParameterError("potential and plane live on different graphs")
    x0, x1 = (tuple(int(c) for c in pt) for pt in seed_edge)
    if not graph.has_edge(x0, x1):
        raise ParameterError(f"{x0}-{x1} is not an edge of the graph")
    in_level = level_set(pot, a, tol)
    i0, i1 = graph.index(x0), graph.index(x1)
    if not (in_level[i0] and in_level[i1]):
        raise ParameterError(f"seed edge {x0}-{x1} is not inside the level set {a}")
    values = plane.field.values
    if not values[i1] > values[i0]:
        raise ParameterError(f"the plane does not increase along {x0}-{x1}")

    reached = {i1}
    queue = deque([i1])
    nxg = graph.nx_graph
    while queue:
        i = queue.popleft()
        for j in nxg.neighbors(i):
            if j not in reached and in_level[j] and values[j] > values[i]:
                reached.add(j)
                queue.append(j)
    members = sorted(reached)
    member_set = set(members)
    edges = [
        (graph.point(i), graph.point(j))
        for i, j in graph.edges.tolist()
        if i in member_set and j in member_set and values[i] != values[j]
    ]
    pts = [graph.point(i) for i in members]
    boundary = [graph.point(i) for i in members if graph.boundary[i]]
    logger.debug("increasing subgraph from %s: %d vertices", x1, len(pts))
    return ClusterGraph.from_edges(
        edges, vertices=pts, boundary=boundary, region=graph.region, check_connected=False
    )


# ---------------------------------------------------------------------------
# Exploration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Exploration:
    """Greedy path through an annotated tree.

    ``reached_leaf`` is false when the terminal block touches the inner
    boundary of the box, where leaves may be artifacts of the truncation.
    ``witness`` is an edge ``(y, z)`` leaving the terminal block with
    ``∇ℓ ≠ 0`` and ``∇u_f ≠ 0``, when one exists.
    """

    path: tuple[int, ...]
    terminal: int
    reached_leaf: bool
    witness: Edge | None

    @property
    def cut_nodes(self) -> tuple[int, ...]:
        """Cut-vertex nodes on the path, in order."""
        return self.path[1::2]


def _witness_edge(
    tree: BlockCutTree, node: int, plane: CorrectedPlane, pot: Potential | None, tol: Any
) -> Edge | None:
    if pot is None:
        return None
    graph = plane.graph
    members = set(tree.nodes[node].vertices)
    lvals, uvals = plane.field.values, pot.field.values
    eps_l, eps_u = _tol(plane.field, tol), _tol(pot.field, tol)
    for y in sorted(members):
        i = graph.index(y)
        for j in sorted(graph.nx_graph.neighbors(i)):
            z = graph.point(j)
            if z in members:
                continue
            if abs(lvals[j] - lvals[i]) > eps_l and abs(uvals[j] - uvals[i]) > eps_u:
                return (y, z)
    return None


def flux_exploration(
    tree: BlockCutTree,
    plane: CorrectedPlane,
    pot: Potential | None = None,
    tol: Any = None,
) -> Exploration:
    """Walk from the root, maximizing ``i_out`` at cut-vertices and ``i_in`` at blocks.

    Ties go to the smallest node id. The walk stops at a block without
    children.

    Raises
    ------
    ParameterError
        If the tree carries no flux annotations but has cut-vertices.
    """
    if len(tree.nodes) > 1 and not tree.incoming:
        raise ParameterError("annotate the tree with cut_vertex_flux first")
    path = [tree.root]
    node = tree.root
    while tree.children[node]:
        kids = tree.children[node]
        if tree.nodes[node].kind == "cut":
            node = max(kids, key=lambda c: (tree.outgoing[(node, c)], -c))
        else:
            node = max(kids, key=lambda c: (tree.incoming[c], -c))
        path.append(node)
    boundary = plane.graph.boundary
    touches = any(boundary[plane.graph.index(pt)] for pt in tree.nodes[node].vertices)
    witness = _witness_edge(tree, node, plane, pot, tol)
    logger.debug("exploration stopped at node %d after %d steps", node, len(path) - 1)
    return Exploration(
        path=tuple(path), terminal=node, reached_leaf=not touches, witness=witness
    )


@dataclass(frozen=True)
class FluxInequalityReport:
    """Outcome of checking both cut-vertex flux inequalities on a tree."""

    checked_blocks: int
    checked_cuts: int
    violations: tuple[str, ...]

    @property
    def holds(self) -> bool:
        """Whether no inequality was violated."""
        return not self.violations


def check_flux_inequalities(
    tree: BlockCutTree, plane: CorrectedPlane, tol: float = 1e-9
) -> FluxInequalityReport:
    """Check the two flux inequalities wherever the plane is harmonic.

    For a block ``B`` that is neither root nor leaf, with parent cut ``x0``
    and child cuts ``x1 .. xn``: ``Σ i_in(xi) >= i_out(x0, B)``. For a cut
    ``x``: ``Σ_B i_out(x, B) >= i_in(x)`` over its child blocks. Nodes whose
    vertices include a boundary vertex of the plane's graph are skipped.
    """
    graph = plane.graph
    boundary = graph.boundary
    violations: list[str] = []
    blocks = cuts = 0

    def harmonic(points: Iterable[Point]) -> bool:
        return not any(boundary[graph.index(pt)] for pt in points)

    for k, node in tree.nodes.items():
        if node.kind == "block":
            parent = tree.parent[k]
            if parent is None or tree.is_leaf(k):
                continue
            child_pts = {tree.nodes[c].vertices[0] for c in tree.children[k]}
            parent_pt = tree.nodes[parent].vertices[0]
            interior = [pt for pt in node.vertices if pt not in child_pts and pt != parent_pt]
            if not harmonic(interior):
                continue
            blocks += 1
            lhs = sum(tree.incoming[c] for c in tree.children[k])
            rhs = tree.outgoing[(parent, k)]
            if lhs < rhs - tol:
                violations.append(f"block {k}: Σ i_in = {lhs} < i_out = {rhs}")
        else:
            if not harmonic(node.vertices) or k not in tree.incoming:
                continue
            cuts += 1
            lhs = sum(tree.outgoing[(k, c)] for c in tree.children[k])
            rhs = tree.incoming[k]
            if lhs < rhs - tol:
                violations.append(f"cut {node.vertices[0]}: Σ i_out = {lhs} < i_in = {rhs}")
    for message in violations:
        logger.warning("flux inequality violated at %s", message)
    return FluxInequalityReport(blocks, cuts, tuple(violations))


@dataclass(frozen=True)
class TelescopingCheck:
    """``ℓ(terminal) - ℓ(x0) >= ¼ Σ i_in`` over the cut-vertices of the path."""

    terminal_vertex: Point
    gain: Any
    flux_bound: Any

    @property
    def holds(self) -> bool:
        """Whether the gain covers the flux bound."""
        return bool(self.gain >= self.flux_bound - 1e-9)


def telescoping_bound(
    exploration: Exploration,
    tree: BlockCutTree,
    plane: CorrectedPlane,
    start: Sequence[int],
) -> TelescopingCheck:
    """Compare the plane increase along the exploration with its cut fluxes.

    The terminal vertex is the inner endpoint of the witness edge, or the
    maximizer of ``ℓ`` over the terminal block when there is no witness.
    """
    values = plane.field
    if exploration.witness is not None:
        terminal = exploration.witness[0]
    else:
        terminal = max(tree.nodes[exploration.terminal].vertices, key=values.at)
    gain = values.at(terminal) - values.at(start)
    flux = sum((tree.incoming[k] for k in exploration.cut_nodes), gain * 0)
    return TelescopingCheck(terminal_vertex=terminal, gain=gain, flux_bound=flux / 4)


@dataclass(frozen=True)
class LevelSetExploration:
    """Every stage of the level-set exploration from one seed edge."""

    seed: Edge
    level: Any
    witness: Edge | None
    subgraph: ClusterGraph | None = None
    tree: BlockCutTree | None = None
    exploration: Exploration | None = None
    inequalities: FluxInequalityReport | None = None
    telescoping: TelescopingCheck | None = None


def explore_level_set(
    pot: Potential,
    plane: CorrectedPlane,
    seed_edge: Sequence[Sequence[int]],
    tol: Any = None,
) -> LevelSetExploration:
    """Look for an edge with both gradients nonzero, starting from *seed_edge*.

    If ``u_f`` already changes along the seed, the seed is the witness.
    Otherwise the increasing subgraph of the common level is built, its
    block-cut tree pruned, annotated and explored, and the flux inequalities
    and the telescoping bound are checked along the way.
    """
    x0, x1 = (tuple(int(c) for c in pt) for pt in seed_edge)
    u = pot.field
    a = u.at(x0)
    eps = _tol(u, tol)
    seed = (x0, x1)
    if abs(u.at(x1) - a) > eps:
        return LevelSetExploration(seed=seed, level=a, witness=seed)
    sub = increasing_subgraph(pot, plane, seed, a, tol)
    tree = prune_tree(block_cut_tree(sub, x1), pot, plane, a, tol)
    tree = cut_vertex_flux(tree, plane)
    inequalities = check_flux_inequalities(tree, plane)
    walk = flux_exploration(tree, plane, pot, tol)
    return LevelSetExploration(
        seed=seed,
        level=a,
        witness=walk.witness,
        subgraph=sub,
        tree=tree,
        exploration=walk,
        inequalities=inequalities,
        telescoping=telescoping_bound(walk, tree, plane, x0),
    )


# ---------------------------------------------------------------------------
# Exports
# ---------------------------------------------------------------------------


def _fmt(value: Any) -> str:
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    return f"{float(value):.6g}"


def tree_to_text(tree: BlockCutTree) -> str:
    """Indented rendering, one node per line, with flux annotations."""
    lines: list[str] = []

    def visit(k: int, depth: int) -> None:
        node = tree.nodes[k]
        note = ""
        if node.kind == "cut" and k in tree.incoming:
            note = f"  i_in={_fmt(tree.incoming[k])}"
        parent = tree.parent[k]
        if node.kind == "block" and parent is not None and (parent, k) in tree.outgoing:
            note = f"  i_out={_fmt(tree.outgoing[(parent, k)])}"
        lines.append(f"{'  ' * depth}{node.label}{note}")
        for c in tree.children[k]:
            visit(c, depth + 1)

    visit(tree.root, 0)
    return "\n".join(lines) + "\n"


def write_tree_graphml(tree: BlockCutTree, path: str | Path) -> Path:
    """Write the tree as GraphML with ``kind``, ``label`` and flux attributes."""
    g = nx.DiGraph()
    for k, node in tree.nodes.items():
        attrs: dict[str, Any] = {"kind": node.kind, "label": node.label, "size": len(node.vertices)}
        if k in tree.incoming:
            attrs["i_in"] = float(tree.incoming[k])
        g.add_node(k, **attrs)
    for k, p in tree.parent.items():
        if p is not None:
            attrs = {}
            if (p, k) in tree.outgoing:
                attrs["i_out"] = float(tree.outgoing[(p, k)])
            g.add_edge(p, k, **attrs)
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    nx.write_graphml(g, out)
    return out


# ---------------------------------------------------------------------------
# Disjoint paths
# ---------------------------------------------------------------------------


def count_disjoint_paths(
    graph: ClusterGraph,
    sources: Iterable[Sequence[int]],
    targets: Iterable[Sequence[int]] | None = None,
) -> int:
    """Maximum number of paths from *sources* to *targets* sharing no vertex outside *sources*.

    Every vertex outside the source set gets capacity one by splitting it
    into an in- and an out-copy; the count is the maximum flow between a
    super source and a super sink. *targets* defaults to the inner boundary.

    Raises
    ------
    ParameterError
        If either set is empty or they intersect.
    """
    src = {graph.index(p) for p in sources}
    if targets is None:
        dst = set(np.flatnonzero(graph.boundary).tolist())
    else:
        dst = {graph.index(p) for p in targets}
    if not src or not dst:
        raise ParameterError("source and target sets must be nonempty")
    if src & dst:
        raise ParameterError("source and target sets must be disjoint")
    flow = nx.DiGraph()
    for v in range(graph.n_vertices):
        if v not in src:
            flow.add_edge(("in", v), ("out", v), capacity=1)

    def head(v: int) -> Any:
        return "S" if v in src else ("in", v)

    def tail(v: int) -> Any:
        return "S" if v in src else ("out", v)

    for i, j in graph.edges.tolist():
        if i in src and j in src:
            continue
        flow.add_edge(tail(i), head(j), capacity=1)
        flow.add_edge(tail(j), head(i), capacity=1)
    for v in dst:
        flow.add_edge(("out", v), "T")
    value = nx.maximum_flow_value(flow, "S", "T")
    return int(value)


# ---------------------------------------------------------------------------
# Diamond peeling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Diamond:
    """The ℓ¹ ball ``{x : |x - center|_1 <= k}`` in the plane."""

    center: Point
    k: int

    def __post_init__(self) -> None:
        if self.k < 0:
            raise ParameterError(f"diamond radius must be nonnegative, got {self.k}")

    def distance(self, pt: Sequence[int]) -> int:
        """ℓ¹ distance of *pt* from the center."""
        return abs(pt[0] - self.center[0]) + abs(pt[1] - self.center[1])

    def contains(self, pt: Sequence[int]) -> bool:
        """Whether *pt* lies in the closed diamond."""
        return self.distance(pt) <= self.k

    def layer(self, r: int) -> list[Point]:
        """Points at ℓ¹ distance exactly *r* from the center."""
        cx, cy = self.center
        if r == 0:
            return [(cx, cy)]
        pts = set()
        for dx in range(-r, r + 1):
            dy = r - abs(dx)
            pts.add((cx + dx, cy + dy))
            pts.add((cx + dx, cy - dy))
        return sorted(pts)


@dataclass(frozen=True)
class DiamondVerdict:
    """Result of peeling: ``integer_valued`` or the vertex where a forced value failed.

    ``values`` holds the field derived layer by layer inside the diamond.
    """

    integer_valued: bool
    diamond: Diamond | None
    witness: Point | None = None
    layers: int = 0
    values: Mapping[Point, Fraction] = field(default_factory=dict)


def _enclosing_diamond(points: list[Point]) -> Diamond:
    s = [x + y for x, y in points]
    t = [x - y for x, y in points]
    k = max((max(s) - min(s) + 1) // 2, (max(t) - min(t) + 1) // 2)
    while True:
        for sc in range(max(s) - k, min(s) + k + 1):
            for tc in range(max(t) - k, min(t) + k + 1):
                if (sc - tc) % 2 == 0:
                    return Diamond(((sc + tc) // 2, (sc - tc) // 2), k)
        k += 1


_UNITS = ((1, 0), (-1, 0), (0, 1), (0, -1))


def _lattice_neighbors(x: Point) -> list[Point]:
    return [(x[0] + dx, x[1] + dy) for dx, dy in _UNITS]


def peel_diamond(diamond: Diamond, laplacian: Callable[[Point], Fraction]) -> DiamondVerdict:
    """Reconstruct a field supported in *diamond* from its lattice Laplacian alone.

    Values outside the diamond are zero. Layer ``r`` is derived from the layers
    beyond it: a vertex ``a`` at distance ``r + 1`` with a single underived
    neighbor ``z`` forces ``u(z) = Δu(a) + 4 u(a) - Σ u(b)`` over the other
    neighbors ``b`` of ``a``. The first non-integer forced value is the witness.
    """
    known: dict[Point, Fraction] = {}

    def derived(pt: Point) -> Fraction:
        return known[pt] if diamond.contains(pt) else Fraction(0)

    for r in range(diamond.k, -1, -1):
        outer = diamond.layer(r + 1)
        pending = set(diamond.layer(r))
        progress = True
        while pending and progress:
            progress = False
            for a in outer:
                around = _lattice_neighbors(a)
                unknown = [b for b in around if b in pending]
                if len(unknown) != 1:
                    continue
                z = unknown[0]
                forced = Fraction(laplacian(a)) + 4 * derived(a)
                forced -= sum((derived(b) for b in around if b != z), Fraction(0))
                if forced.denominator != 1:
                    return DiamondVerdict(
                        False, diamond, witness=z, layers=diamond.k - r, values=known
                    )
                known[z] = forced
                pending.discard(z)
                progress = True
        if pending:
            return DiamondVerdict(
                False, diamond, witness=min(pending), layers=diamond.k - r, values=known
            )
    return DiamondVerdict(True, diamond, layers=diamond.k + 1, values=known)


def diamond_peel(u: ScalarField) -> DiamondVerdict:
    """Certify that a compactly supported planar field with integer Laplacian is integer.

    *u* lives on a full-lattice box and is read as zero off the box. The
    peeling starts on the outer boundary of the smallest diamond containing
    the support, where ``u = 0``, and rebuilds *u* inward from ``Δu`` with
    :func:`peel_diamond`. The rebuilt field must agree with *u*.

    Raises
    ------
    ParameterError
        If the graph is not planar, an interior vertex misses a lattice edge,
        or the support reaches the box faces.
    PreconditionError
        If ``Δu`` is not an integer somewhere; the witness is the first such
        vertex in lexicographic order.
    InternalError
        If the rebuilt field differs from *u*.
    """
    graph = u.graph
    if graph.dim != 2:
        raise ParameterError("diamond peeling is planar")
    for i in np.flatnonzero(graph.interior):
        x = graph.point(int(i))
        for y in _lattice_neighbors(x):
            if not graph.has_edge(x, y):
                raise ParameterError(f"diamond peeling needs the full lattice: {x}-{y} is missing")
    values = {graph.point(i): Fraction(v) for i, v in enumerate(u.values) if v != 0}
    for pt in values:
        if graph.boundary[graph.index(pt)]:
            raise ParameterError(f"the support of u reaches the box faces at {pt}")

    def value(pt: Point) -> Fraction:
        return values.get(pt, Fraction(0))

    def laplacian(x: Point) -> Fraction:
        return sum((value(y) for y in _lattice_neighbors(x)), -4 * value(x))

    for i in range(graph.n_vertices):
        x = graph.point(i)
        lap = laplacian(x)
        if lap.denominator != 1:
            raise PreconditionError(f"Δu({x}) = {lap} is not an integer", witness=x)
    if not values:
        return DiamondVerdict(integer_valued=True, diamond=None)

    verdict = peel_diamond(_enclosing_diamond(list(values)), laplacian)
    if not verdict.integer_valued:
        return verdict
    mismatch = sorted(pt for pt, v in verdict.values.items() if v != value(pt))
    if mismatch:
        raise InternalError(f"peeling rebuilt u({mismatch[0]}) differently from the input")
    logger.debug(
        "diamond peel certified %d vertices in %d layers", len(verdict.values), verdict.layers
    )
    return verdict
