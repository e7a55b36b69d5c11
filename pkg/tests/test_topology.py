"""Tests for percolab.topology - block-cut trees, exploration, disjoint paths, peeling."""
# ruff: noqa: D101, D102

from __future__ import annotations

from fractions import Fraction

import networkx as nx
import numpy as np
import pytest

from percolab.errors import ParameterError, PreconditionError
from percolab.fields import ScalarField, SolveOptions
from percolab.harmonic import CorrectedPlane, corrected_plane
from percolab.percolation import BoxRegion, ClusterGraph, largest_cluster, sample_percolation
from percolab.potential import PoleFunction, Potential, potential
from percolab.topology import (
    Diamond,
    block_cut_tree,
    check_flux_inequalities,
    count_disjoint_paths,
    cut_vertex_flux,
    diamond_peel,
    explore_level_set,
    flux_exploration,
    increasing_subgraph,
    peel_diamond,
    telescoping_bound,
    tree_to_text,
    write_tree_graphml,
)

from .conftest import block


def _path(n):
    return block(1, n)


def _plane(graph, values):
    return CorrectedPlane(graph, (1, 0), ScalarField(graph, values), None)


@pytest.fixture
def path3():
    return _path(3)


@pytest.fixture
def annotated(path3):
    tree = block_cut_tree(path3, (0, 0))
    return cut_vertex_flux(tree, _plane(path3, [0, 1, 2]))


# ── block-cut trees ───────────────────────────────────────────────


class TestBlockCutTree:

    def test_path(self, path3):
        tree = block_cut_tree(path3, (0, 0))
        assert [n.kind for n in tree.blocks] == ["block", "block"]
        assert tree.cut_vertices == [(1, 0)]
        assert tree.root == 0
        assert tree.children[0] == (2,)
        assert tree.children[2] == (1,)
        assert tree.is_leaf(1)
        assert tree.descendants(0) == [2, 1]
        assert nx.is_tree(tree.as_nx())

    def test_root_at_cut_vertex(self, path3):
        assert block_cut_tree(path3, (1, 0)).root == 0

    def test_cycle_is_one_block(self):
        tree = block_cut_tree(block(2, 2), (0, 0))
        assert len(tree.nodes) == 1
        assert tree.nodes[0].label == "block #0 (4 vertices, 4 edges)"

    def test_single_vertex(self):
        graph = ClusterGraph.from_edges([], vertices=[(0, 0)])
        tree = block_cut_tree(graph, (0, 0))
        assert tree.nodes[0].vertices == ((0, 0),)

    def test_disconnected(self):
        graph = ClusterGraph.from_edges(
            [((0, 0), (1, 0)), ((3, 0), (4, 0))], check_connected=False
        )
        with pytest.raises(ParameterError):
            block_cut_tree(graph, (0, 0))

    def test_unknown_root(self, path3):
        with pytest.raises(ParameterError):
            block_cut_tree(path3, (5, 5))


class TestFluxAnnotations:

    def test_fluxes(self, annotated):
        assert annotated.incoming == {2: 1.0}
        assert annotated.outgoing == {(2, 1): 1.0}

    def test_exploration(self, annotated, path3):
        walk = flux_exploration(annotated, _plane(path3, [0, 1, 2]))
        assert walk.path == (0, 2, 1)
        assert walk.cut_nodes == (2,)
        assert walk.terminal == 1
        assert walk.reached_leaf
        assert walk.witness is None

    def test_exploration_needs_annotations(self, path3):
        with pytest.raises(ParameterError):
            flux_exploration(block_cut_tree(path3, (0, 0)), _plane(path3, [0, 1, 2]))

    def test_inequalities(self, annotated, path3):
        report = check_flux_inequalities(annotated, _plane(path3, [0, 1, 2]))
        assert report.holds
        assert (report.checked_blocks, report.checked_cuts) == (0, 1)

    def test_inequality_violation(self, path3):
        tree = cut_vertex_flux(block_cut_tree(path3, (0, 0)), _plane(path3, [0, 2, 1]))
        report = check_flux_inequalities(tree, _plane(path3, [0, 2, 1]))
        assert not report.holds

    def test_telescoping(self, annotated, path3):
        plane = _plane(path3, [0, 1, 2])
        walk = flux_exploration(annotated, plane)
        check = telescoping_bound(walk, annotated, plane, (0, 0))
        assert check.terminal_vertex == (2, 0)
        assert check.gain == 2.0
        assert check.flux_bound == 0.25
        assert check.holds

    def test_text(self, annotated):
        assert tree_to_text(annotated).splitlines() == [
            "block #0 (2 vertices, 1 edges)",
            "  cut (1, 0)  i_in=1",
            "    block #1 (2 vertices, 1 edges)  i_out=1",
        ]

    def test_graphml(self, annotated, tmp_path):
        out = write_tree_graphml(annotated, tmp_path / "tree" / "t.graphml")
        g = nx.read_graphml(out)
        assert g.number_of_nodes() == 3
        assert g.number_of_edges() == 2


# ── level-set exploration ─────────────────────────────────────────


class TestLevelSetExploration:

    def test_witness_at_a_leaf(self):
        graph = _path(5)
        plane = _plane(graph, [0, 1, 2, 3, 4])
        pot = Potential(PoleFunction({}), ScalarField(graph, [0, 0, 0, 1, 1]))
        result = explore_level_set(pot, plane, ((0, 0), (1, 0)))
        assert result.level == 0
        assert result.subgraph.n_vertices == 2
        assert result.witness == ((2, 0), (3, 0))
        assert result.exploration.reached_leaf
        assert result.inequalities.holds
        assert result.telescoping.holds

    def test_seed_is_witness(self):
        graph = _path(3)
        pot = Potential(PoleFunction({}), ScalarField(graph, [0, 1, 1]))
        result = explore_level_set(pot, _plane(graph, [0, 1, 2]), ((0, 0), (1, 0)))
        assert result.witness == ((0, 0), (1, 0))
        assert result.tree is None

    def test_symmetric_column_runs_into_the_faces(self, full_box):
        exact = SolveOptions(exact=True)
        pot = potential(full_box, PoleFunction.dipole((-1, 0), (1, 0)), exact)
        plane = corrected_plane(full_box, (0, 1), exact)
        result = explore_level_set(pot, plane, ((0, -1), (0, 0)))
        assert result.subgraph.n_vertices == 5
        assert len(result.tree.cut_vertices) == 3
        assert not result.exploration.reached_leaf
        assert result.witness is None
        assert result.inequalities.holds
        assert result.telescoping.holds

    def test_increasing_subgraph_checks_seed(self):
        graph = _path(3)
        pot = Potential(PoleFunction({}), ScalarField(graph, [0, 0, 0]))
        with pytest.raises(ParameterError):
            increasing_subgraph(pot, _plane(graph, [2, 1, 0]), ((0, 0), (1, 0)), 0)
        with pytest.raises(ParameterError):
            increasing_subgraph(pot, _plane(graph, [0, 1, 2]), ((0, 0), (1, 0)), 1)


# ── disjoint paths ────────────────────────────────────────────────


class TestDisjointPaths:

    def test_center_of_full_box(self, full_box):
        assert count_disjoint_paths(full_box, [(0, 0)]) == 4
        assert count_disjoint_paths(full_box, [(0, 0), (1, 0)]) == 6

    def test_path(self):
        assert count_disjoint_paths(_path(5), [(2, 0)], [(0, 0), (4, 0)]) == 2
        assert count_disjoint_paths(_path(5), [(1, 0)], [(4, 0)]) == 1

    def test_sets_checked(self, full_box):
        with pytest.raises(ParameterError):
            count_disjoint_paths(full_box, [], [(4, 4)])
        with pytest.raises(ParameterError):
            count_disjoint_paths(full_box, [(4, 4)], [(4, 4)])


# ── random-graph oracles ──────────────────────────────────────────


def _random_cluster(seed):
    return largest_cluster(sample_percolation(BoxRegion(d=2, radius=2), 0.7, seed))


class TestRandomOracles:

    @pytest.mark.parametrize("seed", range(100))
    def test_cut_vertices_match_vertex_removal(self, seed):
        graph = _random_cluster(seed)
        g = graph.nx_graph
        expected = set()
        for v in g.nodes:
            rest = g.subgraph(set(g.nodes) - {v})
            if rest.number_of_nodes() and nx.number_connected_components(rest) > 1:
                expected.add(graph.point(v))
        tree = block_cut_tree(graph, graph.point(0))
        assert set(tree.cut_vertices) == expected

    @pytest.mark.parametrize("seed", range(100))
    def test_disjoint_paths_match_node_connectivity(self, seed):
        graph = _random_cluster(seed)
        assert graph.n_vertices >= 2
        rng = np.random.default_rng(seed)
        order = rng.permutation(graph.n_vertices).tolist()
        k = int(rng.integers(1, max(2, graph.n_vertices // 3)))
        src, dst = set(order[:k]), set(order[k : 2 * k])
        contracted = nx.Graph()
        contracted.add_nodes_from(v for v in range(graph.n_vertices) if v not in src)
        contracted.add_node("S")
        for i, j in graph.edges.tolist():
            a = "S" if i in src else i
            b = "S" if j in src else j
            if a != b:
                contracted.add_edge(a, b)
        contracted.add_edges_from((t, "T") for t in dst)
        expected = nx.node_connectivity(contracted, "S", "T")
        found = count_disjoint_paths(
            graph, [graph.point(v) for v in src], [graph.point(v) for v in dst]
        )
        assert found == expected


# ── diamond peeling ───────────────────────────────────────────────


class TestDiamond:

    def test_layers(self):
        d = Diamond((0, 0), 2)
        assert d.layer(0) == [(0, 0)]
        assert len(d.layer(1)) == 4
        assert len(d.layer(2)) == 8
        assert d.contains((1, -1))
        assert not d.contains((2, 1))

    def test_negative_radius(self):
        with pytest.raises(ParameterError):
            Diamond((0, 0), -1)


class TestDiamondPeel:

    def test_integer_bump(self, full_box):
        u = ScalarField.from_mapping(full_box, {(0, 0): 1, (1, 0): -2}, "rational")
        verdict = diamond_peel(u)
        assert verdict.integer_valued
        assert verdict.diamond.contains((0, 0))
        assert verdict.diamond.contains((1, 0))

    def test_zero_field(self, full_box):
        verdict = diamond_peel(ScalarField.zeros(full_box, "rational"))
        assert verdict.integer_valued
        assert verdict.diamond is None

    def test_half_bump_fails_the_laplacian(self, full_box):
        u = ScalarField.from_mapping(full_box, {(0, 0): Fraction(1, 2)}, "rational")
        with pytest.raises(PreconditionError) as info:
            diamond_peel(u)
        assert info.value.witness == (-1, 0)

    def test_diagonal_halves(self, full_box):
        u = ScalarField.from_mapping(
            full_box, {(0, 0): Fraction(1, 2), (1, 1): Fraction(1, 2)}, "rational"
        )
        with pytest.raises(PreconditionError) as info:
            diamond_peel(u)
        assert info.value.witness == (-1, 0)

    def test_support_on_faces(self, full_box):
        with pytest.raises(ParameterError):
            diamond_peel(ScalarField.from_mapping(full_box, {(4, 0): 1}, "rational"))

    def test_planar_only(self):
        graph = ClusterGraph.from_edges([((0, 0, 0), (1, 0, 0))])
        with pytest.raises(ParameterError):
            diamond_peel(ScalarField.zeros(graph, "rational"))

    def test_missing_lattice_edge(self, full_box):
        graph = full_box.without_edges([((0, 0), (1, 0))])
        with pytest.raises(ParameterError, match="full lattice"):
            diamond_peel(ScalarField.zeros(graph, "rational"))

    def test_rebuilt_field_matches_input(self, full_box):
        mapping = {(0, 0): 3, (1, 0): -2, (0, 2): 1, (-1, -1): 5}
        verdict = diamond_peel(ScalarField.from_mapping(full_box, mapping, "rational"))
        assert verdict.integer_valued
        assert {pt: v for pt, v in verdict.values.items() if v} == mapping
        assert verdict.layers == verdict.diamond.k + 1


class TestPeelDiamond:

    @staticmethod
    def _bump_laplacian(pt, patch=None):
        lap = {(0, 0): -4, (1, 0): 1, (-1, 0): 1, (0, 1): 1, (0, -1): 1}
        lap.update(patch or {})
        return Fraction(lap.get(pt, 0))

    def test_point_bump(self):
        verdict = peel_diamond(Diamond((0, 0), 0), self._bump_laplacian)
        assert verdict.integer_valued
        assert verdict.values == {(0, 0): 1}

    def test_values_come_from_the_laplacian(self):
        verdict = peel_diamond(
            Diamond((0, 0), 1), lambda pt: self._bump_laplacian(pt, {(-2, 0): 7})
        )
        assert verdict.integer_valued
        assert verdict.values[(-1, 0)] == 7

    def test_half_forced_value_is_the_witness(self):
        verdict = peel_diamond(
            Diamond((0, 0), 1), lambda pt: self._bump_laplacian(pt, {(-2, 0): Fraction(1, 2)})
        )
        assert not verdict.integer_valued
        assert verdict.witness == (-1, 0)
        assert verdict.layers == 0
        assert (-1, 0) not in verdict.values
