"""Tests for percolab.percolation - samples, clusters and diagnostics."""
# ruff: noqa: D101, D102

from __future__ import annotations

import numpy as np
import pytest

from percolab.config import WellConnectedSettings
from percolab.errors import EmptyClusterError, ParameterError, TopologyError
from percolab.percolation import (
    BoxRegion,
    ClusterGraph,
    canonical_edge,
    cluster_density,
    crossing_directions,
    derive_seed,
    dump_sample,
    graph_distance,
    is_crossing,
    largest_cluster,
    load_sample,
    modify_edges,
    sample_percolation,
    well_connected_report,
)

# ── regions ───────────────────────────────────────────────────────


class TestBoxRegion:

    def test_default_center_is_origin(self):
        assert BoxRegion(d=3, radius=2).center == (0, 0, 0)

    def test_counts(self):
        box = BoxRegion(d=2, radius=3)
        assert box.side == 7
        assert box.vertex_count == 49
        assert box.points().shape == (49, 2)

    def test_points_are_lexicographic(self):
        pts = BoxRegion(d=2, radius=1).points().tolist()
        assert pts == sorted(pts)
        assert pts[0] == [-1, -1]

    def test_faces(self):
        box = BoxRegion(d=2, radius=2, center=(5, 5))
        assert box.on_faces([(3, 5), (5, 5), (7, 7)]).tolist() == [True, False, True]

    def test_index_of_matches_points(self):
        box = BoxRegion(d=3, radius=1)
        assert box.index_of(box.points()).tolist() == list(range(27))

    def test_center_dimension_checked(self):
        with pytest.raises(ValueError):
            BoxRegion(d=2, radius=2, center=(0, 0, 0))

    def test_contains_region(self):
        outer = BoxRegion(d=2, radius=4)
        assert outer.contains_region(BoxRegion(d=2, radius=2, center=(2, -2)))
        assert not outer.contains_region(BoxRegion(d=2, radius=2, center=(3, 0)))


class TestCanonicalEdge:

    def test_sorted(self):
        assert canonical_edge((1, 0), (0, 0)) == ((0, 0), (1, 0))

    def test_not_neighbors(self):
        with pytest.raises(ParameterError):
            canonical_edge((0, 0), (1, 1))


# ── samples ───────────────────────────────────────────────────────


class TestSampling:

    def test_p_one_opens_everything(self, full_sample):
        assert full_sample.open_edge_count == full_sample.edge_count == 2 * 9 * 8

    def test_invalid_p(self):
        with pytest.raises(ParameterError):
            sample_percolation(BoxRegion(d=2, radius=2), 0.0, 1)

    def test_invalid_seed(self):
        with pytest.raises(ParameterError):
            sample_percolation(BoxRegion(d=2, radius=2), 0.5, -1)

    def test_reproducible(self):
        box = BoxRegion(d=2, radius=6)
        a = sample_percolation(box, 0.6, 42)
        b = sample_percolation(box, 0.6, 42)
        assert np.array_equal(a.edge_states, b.edge_states)

    def test_states_do_not_depend_on_box(self):
        small = sample_percolation(BoxRegion(d=2, radius=3), 0.5, 9)
        large = sample_percolation(BoxRegion(d=2, radius=8), 0.5, 9)
        for edge in [((0, 0), (1, 0)), ((-2, 1), (-2, 2)), ((2, 3), (3, 3))]:
            assert small.is_open(edge) == large.is_open(edge)

    def test_open_degree_counts_edges_leaving_the_box(self, full_sample):
        assert full_sample.open_degree([(4, 4), (0, 0)]).tolist() == [4, 4]

    def test_restrict_keeps_states(self, perc_sample):
        sub = BoxRegion(d=2, radius=3, center=(2, 2))
        local = perc_sample.restrict(sub)
        assert local.is_open(((2, 2), (3, 2))) == perc_sample.is_open(((2, 2), (3, 2)))


class TestDeriveSeed:

    def test_deterministic_and_distinct(self):
        seeds = [derive_seed(7, i) for i in range(50)]
        assert seeds == [derive_seed(7, i) for i in range(50)]
        assert len(set(seeds)) == 50
        assert all(0 <= s < 2**64 for s in seeds)

    def test_depends_on_parent(self):
        assert derive_seed(1, 0) != derive_seed(2, 0)


class TestModifyEdges:

    def test_close_and_reopen(self, full_sample):
        edge = ((0, 0), (1, 0))
        closed = modify_edges(full_sample, [(edge, False)])
        assert not closed.is_open(edge)
        assert full_sample.is_open(edge)
        reopened = modify_edges(closed, [(edge, True)])
        assert reopened.is_open(edge)

    def test_noop_edits_dropped(self, full_sample):
        assert modify_edges(full_sample, [(((0, 0), (0, 1)), True)]) is full_sample

    def test_only_effective_edits_are_recorded(self, full_sample):
        edits = [
            (((0, 0), (0, 1)), True),
            (((1, 0), (0, 0)), False),
            (((0, 0), (1, 0)), False),
        ]
        sample = modify_edges(full_sample, edits)
        assert sample.overrides == ((((0, 0), (1, 0)), False),)
        assert load_sample(dump_sample(sample)).overrides == sample.overrides

    def test_idempotent(self, full_sample):
        edits = [(((0, 0), (1, 0)), False)]
        once = modify_edges(full_sample, edits)
        assert modify_edges(once, edits) == once

    def test_edge_outside_region(self, full_sample):
        with pytest.raises(ParameterError):
            modify_edges(full_sample, [(((4, 0), (5, 0)), False)])


# ── clusters ──────────────────────────────────────────────────────


class TestLargestCluster:

    def test_full_box(self, full_box):
        assert full_box.n_vertices == 81
        assert full_box.n_edges == 144
        assert int(full_box.boundary.sum()) == 32
        assert full_box.is_connected

    def test_percolation_cluster_is_connected(self, perc_cluster):
        assert perc_cluster.is_connected
        assert perc_cluster.n_vertices > 0.5 * 21**2

    def test_vertices_sorted(self, perc_cluster):
        pts = perc_cluster.points.tolist()
        assert pts == sorted(pts)

    def test_empty(self):
        sample = sample_percolation(BoxRegion(d=2, radius=1), 1e-12, 3)
        with pytest.raises(EmptyClusterError):
            largest_cluster(sample)
        assert cluster_density(sample) == 0.0

    def test_density(self, full_sample):
        assert cluster_density(full_sample) == 1.0

    def test_cutting_the_box_in_half(self):
        box = BoxRegion(d=2, radius=2)
        sample = sample_percolation(box, 1.0, 0)
        cut = [(((0, y), (1, y)), False) for y in range(-2, 3)]
        graph = largest_cluster(modify_edges(sample, cut))
        assert graph.n_vertices == 15
        assert graph.contains((-2, -2))


class TestClusterGraph:

    def test_lookups(self, full_box):
        i = full_box.index((1, 2))
        assert full_box.point(i) == (1, 2)
        assert full_box.contains((4, 4))
        assert not full_box.contains((5, 0))
        assert full_box.has_edge((0, 0), (0, 1))
        assert not full_box.has_edge((0, 0), (1, 1))

    def test_index_of_missing_vertex(self, full_box):
        with pytest.raises(ParameterError):
            full_box.index((9, 9))

    def test_degrees_and_laplacian(self, full_box):
        assert full_box.degree[full_box.index((0, 0))] == 4
        assert full_box.degree[full_box.index((4, 4))] == 2
        ones = np.ones(full_box.n_vertices)
        assert np.allclose(full_box.laplacian @ ones, 0)

    def test_indices_vectorized(self, full_box):
        assert full_box.indices([(0, 0), (9, 9)]).tolist() == [full_box.index((0, 0)), -1]

    def test_edge_id_orientation(self, full_box):
        i, j = full_box.index((0, 0)), full_box.index((1, 0))
        k, sign = full_box.edge_id(i, j)
        assert sign == 1
        assert full_box.edge_id(j, i) == (k, -1)

    def test_without_edges_disconnecting(self):
        graph = ClusterGraph.from_edges([((0, 0), (1, 0)), ((1, 0), (2, 0))])
        with pytest.raises(TopologyError):
            graph.without_edges([((0, 0), (1, 0))])

    def test_from_edges_disconnected(self):
        with pytest.raises(TopologyError):
            ClusterGraph.from_edges([((0, 0), (1, 0)), ((3, 0), (4, 0))])

    def test_from_edges_boundary(self):
        graph = ClusterGraph.from_edges([((0, 0), (1, 0))], boundary=[(1, 0)])
        assert graph.boundary.tolist() == [False, True]

    def test_face_tags(self, full_box):
        tags = full_box.face_tags
        assert tags[full_box.index((-4, 0))] == "left"
        assert tags[full_box.index((0, 4))] == "center"
        assert tags[full_box.index((-2, 4))] == "sides"
        assert tags[full_box.index((2, 4))] == ""

    def test_arrays_read_only(self, full_box):
        with pytest.raises(ValueError):
            full_box.points[0, 0] = 5

    def test_graph_distance(self, full_box):
        assert graph_distance(full_box, (0, 0), (2, 3)) == 5


# ── diagnostics ───────────────────────────────────────────────────


class TestCrossing:

    def test_full_box_crosses(self, full_sample):
        sub = BoxRegion(d=2, radius=2)
        assert crossing_directions(full_sample, sub) == (True, True)
        assert is_crossing(full_sample, sub)

    def test_cut_column_blocks_horizontal_crossing(self, full_sample):
        cut = [(((0, y), (1, y)), False) for y in range(-4, 5)]
        sample = modify_edges(full_sample, cut)
        sub = BoxRegion(d=2, radius=4)
        assert crossing_directions(sample, sub) == (False, True)


class TestWellConnected:

    def test_full_lattice_is_well_connected(self):
        sample = sample_percolation(BoxRegion(d=2, radius=40), 1.0, 0)
        report = well_connected_report(sample, sample.region)
        assert report.is_well_connected
        assert report.scales == (3,)
        assert report.checked == 2 * 25**2

    def test_empty_scale_range(self, full_sample):
        settings = WellConnectedSettings(upper_fraction=0.1)
        with pytest.raises(ParameterError):
            well_connected_report(full_sample, full_sample.region, settings)


# ── serialization ─────────────────────────────────────────────────


class TestSerialization:

    def test_dump_and_load(self, full_sample):
        sample = modify_edges(full_sample, [(((0, 0), (1, 0)), False)])
        restored = load_sample(dump_sample(sample))
        assert restored == sample
        assert np.array_equal(restored.edge_states, sample.edge_states)

    def test_wrong_format(self):
        with pytest.raises(ParameterError):
            load_sample("format: other\n")
