"""Tests for percolab.harmonic - corrected planes, flux, sensitivity and embeddings."""
# ruff: noqa: D101, D102

from __future__ import annotations

import numpy as np
import pytest

from percolab.errors import ParameterError, TopologyError
from percolab.fields import ScalarField, SolveOptions
from percolab.harmonic import (
    altered_environment,
    corrected_plane,
    corrector,
    corrector_stats,
    edge_flip_sensitivity,
    embedding_displacement,
    harmonic_embedding,
    homogenized_flux,
    lipschitz_constant,
    mixed_green_difference,
    oscillation,
    write_embedding_svg,
)
from percolab.percolation import BoxRegion, ClusterGraph

from .conftest import block

EXACT = SolveOptions(exact=True)


# ── corrected planes ──────────────────────────────────────────────


class TestCorrectedPlane:

    def test_full_lattice_plane_is_linear(self, full_box):
        plane = corrected_plane(full_box, (1, 2), EXACT)
        assert plane.box_radius == 4
        assert plane.at((3, -2)) == -1
        assert all(v == 0 for v in corrector(plane).values)
        assert plane.field.metadata["slope"] == (1, 2)

    def test_percolation_plane_interpolates_boundary(self, perc_cluster):
        plane = corrected_plane(perc_cluster, (1, 0))
        boundary = np.flatnonzero(perc_cluster.boundary)
        assert np.allclose(plane.field.values[boundary], perc_cluster.points[boundary, 0])
        chi = corrector(plane)
        assert np.allclose(chi.values[boundary], 0.0)

    @pytest.mark.parametrize("slope", [(0, 0), (1, 0, 0)])
    def test_bad_slope(self, full_box, slope):
        with pytest.raises(ParameterError):
            corrected_plane(full_box, slope)

    def test_oscillation_and_lipschitz(self, full_box):
        u = ScalarField.linear(full_box, (1, 0), "rational")
        assert oscillation(u, BoxRegion(d=2, radius=1)) == 2
        assert oscillation(u, [(0, 0), (3, 3)]) == 3
        assert lipschitz_constant(u) == 1

    def test_oscillation_off_graph(self, full_box):
        with pytest.raises(ParameterError):
            oscillation(ScalarField.zeros(full_box), BoxRegion(d=2, radius=1, center=(20, 20)))


class TestCorrectorStats:

    def test_full_lattice(self, full_box):
        stats = corrector_stats(corrected_plane(full_box, (1, 0)), [1, 2])
        assert stats.radii == (1, 2)
        assert stats.oscillation == pytest.approx((0.0, 0.0), abs=1e-6)
        assert stats.max_gradient == pytest.approx((1.0, 1.0))

    def test_frame(self, full_box, tmp_path):
        stats = corrector_stats(corrected_plane(full_box, (1, 0)), [1])
        assert list(stats.to_frame().columns) == ["radius", "osc", "maxgrad"]
        assert stats.to_csv(tmp_path / "s.csv").exists()

    @pytest.mark.parametrize("radii", [[2, 1], [], [3], [0, 1]])
    def test_radii_checked(self, full_box, radii):
        with pytest.raises(ParameterError):
            corrector_stats(corrected_plane(full_box, (1, 0)), radii)

    def test_needs_box(self):
        path = ClusterGraph.from_edges(
            [((0, 0), (1, 0)), ((1, 0), (2, 0))], boundary=[(0, 0), (2, 0)]
        )
        with pytest.raises(ParameterError):
            corrector_stats(corrected_plane(path, (1, 0)), [1])


# ── flux ──────────────────────────────────────────────────────────


class TestHomogenizedFlux:

    def test_full_lattice(self, full_box):
        est = homogenized_flux(corrected_plane(full_box, (1, 0)))
        assert est.replicates == 1
        assert est.per_edge_mean == pytest.approx(1.0)
        assert est.mean == pytest.approx(9 / 4)
        assert est.standard_error == 0.0
        assert est.transverse_mean == pytest.approx(0.0, abs=1e-6)

    def test_replicates(self, full_box):
        plane = corrected_plane(full_box, (1, 0))
        est = homogenized_flux([plane, plane])
        assert est.replicates == 2
        assert est.standard_error == pytest.approx(0.0, abs=1e-12)

    def test_wrong_slope(self, full_box):
        with pytest.raises(ParameterError):
            homogenized_flux(corrected_plane(full_box, (0, 1)))

    def test_empty(self):
        with pytest.raises(ParameterError):
            homogenized_flux([])


# ── sensitivity ───────────────────────────────────────────────────


class TestMixedGreenDifference:

    def test_symmetric(self, full_box):
        e, f = ((0, 0), (1, 0)), ((0, 1), (0, 2))
        assert mixed_green_difference(full_box, e, f, EXACT) == mixed_green_difference(
            full_box, f, e, EXACT
        )

    def test_near_faces(self, full_box):
        with pytest.raises(ParameterError):
            mixed_green_difference(full_box, ((0, 0), (1, 0)), ((3, 0), (4, 0)))
        mixed_green_difference(
            full_box, ((0, 0), (1, 0)), ((3, 0), (4, 0)), check_proximity=False
        )

    def test_not_an_edge(self, full_box):
        with pytest.raises(ParameterError):
            mixed_green_difference(full_box, ((0, 0), (1, 1)), ((0, 1), (0, 2)))


class TestEdgeFlipSensitivity:

    def test_identity_is_exact(self, full_box):
        report = edge_flip_sensitivity(full_box, [((0, 0), (1, 0))], (1, 0), EXACT)
        assert report.max_abs_discrepancy == 0.0
        assert report.left.support.any()

    def test_identity_in_float(self, perc_cluster):
        env = altered_environment(perc_cluster)
        assert env.removed
        report = edge_flip_sensitivity(perc_cluster, env.removed[:2], (1, 0))
        assert report.max_abs_discrepancy < 1e-7

    def test_nothing_removed(self, full_box):
        report = edge_flip_sensitivity(full_box, [], (1, 0))
        assert report.max_abs_discrepancy == 0.0
        assert not report.left.support.any()

    def test_disconnecting(self, full_box):
        corner = [((3, 4), (4, 4)), ((4, 3), (4, 4))]
        with pytest.raises(TopologyError):
            edge_flip_sensitivity(full_box, corner, (1, 0))


class TestAlteredEnvironment:

    def test_full_box_center_column(self, full_box):
        env = altered_environment(full_box)
        assert len(env.removed) == 7
        assert env.retained == ()
        assert env.graph.n_edges == full_box.n_edges - 7
        assert env.graph.is_connected

    def test_keep(self, full_box):
        env = altered_environment(full_box, keep=[((1, 0), (0, 0))])
        assert env.retained == (((0, 0), (1, 0)),)
        assert len(env.removed) == 6

    def test_needs_box(self):
        with pytest.raises(ParameterError):
            altered_environment(block(3, 3))


# ── embedding ─────────────────────────────────────────────────────


class TestHarmonicEmbedding:

    def test_full_lattice_is_identity(self, full_box):
        emb = harmonic_embedding(full_box)
        assert np.allclose(emb.coords, full_box.points, atol=1e-6)
        assert emb.segments().shape == (full_box.n_edges, 2, 2)
        assert np.allclose(embedding_displacement(emb, emb), 0.0, atol=1e-12)

    def test_displacement_needs_same_vertices(self, full_box, perc_cluster):
        with pytest.raises(ParameterError):
            embedding_displacement(harmonic_embedding(full_box), harmonic_embedding(perc_cluster))

    def test_svg_is_deterministic(self, full_box, tmp_path):
        base = harmonic_embedding(full_box)
        flipped = harmonic_embedding(altered_environment(full_box).graph)
        first = write_embedding_svg(base, tmp_path / "a.svg", flipped).read_bytes()
        second = write_embedding_svg(base, tmp_path / "b.svg", flipped).read_bytes()
        assert first == second
        assert b'id="base"' in first
        assert b'id="flipped"' in first
