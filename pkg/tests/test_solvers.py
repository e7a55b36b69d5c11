"""Tests for percolab.solvers - calculus, Dirichlet/Neumann solves, Green proxies, flux."""
# ruff: noqa: D101, D102

from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from percolab.errors import (
    CapacityError,
    CompatibilityError,
    ConvergenceError,
    IllPosedError,
    ParameterError,
)
from percolab.fields import ScalarField, SolveOptions
from percolab.percolation import BoxRegion, largest_cluster, sample_percolation
from percolab.solvers import (
    divergence,
    edge_boundary,
    fit_green_log_slope,
    flux_through_edge_cut,
    gradient,
    green_function,
    laplacian_apply,
    left_half_flux_decomposition,
    solve_dirichlet,
    solve_neumann,
)

from .conftest import block

EXACT = SolveOptions(exact=True)


# ── calculus ──────────────────────────────────────────────────────


class TestCalculus:

    def test_gradient_orientation(self):
        u = ScalarField(block(1, 3), [0, 5, 2])
        grad = gradient(u)
        assert grad((0, 0), (1, 0)) == 5.0
        assert grad((2, 0), (1, 0)) == 3.0

    def test_divergence_of_gradient_is_laplacian(self, perc_cluster):
        rng = np.random.default_rng(0)
        u = ScalarField(perc_cluster, rng.normal(size=perc_cluster.n_vertices))
        lhs = divergence(gradient(u)).values
        assert np.allclose(lhs, laplacian_apply(perc_cluster, u).values)

    def test_rational_laplacian(self):
        u = ScalarField(block(1, 3), [0, Fraction(1, 2), 3], "rational")
        assert laplacian_apply(u.graph, u).values.tolist() == [
            Fraction(1, 2),
            Fraction(2),
            Fraction(-5, 2),
        ]

    def test_linear_is_harmonic_on_full_box(self, full_box):
        u = ScalarField.linear(full_box, [2, -1], "rational")
        lap = laplacian_apply(full_box, u)
        assert all(lap.values[k] == 0 for k in np.flatnonzero(full_box.interior))

    def test_field_on_other_graph(self, full_box):
        with pytest.raises(ParameterError):
            laplacian_apply(full_box, ScalarField.zeros(block(2, 2)))


# ── Dirichlet ─────────────────────────────────────────────────────


class TestSolveDirichlet:

    def test_linear_boundary_data_is_reproduced(self, full_box):
        plane = ScalarField.linear(full_box, [1, 3], "rational")
        u = solve_dirichlet(full_box, boundary_values=plane, opts=EXACT)
        assert u.kind == "rational"
        assert u.values.tolist() == plane.values.tolist()

    def test_float_matches_exact(self, perc_cluster):
        plane = ScalarField.linear(perc_cluster, [1, 0], "rational")
        exact = solve_dirichlet(perc_cluster, boundary_values=plane, opts=EXACT)
        approx = solve_dirichlet(perc_cluster, boundary_values=plane.as_float())
        assert np.allclose(approx.values, exact.as_float().values, atol=1e-8)

    def test_rhs_on_path(self):
        graph = block(1, 5)
        u = solve_dirichlet(graph, [(0, 0), (4, 0)], {(4, 0): 4}, {(2, 0): 2}, EXACT)
        # harmonic part x plus a tent of height 2 at x = 2
        assert u.values.tolist() == [0, 2, 4, 4, 4]

    def test_residual(self, perc_cluster):
        u = solve_dirichlet(perc_cluster, rhs=_ones(perc_cluster))
        lap = laplacian_apply(perc_cluster, u).values
        interior = ~perc_cluster.boundary
        assert np.allclose(lap[interior], -1.0, atol=1e-7)

    def test_no_boundary_is_ill_posed(self):
        with pytest.raises(IllPosedError):
            solve_dirichlet(block(3, 3), rhs={(1, 1): 1})

    def test_exact_cap(self, full_box):
        with pytest.raises(CapacityError):
            solve_dirichlet(full_box, opts=SolveOptions(exact=True, exact_cap=10))

    def test_iteration_budget(self, full_box):
        opts = SolveOptions(max_iterations=1, tolerance=1e-14)
        with pytest.raises(ConvergenceError):
            solve_dirichlet(full_box, rhs={(0, 0): 1.0, (2, 1): -3.0}, opts=opts)

    def test_all_boundary_returns_data(self):
        graph = block(1, 2)
        u = solve_dirichlet(graph, [(0, 0), (1, 0)], {(0, 0): 7})
        assert u.values.tolist() == [7.0, 0.0]


def _ones(graph):
    return ScalarField(graph, np.ones(graph.n_vertices))


# ── Neumann ───────────────────────────────────────────────────────


class TestSolveNeumann:

    def test_path(self):
        graph = block(1, 3)
        v = solve_neumann(graph, ScalarField(graph, [1, 0, -1], "rational"))
        assert v.kind == "rational"
        assert v.values.tolist() == [1, 0, -1]

    def test_mean_zero_and_residual(self, perc_cluster):
        rng = np.random.default_rng(5)
        f = rng.normal(size=perc_cluster.n_vertices)
        f -= f.mean()
        v = solve_neumann(perc_cluster, ScalarField(perc_cluster, f))
        assert abs(v.values.mean()) < 1e-9
        assert np.allclose(laplacian_apply(perc_cluster, v).values, -f, atol=1e-7)

    def test_incompatible_rhs(self):
        graph = block(2, 2)
        with pytest.raises(CompatibilityError):
            solve_neumann(graph, ScalarField(graph, [1, 0, 0, 0], "rational"))
        with pytest.raises(CompatibilityError):
            solve_neumann(graph, ScalarField(graph, [1.0, 0, 0, 0]))


# ── Green proxy ───────────────────────────────────────────────────


class TestGreenFunction:

    def test_unit_source_and_normalisation(self, full_box):
        green = green_function(full_box, (0, 0), EXACT)
        assert green.at((0, 0)) == 0
        assert green.metadata["pole"] == (0, 0)
        assert green.metadata["shift"] > 0
        lap = laplacian_apply(full_box, green)
        pole = full_box.index((0, 0))
        for k in np.flatnonzero(full_box.interior):
            assert lap.values[k] == (-1 if k == pole else 0)

    def test_unnormalised_is_symmetric(self, full_box):
        gx = green_function(full_box, (1, 2), normalize=False)
        gy = green_function(full_box, (-2, 0), normalize=False)
        assert gx.at((-2, 0)) == pytest.approx(gy.at((1, 2)))
        assert gx.min() == pytest.approx(0.0)

    def test_pole_on_boundary(self, full_box):
        with pytest.raises(ParameterError):
            green_function(full_box, (4, 0))

    def test_log_slope_on_full_lattice(self):
        graph = largest_cluster(sample_percolation(BoxRegion(d=2, radius=24), 1.0, 0))
        fit = fit_green_log_slope(graph, (0, 0), [2, 3, 4, 5, 6])
        assert fit.radii == (2, 3, 4, 5, 6)
        assert 0.12 < fit.slope < 0.2

    def test_log_slope_needs_two_radii(self, full_box):
        with pytest.raises(ParameterError):
            fit_green_log_slope(full_box, (0, 0), [2, 50])


# ── flux ──────────────────────────────────────────────────────────


class TestFlux:

    def test_edge_boundary_orientation(self):
        graph = block(1, 3)
        inside = np.array([False, True, False])
        assert edge_boundary(graph, inside).tolist() == [[1, 0], [1, 2]]

    def test_flux_through_points(self):
        u = ScalarField(block(1, 3), [0, 1, 3])
        assert flux_through_edge_cut(u, [((0, 0), (1, 0)), ((2, 0), (1, 0))]) == -1.0

    def test_cut_must_be_edges(self):
        u = ScalarField.zeros(block(2, 2))
        with pytest.raises(ParameterError):
            flux_through_edge_cut(u, [((0, 0), (1, 1))])

    def test_left_half_of_a_plane(self, full_box):
        u = ScalarField.linear(full_box, [1, 0], "rational")
        parts = left_half_flux_decomposition(u)
        assert parts.left == -7
        assert parts.center == 7
        assert parts.sides == 0
        assert parts.total == 0

    def test_left_half_needs_box(self):
        with pytest.raises(ParameterError):
            left_half_flux_decomposition(ScalarField.zeros(block(2, 2)))
