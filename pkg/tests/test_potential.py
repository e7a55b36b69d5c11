"""Tests for percolab.potential - pole functions, potentials and their asymptotics."""
# ruff: noqa: D101, D102

from __future__ import annotations

from fractions import Fraction

import numpy as np
import pandas as pd
import pytest

from percolab.errors import CompatibilityError, ParameterError
from percolab.fields import SolveOptions
from percolab.harmonic import corrected_plane
from percolab.percolation import BoxRegion, largest_cluster, sample_percolation
from percolab.potential import (
    PoleFunction,
    calibrate_kappa,
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
from percolab.solvers import divergence, laplacian_apply

from .conftest import block

EXACT = SolveOptions(exact=True)


@pytest.fixture(scope="module")
def wide_box():
    """The full ``[-24, 24]^2`` box."""
    return largest_cluster(sample_percolation(BoxRegion(d=2, radius=24), 1.0, seed=0))


@pytest.fixture
def symmetric_dipole(full_box):
    """Exact potential of ``δ_(-1,0) - δ_(1,0)``, odd under ``x_1 -> -x_1``."""
    return potential(full_box, PoleFunction.dipole((-1, 0), (1, 0)), EXACT)


# ── pole functions ────────────────────────────────────────────────


class TestPoleFunction:

    def test_zeros_dropped_and_sorted(self):
        f = PoleFunction({(2, 0): 1, (0, 0): -3, (1, 1): 0})
        assert f.points == [(0, 0), (2, 0)]
        assert f.total == -2

    def test_integer_weights(self):
        assert PoleFunction({(0, 0): Fraction(4, 2)}).support == {(0, 0): 2}
        with pytest.raises(ParameterError):
            PoleFunction({(0, 0): 0.5})

    def test_constructors(self):
        assert PoleFunction.delta((1, 2), 3).support == {(1, 2): 3}
        assert PoleFunction.dipole((0, 0), (1, 0)).total == 0

    def test_box_fit(self):
        fit = PoleFunction({(0, 0): 1, (3, 1): 1}).box_fit
        assert fit.center == (1, 0)
        assert fit.radius == 2
        assert PoleFunction({}).box_fit is None

    def test_restriction_to_graph(self, full_box):
        f = PoleFunction({(0, 0): 1, (20, 20): 5})
        assert f.on_graph(full_box) == {(0, 0): 1}
        assert f.cluster_total(full_box) == 1


# ── potentials ────────────────────────────────────────────────────


class TestPotential:

    def test_laplacian_is_minus_f(self, full_box):
        pot = potential(full_box, PoleFunction.delta((0, 0), 2), EXACT)
        lap = laplacian_apply(full_box, pot.field)
        pole = full_box.index((0, 0))
        for k in np.flatnonzero(full_box.interior):
            assert lap.values[k] == (-2 if k == pole else 0)
        assert not pot.mean_zero_on_cluster
        assert pot.green_config["proxy"] == "zero-boundary"

    def test_boundary_pole_is_dropped_with_warning(self, full_box):
        pot = potential(full_box, PoleFunction({(0, 0): 1, (4, 0): 1}))
        assert pot.green_config["poles_on_graph"] == 2
        assert any("inner boundary" in w for w in pot.field.metadata["proxy_warnings"])

    def test_poles_off_graph(self, full_box):
        pot = potential(full_box, PoleFunction.delta((20, 20)))
        assert pot.green_config["poles_on_graph"] == 0
        assert not pot.field.values.any()

    def test_dipole_is_mean_zero(self, symmetric_dipole):
        assert symmetric_dipole.mean_zero_on_cluster


class TestRepresentations:

    def test_divergence_representation(self, full_box):
        f = PoleFunction.dipole((0, 0), (2, 1))
        flow = divergence_representation(full_box, f, EXACT)
        assert divergence(flow).values.tolist() == f.as_field(full_box, "rational").values.tolist()
        ends = full_box.points[full_box.edges[flow.support]].reshape(-1, 2)
        assert np.abs(ends - np.array([1, 0])).max() <= 1

    def test_divergence_needs_mean_zero(self, full_box):
        with pytest.raises(CompatibilityError):
            divergence_representation(full_box, PoleFunction.delta((0, 0)))

    def test_empty_support(self, full_box):
        flow = divergence_representation(full_box, PoleFunction({}))
        assert not flow.support.any()

    def test_gradient_representation_rebuilds_potential(self, full_box):
        f = PoleFunction.dipole((0, 0), (1, 1))
        flow = divergence_representation(full_box, f, EXACT)
        rebuilt = gradient_representation(full_box, flow, EXACT)
        assert rebuilt.values.tolist() == potential(full_box, f, EXACT).field.values.tolist()

    def test_gradient_representation_other_graph(self, full_box):
        flow = divergence_representation(block(2, 2), PoleFunction({}))
        with pytest.raises(ParameterError):
            gradient_representation(full_box, flow)


# ── asymptotics ──────────────────────────────────────────────────


class TestAsymptotics:

    def test_kappa_on_full_lattice(self, wide_box):
        assert 0.8 < calibrate_kappa(wide_box, (0, 0)) < 1.25

    def test_two_scale_dipole(self, wide_box):
        pot = potential(wide_box, PoleFunction.dipole((1, 0), (0, 0)))
        report = two_scale_check(pot, None, (1, 0), [3, 4, 5, 6])
        assert report.coefficients == pytest.approx((1.0, 0.0), abs=1e-6)
        assert len(report.table) == 4 * 5
        assert report.sign_agreement() == 1.0
        assert isinstance(report.median_scaled_error(), pd.Series)

    def test_two_scale_radius_checked(self, wide_box):
        pot = potential(wide_box, PoleFunction.dipole((1, 0), (0, 0)))
        with pytest.raises(ParameterError):
            two_scale_check(pot, None, (1, 0), [7], kappa=1.0)
        with pytest.raises(ParameterError):
            two_scale_check(pot, None, (0, 0), [3], kappa=1.0)

    def test_log_growth(self, wide_box):
        pot = potential(wide_box, PoleFunction.delta((0, 0)))
        growth = log_growth_check(pot, [2, 3, 4, 5, 6])
        assert growth.expected_slope == pytest.approx(-1 / (2 * np.pi))
        assert abs(growth.slope - growth.expected_slope) < 0.03

    def test_log_growth_needs_charge(self, symmetric_dipole):
        with pytest.raises(ParameterError):
            log_growth_check(symmetric_dipole, [1, 2])


# ── level sets and sensitive edges ────────────────────────────────


class TestLevelSet:

    def test_zero_level_of_odd_potential(self, symmetric_dipole, full_box):
        mask = level_set(symmetric_dipole, 0)
        # the faces plus the interior of the symmetry column
        assert int(mask.sum()) == 32 + 7
        assert mask[full_box.index((0, 3))]
        assert not mask[full_box.index((1, 0))]

    def test_negative_tolerance(self, symmetric_dipole):
        with pytest.raises(ParameterError):
            level_set(symmetric_dipole, 0, tol=-1)

    def test_write_points(self, symmetric_dipole, full_box, tmp_path):
        out = write_points_csv(full_box, level_set(symmetric_dipole, 0), tmp_path / "l" / "a.csv")
        assert len(pd.read_csv(out)) == 39


class TestSensitiveEdges:

    def test_horizontal_plane(self, symmetric_dipole, full_box):
        plane = corrected_plane(full_box, (1, 0), EXACT)
        sens = sensitive_edges(symmetric_dipole, plane)
        steps = full_box.points[sens.edges[:, 1]] - full_box.points[sens.edges[:, 0]]
        assert (steps == [1, 0]).all()
        assert sorted(sens.densities) == [0, 1, 2]
        assert sens.densities[0] == pytest.approx(6 / 9)
        assert list(sens.to_frame().columns) == ["x1", "x2", "y1", "y2"]
        assert len(sens.points()) == len(sens.edges)

    def test_other_graph(self, symmetric_dipole, perc_cluster):
        with pytest.raises(ParameterError):
            sensitive_edges(symmetric_dipole, corrected_plane(perc_cluster, (1, 0)))


class TestFlipPairing:

    def test_identity_is_exact(self, symmetric_dipole):
        pairing = flip_edge_pairing(symmetric_dipole, ((1, 0), (0, 0)), (1, 0))
        assert pairing.edge == ((0, 0), (1, 0))
        assert pairing.right != 0
        assert pairing.discrepancy == 0.0

    def test_not_an_edge(self, symmetric_dipole):
        with pytest.raises(ParameterError):
            flip_edge_pairing(symmetric_dipole, ((0, 0), (2, 0)), (1, 0))
