"""Tests for percolab.fields - vertex and edge fields and solver options."""
# ruff: noqa: D101, D102

from __future__ import annotations

from fractions import Fraction

import pytest

from percolab.errors import ParameterError
from percolab.fields import EdgeField, ScalarField, SolveOptions, format_value

from .conftest import block


class TestSolveOptions:

    def test_defaults(self):
        opts = SolveOptions()
        assert opts.tolerance == 1e-10
        assert opts.kind == "float64"
        assert SolveOptions(exact=True).kind == "rational"

    def test_tolerance_must_be_positive(self):
        with pytest.raises(ValueError):
            SolveOptions(tolerance=0)

    def test_unknown_field(self):
        with pytest.raises(ValueError):
            SolveOptions(precision=3)

    def test_frozen(self):
        opts = SolveOptions()
        with pytest.raises(ValueError):
            opts.exact = True
        assert opts.model_copy(update={"exact": True}).exact


class TestFormatValue:

    def test_rational(self):
        assert format_value(Fraction(-3, 4)) == "-3/4"
        assert format_value(Fraction(2)) == "2/1"

    def test_float(self):
        assert format_value(0.5) == "0.5"


# ── scalar fields ─────────────────────────────────────────────────


class TestScalarField:

    def test_length_checked(self):
        with pytest.raises(ParameterError):
            ScalarField(block(2, 2), [0, 1, 2])

    def test_rational_values_are_fractions(self):
        u = ScalarField(block(1, 2), [1, Fraction(1, 2)], "rational")
        assert all(isinstance(v, Fraction) for v in u.values)

    def test_values_read_only(self):
        u = ScalarField.zeros(block(2, 2))
        with pytest.raises(ValueError):
            u.values[0] = 1.0

    def test_linear_exact(self, full_box):
        u = ScalarField.linear(full_box, [Fraction(1, 3), 2], "rational")
        assert u.at((3, -1)) == Fraction(1) - 2
        assert u.max() == Fraction(4, 3) + 8

    def test_linear_wrong_dimension(self, full_box):
        with pytest.raises(ParameterError):
            ScalarField.linear(full_box, [1, 2, 3])

    def test_from_mapping_ignores_missing_points(self):
        graph = block(1, 3)
        u = ScalarField.from_mapping(graph, {(1, 0): 5, (9, 9): 7}, default=-1)
        assert u.values.tolist() == [-1.0, 5.0, -1.0]

    def test_arithmetic(self):
        graph = block(1, 3)
        u = ScalarField(graph, [1, 2, 3], "rational")
        v = ScalarField(graph, [Fraction(1, 2)] * 3, "rational")
        assert (u - v).values.tolist() == [Fraction(1, 2), Fraction(3, 2), Fraction(5, 2)]
        assert (2 * u + -u).values.tolist() == [1, 2, 3]

    def test_cannot_mix_kinds(self):
        graph = block(1, 2)
        with pytest.raises(ParameterError):
            ScalarField(graph, [1, 2]) + ScalarField(graph, [1, 2], "rational")

    def test_float_cannot_scale_rational(self):
        u = ScalarField(block(1, 2), [1, 2], "rational")
        with pytest.raises(ParameterError):
            u * 0.5
        assert (u * Fraction(1, 2)).values.tolist() == [Fraction(1, 2), 1]

    def test_as_float_and_metadata(self):
        u = ScalarField(block(1, 2), [Fraction(1, 4), 1], "rational").with_metadata(tag="a")
        f = u.as_float()
        assert f.kind == "float64"
        assert f.values.tolist() == [0.25, 1.0]
        assert f.metadata == {"tag": "a"}

    def test_to_frame(self):
        u = ScalarField(block(1, 2), [Fraction(1, 2), 0], "rational")
        frame = u.to_frame()
        assert list(frame.columns) == ["x1", "x2", "value"]
        assert frame["value"].tolist() == ["1/2", "0/1"]

    def test_to_csv(self, tmp_path):
        out = ScalarField.zeros(block(2, 2)).to_csv(tmp_path / "u.csv")
        assert out.read_text().splitlines()[0] == "x1,x2,value"


# ── edge fields ───────────────────────────────────────────────────


class TestEdgeField:

    def test_antisymmetric(self):
        graph = block(1, 3)
        flow = EdgeField.from_mapping(graph, {((1, 0), (0, 0)): 2.0})
        assert flow((1, 0), (0, 0)) == 2.0
        assert flow((0, 0), (1, 0)) == -2.0
        assert flow((1, 0), (2, 0)) == 0.0

    def test_not_an_edge(self):
        with pytest.raises(ParameterError):
            EdgeField.from_mapping(block(2, 2), {((0, 0), (1, 1)): 1.0})

    def test_support_and_norm(self):
        graph = block(1, 3)
        flow = EdgeField.from_mapping(graph, {((0, 0), (1, 0)): 3.0, ((1, 0), (2, 0)): 4.0})
        assert flow.support.tolist() == [True, True]
        assert flow.l2_norm() == pytest.approx(5.0)

    def test_arithmetic(self):
        graph = block(1, 2)
        a = EdgeField(graph, [1], "rational")
        assert (a - 3 * a).values.tolist() == [-2]
        with pytest.raises(ParameterError):
            a + ScalarField(graph, [0, 0], "rational")

    def test_to_frame(self):
        frame = EdgeField.zeros(block(1, 2)).to_frame()
        assert list(frame.columns) == ["x1", "x2", "y1", "y2", "value"]
        assert frame.iloc[0][["x1", "y1"]].tolist() == [0, 1]
