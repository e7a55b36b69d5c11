"""Tests for percolab.cli - catalogue and run commands."""
# ruff: noqa: D101, D102

from __future__ import annotations

import json

import pytest
from click.testing import CliRunner

from percolab.cli import _parse_params, main
from percolab.errors import ParameterError


@pytest.fixture
def runner():
    return CliRunner()


class TestParseParams:

    def test_yaml_scalars(self):
        assert _parse_params(("n-max=4", "radii=[8, 16]", "p=0.5", "exact=true")) == {
            "n_max": 4,
            "radii": [8, 16],
            "p": 0.5,
            "exact": True,
        }

    @pytest.mark.parametrize("item", ["n_max", "=3"])
    def test_malformed(self, item):
        with pytest.raises(ParameterError):
            _parse_params((item,))


class TestCatalogue:

    def test_list(self, runner):
        result = runner.invoke(main, ["list"])
        assert result.exit_code == 0
        assert result.output.splitlines()[0].startswith("gadget-table")

    def test_list_json(self, runner):
        result = runner.invoke(main, ["list", "--json"])
        names = [item["name"] for item in json.loads(result.output)]
        assert names[0] == "gadget-table"
        assert "spectrum-table" in names

    def test_show(self, runner):
        result = runner.invoke(main, ["show", "gadget-table"])
        assert result.exit_code == 0
        assert "n_max: 12" in result.output

    def test_show_unknown(self, runner):
        result = runner.invoke(main, ["show", "nope"])
        assert result.exit_code != 0
        assert "unknown experiment" in result.output


class TestRun:

    def test_run(self, runner, tmp_path):
        result = runner.invoke(
            main,
            [
                "run", "gadget-table", "--output-dir", str(tmp_path),
                "-p", "n_max=3", "-p", "convergence_n=10", "--seed", "2",
            ],
        )  # fmt: skip
        assert result.exit_code == 0, result.output
        assert "PASS  resistance_exact" in result.output
        assert (tmp_path / "gadget-table" / "manifest.json").exists()

    def test_experiment_subcommand(self, runner, tmp_path):
        result = runner.invoke(
            main, ["gadget-table", "--output-dir", str(tmp_path), "-p", "n_max=2"]
        )
        assert result.exit_code == 0, result.output

    def test_unknown_experiment_aborts(self, runner, tmp_path):
        result = runner.invoke(main, ["run", "nope", "--output-dir", str(tmp_path)])
        assert result.exit_code == 1
        assert "unknown experiment" in result.output

    def test_bad_param_aborts(self, runner, tmp_path):
        result = runner.invoke(
            main, ["run", "gadget-table", "--output-dir", str(tmp_path), "-p", "n_max=zero"]
        )
        assert result.exit_code == 1
        assert "invalid parameters" in result.output
        assert not (tmp_path / "gadget-table").exists()

    def test_summarize(self, runner, tmp_path):
        runner.invoke(main, ["run", "gadget-table", "--output-dir", str(tmp_path), "-p", "n_max=2"])
        result = runner.invoke(main, ["summarize", str(tmp_path / "gadget-table")])
        assert result.exit_code == 0
        assert result.output.strip().endswith("runs_summary.csv")
