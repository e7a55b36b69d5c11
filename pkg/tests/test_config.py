"""Tests for percolab.config - YAML loading and validation."""
# ruff: noqa: D101, D102

from __future__ import annotations

from pathlib import Path

import pytest

from percolab.config import CONFIG_ENV_VAR, LabConfig, SandpileSettings
from percolab.errors import ParameterError


class TestDefaults:

    def test_defaults(self):
        config = LabConfig()
        assert config.seed == 0
        assert config.output_dir == Path("results")
        assert config.solver.tolerance == 1e-10
        assert config.sandpile.enumeration_cap == 10**6
        assert config.well_connected.lower_exponent == 0.25
        assert config.experiment_params("green-decay") == {}

    def test_sandpile_policy_checked(self):
        with pytest.raises(ValueError):
            SandpileSettings(policy="lifo")


class TestFromYaml:

    def test_load(self, tmp_path):
        path = tmp_path / "lab.yaml"
        path.write_text(
            "seed: 7\n"
            "solver:\n"
            "  tolerance: 1.0e-8\n"
            "sandpile:\n"
            "  enumeration_cap: 500\n"
            "experiments:\n"
            "  green-decay:\n"
            "    radius: 16\n"
        )
        config = LabConfig.from_yaml(path)
        assert config.seed == 7
        assert config.solver.tolerance == 1e-8
        assert config.sandpile.enumeration_cap == 500
        assert config.experiment_params("green-decay") == {"radius": 16}

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.yaml"
        path.write_text("")
        assert LabConfig.from_yaml(path).seed == 0

    def test_missing(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            LabConfig.from_yaml(tmp_path / "nope.yaml")

    def test_not_a_mapping(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ParameterError, match="mapping"):
            LabConfig.from_yaml(path)

    @pytest.mark.parametrize(
        "text",
        [
            "seed: -1\n",
            "solver:\n  tolerance: 0\n",
            "well_connected:\n  lower_exponent: 1.5\n",
            "unknown: 1\n",
        ],
    )
    def test_invalid(self, tmp_path, text):
        path = tmp_path / "bad.yaml"
        path.write_text(text)
        with pytest.raises(ParameterError, match="invalid configuration"):
            LabConfig.from_yaml(path)


class TestLoad:

    def test_no_file(self, monkeypatch):
        monkeypatch.delenv(CONFIG_ENV_VAR, raising=False)
        assert LabConfig.load() == LabConfig()

    def test_environment_variable(self, tmp_path, monkeypatch):
        path = tmp_path / "env.yaml"
        path.write_text("seed: 3\n")
        monkeypatch.setenv(CONFIG_ENV_VAR, str(path))
        assert LabConfig.load().seed == 3

    def test_explicit_path_wins(self, tmp_path, monkeypatch):
        env, explicit = tmp_path / "env.yaml", tmp_path / "explicit.yaml"
        env.write_text("seed: 3\n")
        explicit.write_text("seed: 5\n")
        monkeypatch.setenv(CONFIG_ENV_VAR, str(env))
        assert LabConfig.load(explicit).seed == 5
