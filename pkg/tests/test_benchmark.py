"""Tests for percolab.tools.benchmark - run manifests."""
# ruff: noqa: D101, D102

from __future__ import annotations

import json

import pandas as pd
import pytest

from percolab.tools.benchmark import RunManifest, RunTracker, collect_machine_info, file_digest


class TestMachineInfo:

    def test_versions(self):
        info = collect_machine_info()
        assert info.python_version
        assert info.percolab_version
        assert info.numpy_version != "not installed"


class TestRunManifest:

    def test_assertions_decide(self):
        run = RunManifest(experiment="x", success=True)
        assert run.check("ok", True)
        assert run.passed
        assert not run.check("bad", False)
        assert not run.passed

    def test_observations_do_not_decide(self):
        run = RunManifest(success=True)
        run.observe("slope", -0.16)
        assert run.passed
        assert run.to_dict()["observations"] == {"slope": -0.16}


class TestRunTracker:

    def test_manifest_and_digest(self, tmp_path):
        tracker = RunTracker(tmp_path / "out")
        with tracker.track("demo", params={"n": 3}, seed=4) as run:
            path = tmp_path / "out" / "table.csv"
            path.write_text("a,b\n1,2\n")
            run.add_output("table", path)
            run.check("rows", True)
            run.replicate_seeds.append(11)
        record = json.loads(tracker.manifest_path.read_text())
        assert record["run"]["experiment"] == "demo"
        assert record["run"]["params"] == {"n": 3}
        assert record["run"]["seed"] == 4
        assert record["run"]["replicate_seeds"] == [11]
        assert record["run"]["success"]
        assert record["run"]["digests"]["table"] == file_digest(path)
        assert "hostname" in record["machine"]

    def test_failure_is_recorded(self, tmp_path):
        tracker = RunTracker(tmp_path)
        with pytest.raises(RuntimeError), tracker.track("boom"):
            raise RuntimeError("solver diverged")
        record = json.loads(tracker.manifest_path.read_text())
        assert not record["run"]["success"]
        assert record["run"]["error"] == "solver diverged"

    def test_summary_csv(self, tmp_path):
        tracker = RunTracker(tmp_path)
        for seed in (1, 2):
            with tracker.track("demo", seed=seed):
                pass
        frame = pd.read_csv(tracker.write_summary_csv())
        assert frame["run_seed"].tolist() == [1, 2]

    def test_summary_without_runs(self, tmp_path):
        tracker = RunTracker(tmp_path)
        assert not tracker.write_summary_csv().exists()
