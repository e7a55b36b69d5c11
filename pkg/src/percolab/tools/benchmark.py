"""Run manifests and resource metrics for experiment runs.

Every experiment run leaves a ``manifest.json`` in its output directory
with:

- Machine specifications (CPU, RAM, OS, hostname, Python and library versions)
- Per-run resource usage (wall time, CPU time, peak RSS)
- The validated parameters, the top-level seed and every replicate seed
- Embedded assertion outcomes and recorded observations
- SHA-256 digests of the output files

Runs are also appended to ``runs.jsonl`` for aggregation with pandas.

Usage::

    from percolab.tools.benchmark import RunTracker

    tracker = RunTracker(output_dir=Path("results/gadget-table"))
    with tracker.track("gadget-table", params={"n_max": 12}, seed=0) as run:
        path = write_table(...)
        run.add_output("table", path)
        run.check("rows_consistent", True)
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import platform
import resource
import time
from collections.abc import Generator
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import pandas as pd

from ..version import get_version

logger = logging.getLogger(__name__)

__all__ = [
    "MachineInfo",
    "RunManifest",
    "RunTracker",
    "collect_machine_info",
    "file_digest",
]


# ═══════════════════════════════════════════════════════════════════
# Machine info - gathered once per session
# ═══════════════════════════════════════════════════════════════════


@dataclass
class MachineInfo:
    """Static information about the host machine."""

    hostname: str = ""
    os_name: str = ""  # e.g. "Linux"
    os_release: str = ""  # kernel version
    architecture: str = ""  # e.g. "x86_64"
    cpu_model: str = ""
    cpu_count_logical: int = 0
    ram_total_gb: float = 0.0
    python_version: str = ""
    percolab_version: str = ""
    numpy_version: str = ""
    numba_version: str = ""


def collect_machine_info() -> MachineInfo:
    """Gather static machine specifications."""
    info = MachineInfo()
    info.hostname = platform.node()
    info.os_name = platform.system()
    info.os_release = platform.release()
    info.architecture = platform.machine()
    info.python_version = platform.python_version()
    info.percolab_version = get_version()

    # CPU model - Linux only (/proc/cpuinfo)
    try:
        with open("/proc/cpuinfo", encoding="utf-8") as f:
            for line in f:
                if line.startswith("model name"):
                    info.cpu_model = line.split(":", 1)[1].strip()
                    break
    except OSError:
        info.cpu_model = platform.processor() or "unknown"

    info.cpu_count_logical = os.cpu_count() or 0

    try:
        with open("/proc/meminfo", encoding="utf-8") as f:
            for line in f:
                if line.startswith("MemTotal"):
                    kb = int(line.split()[1])
                    info.ram_total_gb = round(kb / 1048576, 2)
                    break
    except OSError:
        pass

    from importlib.metadata import PackageNotFoundError, version

    for attr, dist in (("numpy_version", "numpy"), ("numba_version", "numba")):
        try:
            setattr(info, attr, version(dist))
        except PackageNotFoundError:
            setattr(info, attr, "not installed")
    return info


# ═══════════════════════════════════════════════════════════════════
# Per-run manifest
# ═══════════════════════════════════════════════════════════════════


def file_digest(path: str | Path) -> str:
    """SHA-256 of a file, hex encoded."""
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class RunManifest:
    """Everything needed to reproduce and audit one experiment run."""

    # Identity
    experiment: str = ""
    params: dict[str, Any] = field(default_factory=dict)
    version: str = ""
    seed: int = 0
    replicate_seeds: list[int] = field(default_factory=list)

    # Timing
    started_at: str = ""  # ISO-8601
    finished_at: str = ""
    wall_time_s: float = 0.0
    cpu_user_s: float = 0.0
    cpu_system_s: float = 0.0
    peak_rss_mb: float = 0.0

    # Outcome
    success: bool = False
    error: str = ""
    assertions: dict[str, bool] = field(default_factory=dict)
    observations: dict[str, Any] = field(default_factory=dict)

    # Output files
    outputs: dict[str, str] = field(default_factory=dict)
    digests: dict[str, str] = field(default_factory=dict)

    def add_output(self, label: str, path: str | Path) -> Path:
        """Register an output file under *label*."""
        self.outputs[label] = str(path)
        return Path(path)

    def check(self, name: str, condition: bool) -> bool:
        """Record an embedded assertion; a failure makes the run fail."""
        ok = bool(condition)
        self.assertions[name] = ok
        if not ok:
            logger.warning("assertion %s failed", name)
        return ok

    def observe(self, name: str, value: Any) -> None:
        """Record a measured quantity or trend that does not decide the run."""
        self.observations[name] = value

    @property
    def passed(self) -> bool:
        """Whether the run finished and every assertion held."""
        return self.success and all(self.assertions.values())

    def to_dict(self) -> dict[str, Any]:
        """Plain-dict form for JSON."""
        return asdict(self)


def _get_rusage() -> tuple[float, float, float]:
    """Return (user_time_s, system_time_s, max_rss_mb)."""
    r = resource.getrusage(resource.RUSAGE_SELF)
    # ru_maxrss is in KB on Linux, bytes on macOS
    divisor = 1024 if platform.system() == "Linux" else 1048576
    return r.ru_utime, r.ru_stime, r.ru_maxrss / divisor


# ═══════════════════════════════════════════════════════════════════
# Tracker - context-manager API
# ═══════════════════════════════════════════════════════════════════


class RunTracker:
    """Writes manifests for runs in one output directory.

    Usage::

        tracker = RunTracker(output_dir)
        with tracker.track("spectrum-table", params, seed) as run:
            run.add_output("group", write_group(...))
        # manifest.json written, runs.jsonl appended
    """

    def __init__(self, output_dir: Path) -> None:
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.manifest_path = self.output_dir / "manifest.json"
        self.jsonl_path = self.output_dir / "runs.jsonl"
        self._machine = collect_machine_info()

    @property
    def machine_info(self) -> MachineInfo:
        """Return the static machine info."""
        return self._machine

    @contextmanager
    def track(
        self,
        experiment: str,
        params: dict[str, Any] | None = None,
        seed: int = 0,
    ) -> Generator[RunManifest, None, None]:
        """Context manager that captures resource usage and output digests."""
        run = RunManifest(
            experiment=experiment,
            params=dict(params or {}),
            version=get_version(),
            seed=seed,
        )

        run.started_at = datetime.now(timezone.utc).isoformat()
        t0 = time.monotonic()
        cpu0_user, cpu0_sys, _ = _get_rusage()

        try:
            yield run
            run.success = True
        except Exception as exc:
            run.success = False
            run.error = str(exc)
            raise
        finally:
            t1 = time.monotonic()
            cpu1_user, cpu1_sys, peak_rss = _get_rusage()
            run.finished_at = datetime.now(timezone.utc).isoformat()
            run.wall_time_s = round(t1 - t0, 3)
            run.cpu_user_s = round(cpu1_user - cpu0_user, 3)
            run.cpu_system_s = round(cpu1_sys - cpu0_sys, 3)
            run.peak_rss_mb = round(peak_rss, 2)

            for label, path_str in run.outputs.items():
                p = Path(path_str)
                if p.exists():
                    run.digests[label] = file_digest(p)

            self._flush(run)

    def _flush(self, run: RunManifest) -> None:
        """Write the manifest and append one record to the JSONL file."""
        record = {"machine": asdict(self._machine), "run": run.to_dict()}
        try:
            with open(self.manifest_path, "w", encoding="utf-8") as f:
                json.dump(record, f, indent=2, default=str)
            with open(self.jsonl_path, "a", encoding="utf-8") as f:
                f.write(json.dumps(record, default=str))
                f.write("\n")
            logger.info(
                "Manifest written -> %s (%s, %.1fs)",
                self.manifest_path,
                run.experiment,
                run.wall_time_s,
            )
        except OSError as exc:
            logger.warning("Failed to write manifest: %s", exc)

    def write_summary_csv(self) -> Path:
        """Flatten ``runs.jsonl`` into ``runs_summary.csv`` and return its path."""
        csv_path = self.output_dir / "runs_summary.csv"
        records: list[dict[str, Any]] = []
        try:
            with open(self.jsonl_path, encoding="utf-8") as f:
                for line in f:
                    line = line.strip()
                    if line:
                        records.append(json.loads(line))
        except FileNotFoundError:
            logger.warning("No runs.jsonl found")
            return csv_path
        if not records:
            return csv_path
        frame = pd.json_normalize(records, sep="_")
        frame.to_csv(csv_path, index=False)
        logger.info("Run summary -> %s (%d records)", csv_path, len(records))
        return csv_path
