"""Lab configuration loaded from YAML.

A configuration file is optional. When present it looks like::

    seed: 7
    output_dir: results
    solver:
      tolerance: 1.0e-10
      preconditioner: diagonal
    well_connected:
      lower_exponent: 0.25
    sandpile:
      enumeration_cap: 1000000
    experiments:
      green-decay:
        radius: 64

The ``PERCOLAB_CONFIG`` environment variable names a default file.
"""

from __future__ import annotations

import logging
import os
from pathlib import Path
from typing import Any, Literal

import yaml
from pydantic import BaseModel, Field, ValidationError

from .errors import ParameterError
from .fields import SolveOptions

logger = logging.getLogger(__name__)

__all__ = [
    "CONFIG_ENV_VAR",
    "LabConfig",
    "SandpileSettings",
    "WellConnectedSettings",
]

CONFIG_ENV_VAR = "PERCOLAB_CONFIG"


class WellConnectedSettings(BaseModel):
    """Mesoscale range and absorption threshold of the well-connected diagnostic."""

    lower_exponent: float = Field(0.25, gt=0, lt=1)
    upper_fraction: float = Field(0.1, gt=0, le=1)
    absorption_fraction: float = Field(0.01, gt=0, le=1)

    model_config = {"frozen": True, "extra": "forbid"}


class SandpileSettings(BaseModel):
    """Defaults of the sandpile engine."""

    enumeration_cap: int = Field(10**6, ge=1)
    policy: Literal["fifo", "random"] = "fifo"

    model_config = {"frozen": True, "extra": "forbid"}


class LabConfig(BaseModel):
    """Top-level configuration of a lab session."""

    solver: SolveOptions = Field(default_factory=SolveOptions)
    well_connected: WellConnectedSettings = Field(default_factory=WellConnectedSettings)
    sandpile: SandpileSettings = Field(default_factory=SandpileSettings)
    seed: int = Field(0, ge=0, lt=2**64)
    output_dir: Path = Path("results")
    experiments: dict[str, dict[str, Any]] = Field(default_factory=dict)

    model_config = {"extra": "forbid"}

    @classmethod
    def from_yaml(cls, path: str | Path) -> LabConfig:
        """Load and validate a configuration file.

        Raises
        ------
        FileNotFoundError
            If *path* does not exist.
        ParameterError
            If the YAML root is not a mapping or a value is invalid.
        """
        p = Path(path)
        if not p.exists():
            raise FileNotFoundError(f"config file not found: {p}")
        with p.open(encoding="utf-8") as fh:
            raw = yaml.safe_load(fh) or {}
        if not isinstance(raw, dict):
            raise ParameterError(f"Expected a YAML mapping in {p}, got {type(raw).__name__}")
        try:
            config = cls.model_validate(raw)
        except ValidationError as exc:
            raise ParameterError(f"invalid configuration in {p}: {exc}") from exc
        logger.debug("loaded configuration from %s", p)
        return config

    @classmethod
    def load(cls, path: str | Path | None = None) -> LabConfig:
        """Load *path*, else the file named by ``PERCOLAB_CONFIG``, else defaults."""
        target = path or os.environ.get(CONFIG_ENV_VAR)
        if not target:
            return cls()
        return cls.from_yaml(target)

    def experiment_params(self, name: str) -> dict[str, Any]:
        """Parameters configured for experiment *name* (empty if none)."""
        return dict(self.experiments.get(name, {}))
