"""Experiment configuration: JSON-loadable, hashable, validated up front."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..instances import rate_study_instance
from ..model import Dictionary, DiscreteDistribution, load_instance, load_instance_file

__all__ = ["ExperimentConfig", "config_hash", "resolve_instance"]

_COMMANDS = ("aggregate", "complexity", "concentration", "mirror", "verify")
_ESTIMATORS = ("erm", "star", "midpoint")


@dataclass(frozen=True)
class ExperimentConfig:
    command: str = "verify"
    seed: int = 0
    n_grid: tuple[int, ...] = (64, 128, 256, 512, 1024, 2048, 4096)
    replicates: int = 1000
    delta: float = 0.05
    estimator: str = "star"
    gamma: float | None = None
    epsilon: float = 0.05
    c1: float = 4.0
    step: float = 1e-3
    mirror_map: str = "euclidean"
    instance: dict | str | None = None
    checks: tuple[str, ...] | None = None  # verify: subset of check ids to run

    def __post_init__(self) -> None:
        if self.command not in _COMMANDS:
            raise ValueError(f"unknown command {self.command!r}; expected one of {_COMMANDS}")
        if self.estimator not in _ESTIMATORS:
            raise ValueError(f"unknown estimator {self.estimator!r}")
        grid = tuple(int(n) for n in self.n_grid)
        if len(grid) == 0:
            raise ValueError("n_grid must be nonempty")
        if any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] < 1:
            raise ValueError("n_grid must be strictly increasing and positive")
        object.__setattr__(self, "n_grid", grid)
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie strictly between 0 and 1")
        if isinstance(self.instance, str) and not Path(self.instance).exists():
            raise ValueError(f"instance file {self.instance!r} does not exist")
        if self.checks is not None:
            object.__setattr__(self, "checks", tuple(self.checks))

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def replaced(self, **overrides) -> "ExperimentConfig":
        return dataclasses.replace(self, **overrides)


def config_hash(config: ExperimentConfig) -> str:
    """Short stable digest of the full configuration, for provenance."""
    doc = dataclasses.asdict(config)
    blob = json.dumps(doc, sort_keys=True, default=str).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:12]


def resolve_instance(
    config: ExperimentConfig,
) -> tuple[DiscreteDistribution, Dictionary]:
    """Materialize the configured instance; defaults to the rate-study one."""
    if config.instance is None:
        return rate_study_instance()
    if isinstance(config.instance, str):
        return load_instance_file(config.instance)
    return load_instance(config.instance)
