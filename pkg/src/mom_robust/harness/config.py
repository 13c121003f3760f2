"""Experiment configuration parsed from JSON."""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional

from ..calibration import AlphaMapping
from ..contamination import (
    Bernoulli,
    ContaminationSpec,
    DiracAt,
    DiracPower,
    Gaussian,
    StudentT,
    Uniform,
)
from ..errors import ConfigError, InvalidMapping, ParseError

__all__ = ["Command", "ExperimentConfig", "load_config", "parse_config", "default_contamination"]


class Command(str, enum.Enum):
    BREAK_MEAN = "BreakMean"
    BREAK_MEDIAN = "BreakMedian"
    BREAK_VARIANCE = "BreakVariance"
    MANN_WHITNEY = "MannWhitney"
    COVERAGE = "Coverage"
    LEARN_RANKING = "LearnRanking"
    LEARN_METRIC = "LearnMetric"
    CALIBRATE = "Calibrate"

    @classmethod
    def parse(cls, name):
        """Accept ``BreakMean``, ``break-mean``, ``break_mean`` and so on."""
        key = re.sub(r"[-_\s]", "", str(name)).lower()
        for c in cls:
            if c.value.lower() == key:
                return c
        raise ConfigError(
            f"unknown command {name!r}; expected one of {', '.join(kebab(c) for c in cls)}"
        )


def kebab(command):
    return re.sub(r"(?<!^)([A-Z])", r"-\1", command.value).lower()


def default_contamination(command):
    """Inlier law and outlier rule of each experiment when the config omits them."""
    if command is Command.BREAK_MEDIAN:
        return ContaminationSpec(Bernoulli(0.5), DiracAt(1.0), 1.0, 0.5)
    if command is Command.BREAK_VARIANCE:
        return ContaminationSpec(Uniform(0.0, 1.0), DiracPower(0.25), 1.0, 0.5)
    if command is Command.MANN_WHITNEY:
        return ContaminationSpec(Gaussian(0.0, 1.0), DiracAt(100.0), outlier_fraction=0.1)
    if command is Command.COVERAGE:
        return ContaminationSpec(StudentT(3.0), DiracPower(0.5), 1.0, 0.5)
    return ContaminationSpec(Gaussian(0.0, 1.0), DiracPower(0.5), 1.0, 0.5)


def _default_mapping(command):
    # the harmonic rule gives blocks of a single pair at a 20% joint outlier
    # fraction, where a median of indicator grids is degenerate
    return "Polynomial" if command is Command.MANN_WHITNEY else "Harmonic"


@dataclass
class ExperimentConfig:
    """One experiment.

    ``params`` holds command-specific settings (confidence levels, learning
    rates, ...); unknown keys are rejected by the command that reads them.
    """

    command: Command
    n_grid: List[int]
    runs: int = 100
    mapping: str = "Harmonic"
    contamination: ContaminationSpec = field(default_factory=ContaminationSpec)
    seed: int = 0
    output: Optional[str] = None
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.n_grid:
            raise ConfigError("n_grid must be nonempty")
        if any((not isinstance(n, int)) or isinstance(n, bool) or n < 1 for n in self.n_grid):
            raise ConfigError("n_grid entries must be positive integers")
        if list(self.n_grid) != sorted(self.n_grid):
            raise ConfigError("n_grid must be ascending")
        if not isinstance(self.runs, int) or isinstance(self.runs, bool) or self.runs < 1:
            raise ConfigError("runs must be an integer >= 1")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        try:
            self.alpha_mapping
        except InvalidMapping as exc:
            raise ConfigError(str(exc)) from None

    @property
    def alpha_mapping(self):
        return AlphaMapping.from_name(self.mapping)

    def to_dict(self):
        return {
            "command": self.command.value,
            "n_grid": list(self.n_grid),
            "runs": self.runs,
            "mapping": self.alpha_mapping.label,
            "contamination": self.contamination.to_dict(),
            "seed": self.seed,
            "output": self.output,
            "params": self.params,
        }

    def with_overrides(self, seed=None, output=None):
        kw = {}
        if seed is not None:
            kw["seed"] = seed
        if output is not None:
            kw["output"] = output
        return replace(self, **kw) if kw else self


_FIELDS = {"command", "n_grid", "runs", "mapping", "contamination", "seed", "output", "params"}


def parse_config(data, command=None):
    """Build an :class:`ExperimentConfig` from decoded JSON.

    ``command`` (from the command line) wins over a ``command`` field; the
    two must agree when both are present.
    """
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    extra = set(data) - _FIELDS
    if extra:
        raise ConfigError(f"unknown config fields: {sorted(extra)}")
    cmd = Command.parse(command) if command is not None else None
    if "command" in data:
        from_file = Command.parse(data["command"])
        if cmd is not None and from_file is not cmd:
            raise ConfigError(f"config is for {from_file.value}, not {cmd.value}")
        cmd = from_file
    if cmd is None:
        raise ConfigError("no command given")
    n_grid = data.get("n_grid", [1000] if cmd is not Command.LEARN_METRIC else [120])
    if isinstance(n_grid, int) and not isinstance(n_grid, bool):
        n_grid = [n_grid]
    if not isinstance(n_grid, list):
        raise ConfigError("n_grid must be a list of integers")
    contamination = (
        ContaminationSpec.from_dict(data["contamination"])
        if data.get("contamination") is not None
        else default_contamination(cmd)
    )
    params = data.get("params") or {}
    if not isinstance(params, dict):
        raise ConfigError("params must be an object")
    output = data.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError("output must be a path string")
    mapping = data.get("mapping", _default_mapping(cmd))
    if not isinstance(mapping, str):
        raise ConfigError("mapping must be a name")
    return ExperimentConfig(
        command=cmd,
        n_grid=n_grid,
        runs=data.get("runs", 100),
        mapping=mapping,
        contamination=contamination,
        seed=data.get("seed", 0),
        output=output,
        params=params,
    )


def load_config(path, command=None):
    """Read and validate a JSON config file.

    Raises
    ------
    ParseError
        Malformed JSON, with the line and column of the failure.
    ConfigError
        Well-formed JSON describing an invalid experiment, or an unreadable file.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON in {path}: {exc.msg}", exc.lineno, exc.colno) from None
    return parse_config(data, command)
