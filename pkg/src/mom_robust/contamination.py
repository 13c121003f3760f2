"""Contaminated-sample generators.

A sample of size ``n`` holds ``n_O`` outliers and ``n - n_O`` i.i.d. inliers,
with ``n_O = ceil(c_o^2 n^alpha_o)`` by default.  Outlier values follow a
fixed rule chosen before any partition is drawn.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from .calibration import snap_ceil
from .errors import BreakdownExceeded, ConfigError
from .estimators import Sample

__all__ = [
    "Gaussian",
    "Bernoulli",
    "Uniform",
    "StudentT",
    "Empirical",
    "DiracPower",
    "DiracAt",
    "UniformBox",
    "Append",
    "Shuffle",
    "ContaminationSpec",
    "outlier_count",
    "epsilon_of",
    "generate",
]


@dataclass(frozen=True)
class Gaussian:
    mean: float = 0.0
    sd: float = 1.0

    def draw(self, rng, size):
        return rng.normal(self.mean, self.sd, size)

    @property
    def expectation(self):
        return self.mean

    @property
    def variance(self):
        return self.sd**2


@dataclass(frozen=True)
class Bernoulli:
    p: float = 0.5

    def draw(self, rng, size):
        return (rng.random(size) < self.p).astype(float)

    @property
    def expectation(self):
        return self.p

    @property
    def variance(self):
        return self.p * (1.0 - self.p)


@dataclass(frozen=True)
class Uniform:
    lo: float = 0.0
    hi: float = 1.0

    def draw(self, rng, size):
        return rng.uniform(self.lo, self.hi, size)

    @property
    def expectation(self):
        return 0.5 * (self.lo + self.hi)

    @property
    def variance(self):
        return (self.hi - self.lo) ** 2 / 12.0


@dataclass(frozen=True)
class StudentT:
    dof: float = 3.0

    def draw(self, rng, size):
        return rng.standard_t(self.dof, size)

    @property
    def expectation(self):
        return 0.0 if self.dof > 1 else math.nan

    @property
    def variance(self):
        if self.dof > 2:
            return self.dof / (self.dof - 2.0)
        return math.inf if self.dof > 1 else math.nan


@dataclass(frozen=True)
class Empirical:
    """Resample with replacement from fixed values."""

    values: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values:
            raise ConfigError("Empirical distribution needs at least one value")

    def draw(self, rng, size):
        return rng.choice(np.asarray(self.values), size, replace=True)

    @property
    def expectation(self):
        return float(np.mean(self.values))

    @property
    def variance(self):
        return float(np.var(self.values))


@dataclass(frozen=True)
class DiracPower:
    """Point mass at ``n ** exponent``."""

    exponent: float

    def draw(self, rng, size, n):
        return np.full(size, float(n) ** self.exponent)


@dataclass(frozen=True)
class DiracAt:
    value: float

    def draw(self, rng, size, n):
        return np.full(size, float(self.value))


@dataclass(frozen=True)
class UniformBox:
    lo: float
    hi: float

    def draw(self, rng, size, n):
        return rng.uniform(self.lo, self.hi, size)


@dataclass(frozen=True)
class Append:
    """Inliers first, outliers last."""


@dataclass(frozen=True)
class Shuffle:
    """Positions permuted by a generator seeded independently of the values."""

    seed: int = 0


InlierDist = Union[Gaussian, Bernoulli, Uniform, StudentT, Empirical]
OutlierRule = Union[DiracPower, DiracAt, UniformBox]

_INLIERS = {c.__name__: c for c in (Gaussian, Bernoulli, Uniform, StudentT, Empirical)}
_OUTLIERS = {c.__name__: c for c in (DiracPower, DiracAt, UniformBox)}
_PLACEMENTS = {c.__name__: c for c in (Append, Shuffle)}


def _tagged(obj):
    d = {"kind": type(obj).__name__}
    d.update({k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(obj).items()})
    return d


def _untag(d, table, what):
    if isinstance(d, str):
        d = {"kind": d}
    if not isinstance(d, dict) or "kind" not in d:
        raise ConfigError(f"{what} must be an object with a 'kind' field")
    kind = d["kind"]
    cls = {k.lower(): v for k, v in table.items()}.get(str(kind).lower())
    if cls is None:
        raise ConfigError(f"unknown {what} kind {kind!r}; expected one of {sorted(table)}")
    try:
        return cls(**{k: v for k, v in d.items() if k != "kind"})
    except TypeError as exc:
        raise ConfigError(f"bad {what} parameters for {kind}: {exc}") from None


@dataclass(frozen=True)
class ContaminationSpec:
    """How to build a contaminated sample.

    ``outlier_fraction``, when set, replaces the growth law by
    ``n_O = ceil(outlier_fraction * n)``; it is the only way to request zero
    outliers.
    """

    inlier_dist: InlierDist = Gaussian()
    outlier_rule: OutlierRule = DiracPower(0.5)
    c_o: float = 1.0
    alpha_o: float = 0.5
    placement: Union[Append, Shuffle] = Append()
    outlier_fraction: Optional[float] = None

    def __post_init__(self):
        if not (self.c_o >= 1.0):
            raise ConfigError(f"c_o must be >= 1, got {self.c_o}")
        if not (0.0 <= self.alpha_o < 1.0):
            raise ConfigError(f"alpha_o must lie in [0, 1), got {self.alpha_o}")
        f = self.outlier_fraction
        if f is not None and not (0.0 <= f < 0.5):
            raise ConfigError(f"outlier_fraction must lie in [0, 1/2), got {f}")

    def to_dict(self):
        out = {
            "inlier_dist": _tagged(self.inlier_dist),
            "outlier_rule": _tagged(self.outlier_rule),
            "c_o": self.c_o,
            "alpha_o": self.alpha_o,
            "placement": _tagged(self.placement),
        }
        if self.outlier_fraction is not None:
            out["outlier_fraction"] = self.outlier_fraction
        return out

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("contamination must be an object")
        known = {"inlier_dist", "outlier_rule", "c_o", "alpha_o", "placement", "outlier_fraction"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown contamination fields: {sorted(extra)}")
        kw = {}
        if "inlier_dist" in d:
            kw["inlier_dist"] = _untag(d["inlier_dist"], _INLIERS, "inlier_dist")
        if "outlier_rule" in d:
            kw["outlier_rule"] = _untag(d["outlier_rule"], _OUTLIERS, "outlier_rule")
        if "placement" in d:
            kw["placement"] = _untag(d["placement"], _PLACEMENTS, "placement")
        for k in ("c_o", "alpha_o", "outlier_fraction"):
            if k in d and d[k] is not None:
                if not isinstance(d[k], (int, float)) or isinstance(d[k], bool):
                    raise ConfigError(f"{k} must be a number")
                kw[k] = float(d[k])
        return cls(**kw)


def outlier_count(spec, n):
    """``ceil(c_o^2 n^alpha_o)``, or ``ceil(outlier_fraction n)`` when that is set."""
    if n < 1:
        raise ValueError("n must be positive")
    if spec.outlier_fraction is not None:
        return snap_ceil(spec.outlier_fraction * n)
    return snap_ceil(spec.c_o**2 * float(n) ** spec.alpha_o)


def epsilon_of(spec, n):
    return outlier_count(spec, n) / n


def generate(spec, n, seed):
    """Draw a contaminated :class:`~mom_robust.estimators.Sample` of size ``n``.

    Inliers are drawn first from ``default_rng(seed)``, then outliers.  With
    :class:`Shuffle` placement the positions are permuted by a separate
    generator seeded with ``placement.seed``.

    Raises
    ------
    BreakdownExceeded
        If ``n_O / n >= 1/2``.
    """
    n = int(n)
    n_o = outlier_count(spec, n)
    if 2 * n_o >= n:
        raise BreakdownExceeded(f"{n_o} outliers out of {n} reach the breakdown point")
    rng = np.random.default_rng(seed)
    inl = np.asarray(spec.inlier_dist.draw(rng, n - n_o), dtype=float)
    out = np.asarray(spec.outlier_rule.draw(rng, n_o, n), dtype=float)
    values = np.concatenate([inl, out])
    mask = np.zeros(n, dtype=bool)
    mask[n - n_o :] = True
    if isinstance(spec.placement, Shuffle):
        perm = np.random.default_rng(spec.placement.seed).permutation(n)
        values, mask = values[perm], mask[perm]
    return Sample(values, mask)
