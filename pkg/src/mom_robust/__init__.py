"""Median-of-means and median-of-U-statistics estimation under contamination."""

from . import bounds, calibration, contamination, estimators, learning, partitioning
from .calibration import (
    ARITHMETIC,
    GEOMETRIC,
    HARMONIC,
    POLYNOMIAL,
    AlphaMapping,
    MappingKind,
    block_count_chebyshev,
    block_count_subgaussian,
    derived_constants,
)
from .errors import ConfigError, MoMError, NumericError
from .estimators import Sample, mom, mou, mou2, mou2_diag, u_stat, u_stat_two_sample
from .partitioning import diagonal_pairing, partition_contiguous, partition_random

__version__ = "0.1.0"

__all__ = [
    "bounds",
    "calibration",
    "contamination",
    "estimators",
    "learning",
    "partitioning",
    "ARITHMETIC",
    "GEOMETRIC",
    "HARMONIC",
    "POLYNOMIAL",
    "AlphaMapping",
    "MappingKind",
    "block_count_chebyshev",
    "block_count_subgaussian",
    "derived_constants",
    "ConfigError",
    "MoMError",
    "NumericError",
    "Sample",
    "mom",
    "mou",
    "mou2",
    "mou2_diag",
    "u_stat",
    "u_stat_two_sample",
    "diagonal_pairing",
    "partition_contiguous",
    "partition_random",
]
