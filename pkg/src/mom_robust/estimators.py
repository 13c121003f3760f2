"""Empirical baselines and median-of-block estimators.

The medians use the midpoint convention for an even number of values, so that
``mom`` with one block is the empirical mean and ``mom`` with singleton blocks
is the empirical median.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .errors import (
    BlockTooSmall,
    EmptySample,
    NonFiniteInput,
    NonFiniteValue,
    PartitionMismatch,
    SampleTooSmall,
    UnsupportedDegree,
)

__all__ = [
    "Sample",
    "UKernel",
    "CrossKernel",
    "identity_kernel",
    "variance_kernel",
    "mann_whitney_kernel",
    "product_kernel",
    "median",
    "empirical_mean",
    "empirical_median",
    "trimmed_mean",
    "block_means",
    "mom",
    "u_stat",
    "block_ustats",
    "mou",
    "u_stat_two_sample",
    "cross_block_ustats",
    "mou2",
    "diagonal_ustats",
    "mou2_diag",
]

MAX_DEGREE = 3
# kernel evaluations held in memory at once when enumerating tuples
_CHUNK = 1 << 21


@dataclass(frozen=True, eq=False)
class Sample:
    """Finite scalar observations with optional ground-truth outlier flags.

    ``mask[i]`` is True when observation ``i`` is an outlier.  Estimators never
    look at the mask.
    """

    values: np.ndarray
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(v)):
            raise NonFiniteInput("sample values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.mask is not None:
            mk = np.array(self.mask, dtype=bool).ravel()
            if mk.shape != v.shape:
                raise ValueError("mask length differs from values length")
            mk.setflags(write=False)
            object.__setattr__(self, "mask", mk)

    def __len__(self):
        return self.values.size

    @property
    def n_outliers(self):
        return 0 if self.mask is None else int(self.mask.sum())

    @property
    def inliers(self):
        return self.values if self.mask is None else self.values[~self.mask]


@dataclass(frozen=True)
class UKernel:
    """Symmetric kernel of ``degree`` real arguments.

    ``func`` must broadcast over array arguments.  ``closed_form``, when given,
    maps a ``(rows, B)`` array to the ``rows`` U-statistics directly and is
    used instead of tuple enumeration.
    """

    degree: int
    func: Callable
    name: str = "kernel"
    closed_form: Optional[Callable] = None


@dataclass(frozen=True)
class CrossKernel:
    """Kernel ``H(x, y)`` of one observation from each of two samples.

    ``closed_form(xr, yr)`` maps row-paired ``(R, Bx)`` and ``(R, By)`` arrays
    to the ``R`` grid averages.
    """

    func: Callable
    name: str = "cross-kernel"
    closed_form: Optional[Callable] = None


def _ustat_var_rows(rows):
    return np.var(rows, axis=1, ddof=1)


def identity_kernel():
    return UKernel(1, lambda z: z, "identity")


def variance_kernel():
    """``h(z, z') = (z - z')^2 / 2``, whose U-statistic is the unbiased variance."""
    return UKernel(2, lambda a, b: 0.5 * (a - b) ** 2, "variance", _ustat_var_rows)


def _mw_rows(xr, yr):
    if xr.shape[1] * yr.shape[1] <= 256:
        return (xr[:, :, None] <= yr[:, None, :]).mean(axis=(1, 2))
    xs = np.sort(xr, axis=1)
    out = np.empty(xs.shape[0])
    for r in range(xs.shape[0]):
        out[r] = np.searchsorted(xs[r], yr[r], side="right").sum()
    return out / (xr.shape[1] * yr.shape[1])


def mann_whitney_kernel():
    """``H(x, y) = 1{x <= y}``; its two-sample U-statistic estimates P(X <= Y)."""
    return CrossKernel(lambda x, y: (x <= y).astype(float), "mann-whitney", _mw_rows)


def product_kernel():
    return CrossKernel(lambda x, y: x * y, "product")


def _as_values(sample, min_size=1):
    if isinstance(sample, Sample):
        v = sample.values
    else:
        v = np.asarray(sample, dtype=float).ravel()
        if not np.all(np.isfinite(v)):
            raise NonFiniteInput("sample values must be finite")
    if v.size < min_size:
        if min_size <= 1:
            raise EmptySample("sample is empty")
        raise SampleTooSmall(f"need at least {min_size} observations, got {v.size}")
    return v


def _finite(a, what):
    if not np.all(np.isfinite(a)):
        raise NonFiniteValue(f"{what} produced a non-finite value")
    return a


def median(values):
    """Median with the midpoint convention for an even count."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise EmptySample("median of nothing")
    return float(np.median(v))


def empirical_mean(sample):
    return float(np.mean(_as_values(sample)))


def empirical_median(sample):
    return median(_as_values(sample))


def trimmed_mean(sample, trim):
    """Mean after removing ``floor(trim * n)`` values from each tail."""
    v = _as_values(sample)
    if not (0.0 <= trim < 0.5):
        raise ValueError(f"trim fraction must lie in [0, 0.5), got {trim}")
    g = int(math.floor(trim * v.size + 1e-9))
    s = np.sort(v)
    return float(np.mean(s[g : v.size - g]))


def _check_partition(v, partition):
    if partition.n != v.size:
        raise PartitionMismatch(
            f"partition built for n={partition.n}, sample has {v.size} values"
        )


def block_means(sample, partition):
    v = _as_values(sample)
    _check_partition(v, partition)
    return v[partition.blocks].mean(axis=1)


def mom(sample, partition):
    """Median of the block means."""
    return median(block_means(sample, partition))


@lru_cache(maxsize=64)
def _combos(B, d):
    c = np.array(list(itertools.combinations(range(B), d)), dtype=np.intp)
    c.setflags(write=False)
    return c.reshape(-1, d)


def _eval_tuples(kernel, rows, idx):
    args = [rows[:, idx[:, j]] for j in range(idx.shape[1])]
    return _finite(np.asarray(kernel.func(*args), dtype=float), kernel.name)


def _rows_ustats(rows, kernel):
    """U-statistic of each row of ``rows`` (shape ``(R, B)``)."""
    d = kernel.degree
    if d < 1 or d > MAX_DEGREE:
        raise UnsupportedDegree(f"kernels of degree {d} are not supported (max {MAX_DEGREE})")
    R, B = rows.shape
    if B < d:
        raise BlockTooSmall(f"block size {B} below kernel degree {d}")
    if kernel.closed_form is not None:
        return _finite(np.asarray(kernel.closed_form(rows), dtype=float), kernel.name)
    total = math.comb(B, d)
    if total * R <= _CHUNK:
        return _eval_tuples(kernel, rows, _combos(B, d)).mean(axis=1)
    # large blocks: enumerate tuples grouped by their first index
    acc = np.zeros(R)
    for first in range(B - d + 1):
        tail = _combos(B - first - 1, d - 1) + first + 1
        idx = np.column_stack([np.full(len(tail), first, dtype=np.intp), tail])
        step = max(1, _CHUNK // max(R, 1))
        for s in range(0, len(idx), step):
            acc += _eval_tuples(kernel, rows, idx[s : s + step]).sum(axis=1)
    return acc / total


def u_stat(sample, kernel):
    """Average of ``kernel`` over all ``C(n, d)`` index tuples ``i1 < ... < id``."""
    v = _as_values(sample, min_size=max(kernel.degree, 1))
    return float(_rows_ustats(v[None, :], kernel)[0])


def block_ustats(sample, kernel, partition):
    v = _as_values(sample)
    _check_partition(v, partition)
    if partition.B < kernel.degree:
        raise BlockTooSmall(f"block size {partition.B} below kernel degree {kernel.degree}")
    return _rows_ustats(v[partition.blocks], kernel)


def mou(sample, kernel, partition):
    """Median of the per-block U-statistics."""
    return median(block_ustats(sample, kernel, partition))


def _paired_rows(kernel, xr, yr):
    """Grid average of ``H`` for each paired row of ``xr`` and ``yr``."""
    if kernel.closed_form is not None:
        return _finite(np.asarray(kernel.closed_form(xr, yr), dtype=float), kernel.name)
    R, bx = xr.shape
    by = yr.shape[1]
    step = max(1, _CHUNK // max(bx * by, 1))
    out = np.empty(R)
    for s in range(0, R, step):
        g = np.asarray(kernel.func(xr[s : s + step, :, None], yr[s : s + step, None, :]), dtype=float)
        out[s : s + step] = _finite(g, kernel.name).mean(axis=(1, 2))
    return out


def u_stat_two_sample(x, y, kernel):
    """``(1 / nm) sum_i sum_j H(x_i, y_j)``."""
    xv, yv = _as_values(x), _as_values(y)
    if kernel.closed_form is not None:
        return float(_paired_rows(kernel, xv[None, :], yv[None, :])[0])
    # row-by-row keeps memory at O(m) for large samples
    step = max(1, _CHUNK // yv.size)
    acc = 0.0
    for s in range(0, xv.size, step):
        g = np.asarray(kernel.func(xv[s : s + step, None], yv[None, :]), dtype=float)
        acc += _finite(g, kernel.name).sum()
    return acc / (xv.size * yv.size)


def cross_block_ustats(x, y, kernel, px, py):
    """``(K_X, K_Y)`` grid of two-sample U-statistics on block pairs."""
    xv, yv = _as_values(x), _as_values(y)
    _check_partition(xv, px)
    _check_partition(yv, py)
    xb, yb = xv[px.blocks], yv[py.blocks]
    grid = np.empty((px.K, py.K))
    for k in range(px.K):
        grid[k] = _paired_rows(kernel, np.broadcast_to(xb[k], (py.K, px.B)), yb)
    return grid


def mou2(x, y, kernel, px, py):
    """Median over all ``K_X * K_Y`` cross-block U-statistics."""
    return median(cross_block_ustats(x, y, kernel, px, py))


def diagonal_ustats(x, y, kernel, pairing):
    xv, yv = _as_values(x), _as_values(y)
    if pairing.n_x != xv.size or pairing.n_y != yv.size:
        raise PartitionMismatch(
            f"pairing built for sizes ({pairing.n_x}, {pairing.n_y}), "
            f"got ({xv.size}, {yv.size})"
        )
    return _paired_rows(kernel, xv[pairing.x_blocks], yv[pairing.y_blocks])


def mou2_diag(x, y, kernel, pairing):
    """Median of the ``K`` diagonal block U-statistics only."""
    return median(diagonal_ustats(x, y, kernel, pairing))
