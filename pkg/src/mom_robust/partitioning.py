"""Disjoint equal-size block partitions of index sets.

Blocks all have size ``B = n // K``; the ``n % K`` leftover indices are
dropped rather than merged into a larger block.  Random partitions permute
the indices and then cut contiguously.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidBlockCount

__all__ = [
    "BlockPartition",
    "DiagonalPairing",
    "partition_contiguous",
    "partition_random",
    "diagonal_pairing",
    "as_generator",
]


def as_generator(seed):
    """Accept an int seed, a ``SeedSequence`` or a ready ``Generator``."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise ValueError("an explicit seed or Generator is required")
    return np.random.default_rng(seed)


def _frozen(a):
    a = np.ascontiguousarray(a, dtype=np.intp)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class BlockPartition:
    """``K`` disjoint blocks of ``B`` indices out of ``range(n)``.

    ``blocks`` is a read-only ``(K, B)`` integer array; row ``k`` lists the
    indices of block ``k``.
    """

    n: int
    K: int
    B: int
    blocks: np.ndarray
    dropped: np.ndarray
    seed: Optional[int] = None

    def __eq__(self, other):
        if not isinstance(other, BlockPartition):
            return NotImplemented
        return (
            (self.n, self.K, self.B) == (other.n, other.K, other.B)
            and np.array_equal(self.blocks, other.blocks)
            and np.array_equal(self.dropped, other.dropped)
        )

    __hash__ = None

    @property
    def used(self):
        """Indices covered by some block, block by block."""
        return self.blocks.ravel()

    def __iter__(self):
        return iter(self.blocks)

    def __len__(self):
        return self.K


@dataclass(frozen=True, eq=False)
class DiagonalPairing:
    """Block ``k`` of the first sample paired with block ``k`` of the second.

    ``x_blocks`` is ``(K, n // K)`` and ``y_blocks`` is ``(K, m // K)``.
    """

    K: int
    n_x: int
    n_y: int
    x_blocks: np.ndarray
    y_blocks: np.ndarray

    @property
    def pairs(self):
        return list(zip(self.x_blocks, self.y_blocks))


def _check(n, K):
    n, K = int(n), int(K)
    if K < 1 or K > n:
        raise InvalidBlockCount(f"need 1 <= K <= n, got K={K}, n={n}")
    return n, K


def _cut(order, n, K, seed=None):
    B = n // K
    return BlockPartition(
        n=n,
        K=K,
        B=B,
        blocks=_frozen(order[: K * B].reshape(K, B)),
        dropped=_frozen(order[K * B :]),
        seed=seed,
    )


def partition_contiguous(n, K):
    """Block ``k`` holds ``[k B, (k + 1) B)``; the tail is dropped."""
    n, K = _check(n, K)
    return _cut(np.arange(n), n, K)


def partition_random(n, K, seed):
    """Contiguous cut of a uniformly random permutation of ``range(n)``.

    ``seed`` may be an int (recorded on the result) or a ``Generator``, which
    is advanced.
    """
    n, K = _check(n, K)
    rng = as_generator(seed)
    recorded = int(seed) if isinstance(seed, (int, np.integer)) else None
    return _cut(rng.permutation(n), n, K, recorded)


def diagonal_pairing(n, m, K, seed=None):
    """Pair block ``k`` of a partition of ``range(n)`` with block ``k`` of ``range(m)``.

    Without a seed both partitions are contiguous; with one, the two samples
    are permuted independently.
    """
    n, m, K = int(n), int(m), int(K)
    if K < 1 or K > min(n, m):
        raise InvalidBlockCount(f"need 1 <= K <= min(n, m), got K={K}, n={n}, m={m}")
    if seed is None:
        px, py = partition_contiguous(n, K), partition_contiguous(m, K)
    else:
        rng = as_generator(seed)
        px, py = partition_random(n, K, rng), partition_random(m, K, rng)
    return DiagonalPairing(K=K, n_x=n, n_y=m, x_blocks=px.blocks, y_blocks=py.blocks)
