"""Pairwise learning with median-of-U-statistics gradient descent.

Two pairwise losses are provided:

* :class:`RankingHinge`, a pairwise ranking hinge on sigmoid scores
  ``s(x) = sigmoid(w @ x)``.  Risks are evaluated with the hard decision
  ``sign(s(x) - s(x'))``; gradient steps use the smooth surrogate
  ``tanh(kappa (s(x) - s(x')))``.
* :class:`MetricHinge`, a Mahalanobis metric-learning hinge
  ``max(0, 1 + y_ij (d_M^2(x_i, x_j) - 2))`` with ``y_ij = +1`` for equal labels
  and ``-1`` otherwise.

:func:`mou_gd` repartitions the training set at every epoch, picks the block
whose pair-mean risk is the median one, and steps along the gradient of that
block's pair-mean loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Union

import numpy as np

from .calibration import snap_ceil
from .errors import (
    BlockTooSmall,
    BreakdownExceeded,
    DatasetTooSmall,
    NonFiniteGradient,
    NonFiniteInput,
    PartitionMismatch,
)
from .estimators import _combos, median
from .partitioning import as_generator, partition_random

__all__ = [
    "PairwiseDataset",
    "RankingHinge",
    "MetricHinge",
    "GDConfig",
    "GDTrace",
    "GDResult",
    "pairwise_risk",
    "block_risks",
    "mou_risk",
    "mou_gd",
    "pairwise_gd",
    "psd_project",
    "contaminate_pairwise",
    "contaminate_metric",
    "planted_ranking",
    "planted_metric",
    "train_test_split",
]

_PAIR_CHUNK = 1 << 20


@dataclass(frozen=True, eq=False)
class PairwiseDataset:
    """``n`` feature rows with real labels and optional outlier flags."""

    features: np.ndarray
    labels: np.ndarray
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        X = np.array(self.features, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.array(self.labels, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] != y.size:
            raise ValueError(f"features {X.shape} and labels {y.shape} disagree")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise NonFiniteInput("dataset entries must be finite")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        if self.mask is not None:
            m = np.array(self.mask, dtype=bool).ravel()
            if m.size != y.size:
                raise ValueError("mask length differs from the number of rows")
            m.setflags(write=False)
            object.__setattr__(self, "mask", m)

    @property
    def n(self):
        return self.labels.size

    @property
    def p(self):
        return self.features.shape[1]

    def __len__(self):
        return self.n

    def subset(self, idx):
        idx = np.asarray(idx)
        return PairwiseDataset(
            self.features[idx], self.labels[idx], None if self.mask is None else self.mask[idx]
        )

    def outlier_mask(self):
        return np.zeros(self.n, dtype=bool) if self.mask is None else self.mask


# -- losses ---------------------------------------------------------------------


def _sigmoid(a):
    # split by sign so that neither branch overflows
    out = np.empty_like(a, dtype=float)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    ea = np.exp(a[~pos])
    out[~pos] = ea / (1.0 + ea)
    return out


@dataclass(frozen=True)
class RankingHinge:
    """``max(0, 1 - g_w(x, x') (y - y'))`` with scores ``sigmoid(w @ x)``.

    ``kappa`` is the slope of the smooth surrogate used for gradients.
    """

    kappa: float = 4.0
    name: str = "ranking-hinge"

    def init(self, p):
        return np.zeros(p)

    def pair_losses(self, u, X, y, I, J, smooth=False):
        s = _sigmoid(X @ u)
        diff = s[I] - s[J]
        g = np.tanh(self.kappa * diff) if smooth else np.sign(diff)
        return np.maximum(0.0, 1.0 - g * (y[I] - y[J]))

    def pair_grad_sum(self, u, X, y, I, J):
        a = X @ u
        s = _sigmoid(a)
        ds = s * (1.0 - s)
        t = np.tanh(self.kappa * (s[I] - s[J]))
        dy = y[I] - y[J]
        active = (1.0 - t * dy) > 0.0
        # d/dw of -t dy, with dt/dw = kappa (1 - t^2) (ds_i x_i - ds_j x_j)
        c = np.where(active, -dy * self.kappa * (1.0 - t * t), 0.0)
        wi = np.bincount(I.ravel(), weights=(c * ds[I]).ravel(), minlength=X.shape[0])
        wj = np.bincount(J.ravel(), weights=(c * ds[J]).ravel(), minlength=X.shape[0])
        return X.T @ (wi - wj)

    def eval(self, u, zi, zj, smooth=False):
        X, y = _pair_arrays(zi, zj)
        return float(self.pair_losses(u, X, y, np.array([0]), np.array([1]), smooth)[0])

    def grad(self, u, zi, zj):
        """Gradient of the smooth surrogate loss of one pair."""
        X, y = _pair_arrays(zi, zj)
        return self.pair_grad_sum(u, X, y, np.array([0]), np.array([1]))


@dataclass(frozen=True)
class MetricHinge:
    """``max(0, offset + y_ij (d_M^2 - center))`` over Mahalanobis matrices ``M``."""

    offset: float = 1.0
    center: float = 2.0
    name: str = "metric-hinge"

    def init(self, p):
        return np.eye(p)

    def _parts(self, u, X, y, I, J):
        D = X[I] - X[J]
        d2 = np.einsum("...i,ij,...j->...", D, u, D)
        yij = np.where(y[I] == y[J], 1.0, -1.0)
        return D, d2, yij

    def pair_losses(self, u, X, y, I, J, smooth=False):
        _, d2, yij = self._parts(u, X, y, I, J)
        return np.maximum(0.0, self.offset + yij * (d2 - self.center))

    def pair_grad_sum(self, u, X, y, I, J):
        D, d2, yij = self._parts(u, X, y, I, J)
        c = np.where(self.offset + yij * (d2 - self.center) > 0.0, yij, 0.0)
        D = D.reshape(-1, X.shape[1])
        return D.T @ (c.reshape(-1, 1) * D)

    def eval(self, u, zi, zj, smooth=False):
        X, y = _pair_arrays(zi, zj)
        return float(self.pair_losses(u, X, y, np.array([0]), np.array([1]))[0])

    def grad(self, u, zi, zj):
        X, y = _pair_arrays(zi, zj)
        return self.pair_grad_sum(u, X, y, np.array([0]), np.array([1]))


PairwiseLoss = Union[RankingHinge, MetricHinge]


def _pair_arrays(zi, zj):
    xi, yi = zi
    xj, yj = zj
    X = np.vstack([np.atleast_1d(np.asarray(xi, dtype=float)), np.atleast_1d(np.asarray(xj, dtype=float))])
    return X, np.array([float(yi), float(yj)])


# -- risks ----------------------------------------------------------------------


def _row_chunks(n):
    """Pairs ``i < j`` of ``range(n)`` in lexicographic order, in bounded chunks."""
    rows_per = max(1, _PAIR_CHUNK // max(n, 1))
    for start in range(0, n - 1, rows_per):
        stop = min(n - 1, start + rows_per)
        I, J = [], []
        for i in range(start, stop):
            J.append(np.arange(i + 1, n))
            I.append(np.full(n - i - 1, i))
        yield np.concatenate(I), np.concatenate(J)


def pairwise_risk(u, dataset, loss, smooth=False):
    """Mean loss over all ``n (n - 1) / 2`` unordered pairs."""
    n = dataset.n
    if n < 2:
        raise DatasetTooSmall("need at least two rows to form a pair")
    X, y = dataset.features, dataset.labels
    total = 0.0
    for I, J in _row_chunks(n):
        total += float(loss.pair_losses(u, X, y, I, J, smooth).sum())
    return total / math.comb(n, 2)


def _block_pairs(blocks):
    B = blocks.shape[1]
    if B < 2:
        raise BlockTooSmall(f"blocks of size {B} contain no pair")
    c = _combos(B, 2)
    return blocks[:, c[:, 0]], blocks[:, c[:, 1]]


def block_risks(u, dataset, loss, partition, smooth=False):
    """Pair-mean loss of every block of ``partition``."""
    if partition.n != dataset.n:
        raise PartitionMismatch(f"partition built for n={partition.n}, dataset has {dataset.n}")
    return _block_risks(u, dataset, loss, np.sort(partition.blocks, axis=1), smooth)


def _block_risks(u, dataset, loss, blocks, smooth):
    I, J = _block_pairs(blocks)
    return loss.pair_losses(u, dataset.features, dataset.labels, I, J, smooth).mean(axis=1)


def mou_risk(u, dataset, loss, partition, smooth=False):
    """Median over blocks of the pair-mean loss."""
    return median(block_risks(u, dataset, loss, partition, smooth))


# -- gradient descent -----------------------------------------------------------


@dataclass
class GDConfig:
    """Settings of :func:`mou_gd`.

    ``step_sizes`` overrides the default schedule ``step0 / (1 + t)``; it may
    be a sequence of length at least ``T`` or a callable of the epoch index.
    """

    K: int = 1
    T: int = 100
    step0: float = 0.1
    step_sizes: Optional[Union[Sequence[float], Callable[[int], float]]] = None
    u0: Optional[np.ndarray] = None
    seed: int = 0
    psd_project: bool = False
    record_every: int = 1

    def __post_init__(self):
        if self.record_every < 1:
            raise ValueError("record_every must be positive")
        if self.T < 0:
            raise ValueError("T must be nonnegative")
        if self.K < 1:
            raise ValueError("K must be positive")
        if self.step_sizes is None and not (self.step0 > 0):
            raise ValueError("step0 must be positive")

    def step(self, t):
        if self.step_sizes is None:
            g = self.step0 / (1.0 + t)
        elif callable(self.step_sizes):
            g = float(self.step_sizes(t))
        else:
            g = float(self.step_sizes[t])
        if not (g > 0):
            raise ValueError(f"step size at epoch {t} must be positive, got {g}")
        return g


@dataclass
class GDTrace:
    """Per-epoch record.

    Row ``t`` (1-based) holds the block risks computed at ``u_{t-1}`` (which
    select the block), and the train and test risks at ``u_t``.  Only epochs
    that are multiples of ``GDConfig.record_every``, and the last one, are
    recorded.
    """

    epoch: List[int] = field(default_factory=list)
    median_block_risk: List[float] = field(default_factory=list)
    selected_block_risk: List[float] = field(default_factory=list)
    train_risk: List[float] = field(default_factory=list)
    test_risk: List[float] = field(default_factory=list)
    block_risks: List[np.ndarray] = field(default_factory=list)
    selected_block: List[int] = field(default_factory=list)
    surrogate: str = ""

    COLUMNS = ("epoch", "median_block_risk", "train_risk", "test_risk")

    def rows(self):
        return list(zip(self.epoch, self.median_block_risk, self.train_risk, self.test_risk))


@dataclass
class GDResult:
    u: np.ndarray
    trace: GDTrace


def psd_project(matrix):
    """Nearest positive semi-definite matrix in Frobenius norm.

    The input is symmetrized first; negative eigenvalues are set to 0.
    """
    A = np.asarray(matrix, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.all(np.isfinite(A)):
        raise NonFiniteInput("matrix entries must be finite")
    S = 0.5 * (A + A.T)
    w, V = np.linalg.eigh(S)
    P = (V * np.maximum(w, 0.0)) @ V.T
    return 0.5 * (P + P.T)


def _run(dataset, loss, config, test, blocks_for_epoch):
    X, y = dataset.features, dataset.labels
    u = loss.init(dataset.p) if config.u0 is None else np.array(config.u0, dtype=float)
    if config.psd_project:
        u = psd_project(u)
    trace = GDTrace(surrogate=f"tanh(kappa*ds), kappa={loss.kappa}" if isinstance(loss, RankingHinge) else "none")
    for t in range(config.T):
        blocks = blocks_for_epoch(t)
        I, J = _block_pairs(blocks)
        record = (t + 1) % config.record_every == 0 or t + 1 == config.T
        if blocks.shape[0] > 1 or record:
            risks = loss.pair_losses(u, X, y, I, J).mean(axis=1)
        # with a single block the selection is trivial; risks are only for the trace
        k = 0 if blocks.shape[0] == 1 else int(np.argsort(risks, kind="stable")[(len(risks) - 1) // 2])
        g = loss.pair_grad_sum(u, X, y, I[k], J[k]) / I.shape[1]
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(f"non-finite gradient at epoch {t}")
        u = u - config.step(t) * g
        if config.psd_project:
            u = psd_project(u)
        if not record:
            continue
        trace.epoch.append(t + 1)
        trace.block_risks.append(risks)
        trace.selected_block.append(k)
        trace.median_block_risk.append(median(risks))
        trace.selected_block_risk.append(float(risks[k]))
        trace.train_risk.append(pairwise_risk(u, dataset, loss))
        trace.test_risk.append(pairwise_risk(u, test, loss) if test is not None else math.nan)
    return GDResult(u, trace)


def mou_gd(dataset, loss, config, test=None):
    """Median-of-U-statistics gradient descent.

    At epoch ``t`` the rows are split into ``config.K`` random blocks, each
    block's pair-mean surrogate loss is computed, the block holding the
    lower-central median risk is selected, and ``u`` moves by
    ``-gamma_t`` times the pair-mean gradient over that block.

    Parameters
    ----------
    dataset : PairwiseDataset
    loss : RankingHinge or MetricHinge
    config : GDConfig
    test : PairwiseDataset, optional
        Evaluated every epoch for the trace.

    Returns
    -------
    GDResult
        Final parameter and per-epoch :class:`GDTrace`.
    """
    n = dataset.n
    if n // config.K < 2:
        raise BlockTooSmall(f"K={config.K} leaves blocks with fewer than two rows (n={n})")
    rng = as_generator(config.seed)

    def blocks_for_epoch(t):
        # sorted rows keep pair order canonical, so K = 1 is plain full-batch GD
        return np.sort(partition_random(n, config.K, rng).blocks, axis=1)

    return _run(dataset, loss, config, test, blocks_for_epoch)


def pairwise_gd(dataset, loss, config, test=None):
    """Full-batch gradient descent on the pairwise risk (``config.K`` is ignored)."""
    n = dataset.n
    if n < 2:
        raise DatasetTooSmall("need at least two rows to form a pair")
    everything = np.arange(n)[None, :]
    return _run(dataset, loss, config, test, lambda t: everything)


# -- contamination and synthetic instances ---------------------------------------


def _count(fraction, n):
    f = float(fraction)
    if not (0.0 <= f < 0.5):
        raise BreakdownExceeded(f"outlier fraction must lie in [0, 1/2), got {f}")
    return snap_ceil(f * n)


def _append(dataset, Xo, yo):
    mask = np.concatenate([dataset.outlier_mask(), np.ones(len(yo), dtype=bool)])
    return PairwiseDataset(np.vstack([dataset.features, Xo]), np.concatenate([dataset.labels, yo]), mask)


def contaminate_pairwise(dataset, fraction, lam, sane_model, seed, width=None):
    """Append ``ceil(fraction n)`` rows drawn uniformly around ``(-lam w, lam)``.

    ``w`` is ``sane_model``, a parameter fitted on clean data.  The box has
    side ``width`` (default ``0.1 |lam|``) in every coordinate, labels
    included.
    """
    k = _count(fraction, dataset.n)
    if k == 0:
        return dataset
    w = np.asarray(sane_model, dtype=float).ravel()
    if w.size != dataset.p:
        raise ValueError("sane model dimension differs from the feature dimension")
    h = 0.5 * (0.1 * abs(lam) if width is None else float(width))
    rng = as_generator(seed)
    Xo = -lam * w + rng.uniform(-h, h, size=(k, dataset.p))
    yo = lam + rng.uniform(-h, h, size=k)
    return _append(dataset, Xo, yo)


def contaminate_metric(dataset, fraction, seed, lo=0.0, hi=5.0, label=2.0):
    """Append ``ceil(fraction n)`` rows uniform on ``[lo, hi]^q`` with a fixed label."""
    k = _count(fraction, dataset.n)
    if k == 0:
        return dataset
    rng = as_generator(seed)
    Xo = rng.uniform(lo, hi, size=(k, dataset.p))
    return _append(dataset, Xo, np.full(k, float(label)))


def planted_ranking(n, p, seed, noise=0.1, w_star=None):
    """Gaussian features with labels ``w_star @ x + noise``.

    Returns the dataset and the planted direction (unit norm when drawn).
    """
    rng = as_generator(seed)
    if w_star is None:
        w_star = rng.normal(size=p)
        w_star /= np.linalg.norm(w_star)
    w_star = np.asarray(w_star, dtype=float)
    X = rng.normal(size=(n, p))
    y = X @ w_star + noise * rng.normal(size=n)
    return PairwiseDataset(X, y), w_star


def planted_metric(n, q, seed, classes=3, spread=1.0, informative=2):
    """Gaussian clusters whose means differ only in the first ``informative`` coordinates."""
    rng = as_generator(seed)
    means = np.zeros((classes, q))
    means[:, :informative] = rng.normal(scale=2.0 * spread, size=(classes, informative))
    lab = rng.integers(0, classes, size=n)
    X = means[lab] + spread * rng.normal(size=(n, q))
    return PairwiseDataset(X, lab.astype(float))


def train_test_split(dataset, test_fraction, seed):
    """Random split; the test part holds ``round(test_fraction n)`` rows."""
    rng = as_generator(seed)
    perm = rng.permutation(dataset.n)
    k = int(round(test_fraction * dataset.n))
    return dataset.subset(np.sort(perm[k:])), dataset.subset(np.sort(perm[:k]))
