"""Deviation, expectation and generalization bounds for median-of-block estimators.

Each gated bound checks its confidence level against the admissible interval
from :mod:`mom_robust.calibration` and raises
:class:`~mom_robust.errors.DeltaOutOfRange` outside of it.  The ungated
``*_width`` helpers evaluate the same closed forms for any confidence level,
which is handy for plots and for callers who manage admissibility themselves.

Scale parameters (standard deviation, sub-Gaussian parameter, variance proxy,
sup-norm bound) are never estimated from contaminated data here.  Use
:func:`estimate_variance_proxy` on a clean calibration sample, or supply them
analytically.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from . import calibration as cal
from .errors import (
    EpsilonZero,
    SampleTooSmall,
    SumBreakdownExceeded,
    UnsupportedDegree,
)
from .estimators import MAX_DEGREE, CrossKernel, UKernel, _as_values, _finite
from .partitioning import as_generator

__all__ = [
    "BoundKind",
    "EstimateReport",
    "VarianceProxy",
    "chebyshev_width",
    "subgaussian_width",
    "expectation_width",
    "generalization_width",
    "mom_bound_chebyshev",
    "mom_bound_subgaussian",
    "mom_expectation_bound",
    "mou_bound_chebyshev",
    "mou_bound_bounded",
    "mou_expectation_bound",
    "mou2_bound",
    "mou2_diag_bound_chebyshev",
    "mou2_diag_bound_bounded",
    "mou2_diag_expectation_bound",
    "generalization_bound",
    "estimate_variance_proxy",
]

_SQRT_E = math.sqrt(math.e)


class BoundKind(str, enum.Enum):
    CHEBYSHEV = "Chebyshev"
    SUBGAUSSIAN = "SubGaussian"
    EXPECTATION = "Expectation"
    GENERALIZATION = "Generalization"


@dataclass(frozen=True)
class EstimateReport:
    """An estimate together with the deviation certificate that backs it.

    ``log_delta`` is ``None`` for expectation bounds.  When ``admissible`` is
    given, ``log_delta`` must lie inside it.
    """

    estimate: float
    k_used: int
    log_delta: Optional[float]
    bound_width: float
    bound_kind: BoundKind
    mapping: str
    epsilon: float
    admissible: Optional[cal.DeltaRange] = field(default=None, compare=False)

    def __post_init__(self):
        if not (self.bound_width >= 0.0):
            raise ValueError(f"bound width must be nonnegative, got {self.bound_width}")
        if self.admissible is not None and self.log_delta is not None:
            self.admissible.check(log_delta=self.log_delta)

    @property
    def delta(self):
        return None if self.log_delta is None else math.exp(self.log_delta)

    @property
    def interval(self):
        return (self.estimate - self.bound_width, self.estimate + self.bound_width)


@dataclass(frozen=True)
class VarianceProxy:
    """Variance components of a kernel.

    One-sample kernels carry ``zetas = (zeta_1, ..., zeta_d)``.  Cross kernels
    carry ``sigma_sq = Var H(X, Y)`` and the two conditional-mean variances.
    ``total`` is the proxy entering the Chebyshev-type bounds.
    """

    total: float
    zetas: Tuple[float, ...] = ()
    sigma_sq: Optional[float] = None
    sigma1_sq: Optional[float] = None
    sigma2_sq: Optional[float] = None

    @classmethod
    def one_sample(cls, zetas):
        z = tuple(float(v) for v in zetas)
        d = len(z)
        total = math.factorial(d) * math.fsum(math.comb(d, c + 1) * v for c, v in enumerate(z))
        return cls(total=total, zetas=z)

    @classmethod
    def two_sample(cls, sigma_sq, sigma1_sq, sigma2_sq):
        s, s1, s2 = float(sigma_sq), float(sigma1_sq), float(sigma2_sq)
        return cls(total=s + s1 + s2, sigma_sq=s, sigma1_sq=s1, sigma2_sq=s2)

    @property
    def is_two_sample(self):
        return self.sigma_sq is not None

    @property
    def degree(self):
        return len(self.zetas)

    @property
    def sigma(self):
        return math.sqrt(self.total)

    def block_variance(self, B, B_y=None):
        """Exact variance of the U-statistic of one block.

        One-sample: ``sum_c C(d,c) C(B-d,d-c) zeta_c / C(B,d)``.  Two-sample
        (``B`` and ``B_y`` observations): ``(sigma^2 + (B_y-1) sigma_1^2 +
        (B-1) sigma_2^2) / (B B_y)``.
        """
        if self.is_two_sample:
            by = B if B_y is None else B_y
            return (self.sigma_sq + (by - 1) * self.sigma1_sq + (B - 1) * self.sigma2_sq) / (B * by)
        d = self.degree
        if B < d:
            raise SampleTooSmall(f"block size {B} below kernel degree {d}")
        num = math.fsum(
            math.comb(d, c) * math.comb(B - d, d - c) * self.zetas[c - 1] for c in range(1, d + 1)
        )
        return num / math.comb(B, d)


# -- ungated closed forms ---------------------------------------------------


def _nonneg(x, what):
    x = float(x)
    if not (x >= 0.0):
        raise ValueError(f"{what} must be nonnegative, got {x}")
    return x


def chebyshev_width(scale, gamma, n, log_delta):
    """``4 sqrt(e) * scale * gamma * sqrt((1 + log(1/delta)) / n)``."""
    return 4.0 * _SQRT_E * _nonneg(scale, "scale") * gamma * math.sqrt((1.0 - log_delta) / n)


def subgaussian_width(scale, cap_gamma, n, log_delta):
    """``4 * scale * Gamma * sqrt(log(1/delta) / n)``."""
    return 4.0 * _nonneg(scale, "scale") * cap_gamma * math.sqrt(-log_delta / n)


def expectation_width(scale, cap_gamma, delta_const, n, c_o, alpha_o, outlier_factor=1.0):
    """``2 * scale * Gamma * (4 f C_O Delta / n^((1-alpha_O)/2) + sqrt(pi/n))``.

    ``f`` is ``outlier_factor`` (``sqrt(2)`` for the diagonal two-sample form).
    """
    _check_growth(c_o, alpha_o)
    head = 4.0 * outlier_factor * c_o * delta_const / n ** ((1.0 - alpha_o) / 2.0)
    return 2.0 * _nonneg(scale, "scale") * cap_gamma * (head + math.sqrt(math.pi / n))


def generalization_width(M, vc_dim, n, log_delta, cap_gamma):
    """``8 sqrt(2) M Gamma sqrt((VC (1 + log n) + log(1/delta)) / n)``."""
    if vc_dim < 0:
        raise ValueError("VC dimension must be nonnegative")
    inner = (vc_dim * (1.0 + math.log(n)) - log_delta) / n
    return 8.0 * math.sqrt(2.0) * _nonneg(M, "M") * cap_gamma * math.sqrt(inner)


def _check_growth(c_o, alpha_o):
    if c_o < 1.0:
        raise ValueError(f"outlier growth constant must be >= 1, got {c_o}")
    if not (0.0 <= alpha_o < 1.0):
        raise ValueError(f"outlier growth exponent must lie in [0, 1), got {alpha_o}")


def _check_n(n):
    if int(n) != n or n < 1:
        raise ValueError(f"sample size must be a positive integer, got {n}")
    return int(n)


# -- one-sample median-of-means ---------------------------------------------


def mom_bound_chebyshev(sigma, n, delta=None, epsilon=0.0, mapping=cal.HARMONIC, *, log_delta=None):
    """Half-width of the MoM deviation interval under a finite variance.

    Valid for ``delta`` in :func:`~mom_robust.calibration.delta_range_chebyshev`
    with the block count of
    :func:`~mom_robust.calibration.block_count_chebyshev`.
    """
    n = _check_n(n)
    ld = cal.delta_range_chebyshev(mapping, epsilon, n).check(delta, log_delta=log_delta)
    c = cal.derived_constants(mapping, epsilon)
    return chebyshev_width(sigma, c.gamma, n, ld)


def mom_bound_subgaussian(rho, n, delta=None, epsilon=0.0, mapping=cal.HARMONIC, *, log_delta=None):
    """Half-width of the MoM deviation interval for sub-Gaussian inliers."""
    n = _check_n(n)
    ld = cal.delta_range_subgaussian(mapping, epsilon, n).check(delta, log_delta=log_delta)
    c = cal.derived_constants(mapping, epsilon)
    return subgaussian_width(rho, c.cap_gamma, n, ld)


def _delta_const(mapping, epsilon):
    c = cal.derived_constants(mapping, epsilon)
    if c.delta_const is None:
        raise EpsilonZero(
            "the outlier term needs epsilon > 0; without outliers the bound "
            "reduces to its sqrt(pi/n) term"
        )
    return c


def mom_expectation_bound(rho, n, epsilon, c_o, alpha_o, mapping=cal.HARMONIC):
    """Bound on ``E|MoM - theta|`` for sub-Gaussian inliers and polynomially many outliers."""
    n = _check_n(n)
    c = _delta_const(mapping, epsilon)
    return expectation_width(rho, c.cap_gamma, c.delta_const, n, c_o, alpha_o)


# -- one-sample median-of-U-statistics --------------------------------------


def _check_degree(d):
    if int(d) != d or d < 1:
        raise ValueError(f"kernel degree must be a positive integer, got {d}")
    return int(d)


def mou_bound_chebyshev(proxy_sigma, n, delta=None, epsilon=0.0, mapping=cal.HARMONIC, *, log_delta=None):
    """MoU half-width from the variance proxy ``Sigma(h)`` (pass its square root)."""
    if isinstance(proxy_sigma, VarianceProxy):
        proxy_sigma = proxy_sigma.sigma
    return mom_bound_chebyshev(proxy_sigma, n, delta, epsilon, mapping, log_delta=log_delta)


def mou_bound_bounded(M, d, n, delta=None, epsilon=0.0, mapping=cal.HARMONIC, *, log_delta=None):
    """MoU half-width for a kernel bounded by ``M``: sub-Gaussian form with ``rho = sqrt(d) M``."""
    d = _check_degree(d)
    return mom_bound_subgaussian(math.sqrt(d) * _nonneg(M, "M"), n, delta, epsilon, mapping, log_delta=log_delta)


def mou_expectation_bound(M, d, n, epsilon, c_o, alpha_o, mapping=cal.HARMONIC):
    d = _check_degree(d)
    return mom_expectation_bound(math.sqrt(d) * _nonneg(M, "M"), n, epsilon, c_o, alpha_o, mapping)


# -- two-sample ---------------------------------------------------------------


def mou2_bound(proxy_sigma, n, m, delta=None, eps_x=0.0, eps_y=0.0, mapping=cal.HARMONIC, *, log_delta=None):
    """Cross-block two-sample half-width ``12 sqrt(3) Sigma(H) gamma(eps~) sqrt((1 + log(2/delta)) / (n ^ m))``."""
    if isinstance(proxy_sigma, VarianceProxy):
        proxy_sigma = proxy_sigma.sigma
    n, m = _check_n(n), _check_n(m)
    consts = cal.two_sample_constants(mapping, eps_x, eps_y)
    ld = cal.delta_range_two_sample(consts, n, m).check(delta, log_delta=log_delta)
    c = cal.derived_constants(mapping, consts.epsilon_tilde)
    t = math.log(2.0) - ld
    return 12.0 * math.sqrt(3.0) * _nonneg(proxy_sigma, "Sigma") * c.gamma * math.sqrt((1.0 + t) / min(n, m))


def _diag_setup(eps_x, eps_y, n, m):
    n = _check_n(n)
    m = n if m is None else _check_n(m)
    ex, ey = float(eps_x), float(eps_y)
    if ex < 0 or ey < 0:
        raise cal.EpsilonOutOfRange("outlier fractions must be nonnegative")
    s = ex + ey
    if s >= 0.5:
        raise SumBreakdownExceeded(f"eps_x + eps_y = {s:.6g} reaches 1/2")
    return s, min(n, m)


def mou2_diag_bound_chebyshev(proxy_sigma, n, delta=None, eps_x=0.0, eps_y=0.0, mapping=cal.HARMONIC, *, m=None, log_delta=None):
    """Diagonal two-sample half-width, Chebyshev form evaluated at ``eps_x + eps_y``.

    With ``m != n`` the smaller size plays the role of ``n``.
    """
    if isinstance(proxy_sigma, VarianceProxy):
        proxy_sigma = proxy_sigma.sigma
    s, size = _diag_setup(eps_x, eps_y, n, m)
    return mom_bound_chebyshev(proxy_sigma, size, delta, s, mapping, log_delta=log_delta)


def mou2_diag_bound_bounded(M, n, delta=None, eps_x=0.0, eps_y=0.0, mapping=cal.HARMONIC, *, m=None, log_delta=None):
    """``8 M Gamma(eps_x + eps_y) sqrt(log(1/delta) / n)`` for ``|H| <= M``."""
    s, size = _diag_setup(eps_x, eps_y, n, m)
    return mom_bound_subgaussian(2.0 * _nonneg(M, "M"), size, delta, s, mapping, log_delta=log_delta)


def mou2_diag_expectation_bound(M, n, eps_x, eps_y, c_o, alpha_o, mapping=cal.HARMONIC, *, m=None):
    s, size = _diag_setup(eps_x, eps_y, n, m)
    c = _delta_const(mapping, s)
    return expectation_width(2.0 * _nonneg(M, "M"), c.cap_gamma, c.delta_const, size, c_o, alpha_o, math.sqrt(2.0))


# -- learning -----------------------------------------------------------------


def generalization_bound(M, vc_dim, n, delta=None, epsilon=0.0, mapping=cal.HARMONIC, *, log_delta=None):
    """Excess-risk bound of the MoU pairwise risk minimizer for a loss bounded by ``M``.

    Admissible for ``delta`` in ``(0, exp(-4 n alpha(eps))]``. The factor
    ``Gamma`` is evaluated at the contamination level ``epsilon`` itself.
    """
    n = _check_n(n)
    ld = cal.delta_range_subgaussian(mapping, epsilon, n).check(delta, log_delta=log_delta)
    c = cal.derived_constants(mapping, epsilon)
    return generalization_width(M, vc_dim, n, ld, c.cap_gamma)


# -- variance proxies ---------------------------------------------------------


def _clamp(name, value):
    if value < 0.0:
        warnings.warn(f"estimated {name} = {value:.3g} < 0 clamped to 0", RuntimeWarning, stacklevel=3)
        return 0.0
    return float(value)


def _redraw_collisions(rng, N, idx, free):
    """Redraw the ``free`` trailing columns of rows whose indices repeat."""
    for _ in range(200):
        bad = _has_dupes(idx)
        if not bad.any():
            return idx
        idx[bad, -free:] = rng.integers(0, N, size=(int(bad.sum()), free))
    raise SampleTooSmall("could not draw distinct index tuples; sample too small")


def _has_dupes(idx):
    k = idx.shape[-1]
    out = np.zeros(idx.shape[:-1], dtype=bool)
    for a in range(k):
        for b in range(a + 1, k):
            out |= idx[..., a] == idx[..., b]
    return out


def _zeta_hat(v, kernel, c, rng, anchors, completions):
    d = kernel.degree
    N = v.size
    if c == d:
        count = anchors * completions
        idx = _redraw_collisions(rng, N, rng.integers(0, N, size=(count, d)), d)
        vals = kernel.func(*[v[idx[:, j]] for j in range(d)])
        return float(np.var(_finite(np.asarray(vals, dtype=float), kernel.name), ddof=1))
    head = _redraw_collisions(rng, N, rng.integers(0, N, size=(anchors, c)), c)
    idx = np.empty((anchors, completions, d), dtype=np.intp)
    idx[:, :, :c] = head[:, None, :]
    idx[:, :, c:] = rng.integers(0, N, size=(anchors, completions, d - c))
    idx = _redraw_collisions(rng, N, idx, d - c)
    vals = kernel.func(*[v[idx[..., j]] for j in range(d)])
    vals = _finite(np.asarray(vals, dtype=float), kernel.name)
    # variance of anchor means overstates zeta_c by the completion noise
    between = np.var(vals.mean(axis=1), ddof=1)
    within = np.var(vals, axis=1, ddof=1).mean()
    return float(between - within / completions)


def estimate_variance_proxy(sample, kernel, seed, *, y=None, anchors=None, completions=64, max_grid=2000):
    """Plug-in estimate of the variance components of ``kernel``.

    Parameters
    ----------
    sample : array_like or Sample
        Clean calibration sample (the first sample for a cross kernel).
    kernel : UKernel or CrossKernel
    seed : int or numpy.random.Generator
        Drives the resampling of completions and grid subsampling.
    y : array_like or Sample, optional
        Second sample, required for a cross kernel.
    anchors : int, optional
        Number of anchor tuples for the conditional means; defaults to
        ``min(N, 2000)``.
    completions : int
        Completions drawn per anchor.
    max_grid : int
        Cap on each side of the two-sample evaluation grid.

    Returns
    -------
    VarianceProxy

    Notes
    -----
    For a one-sample kernel, ``zeta_c`` with ``c < d`` is the variance of the
    anchor-wise mean of the kernel over random completions, corrected by the
    within-anchor variance divided by the number of completions.  For a cross
    kernel the grid ``H(x_i, y_j)`` is decomposed as a two-way layout: row and
    column mean squares, corrected by the residual mean square, give
    ``sigma_1^2`` and ``sigma_2^2``.  Negative estimates are clamped to 0 with
    a ``RuntimeWarning``.
    """
    rng = as_generator(seed)
    if isinstance(kernel, CrossKernel):
        if y is None:
            raise TypeError("a cross kernel needs the second sample y")
        return _cross_proxy(_as_values(sample), _as_values(y), kernel, rng, max_grid)
    if not isinstance(kernel, UKernel):
        raise TypeError("kernel must be a UKernel or CrossKernel")
    d = kernel.degree
    if d > MAX_DEGREE:
        raise UnsupportedDegree(f"variance proxies are limited to degree <= {MAX_DEGREE}")
    v = _as_values(sample)
    if v.size < max(2 * d, 2):
        raise SampleTooSmall(f"need at least {max(2 * d, 2)} observations, got {v.size}")
    if d == 1:
        z1 = float(np.var(_finite(np.asarray(kernel.func(v), dtype=float), kernel.name), ddof=1))
        return VarianceProxy.one_sample([z1])
    a = min(v.size, 2000) if anchors is None else int(anchors)
    zetas = [_clamp(f"zeta_{c}", _zeta_hat(v, kernel, c, rng, a, completions)) for c in range(1, d + 1)]
    return VarianceProxy.one_sample(zetas)


def _cross_proxy(x, y, kernel, rng, max_grid):
    if x.size < 2 or y.size < 2:
        raise SampleTooSmall("each sample needs at least 2 observations")
    if x.size > max_grid:
        x = rng.choice(x, max_grid, replace=False)
    if y.size > max_grid:
        y = rng.choice(y, max_grid, replace=False)
    r, c = x.size, y.size
    g = _finite(np.asarray(kernel.func(x[:, None], y[None, :]), dtype=float), kernel.name)
    grand = g.mean()
    rows = g.mean(axis=1)
    cols = g.mean(axis=0)
    ms_row = c * np.sum((rows - grand) ** 2) / (r - 1)
    ms_col = r * np.sum((cols - grand) ** 2) / (c - 1)
    resid = g - rows[:, None] - cols[None, :] + grand
    ms_err = np.sum(resid**2) / ((r - 1) * (c - 1))
    s1 = _clamp("sigma_1^2", (ms_row - ms_err) / c)
    s2 = _clamp("sigma_2^2", (ms_col - ms_err) / r)
    return VarianceProxy.two_sample(s1 + s2 + ms_err, s1, s2)
