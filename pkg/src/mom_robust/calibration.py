"""Block-count calibration for median-of-means type estimators.

An *alpha mapping* is a function ``alpha: [0, 1/2] -> [0, 1]`` satisfying
``2 eps < alpha(eps) < 1`` on the open interval.  Taking ``K >= alpha(eps) n``
blocks guarantees that blocks free of outliers are a strict majority.  All the
constants shaping the deviation bounds (beta, gamma, Gamma, Delta, eta) are
functions of ``alpha(eps)`` and ``eps``.

Confidence levels are handled in log space: the admissible intervals reach
values such as ``exp(-4 n alpha)`` which underflow for ``n`` in the thousands.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional

from .errors import (
    BreakdownExceeded,
    DegenerateRange,
    DeltaOutOfRange,
    EpsilonOutOfRange,
    InvalidMapping,
    JointBreakdownExceeded,
)

__all__ = [
    "MappingKind",
    "AlphaMapping",
    "ARITHMETIC",
    "GEOMETRIC",
    "HARMONIC",
    "POLYNOMIAL",
    "DerivedConstants",
    "DeltaRange",
    "TwoSampleConstants",
    "alpha_value",
    "derived_constants",
    "generic_constants",
    "closed_form_constants",
    "block_count_chebyshev",
    "block_count_subgaussian",
    "delta_range_chebyshev",
    "delta_range_subgaussian",
    "two_sample_constants",
    "delta_range_two_sample",
    "two_sample_block_counts",
    "resolve_log_delta",
    "snap_ceil",
]

# log of the largest double strictly below 1: upper end of an interval open at 1
_LOG_BELOW_ONE = math.log(math.nextafter(1.0, 0.0))


class MappingKind(str, enum.Enum):
    ARITHMETIC = "Arithmetic"
    GEOMETRIC = "Geometric"
    HARMONIC = "Harmonic"
    POLYNOMIAL = "Polynomial"
    CUSTOM = "Custom"


_CLOSED_ALPHA = {
    MappingKind.ARITHMETIC: lambda e: (1.0 + 2.0 * e) / 2.0,
    MappingKind.GEOMETRIC: lambda e: math.sqrt(2.0 * e),
    MappingKind.HARMONIC: lambda e: 4.0 * e / (1.0 + 2.0 * e),
    MappingKind.POLYNOMIAL: lambda e: e * (2.5 - e),
}


@dataclass(frozen=True)
class AlphaMapping:
    """One of the four named mappings, or a user-supplied function.

    Custom mappings are validated pointwise whenever they are evaluated.
    """

    kind: MappingKind
    func: Optional[Callable[[float], float]] = None
    name: Optional[str] = None

    def __post_init__(self):
        kind = MappingKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is MappingKind.CUSTOM and self.func is None:
            raise InvalidMapping("a Custom mapping needs a function")
        if kind is not MappingKind.CUSTOM and self.func is not None:
            raise InvalidMapping(f"{kind.value} mapping takes no function")

    @classmethod
    def custom(cls, func, name="custom"):
        return cls(MappingKind.CUSTOM, func, name)

    @classmethod
    def from_name(cls, name):
        """Look up a named mapping, case-insensitively."""
        for kind in MappingKind:
            if kind is not MappingKind.CUSTOM and kind.value.lower() == str(name).lower():
                return cls(kind)
        raise InvalidMapping(f"unknown mapping {name!r}")

    @property
    def label(self):
        if self.kind is MappingKind.CUSTOM:
            return self.name or "custom"
        return self.kind.value

    def __call__(self, epsilon):
        return alpha_value(self, epsilon)


ARITHMETIC = AlphaMapping(MappingKind.ARITHMETIC)
GEOMETRIC = AlphaMapping(MappingKind.GEOMETRIC)
HARMONIC = AlphaMapping(MappingKind.HARMONIC)
POLYNOMIAL = AlphaMapping(MappingKind.POLYNOMIAL)


@dataclass(frozen=True)
class DerivedConstants:
    """Constants derived from ``alpha`` at a fixed outlier fraction.

    ``delta_const`` (Delta) is ``None`` at ``epsilon == 0``, where it is not
    defined.
    """

    epsilon: float
    alpha: float
    beta: float
    gamma: float
    cap_gamma: float
    delta_const: Optional[float]
    eta: float


@dataclass(frozen=True)
class DeltaRange:
    """Closed interval of admissible confidence parameters, stored as logs.

    ``log_lower`` may be ``-inf`` for intervals open at 0.
    """

    log_lower: float
    log_upper: float

    @property
    def lower(self):
        # the smallest positive double stands in for an open lower end
        return max(math.exp(self.log_lower), math.ulp(0.0))

    @property
    def upper(self):
        return math.exp(self.log_upper)

    @property
    def log_size(self):
        return self.log_upper - self.log_lower

    def contains(self, delta=None, *, log_delta=None, rtol=1e-12):
        ld = resolve_log_delta(delta, log_delta)
        slack = rtol * max(1.0, abs(ld))
        return self.log_lower - slack <= ld <= self.log_upper + slack

    def check(self, delta=None, *, log_delta=None, what="delta"):
        """Return ``log(delta)`` or raise :class:`DeltaOutOfRange`."""
        ld = resolve_log_delta(delta, log_delta)
        if not self.contains(log_delta=ld):
            raise DeltaOutOfRange(
                f"{what} = exp({ld:.6g}) outside admissible range {self}", self
            )
        return ld

    def points(self, count):
        """``count`` log-spaced confidence levels spanning the range, as logs."""
        if count < 1:
            raise ValueError("count must be positive")
        lo = self.log_lower
        if math.isinf(lo):
            raise DegenerateRange("cannot span an interval open at 0")
        if count == 1:
            return [0.5 * (lo + self.log_upper)]
        step = (self.log_upper - lo) / (count - 1)
        return [lo + i * step for i in range(count - 1)] + [self.log_upper]

    def __str__(self):
        return f"[exp({self.log_lower:.6g}), exp({self.log_upper:.6g})]"


@dataclass(frozen=True)
class TwoSampleConstants:
    epsilon_x: float
    epsilon_y: float
    epsilon_tilde: float
    alpha_tilde: float
    eta_xy: float
    eta_x: float
    eta_y: float
    beta_x: float
    beta_y: float


def resolve_log_delta(delta=None, log_delta=None):
    """Normalise a confidence parameter given either directly or as its log."""
    if (delta is None) == (log_delta is None):
        raise TypeError("give exactly one of delta and log_delta")
    if log_delta is not None:
        ld = float(log_delta)
        if not (ld < 0.0) or math.isnan(ld):
            raise DeltaOutOfRange(f"log_delta must be negative, got {ld}")
        return ld
    d = float(delta)
    if not (0.0 < d < 1.0):
        raise DeltaOutOfRange(f"delta must lie in (0, 1), got {d}")
    return math.log(d)


def snap_ceil(x, rtol=1e-9):
    """Ceiling that does not jump a full unit on round-off above an integer."""
    r = round(x)
    if abs(x - r) <= rtol * max(1.0, abs(x)):
        return int(r)
    return int(math.ceil(x))


def _check_epsilon(epsilon, upper_open=False):
    e = float(epsilon)
    if math.isnan(e) or e < 0.0 or e > 0.5:
        raise EpsilonOutOfRange(f"epsilon must lie in [0, 1/2], got {e}")
    if upper_open and e >= 0.5:
        raise BreakdownExceeded(f"epsilon = {e} reaches the breakdown point 1/2")
    return e


def alpha_value(mapping, epsilon):
    """Evaluate ``alpha(epsilon)``.

    Raises
    ------
    EpsilonOutOfRange
        If ``epsilon`` is outside ``[0, 1/2]``.
    InvalidMapping
        If a custom mapping violates ``2 eps < alpha(eps) < 1`` at an interior
        point.
    """
    e = _check_epsilon(epsilon)
    if mapping.kind is not MappingKind.CUSTOM:
        return _CLOSED_ALPHA[mapping.kind](e)
    a = float(mapping.func(e))
    if math.isnan(a) or a < 0.0 or a > 1.0:
        raise InvalidMapping(f"{mapping.label}: alpha({e}) = {a} outside [0, 1]")
    if 0.0 < e < 0.5 and not (2.0 * e < a < 1.0):
        raise InvalidMapping(
            f"{mapping.label}: alpha({e}) = {a} violates 2*eps < alpha < 1"
        )
    return a


def generic_constants(alpha, epsilon):
    """Derived constants from the generic formulas, for any admissible alpha."""
    a, e = float(alpha), float(epsilon)
    gap = a - 2.0 * e
    if not gap > 0.0:
        raise InvalidMapping(f"alpha = {a} must exceed 2*eps = {2 * e}")
    return DerivedConstants(
        epsilon=e,
        alpha=a,
        beta=2.0 * a / gap,
        gamma=math.sqrt(a) * (a - e) / gap**1.5,
        cap_gamma=math.sqrt(a / gap),
        delta_const=math.sqrt(a / e) if e > 0.0 else None,
        eta=(a - e) / a,
    )


def closed_form_constants(kind, epsilon):
    """Derived constants from the simplified per-mapping expressions.

    These remain finite at ``epsilon = 0`` for every named mapping, where the
    generic formulas are ``0/0`` for the Geometric, Harmonic and Polynomial
    cases.
    """
    kind = MappingKind(kind)
    e = float(epsilon)
    a = _CLOSED_ALPHA[kind](e)
    w = 1.0 - 2.0 * e
    if kind is MappingKind.ARITHMETIC:
        beta = 2.0 * (1.0 + 2.0 * e) / w
        gamma = math.sqrt(1.0 + 2.0 * e) / w**1.5
        cap = math.sqrt(1.0 + 2.0 * e) / math.sqrt(w)
        dlt = math.sqrt((1.0 + 2.0 * e) / (2.0 * e)) if e > 0 else None
        eta = 1.0 / (1.0 + 2.0 * e)
    elif kind is MappingKind.GEOMETRIC:
        s = math.sqrt(2.0 * e)
        beta = 2.0 * (1.0 + s) / w
        gamma = (2.0 - s) * (1.0 + s) ** 1.5 / (2.0 * w**1.5)
        cap = math.sqrt(1.0 + s) / math.sqrt(w)
        dlt = (2.0 / e) ** 0.25 if e > 0 else None
        eta = (2.0 - s) / 2.0
    elif kind is MappingKind.HARMONIC:
        beta = 4.0 / w
        gamma = (3.0 - 2.0 * e) / (math.sqrt(2.0) * w**1.5)
        cap = math.sqrt(2.0) / math.sqrt(w)
        dlt = math.sqrt(4.0 / (1.0 + 2.0 * e)) if e > 0 else None
        eta = (3.0 - 2.0 * e) / 4.0
    elif kind is MappingKind.POLYNOMIAL:
        beta = 2.0 * (5.0 - 2.0 * e) / w
        gamma = (3.0 - 2.0 * e) * math.sqrt(5.0 - 2.0 * e) / w**1.5
        cap = math.sqrt(5.0 - 2.0 * e) / math.sqrt(w)
        dlt = math.sqrt((5.0 - 2.0 * e) / 2.0) if e > 0 else None
        eta = (3.0 - 2.0 * e) / (5.0 - 2.0 * e)
    else:
        raise InvalidMapping("custom mappings have no closed form")
    return DerivedConstants(e, a, beta, gamma, cap, dlt, eta)


def derived_constants(mapping, epsilon):
    """All of alpha, beta, gamma, Gamma, Delta, eta at ``epsilon``.

    Named mappings use their closed forms, which extend continuously to
    ``epsilon = 0``; custom mappings use the generic formulas.  Delta is
    reported as ``None`` at ``epsilon = 0``.
    """
    e = _check_epsilon(epsilon, upper_open=True)
    if mapping.kind is not MappingKind.CUSTOM:
        return closed_form_constants(mapping.kind, e)
    a = alpha_value(mapping, e)
    return generic_constants(a, e)


def delta_range_chebyshev(mapping, epsilon, n):
    """Confidence levels for which the Chebyshev-path block count is valid.

    ``[exp(-n / beta), exp(-n alpha / beta)]``; equivalently
    ``alpha n <= beta log(1/delta) <= n``.  When ``alpha(0) = 0`` the upper end
    is open at 1.
    """
    if n < 1:
        raise ValueError("n must be positive")
    c = derived_constants(mapping, epsilon)
    lo = -n / c.beta
    hi = min(-n * c.alpha / c.beta, _LOG_BELOW_ONE)
    if lo > hi:
        raise DegenerateRange(f"empty Chebyshev range for n={n}, eps={epsilon}")
    return DeltaRange(lo, hi)


def delta_range_subgaussian(mapping, epsilon, n):
    """``(0, exp(-4 n alpha)]``, or ``(0, 1/e]`` when there are no outliers."""
    if n < 1:
        raise ValueError("n must be positive")
    e = _check_epsilon(epsilon, upper_open=True)
    if e == 0.0:
        return DeltaRange(-math.inf, -1.0)
    a = alpha_value(mapping, e)
    return DeltaRange(-math.inf, -4.0 * n * a)


def block_count_chebyshev(mapping, epsilon, delta, n, *, log_delta=None):
    """``K = ceil(beta(eps) log(1/delta))`` for a delta inside the Chebyshev range.

    Raises
    ------
    DeltaOutOfRange
        With the admissible :class:`DeltaRange` attached.
    """
    rng = delta_range_chebyshev(mapping, epsilon, n)
    ld = rng.check(delta, log_delta=log_delta)
    c = derived_constants(mapping, epsilon)
    k = snap_ceil(-c.beta * ld)
    # the range guarantees alpha n <= K <= n up to round-off at the ends
    return int(min(max(k, snap_ceil(c.alpha * n), 1), n))


def block_count_subgaussian(mapping, epsilon, n):
    """``K = ceil(alpha(eps) n)``, and ``K = 1`` without outliers."""
    if n < 1:
        raise ValueError("n must be positive")
    e = _check_epsilon(epsilon, upper_open=True)
    if e == 0.0:
        return 1
    a = alpha_value(mapping, e)
    return int(min(max(snap_ceil(a * n), 1), n))


def two_sample_constants(mapping, eps_x, eps_y):
    """Constants for the cross-block two-sample estimator."""
    ex = _check_epsilon(eps_x)
    ey = _check_epsilon(eps_y)
    et = ex + ey - ex * ey
    if et >= 0.5:
        raise JointBreakdownExceeded(
            f"eps_x + eps_y - eps_x*eps_y = {et:.6g} reaches 1/2"
        )
    c = derived_constants(mapping, et)
    root = math.sqrt(c.alpha)

    def eta_of(ez):
        return 1.0 if ez == 0.0 else 1.0 - ez / root

    eta_x, eta_y = eta_of(ex), eta_of(ey)
    num = 18.0 * c.eta**2
    den = (2.0 * c.eta - 1.0) ** 2
    return TwoSampleConstants(
        epsilon_x=ex,
        epsilon_y=ey,
        epsilon_tilde=et,
        alpha_tilde=c.alpha,
        eta_xy=c.eta,
        eta_x=eta_x,
        eta_y=eta_y,
        beta_x=num / (eta_x * den),
        beta_y=num / (eta_y * den),
    )


def delta_range_two_sample(constants, n, m):
    """Admissible delta for the two-sample block counts.

    Derived from ``sqrt(alpha) n <= K_X <= n`` and ``sqrt(alpha) m <= K_Y <= m``
    with ``K_Z = beta_Z log(2/delta)``, intersected with ``delta < 1``.
    """
    if n < 1 or m < 1:
        raise ValueError("sample sizes must be positive")
    root = math.sqrt(constants.alpha_tilde)
    t_lo = max(root * n / constants.beta_x, root * m / constants.beta_y)
    t_hi = min(n / constants.beta_x, m / constants.beta_y)
    log2 = math.log(2.0)
    # log(2/delta) = t  <=>  log(delta) = log 2 - t
    hi = min(log2 - t_lo, _LOG_BELOW_ONE)
    lo = log2 - t_hi
    if lo > hi:
        raise DegenerateRange(
            f"no admissible delta for n={n}, m={m}: need log(2/delta) in "
            f"[{max(t_lo, log2):.6g}, {t_hi:.6g}]"
        )
    return DeltaRange(lo, hi)


def two_sample_block_counts(constants, delta, n, m, *, log_delta=None):
    """``(K_X, K_Y) = (ceil(beta_X log(2/delta)), ceil(beta_Y log(2/delta)))``."""
    rng = delta_range_two_sample(constants, n, m)
    ld = rng.check(delta, log_delta=log_delta)
    t = math.log(2.0) - ld
    root = math.sqrt(constants.alpha_tilde)
    kx = min(max(snap_ceil(constants.beta_x * t), snap_ceil(root * n), 1), n)
    ky = min(max(snap_ceil(constants.beta_y * t), snap_ceil(root * m), 1), m)
    return int(kx), int(ky)
