"""Monte Carlo experiments behind the command-line interface.

Every run draws its randomness from ``default_rng([seed, n, run])``, so a run
can be reproduced in isolation and results do not depend on execution order.
Averages use compensated summation.
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import stats

from .. import bounds as bnd
from .. import calibration as cal
from .. import contamination as con
from .. import estimators as est
from .. import learning as lrn
from ..errors import ConfigError, DegenerateRange, DeltaOutOfRange, NumericError, SumBreakdownExceeded
from ..partitioning import diagonal_pairing, partition_random
from .config import Command, ExperimentConfig
from .io import Table, read_csv_dataset

__all__ = [
    "ExperimentResult",
    "run_seed",
    "run_break_experiment",
    "run_coverage",
    "run_learning",
    "run_calibrate",
    "run_experiment",
]

BREAK_COLUMNS = (
    "n", "estimator", "theta", "mean_abs_error", "std_err", "runs", "K", "epsilon", "mapping", "log_delta",
)
COVERAGE_COLUMNS = (
    "n", "epsilon", "mapping", "path", "K", "log_delta", "delta", "bound",
    "failures", "runs", "failure_rate", "p_value", "status",
)
LEARNING_COLUMNS = (
    "n", "setting", "method", "mean_test_risk", "std_err", "runs", "K", "epsilon", "mapping", "log_delta",
)
CALIBRATE_COLUMNS = (
    "n", "epsilon", "mapping", "alpha", "beta", "gamma", "cap_gamma", "delta_const", "eta",
    "K_subgaussian", "log_delta_subgaussian_upper", "log_delta_chebyshev_lower",
    "log_delta_chebyshev_upper",
)


@dataclass
class ExperimentResult:
    """Output of one command.

    ``samples`` maps ``(n, name)`` to per-run values (absolute errors, test
    risks) for callers that need more than the averages.  ``traces`` maps
    trace names to tables written alongside the main table.  ``errors`` lists
    rows that could not be computed.
    """

    table: Table
    samples: Dict[Tuple[int, str], np.ndarray] = field(default_factory=dict)
    traces: Dict[str, Table] = field(default_factory=dict)
    errors: List[str] = field(default_factory=list)


def run_seed(config, n, run):
    return np.random.default_rng([config.seed, int(n), int(run)])


def _mean_se(values):
    v = np.asarray(values, dtype=float)
    m = math.fsum(v) / v.size
    if v.size < 2:
        return m, math.nan
    var = math.fsum((v - m) ** 2) / (v.size - 1)
    return m, math.sqrt(var / v.size)


@contextlib.contextmanager
def _context(label):
    """Prefix numeric errors raised inside with the experiment coordinates."""
    try:
        yield
    except NumericError as exc:
        if exc.args:
            exc.args = (f"[{label}] {exc.args[0]}",) + exc.args[1:]
        raise


def _check_params(config, allowed):
    extra = set(config.params) - set(allowed)
    if extra:
        raise ConfigError(f"unknown params for {config.command.value}: {sorted(extra)}")


def _mirror(spec):
    rule = spec.outlier_rule
    if isinstance(rule, con.DiracAt):
        rule = con.DiracAt(-rule.value)
    elif isinstance(rule, con.UniformBox):
        rule = con.UniformBox(-rule.hi, -rule.lo)
    return replace(spec, outlier_rule=rule)


# -- break experiments ------------------------------------------------------------


def run_break_experiment(config):
    """Absolute errors of plain and median-of-block estimators against the true value.

    BreakMean and BreakMedian compare the mean, median, trimmed mean and MoM;
    BreakVariance compares the variance U-statistic with MoU; MannWhitney
    compares the two-sample U-statistic with the diagonal MoU.  Block counts
    follow ``K = ceil(alpha(eps) n)``.
    """
    cmd = config.command
    if cmd not in (Command.BREAK_MEAN, Command.BREAK_MEDIAN, Command.BREAK_VARIANCE, Command.MANN_WHITNEY):
        raise ConfigError(f"{cmd.value} is not a break experiment")
    _check_params(config, {"trim", "theta", "y_contamination"})
    mapping = config.alpha_mapping
    spec = config.contamination
    table = Table(BREAK_COLUMNS)
    result = ExperimentResult(table)
    trim = float(config.params.get("trim", 0.1))
    y_spec = None
    if cmd is Command.MANN_WHITNEY:
        yc = config.params.get("y_contamination")
        y_spec = con.ContaminationSpec.from_dict(yc) if yc is not None else _mirror(spec)
    for n in config.n_grid:
        with _context(f"{cmd.value} n={n}"):
            eps = con.epsilon_of(spec, n)
            if cmd is Command.MANN_WHITNEY:
                eps_y = con.epsilon_of(y_spec, n)
                if eps + eps_y >= 0.5:
                    raise SumBreakdownExceeded(f"eps_x + eps_y = {eps + eps_y:.6g} reaches 1/2")
                eps_cal = eps + eps_y
            else:
                eps_cal = eps
            K = cal.block_count_subgaussian(mapping, eps_cal, n)
            log_delta = cal.delta_range_subgaussian(mapping, eps_cal, n).log_upper
            theta, errs, ks = _break_runs(config, n, K, spec, y_spec, trim)
        for name, e in errs.items():
            m, se = _mean_se(e)
            result.samples[(n, name)] = e
            table.append((n, name, theta, m, se, config.runs, ks[name], eps_cal, mapping.label, log_delta))
    return result


def _break_runs(config, n, K, spec, y_spec, trim):
    cmd = config.command
    if cmd is Command.BREAK_VARIANCE:
        names, theta = ("u_stat", "mou"), spec.inlier_dist.variance
        ks = {"u_stat": 1, "mou": K}
    elif cmd is Command.MANN_WHITNEY:
        names, theta = ("u_stat_two_sample", "mou2_diag"), float(config.params.get("theta", 0.5))
        ks = {"u_stat_two_sample": 1, "mou2_diag": K}
    else:
        names, theta = ("mean", "median", "trimmed_mean", "mom"), spec.inlier_dist.expectation
        ks = {"mean": 1, "median": n, "trimmed_mean": 1, "mom": K}
    if "theta" in config.params:
        theta = float(config.params["theta"])
    errs = {k: np.empty(config.runs) for k in names}
    vk = est.variance_kernel()
    mw = est.mann_whitney_kernel()
    for r in range(config.runs):
        rng = run_seed(config, n, r)
        s = con.generate(spec, n, rng)
        if cmd is Command.MANN_WHITNEY:
            t = con.generate(y_spec, n, rng)
            pairing = diagonal_pairing(n, n, K, rng)
            vals = {
                "u_stat_two_sample": est.u_stat_two_sample(s, t, mw),
                "mou2_diag": est.mou2_diag(s, t, mw, pairing),
            }
        else:
            part = partition_random(n, K, rng)
            if cmd is Command.BREAK_VARIANCE:
                vals = {"u_stat": est.u_stat(s, vk), "mou": est.mou(s, vk, part)}
            else:
                vals = {
                    "mean": est.empirical_mean(s),
                    "median": est.empirical_median(s),
                    "trimmed_mean": est.trimmed_mean(s, trim),
                    "mom": est.mom(s, part),
                }
        for k, v in vals.items():
            errs[k][r] = abs(v - theta)
    return theta, errs, ks


# -- coverage ---------------------------------------------------------------------


def run_coverage(config):
    """Empirical failure rate of the MoM deviation bounds.

    Params
    ------
    path : ``"chebyshev"`` (default) or ``"subgaussian"``
    epsilons : outlier fractions to sweep; default uses the contamination spec.
    delta_points : number of log-spaced levels across the admissible range (5).
    deltas : explicit confidence levels, used instead of ``delta_points``.
    scale : standard deviation (Chebyshev) or sub-Gaussian parameter; defaults
        to the inlier standard deviation.
    """
    _check_params(config, {"path", "epsilons", "delta_points", "deltas", "scale", "theta"})
    p = config.params
    path = str(p.get("path", "chebyshev")).lower()
    if path not in ("chebyshev", "subgaussian"):
        raise ConfigError(f"path must be 'chebyshev' or 'subgaussian', got {path!r}")
    mapping = config.alpha_mapping
    base = config.contamination
    dist = base.inlier_dist
    theta = float(p.get("theta", dist.expectation))
    scale = float(p.get("scale", math.sqrt(dist.variance)))
    if not math.isfinite(scale):
        raise ConfigError("the inlier law has no finite variance; give params.scale")
    epsilons = p.get("epsilons")
    specs = [base] if epsilons is None else [replace(base, outlier_fraction=float(e)) for e in epsilons]
    table = Table(COVERAGE_COLUMNS)
    result = ExperimentResult(table)
    for n in config.n_grid:
        for spec in specs:
            eps = con.epsilon_of(spec, n)
            for ld in _coverage_levels(config, path, mapping, eps, n, result, table):
                with _context(f"Coverage n={n} eps={eps:.6g}"):
                    if path == "chebyshev":
                        K = cal.block_count_chebyshev(mapping, eps, None, n, log_delta=ld)
                        bound = bnd.mom_bound_chebyshev(scale, n, None, eps, mapping, log_delta=ld)
                    else:
                        K = cal.block_count_subgaussian(mapping, eps, n)
                        bound = bnd.mom_bound_subgaussian(scale, n, None, eps, mapping, log_delta=ld)
                fails = 0
                for r in range(config.runs):
                    rng = run_seed(config, n, r)
                    s = con.generate(spec, n, rng)
                    fails += abs(est.mom(s, partition_random(n, K, rng)) - theta) > bound
                delta = math.exp(ld)
                pv = stats.binomtest(int(fails), config.runs, delta, alternative="greater").pvalue
                result.samples[(n, f"eps={eps!r},log_delta={ld!r}")] = np.array([fails])
                table.append(
                    (n, eps, mapping.label, path, K, ld, delta, bound, int(fails), config.runs,
                     fails / config.runs, float(pv), "ok")
                )
    return result


def _coverage_levels(config, path, mapping, eps, n, result, table):
    """Admissible log-levels to test; inadmissible explicit levels become error rows."""
    rng_fn = cal.delta_range_chebyshev if path == "chebyshev" else cal.delta_range_subgaussian
    try:
        adm = rng_fn(mapping, eps, n)
    except DegenerateRange as exc:
        _error_row(result, table, n, eps, mapping, path, None, exc)
        return []
    explicit = config.params.get("deltas")
    if explicit is None:
        count = int(config.params.get("delta_points", 5))
        if math.isinf(adm.log_lower):
            # open at 0: span a fixed number of decades below the upper end
            adm = cal.DeltaRange(adm.log_upper - 10.0, adm.log_upper)
        return adm.points(count)
    out = []
    for d in explicit:
        try:
            out.append(adm.check(float(d)))
        except DeltaOutOfRange as exc:
            _error_row(result, table, n, eps, mapping, path, float(d), exc)
    return out


def _error_row(result, table, n, eps, mapping, path, delta, exc):
    msg = f"{type(exc).__name__}: {exc}"
    result.errors.append(f"n={n} eps={eps!r}: {msg}")
    ld = math.log(delta) if delta is not None and 0 < delta < 1 else None
    table.append((n, eps, mapping.label, path, None, ld, delta, None, None, None, None, None, msg))


# -- learning -----------------------------------------------------------------------


_RANKING_DEFAULTS = dict(
    p=5, noise=0.1, n_test=200, fraction=0.05, lam=20.0, width=None, T=300, step0=0.2,
    u0_scale=0.1, kappa=4.0, record_every=10, dataset=None, test_fraction=0.2,
)
_METRIC_DEFAULTS = dict(
    q=4, classes=3, n_test=60, fraction=0.05, lo=0.0, hi=5.0, label=2.0, T=200, step0=1.0,
    record_every=10, dataset=None, test_fraction=0.2,
)


def _learning_params(config):
    ranking = config.command is Command.LEARN_RANKING
    defaults = _RANKING_DEFAULTS if ranking else _METRIC_DEFAULTS
    _check_params(config, set(defaults))
    p = dict(defaults)
    p.update(config.params)
    return p


def _standardize(train, test):
    mu = train.features.mean(axis=0)
    sd = train.features.std(axis=0)
    sd[sd == 0] = 1.0
    f = lambda d: lrn.PairwiseDataset((d.features - mu) / sd, d.labels, d.mask)  # noqa: E731
    return f(train), f(test)


def _learning_data(config, p, n, rng):
    if p["dataset"] is not None:
        data = read_csv_dataset(p["dataset"])
        train, test = lrn.train_test_split(data, p["test_fraction"], rng)
        if n < train.n:
            train = train.subset(np.sort(rng.permutation(train.n)[:n]))
        return _standardize(train, test)
    if config.command is Command.LEARN_RANKING:
        full, _ = lrn.planted_ranking(n + p["n_test"], p["p"], rng, noise=p["noise"])
    else:
        full = lrn.planted_metric(n + p["n_test"], p["q"], rng, classes=p["classes"])
    return full.subset(np.arange(n)), full.subset(np.arange(n, n + p["n_test"]))


def run_learning(config):
    """Sane and contaminated training sets, each fitted by GD and MoU-GD.

    The contaminated set is built from the sane one (for ranking, from the
    parameter fitted by GD on it).  Both MoU-GD fits use the block count of
    the contaminated set.
    """
    p = _learning_params(config)
    ranking = config.command is Command.LEARN_RANKING
    mapping = config.alpha_mapping
    loss = lrn.RankingHinge(kappa=p["kappa"]) if ranking else lrn.MetricHinge()
    table = Table(LEARNING_COLUMNS)
    result = ExperimentResult(table)
    cells = [("sane", "GD"), ("sane", "MoU-GD"), ("contaminated", "GD"), ("contaminated", "MoU-GD")]
    for n in config.n_grid:
        risks = {c: np.empty(config.runs) for c in cells}
        traces = {c: [] for c in cells}
        for r in range(config.runs):
            rng = run_seed(config, n, r)
            with _context(f"{config.command.value} n={n} run={r}"):
                train, test = _learning_data(config, p, n, rng)
                dim = train.p
                u0 = p["u0_scale"] * rng.normal(size=dim) if ranking else np.eye(dim)
                fit_seed = int(rng.integers(2**32))
                n_out = cal.snap_ceil(p["fraction"] * train.n)
                eps = n_out / (train.n + n_out)
                K = cal.block_count_subgaussian(mapping, eps, train.n + n_out)
                log_delta = cal.delta_range_subgaussian(mapping, eps, train.n + n_out).log_upper

                def cfg(k):
                    return lrn.GDConfig(
                        K=k, T=p["T"], step0=p["step0"], u0=u0, seed=fit_seed,
                        psd_project=not ranking, record_every=p["record_every"],
                    )

                fits = {}
                fits[("sane", "GD")] = lrn.pairwise_gd(train, loss, cfg(1), test)
                fits[("sane", "MoU-GD")] = lrn.mou_gd(train, loss, cfg(K), test)
                if ranking:
                    dirty = lrn.contaminate_pairwise(
                        train, p["fraction"], p["lam"], fits[("sane", "GD")].u, rng, p["width"]
                    )
                else:
                    dirty = lrn.contaminate_metric(train, p["fraction"], rng, p["lo"], p["hi"], p["label"])
                fits[("contaminated", "GD")] = lrn.pairwise_gd(dirty, loss, cfg(1), test)
                fits[("contaminated", "MoU-GD")] = lrn.mou_gd(dirty, loss, cfg(K), test)
            for c in cells:
                tr = fits[c].trace
                risks[c][r] = lrn.pairwise_risk(fits[c].u, test, loss)
                traces[c].append(tr)
        for c in cells:
            m, se = _mean_se(risks[c])
            result.samples[(n, f"{c[0]}/{c[1]}")] = risks[c]
            table.append((n, c[0], c[1], m, se, config.runs, 1 if c[1] == "GD" else K, eps, mapping.label, log_delta))
            result.traces[f"n{n}.{c[0]}.{c[1]}"] = _mean_trace(traces[c])
    return result


def _mean_trace(traces):
    t = Table(lrn.GDTrace.COLUMNS)
    if not traces or not traces[0].epoch:
        return t
    cols = ("median_block_risk", "train_risk", "test_risk")
    for i, ep in enumerate(traces[0].epoch):
        row = [ep]
        for c in cols:
            vals = [getattr(tr, c)[i] for tr in traces]
            row.append(math.fsum(vals) / len(vals))
        t.append(row)
    return t


# -- calibration table -------------------------------------------------------------


def run_calibrate(config):
    """Derived constants, block counts and admissible confidence ranges on a grid."""
    _check_params(config, {"epsilons"})
    mapping = config.alpha_mapping
    epsilons = config.params.get("epsilons", [0.0, 0.01, 0.05, 0.1, 0.2, 0.3, 0.4])
    table = Table(CALIBRATE_COLUMNS)
    result = ExperimentResult(table)
    for n in config.n_grid:
        for e in epsilons:
            e = float(e)
            with _context(f"Calibrate n={n} eps={e}"):
                c = cal.derived_constants(mapping, e)
                k = cal.block_count_subgaussian(mapping, e, n)
                sg = cal.delta_range_subgaussian(mapping, e, n)
                try:
                    ch = cal.delta_range_chebyshev(mapping, e, n)
                    lo, hi = ch.log_lower, ch.log_upper
                except DegenerateRange as exc:
                    result.errors.append(f"n={n} eps={e!r}: {exc}")
                    lo = hi = None
            table.append(
                (n, e, mapping.label, c.alpha, c.beta, c.gamma, c.cap_gamma, c.delta_const, c.eta,
                 k, sg.log_upper, lo, hi)
            )
    return result


def run_experiment(config):
    cmd = config.command
    if cmd is Command.COVERAGE:
        return run_coverage(config)
    if cmd in (Command.LEARN_RANKING, Command.LEARN_METRIC):
        return run_learning(config)
    if cmd is Command.CALIBRATE:
        return run_calibrate(config)
    return run_break_experiment(config)
