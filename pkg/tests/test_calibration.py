import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mom_robust import calibration as cal
from mom_robust.errors import (
    BreakdownExceeded,
    DeltaOutOfRange,
    EpsilonOutOfRange,
    InvalidMapping,
    JointBreakdownExceeded,
)

NAMED = [cal.ARITHMETIC, cal.GEOMETRIC, cal.HARMONIC, cal.POLYNOMIAL]
GRID = np.linspace(0.0, 0.5, 52)[1:-1]


def gamma_sq(alpha, eps):
    return alpha * (alpha - eps) ** 2 / (alpha - 2 * eps) ** 3


class TestAlpha:
    def test_table_values(self):
        assert cal.HARMONIC(0.1) == pytest.approx(1 / 3, rel=1e-15)
        assert cal.ARITHMETIC(0.0) == 0.5
        assert cal.GEOMETRIC(0.0) == 0.0
        assert cal.POLYNOMIAL(0.2) == pytest.approx(0.46)

    @pytest.mark.parametrize("eps", [-0.01, 0.51, math.nan])
    def test_out_of_range(self, eps):
        with pytest.raises(EpsilonOutOfRange):
            cal.HARMONIC(eps)

    def test_custom_violation(self):
        bad = cal.AlphaMapping.custom(lambda e: 1.5 * e, "too-small")
        with pytest.raises(InvalidMapping):
            bad(0.1)
        assert bad(0.0) == 0.0

    def test_from_name_case_insensitive(self):
        assert cal.AlphaMapping.from_name("harmonic") == cal.HARMONIC
        with pytest.raises(InvalidMapping):
            cal.AlphaMapping.from_name("Quadratic")

    @given(st.floats(min_value=1e-6, max_value=0.5 - 1e-6))
    def test_named_mappings_admissible(self, eps):
        for m in NAMED:
            a = m(eps)
            assert 2 * eps < a < 1


class TestDerivedConstants:
    def test_harmonic_point(self):
        c = cal.derived_constants(cal.HARMONIC, 0.1)
        assert c.alpha == pytest.approx(1 / 3)
        assert c.beta == pytest.approx(5.0)
        # the rounded reference 2.7672 is 2e-4 above the exact value
        assert c.gamma == pytest.approx(2.7672, abs=5e-4)
        assert c.cap_gamma == pytest.approx(1.5811, abs=1e-4)
        assert c.delta_const == pytest.approx(1.8257, abs=1e-4)
        assert c.eta == pytest.approx(0.7)
        # cross-check against the generic gamma expression
        a, e = 1 / 3, 0.1
        assert c.gamma == pytest.approx(math.sqrt(a) * (a - e) / (a - 2 * e) ** 1.5, rel=1e-12)

    def test_arithmetic_at_zero(self):
        c = cal.derived_constants(cal.ARITHMETIC, 0.0)
        assert (c.alpha, c.beta, c.gamma, c.cap_gamma, c.eta) == (0.5, 2.0, 1.0, 1.0, 1.0)
        assert c.delta_const is None

    def test_breakdown(self):
        with pytest.raises(BreakdownExceeded):
            cal.derived_constants(cal.HARMONIC, 0.5)

    @pytest.mark.parametrize("mapping", NAMED, ids=lambda m: m.label)
    def test_closed_forms_match_generic(self, mapping):
        for e in GRID:
            closed = cal.closed_form_constants(mapping.kind, e)
            generic = cal.generic_constants(mapping(e), e)
            for name in ("alpha", "beta", "gamma", "cap_gamma", "delta_const", "eta"):
                np.testing.assert_allclose(getattr(closed, name), getattr(generic, name), rtol=1e-12)

    @pytest.mark.parametrize("mapping", NAMED, ids=lambda m: m.label)
    def test_gamma_decreases_in_alpha(self, mapping):
        for e in GRID:
            a = mapping(e)
            h = 1e-6
            fd = (gamma_sq(a + h, e) - gamma_sq(a, e)) / h
            exact = -2 * e * (2 * a - e) * (a - e) / (a - 2 * e) ** 4
            assert fd < 0
            assert np.sign(fd) == np.sign(exact)

    @given(st.floats(min_value=1e-4, max_value=0.49))
    @settings(max_examples=50)
    def test_invariants(self, eps):
        for m in NAMED:
            c = cal.derived_constants(m, eps)
            assert 0.5 < c.eta <= 1
            assert c.gamma >= 1 and c.cap_gamma >= 1
            assert c.beta > 2


class TestRanges:
    def test_chebyshev_harmonic(self):
        r = cal.delta_range_chebyshev(cal.HARMONIC, 0.1, 100)
        assert r.log_lower == pytest.approx(-20.0)
        assert r.log_upper == pytest.approx(-20 / 3)

    def test_chebyshev_arithmetic(self):
        # alpha = 0.6 and beta = 2 alpha / (alpha - 2 eps) = 3
        assert cal.derived_constants(cal.ARITHMETIC, 0.1).beta == pytest.approx(3.0)
        r = cal.delta_range_chebyshev(cal.ARITHMETIC, 0.1, 60)
        assert r.log_lower == pytest.approx(-20.0)
        assert r.log_upper == pytest.approx(-12.0)

    def test_chebyshev_breakdown(self):
        with pytest.raises(BreakdownExceeded):
            cal.delta_range_chebyshev(cal.HARMONIC, 0.5, 100)

    def test_subgaussian(self):
        assert cal.delta_range_subgaussian(cal.HARMONIC, 0.1, 30).log_upper == pytest.approx(-40.0)
        assert cal.delta_range_subgaussian(cal.GEOMETRIC, 0.02, 50).log_upper == pytest.approx(-40.0)
        for m in NAMED:
            r = cal.delta_range_subgaussian(m, 0.0, 500)
            assert r.log_upper == -1.0 and r.log_lower == -math.inf

    def test_large_n_stays_in_log_space(self):
        r = cal.delta_range_chebyshev(cal.HARMONIC, 0.1, 10**6)
        assert math.isfinite(r.log_lower) and r.lower > 0

    def test_points_span_range(self):
        r = cal.delta_range_chebyshev(cal.HARMONIC, 0.05, 100)
        pts = r.points(5)
        assert pts[0] == r.log_lower and pts[-1] == r.log_upper
        assert all(r.contains(log_delta=p) for p in pts)


class TestBlockCounts:
    def test_chebyshev(self):
        assert cal.block_count_chebyshev(cal.HARMONIC, 0.1, math.exp(-8), 100) == 40
        assert cal.block_count_chebyshev(cal.HARMONIC, 0.1, None, 10**3, log_delta=-100.0) == 500

    def test_chebyshev_below_alpha_n(self):
        # beta log(1/delta) = 10 blocks, fewer than alpha n = 33.3: delta is inadmissible
        assert cal.snap_ceil(cal.derived_constants(cal.HARMONIC, 0.1).beta * 2) == 10
        with pytest.raises(DeltaOutOfRange):
            cal.block_count_chebyshev(cal.HARMONIC, 0.1, math.exp(-2), 100)

    def test_chebyshev_out_of_range(self):
        with pytest.raises(DeltaOutOfRange) as info:
            cal.block_count_chebyshev(cal.HARMONIC, 0.1, 0.9, 100)
        assert info.value.admissible == cal.delta_range_chebyshev(cal.HARMONIC, 0.1, 100)

    def test_chebyshev_at_zero_harmonic(self):
        # log(1/delta) = 1, so K = ceil(beta(0)) wherever delta = 1/e is admissible
        assert cal.block_count_chebyshev(cal.HARMONIC, 0.0, math.exp(-1), 10) == 4

    def test_chebyshev_at_zero_arithmetic_inadmissible(self):
        # alpha(0) = 1/2 puts 1/e outside the range once n alpha / beta > 1
        with pytest.raises(DeltaOutOfRange):
            cal.block_count_chebyshev(cal.ARITHMETIC, 0.0, math.exp(-1), 10)

    def test_subgaussian(self):
        assert cal.block_count_subgaussian(cal.HARMONIC, 0.1, 300) == 100
        assert cal.block_count_subgaussian(cal.POLYNOMIAL, 0.2, 100) == 46
        for m in NAMED:
            assert cal.block_count_subgaussian(m, 0.0, 1000) == 1

    @given(
        st.sampled_from(NAMED),
        st.floats(min_value=0.001, max_value=0.45),
        st.integers(min_value=10, max_value=10**5),
        st.floats(min_value=0.0, max_value=1.0),
    )
    def test_chebyshev_count_in_bounds(self, mapping, eps, n, t):
        r = cal.delta_range_chebyshev(mapping, eps, n)
        ld = r.log_lower + t * (r.log_upper - r.log_lower)
        k = cal.block_count_chebyshev(mapping, eps, None, n, log_delta=ld)
        assert mapping(eps) * n <= k + 1e-9 and 1 <= k <= n


class TestTwoSample:
    def test_no_outliers(self):
        c = cal.two_sample_constants(cal.HARMONIC, 0.0, 0.0)
        assert c.epsilon_tilde == 0 and c.eta_x == c.eta_y == 1.0

    def test_harmonic(self):
        c = cal.two_sample_constants(cal.HARMONIC, 0.1, 0.1)
        assert c.epsilon_tilde == pytest.approx(0.19)
        assert c.alpha_tilde == pytest.approx(0.76 / 1.38)
        assert c.eta_x == pytest.approx(0.8652, abs=1e-4)
        assert c.eta_x == c.eta_y

    def test_joint_breakdown(self):
        with pytest.raises(JointBreakdownExceeded):
            cal.two_sample_constants(cal.HARMONIC, 0.3, 0.3)

    def test_small_samples_have_no_range(self):
        c = cal.two_sample_constants(cal.HARMONIC, 0.0, 0.0)
        with pytest.raises(DeltaOutOfRange):
            cal.two_sample_block_counts(c, 2 * math.exp(-1), 10, 10)

    def test_counts_mid_range(self):
        c = cal.two_sample_constants(cal.HARMONIC, 0.05, 0.05)
        r = cal.delta_range_two_sample(c, 10**4, 10**4)
        mid = 0.5 * (r.log_lower + r.log_upper)
        kx, ky = cal.two_sample_block_counts(c, None, 10**4, 10**4, log_delta=mid)
        root = math.sqrt(c.alpha_tilde)
        for k in (kx, ky):
            assert root * 10**4 <= k <= 10**4

    def test_above_upper_limit(self):
        c = cal.two_sample_constants(cal.HARMONIC, 0.0, 0.0)
        # without outliers the range reaches up to 1
        assert cal.delta_range_two_sample(c, 10**4, 10**4).upper == pytest.approx(1.0)
        with pytest.raises(DeltaOutOfRange):
            cal.two_sample_block_counts(c, 1.0, 10**4, 10**4)
        c = cal.two_sample_constants(cal.HARMONIC, 0.05, 0.05)
        r = cal.delta_range_two_sample(c, 10**4, 10**4)
        with pytest.raises(DeltaOutOfRange):
            cal.two_sample_block_counts(c, None, 10**4, 10**4, log_delta=r.log_upper / 2)


class TestSnapCeil:
    def test_roundoff(self):
        assert cal.snap_ceil(0.7 * 100) == 70
        assert cal.snap_ceil(3.0000000000000004) == 3
        assert cal.snap_ceil(3.1) == 4
