"""Tests for the closed-form bound calculators."""

import math

import numpy as np
import pytest

from perfbounds import (
    BoundReport,
    FitConfig,
    TopXiLabelFlip,
    compute_bound,
    cumulative_bound,
    excess_risk_bound,
    excess_risk_bound_from_trace,
    fournier_term,
    gen_gap_bound_rq1,
    gen_gap_I,
    gen_gap_II,
    in_sample_shift_bound,
    normal_quantile,
    perf_excess_risk_bound,
    perf_excess_risk_bound_pooled,
    pooled_wald_upper,
    radius_R,
    run_rerm,
    tightest_round,
    wald_upper,
)
from perfbounds.bounds import VARIANTS, pooled_wald_upper_from_trace, wald_upper_array

from conftest import make_profile

SQRT28 = math.sqrt(28)


class TestBoundReport:
    def test_total_is_sum_of_terms(self):
        report = BoundReport("x", {"a": 0.1, "b": 0.2}, confidence=0.9, inputs_hash="h")
        assert report.total == pytest.approx(0.3)
        assert report.to_row() == {"total": report.total, "a": 0.1, "b": 0.2}
        assert report.to_dict()["total"] == report.total

    def test_negative_term_rejected(self):
        with pytest.raises(ValueError):
            BoundReport("x", {"a": -0.1}, confidence=0.9, inputs_hash="h")


class TestNormalQuantile:
    @pytest.mark.parametrize("delta,expected", [(0.05, 1.959964), (0.1, 1.644854), (1.0, 0.0)])
    def test_values(self, delta, expected):
        assert normal_quantile(delta) == pytest.approx(expected, abs=1e-6)

    @pytest.mark.parametrize("delta", [0.0, -0.1, 1.5])
    def test_outside_range(self, delta):
        with pytest.raises(ValueError, match="delta"):
            normal_quantile(delta)


class TestFournierTerm:
    def test_historical_example(self):
        """n=60147, delta=0.1, p/nu=1/2 gives sqrt(ln 10 / 60147)."""
        value = fournier_term(60147, 0.1, 2.0, 4)
        assert value == pytest.approx(0.0061872955, abs=1e-9)

    def test_zero_log(self):
        """delta = C_a makes the log vanish."""
        assert fournier_term(100, 0.5, 2.0, 4, C_a=0.5) == 0.0

    def test_negative_log_rejected(self):
        with pytest.raises(ValueError, match="log"):
            fournier_term(100, 0.5, 2.0, 4, C_a=0.1)


class TestInSampleShiftBound:
    def test_no_shift(self):
        assert in_sample_shift_bound(0.5, 3, 0, 10, 2.0, 1.0, 0.5) == 0.0

    def test_unit_sensitivity_limit(self):
        """eps=1 sums T equal rounds."""
        value = in_sample_shift_bound(1.0, 3, 1, 4, 2.0, 2.0, 1 / 3)
        assert value == pytest.approx(3 * 0.5 * 2.0 / 3)

    def test_arithmetic(self):
        """eps=0.5, T=2, m/n=0.25, p=2, D_Z=2, L_a_tilde=1/3 gives 0.5."""
        assert in_sample_shift_bound(0.5, 2, 1, 4, 2.0, 2.0, 1 / 3) == pytest.approx(0.5)


class TestWald:
    def test_zero_and_full(self):
        assert wald_upper(0, 100, 0.05) == 0.0
        assert wald_upper(100, 100, 0.05) == 1.0

    def test_historical_counts(self):
        """m=1816, n=60147, delta=0.05."""
        assert wald_upper(1816, 60147, 0.05) == pytest.approx(0.0315602, abs=1e-6)

    def test_array_matches_scalar(self):
        counts = np.array([0, 5, 50, 100])
        expected = [wald_upper(int(m), 100, 0.1) for m in counts]
        np.testing.assert_allclose(wald_upper_array(counts, 100, 0.1), expected)

    def test_pooled_single_round(self):
        assert pooled_wald_upper([37], 500, 0.05) == wald_upper(37, 500, 0.05)

    def test_pooled_zero(self):
        assert pooled_wald_upper([0, 0, 0], 500, 0.05) == 0.0

    def test_pooled_halves_width(self):
        """Four identical rounds keep the mean and halve the half-width."""
        single = wald_upper(50, 1000, 0.05) - 0.05
        pooled = pooled_wald_upper([50] * 4, 1000, 0.05) - 0.05
        assert pooled == pytest.approx(single / 2)

    def test_pooled_rejects_bad_counts(self):
        with pytest.raises(ValueError):
            pooled_wald_upper([], 10, 0.05)
        with pytest.raises(ValueError, match="m=11"):
            pooled_wald_upper([1, 11], 10, 0.05)


class TestGenGapRq1:
    """The historical-data corollary example."""

    def test_terms(self, historical_profile):
        report = gen_gap_bound_rq1(historical_profile, 2, 1816, 60147)
        assert report.terms["sampling"] == pytest.approx(0.0123746, abs=1e-6)
        assert report.terms["performative"] == pytest.approx(0.290207, abs=2e-3)
        assert report.total == pytest.approx(0.302582, abs=2e-3)
        assert report.confidence == pytest.approx(0.95)

    def test_exact_performative_value(self, historical_profile):
        """5/3 * sqrt(m / n) with one geometric round."""
        report = gen_gap_bound_rq1(historical_profile, 2, 1816, 60147)
        assert report.terms["performative"] == pytest.approx(5 / 3 * math.sqrt(1816 / 60147))
        assert report.factors["geometric_factor"] == 1.0

    def test_single_round_has_no_shift(self, historical_profile):
        assert gen_gap_bound_rq1(historical_profile, 1, 1816, 60147).terms["performative"] == 0.0

    def test_unit_sensitivity_limit(self):
        """eps=1 uses the T - 1 limit of the geometric factor."""
        profile = make_profile(eps_sens=1.0)
        report = gen_gap_bound_rq1(profile, 4, 10, 100)
        assert report.factors["geometric_factor"] == 3.0


class TestExcessRiskBound:
    def test_vanishes_without_shift_and_complexity(self):
        """m=0 and zero complexity leave only terms that shrink with n."""
        profile = make_profile(delta=0.5)
        small = excess_risk_bound(profile, 2, 0, 10**12, complexity_L2=0.0)
        assert small.terms["performative"] == 0.0
        assert small.total < 1e-2

    def test_increasing_in_T_when_expansive(self):
        profile = make_profile(eps_sens=1.5, kappa=1.0)
        totals = [excess_risk_bound(profile, T, 10, 100, 1.0).total for T in range(1, 6)]
        assert all(b > a for a, b in zip(totals, totals[1:]))

    def test_needs_complexity(self):
        with pytest.raises(ValueError, match="complexity_L2"):
            excess_risk_bound(make_profile(), 1, 0, 10)

    def test_profile_override(self):
        report = excess_risk_bound(make_profile(c_l2=0.5), 1, 0, 100)
        assert report.terms["rademacher"] > 0
        assert report.confidence == pytest.approx(0.975)


class TestPerfExcessRiskBound:
    def test_no_shift(self):
        """m=0 gives A = K = 0 and no population or performative terms."""
        report = perf_excess_risk_bound(make_profile(), 3, 0, 1000, 1.0)
        assert report.factors["A"] == 0.0
        assert report.factors["K"] == 0.0
        assert report.terms["population_shift"] == 0.0
        assert report.terms["performative"] == 0.0

    def test_historical_A(self, historical_profile):
        """A = 2 sqrt(5) sqrt(wald_upper(m, n, 0.1))."""
        report = perf_excess_risk_bound(historical_profile, 2, 1816, 60147, 1.0)
        assert report.factors["A"] == pytest.approx(0.79171152, abs=1e-7)
        at_05 = perf_excess_risk_bound(historical_profile.replace(delta=0.05), 2, 1816, 60147, 1.0)
        assert at_05.factors["A"] == pytest.approx(0.794484, abs=1e-5)
        assert report.confidence == pytest.approx(0.975)

    def test_contraction_one_limit(self):
        """eps kappa / gamma = 1 uses the geometric limit T."""
        report = perf_excess_risk_bound(make_profile(eps_sens=1.0, kappa=1.0), 3, 1, 4, 1.0)
        assert report.factors["geometric_factor"] == 3.0

    def test_pooled_never_looser(self, historical_profile):
        single = perf_excess_risk_bound(historical_profile, 3, 1816, 60147, 1.0)
        pooled = perf_excess_risk_bound_pooled(historical_profile, [1816] * 3, 60147, 1.0)
        assert pooled.name == "perf_excess_risk_pooled"
        assert pooled.total <= single.total

    def test_bad_response_upper(self):
        with pytest.raises(ValueError, match="response_upper"):
            perf_excess_risk_bound(make_profile(), 1, 1, 10, 1.0, response_upper=1.5)

    def test_tightest_round(self):
        """With growing shifts the earliest model is tightest."""
        best = tightest_round(make_profile(), [10, 20, 40], 1000, 1.0)
        assert len(best.totals) == 4
        assert best.total == min(best.totals)
        assert best.round == int(np.argmin(best.totals))


class TestRadius:
    def test_zero(self):
        assert radius_R(0, 100, 0.05, 2.0, 1.0, 0.5) == 0.0

    def test_degenerate_interval(self):
        """L_a_tilde=1 and delta=1 make both arms equal."""
        value = radius_R(25, 100, 1.0, 2.0, 2.0, 1.0)
        assert value == pytest.approx(0.5 * 2.0)

    def test_semi_simulation(self):
        """m/n = 0.1 at n=41585: the Wald arm dominates."""
        value = radius_R(4158.5, 41585, 0.05, 2.0, SQRT28, 1 / 3)
        assert value == pytest.approx(1.697273, abs=1e-6)
        assert value > math.sqrt(0.1) * SQRT28 / 3


class TestGenGap:
    """Gen-Gap I and II on the semi-simulation constants."""

    R = 1.6972726578

    def test_gen_gap_I_terms(self, semisim_profile):
        report = gen_gap_I(semisim_profile, 41585, self.R)
        assert report.terms["performative"] == pytest.approx(2 * SQRT28 * self.R)
        assert report.terms["performative"] == pytest.approx(17.96225, abs=1e-4)
        assert report.terms["sampling"] == pytest.approx(0.013318, abs=1e-5)
        assert report.terms["complexity"] == pytest.approx(1.921872, abs=1e-5)
        assert report.factors["radius"] == self.R
        assert report.confidence == pytest.approx(0.95)

    def test_gen_gap_I_printed_radius(self, semisim_profile):
        """At R=1.6857 the complexity term is about 1.9231 and the performative 17.840."""
        report = gen_gap_I(semisim_profile, 41585, 1.6857)
        assert report.terms["complexity"] == pytest.approx(1.9231, abs=1e-4)
        assert report.terms["performative"] == pytest.approx(17.840, abs=1e-3)

    def test_gen_gap_I_theorem_form(self, semisim_profile):
        """The theorem form scales the inner term by D_Z^p."""
        theorem = semisim_profile.replace(complexity_form="theorem")
        normalized = gen_gap_I(semisim_profile, 41585, self.R).factors["inner"]
        assert gen_gap_I(theorem, 41585, self.R).factors["inner"] == pytest.approx(
            normalized * 28
        )

    def test_gen_gap_I_zero_radius(self, semisim_profile):
        with pytest.raises(ValueError, match="xi > 0"):
            gen_gap_I(semisim_profile, 41585, 0.0)

    def test_gen_gap_I_needs_complexity(self):
        with pytest.raises(ValueError, match="complexity_inf"):
            gen_gap_I(make_profile(), 100, 0.5)

    def test_gen_gap_II_zero_B(self, semisim_profile):
        report = gen_gap_II(semisim_profile, 41585, self.R, B=0.0)
        assert report.terms["complexity"] == pytest.approx(48 * 7.3855 / math.sqrt(41585))

    def test_gen_gap_II_inner_theorem_form(self, semisim_profile):
        """B=1e-3, p=2, D_Z=sqrt(28), R=1.6857 gives about 0.03427."""
        theorem = semisim_profile.replace(complexity_form="theorem")
        report = gen_gap_II(theorem, 41585, 1.6857)
        assert report.factors["inner"] == pytest.approx(0.03427, abs=1e-5)
        assert report.factors["B"] == 1e-3

    def test_gen_gap_II_inner_normalized_form(self, semisim_profile):
        """With the diameter set to 1 the same radius gives about 0.0050767."""
        report = gen_gap_II(semisim_profile, 41585, 1.6857)
        assert report.factors["inner"] == pytest.approx(0.00507673, abs=1e-8)

    def test_gen_gap_II_large_radius(self, semisim_profile):
        """R -> infinity leaves B 2^(p-1)."""
        report = gen_gap_II(semisim_profile, 41585, 1e12)
        assert report.factors["inner"] == pytest.approx(2e-3)

    def test_gen_gap_II_zero_radius(self, semisim_profile):
        with pytest.raises(ValueError, match="positive"):
            gen_gap_II(semisim_profile, 41585, 0.0)


class TestCumulativeBound:
    def test_minimal_horizon(self, historical_profile):
        """T_tilde = T adds exactly one population round."""
        base = perf_excess_risk_bound(historical_profile, 2, 1816, 60147, 1.0)
        report = cumulative_bound(historical_profile, 2, 2, 1816, 60147, 1.0)
        assert report.total == pytest.approx(base.total + report.factors["per_round"])
        assert report.confidence == pytest.approx(0.98)

    def test_no_shift(self):
        report = cumulative_bound(make_profile(), 2, 5, 0, 100, 1.0)
        assert report.terms["cumulative_population"] == 0.0

    def test_horizon_before_T(self):
        with pytest.raises(ValueError, match="T_tilde"):
            cumulative_bound(make_profile(), 3, 2, 0, 100, 1.0)


class TestComputeBound:
    """Tests for the variant dispatcher."""

    def test_corollary_by_name(self, historical_profile):
        report = compute_bound("rq1-corollary", historical_profile, T=2, m=1816, n=60147)
        assert report.total == pytest.approx(0.3019753, abs=1e-6)
        assert report.inputs_hash == historical_profile.digest()

    def test_gen_gap_default_radius(self, semisim_profile):
        report = compute_bound("gen-gap-1", semisim_profile, m=4159, n=41585)
        expected = radius_R(4159, 41585, 0.05, 2.0, SQRT28, 1 / 3)
        assert report.factors["radius"] == pytest.approx(expected)

    @pytest.mark.parametrize("variant", VARIANTS)
    def test_every_variant_evaluates(self, variant):
        profile = make_profile(c_l2=0.5, c_inf=1.0, B=1e-3)
        params = dict(T=2, T_tilde=3, m=5, n=100, m_list=[5, 4])
        report = compute_bound(variant, profile, **params)
        assert report.total >= 0.0
        assert 0.0 < report.confidence <= 1.0

    def test_scalar_variants(self):
        profile = make_profile()
        assert compute_bound("wald", profile, m=10, n=100).terms == {
            "value": wald_upper(10, 100, 0.05)
        }
        shift = compute_bound("in-sample-shift", profile, T=2, m=25, n=100, eps=1.0)
        assert shift.total == pytest.approx(2 * 0.25 * 1.0 * 0.5)

    def test_missing_parameter(self):
        with pytest.raises(ValueError, match="Missing parameters: m"):
            compute_bound("wald", make_profile(), n=100)

    def test_unknown_variant(self):
        with pytest.raises(ValueError, match="Unknown bound variant"):
            compute_bound("rq9", make_profile())


class TestFromTrace:
    """Trace-driven wrappers read m_max, T and n off the trace."""

    def test_excess_risk_from_trace(self, random_dist):
        dist = random_dist(40, dim_x=2, seed=1)
        trace = run_rerm(dist, TopXiLabelFlip(xi=0.1), 2, FitConfig())
        profile = make_profile(c_l2=0.5)
        from_trace = excess_risk_bound_from_trace(profile, trace)
        direct = excess_risk_bound(profile, 2, trace.m_max, 40)
        assert from_trace.total == pytest.approx(direct.total)

    def test_pooled_wald_from_trace(self, random_dist):
        dist = random_dist(40, dim_x=2, seed=1)
        trace = run_rerm(dist, TopXiLabelFlip(xi=0.1), 2, FitConfig())
        expected = pooled_wald_upper(trace.shift_counts, 40, 0.05)
        assert pooled_wald_upper_from_trace(trace, 0.05) == pytest.approx(expected)
