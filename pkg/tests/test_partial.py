import logging

import numpy as np
import pytest

from ucr.core import (
    UcrDegenerateLinkError,
    UcrDomainError,
    UcrPreconditionError,
    UcrSingularityError,
    capacity,
    db_to_linear,
    linear_to_db,
)
from ucr.modes import MODES, LambdaPair, decodable_rate, individual_decide, noise_rate
from ucr.partial import (
    CASE_1,
    CASE_2,
    CASE_3,
    CASE_NO_ACCESS,
    PARTIAL_CQI_DECIDERS,
    RayleighCqi,
    case1_condition,
    case1_threshold,
    case2_mean_cap,
    case3_feasibility,
    case3_overrate_bound,
    case3_overrate_exact,
    case_probabilities,
    case3_snr_root,
    gamma_threshold,
    individual_partial_decide,
    mean_snr_cap,
    outage_prob_primary,
    power_cap_partial,
    psmd_partial_decide,
    scaling_factor,
    ssmd_partial_decide,
    tsmd_partial_decide,
    window_peak,
    window_probability,
)

G11_16DB = db_to_linear(16.0)


@pytest.fixture
def strong_cfg(partial_cfg):
    # 30 dB links, wide enough for the decodable window to hold 0.99 of the mass
    p = db_to_linear(30.0)
    return partial_cfg.replace(p1=p, p2_local_max=p, gain2_12=0.01)


@pytest.fixture
def strong_peak_mean(strong_cfg):
    lambdas = LambdaPair.from_snr(strong_cfg.g11, strong_cfg.g12)
    peak_mean, _ = window_peak(strong_cfg.gain2_22, lambdas.lambda1, lambdas.lambda2)
    return peak_mean


class TestRayleighCqi:
    def test_tail_and_cdf(self):
        law = RayleighCqi(2.0)
        assert law.tail(0.0) == 1.0
        assert law.tail(2.0) == pytest.approx(np.exp(-1.0))
        assert law.cdf(2.0) == pytest.approx(1.0 - np.exp(-1.0))
        np.testing.assert_allclose(law.tail(np.array([0.0, 2.0])), [1.0, np.exp(-1.0)])

    def test_rejects_negative_mean(self):
        with pytest.raises(UcrDomainError):
            RayleighCqi(-0.1)

    def test_zero_mean_never_exceeds(self):
        assert RayleighCqi(0.0).tail(1e-9) == 0.0


class TestCriterion1:
    def test_gamma_threshold(self):
        assert gamma_threshold(G11_16DB, 0.0) == 0.0
        assert gamma_threshold(G11_16DB, 0.05) == pytest.approx(0.2097, rel=2e-3)
        assert gamma_threshold(G11_16DB, 0.05, high_snr=True) == pytest.approx(
            0.2038, rel=2e-3
        )

    def test_outage_prob_primary(self):
        assert outage_prob_primary(0.0, 0.5) == 1.0
        assert outage_prob_primary(0.2, 0.0) == 0.0
        assert outage_prob_primary(0.2097, 0.09106) == pytest.approx(0.1, rel=1e-3)
        assert outage_prob_primary(1e6, 0.1) == pytest.approx(0.0)

    def test_outage_monotone(self):
        assert outage_prob_primary(0.1, 0.5) > outage_prob_primary(0.2, 0.5)
        assert outage_prob_primary(0.1, 0.5) < outage_prob_primary(0.1, 0.6)

    def test_mean_snr_cap(self):
        assert mean_snr_cap(G11_16DB, 0.0, 0.1) == 0.0
        assert mean_snr_cap(G11_16DB, 0.05, 0.1) == pytest.approx(0.09106, rel=2e-3)
        assert mean_snr_cap(G11_16DB, 0.05, 0.1, high_snr=True) == pytest.approx(
            0.0885, rel=2e-3
        )

    @pytest.mark.parametrize("o_t", [0.0, 1.0, -0.1])
    def test_mean_snr_cap_rejects_bad_threshold(self, o_t):
        with pytest.raises(UcrDomainError):
            mean_snr_cap(G11_16DB, 0.05, o_t)

    def test_cap_reproduces_outage_threshold(self):
        rng = np.random.default_rng(3)
        for _ in range(500):
            g11 = float(rng.uniform(1.0, 1e4))
            rho = float(rng.uniform(0.01, 0.9))
            o_t = float(rng.uniform(0.01, 0.5))
            gamma_t = gamma_threshold(g11, rho)
            gbar_t = mean_snr_cap(g11, rho, o_t)
            assert outage_prob_primary(gamma_t, gbar_t) == pytest.approx(o_t, abs=1e-9)
            assert outage_prob_primary(gamma_t, 0.9 * gbar_t) < o_t
            assert outage_prob_primary(gamma_t, 1.1 * gbar_t) > o_t

    def test_high_snr_mean_cap_agreement(self):
        for g11_db, tolerance in ((16.0, 0.05), (40.0, 1e-3)):
            g11 = db_to_linear(g11_db)
            exact = mean_snr_cap(g11, 0.05, 0.1)
            approx = mean_snr_cap(g11, 0.05, 0.1, high_snr=True)
            assert abs(approx - exact) / exact < tolerance

    def test_power_cap_partial(self):
        assert power_cap_partial(0.0, RayleighCqi(0.01), 1.0) == 0.0
        assert power_cap_partial(0.09106, RayleighCqi(0.01), 1.0) == pytest.approx(9.106)
        assert power_cap_partial(0.09106, RayleighCqi(0.005), 1.0) == pytest.approx(18.212)

    def test_power_cap_partial_singular(self):
        with pytest.raises(UcrSingularityError):
            power_cap_partial(0.1, RayleighCqi(0.0), 1.0)


class TestIndividualPartial:
    def test_reference_decision(self, partial_cfg, rayleigh):
        decision = individual_partial_decide(partial_cfg, rayleigh)
        assert decision.case_id is None
        assert decision.p2 == pytest.approx(9.118, rel=2e-3)
        assert decision.r2 == pytest.approx(2.911, abs=2e-3)
        assert decision.primary_outage_prob == pytest.approx(0.1, abs=1e-9)
        assert decision.delta_c1 == pytest.approx(0.05 * capacity(partial_cfg.g11))
        assert decision.gbar_t == pytest.approx(0.0912, rel=2e-3)

    def test_below_full_cqi_rate(self, partial_cfg, full_cfg, rayleigh):
        assert individual_partial_decide(partial_cfg, rayleigh).r2 < individual_decide(full_cfg).r2

    def test_orderings_over_rho(self, partial_cfg):
        for rho in np.geomspace(1e-3, 0.2, 50):
            cfg = partial_cfg.replace(rho=float(rho))
            loose = individual_partial_decide(cfg, RayleighCqi(0.01)).r2
            tight = individual_partial_decide(
                cfg.replace(outage_threshold_primary=0.01), RayleighCqi(0.01)
            ).r2
            weaker = individual_partial_decide(cfg, RayleighCqi(0.005)).r2
            assert loose >= tight
            assert weaker >= loose

    def test_deep_fade_meets_full_cqi(self, partial_cfg, full_cfg):
        partial = individual_partial_decide(partial_cfg, RayleighCqi(1e-6)).r2
        full = individual_decide(full_cfg.replace(gain2_21=0.0)).r2
        assert partial == pytest.approx(full, abs=1e-3)

    def test_power_shrinks_with_outage_threshold(self, partial_cfg, rayleigh):
        powers = [
            individual_partial_decide(
                partial_cfg.replace(outage_threshold_primary=o_t), rayleigh
            ).p2
            for o_t in (0.1, 1e-3, 1e-30, 1e-300)
        ]
        assert powers == sorted(powers, reverse=True)
        assert powers[-1] < 0.05

    def test_requires_partial_cqi(self, full_cfg, rayleigh):
        with pytest.raises(UcrPreconditionError):
            individual_partial_decide(full_cfg, rayleigh)


class TestSsmdPartial:
    def test_uses_criterion1_power(self, tsmd_cfg, rayleigh):
        cfg = tsmd_cfg.replace(gain2_21=None)
        decision = ssmd_partial_decide(cfg, rayleigh)
        assert decision.mode == "ssmd"
        assert decision.branch == "ssmd"
        assert decision.p2 == pytest.approx(9.118, rel=2e-3)
        assert decision.r2 == pytest.approx(2.3206, abs=2e-3)
        assert decision.primary_outage_prob == pytest.approx(0.1, abs=1e-9)

    def test_degraded_without_decodable_primary(self, partial_cfg, rayleigh):
        decision = ssmd_partial_decide(partial_cfg, rayleigh)
        assert decision.branch == "ssmd-degraded"
        assert decision.r2 == pytest.approx(individual_partial_decide(partial_cfg, rayleigh).r2)


class TestCaseThresholds:
    def test_case1_threshold(self, partial_cfg):
        lambdas = LambdaPair.from_snr(partial_cfg.g11, partial_cfg.g12)
        threshold = case1_threshold(1.0, lambdas.lambda1, 0.1)
        assert threshold == pytest.approx(277.0, abs=1.0)
        assert 250.0 <= threshold <= 330.0

    def test_case1_condition_strict(self):
        threshold = case1_threshold(1.0, 29.19, 0.1)
        assert not case1_condition(RayleighCqi(threshold), 1.0, 29.19, 0.1)
        assert case1_condition(RayleighCqi(threshold * 1.01), 1.0, 29.19, 0.1)
        assert case1_condition(RayleighCqi(1e12), 1.0, 29.19, 0.1)

    def test_case1_condition_rejects_bad_threshold(self):
        with pytest.raises(UcrDomainError):
            case1_condition(RayleighCqi(1.0), 1.0, 29.19, 1.0)

    def test_case2_mean_cap(self):
        assert case2_mean_cap(0.7153, G11_16DB, 0.9, 0.0) == 0.0
        assert case2_mean_cap(0.7153, G11_16DB, 0.9, np.inf) == pytest.approx(12.37, abs=0.01)
        assert case2_mean_cap(0.7153, G11_16DB, 0.9, 0.09106) == pytest.approx(0.09106)
        assert case2_mean_cap(0.7153, G11_16DB, 0.999, np.inf) < case2_mean_cap(
            0.7153, G11_16DB, 0.9, np.inf
        )

    def test_case_probabilities_partition(self, partial_cfg):
        lambdas = LambdaPair.from_snr(partial_cfg.g11, partial_cfg.g12)
        for mean in (0.01, 1.0, 100.0, 1e4):
            probs = case_probabilities(RayleighCqi(mean), 1.0, lambdas)
            assert sum(probs.values()) == pytest.approx(1.0)
            assert min(probs.values()) >= -1e-15
            # with epsilon > 1/2 at most one of the first two cases can hold
            assert not (probs["above_lambda1"] > 0.5 and probs["below_lambda2"] > 0.5)


class TestWindow:
    def test_reference_peak(self, partial_cfg):
        lambdas = LambdaPair.from_snr(partial_cfg.g11, partial_cfg.g12)
        argmax, peak = window_peak(G11_16DB, lambdas.lambda1, lambdas.lambda2)
        assert argmax == pytest.approx(305.5, abs=0.5)
        assert peak == pytest.approx(0.888, abs=1e-3)

    def test_ratio_two(self):
        argmax, peak = window_peak(1.0, 2.0, 1.0)
        assert argmax == pytest.approx(1.0 / np.log(2.0))
        assert peak == pytest.approx(0.25)
        assert window_probability(argmax, 1.0, 2.0, 1.0) == pytest.approx(0.25)

    def test_tails_vanish(self):
        assert window_probability(0.0, 1.0, 2.0, 1.0) == 0.0
        assert window_probability(1e-9, 1.0, 2.0, 1.0) == pytest.approx(0.0)
        assert window_probability(1e12, 1.0, 2.0, 1.0) == pytest.approx(0.0, abs=1e-9)

    def test_rejects_inverted_lambdas(self):
        with pytest.raises(UcrDomainError):
            window_probability(1.0, 1.0, 1.0, 2.0)
        with pytest.raises(UcrDomainError):
            window_peak(1.0, 1.0, 1.0)

    def test_grid_search_matches_closed_form(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            g11 = db_to_linear(float(rng.uniform(15.5, 40.0)))
            lambda2 = float(rng.uniform(0.05, 1.0))
            lambda1 = lambda2 * (g11 + 1.0)
            g22 = float(rng.uniform(0.5, 50.0))
            argmax, peak = window_peak(g22, lambda1, lambda2)
            grid = np.geomspace(argmax / 1e3, argmax * 1e3, 100_000)
            values = window_probability(grid, g22, lambda1, lambda2)
            best = int(np.argmax(values))
            step = grid[1] / grid[0]
            assert grid[best] / step <= argmax <= grid[best] * step
            assert values[best] == pytest.approx(peak, abs=1e-6)
            assert peak == pytest.approx(np.exp(-np.log(g11 + 1.0) / g11) * g11 / (g11 + 1.0))


class TestCase3:
    def test_feasibility_root(self):
        root = case3_snr_root(0.9)
        assert 33.0 <= root <= 35.0
        assert abs(linear_to_db(root) - 15.3) < 0.5

    def test_root_vanishes_for_small_epsilon(self):
        assert case3_snr_root(0.3) == 0.0

    def test_infeasible_at_ten_db(self):
        report = case3_feasibility(10.0, 0.9, RayleighCqi(5.0), 1.0, 0.5, 0.1)
        assert not report
        assert "snr-floor" in report.failed

    def test_mean_floor(self, strong_cfg, strong_peak_mean):
        lambdas = LambdaPair.from_snr(strong_cfg.g11, strong_cfg.g12)
        report = case3_feasibility(
            strong_cfg.g11, 0.9, RayleighCqi(strong_peak_mean), 1.0, lambdas.lambda2, 1e-12
        )
        assert "mean-floor" in report.failed

    def test_feasible_at_thirty_db(self, strong_cfg, strong_peak_mean):
        lambdas = LambdaPair.from_snr(strong_cfg.g11, strong_cfg.g12)
        report = case3_feasibility(
            strong_cfg.g11, 0.9, RayleighCqi(strong_peak_mean), 1.0, lambdas.lambda2, 0.1
        )
        assert report
        assert report.failed == ()
        assert report.diagnostics["peak_probability"] == pytest.approx(0.992, abs=1e-3)

    def test_window_too_narrow_at_sixteen_db(self, partial_cfg):
        lambdas = LambdaPair.from_snr(partial_cfg.g11, partial_cfg.g12)
        peak_mean, peak = window_peak(1.0, lambdas.lambda1, lambdas.lambda2)
        assert peak < 0.9
        report = case3_feasibility(
            partial_cfg.g11, 0.9, RayleighCqi(peak_mean), 1.0, lambdas.lambda2, 0.1
        )
        assert report.failed == ("window",)

    def test_scaling_factor(self):
        assert scaling_factor(RayleighCqi(0.01), 0.1, 0.00715, 0.2919) is None
        chosen = scaling_factor(RayleighCqi(0.1), 0.1, 0.00715, 0.2919)
        assert chosen.value == pytest.approx(0.010536, rel=1e-4)
        assert chosen.secondary_outage == pytest.approx(0.1)

    def test_scaling_factor_at_lower_edge(self):
        o_1 = 1.0 - np.exp(-0.005 / 0.01)
        chosen = scaling_factor(RayleighCqi(0.01), o_1, 0.005, 1.0)
        assert chosen.value == pytest.approx(0.005)

    def test_scaling_factor_stays_below_upper(self):
        chosen = scaling_factor(RayleighCqi(1e6), 0.1, 0.1, 1.0)
        assert chosen.value < 1.0

    def test_overrate_bound(self):
        assert case3_overrate_bound(0.0) == 1.0
        assert case3_overrate_bound(G11_16DB) == pytest.approx(0.0245, abs=1e-4)

    def test_exact_overrate_below_bound(self):
        rng = np.random.default_rng(9)
        for g11 in db_to_linear(rng.uniform(15.0, 50.0, 100)):
            assert case3_overrate_exact(float(g11)) <= case3_overrate_bound(float(g11))


class TestPsmdPartial:
    def test_case1(self, partial_cfg):
        decision = psmd_partial_decide(partial_cfg, RayleighCqi(400.0))
        assert decision.case_id == CASE_1
        assert decision.r2 == pytest.approx(4.8814, abs=1e-3)
        assert decision.primary_outage_prob == pytest.approx(0.1)
        assert decision.delta_c1 == 0.0
        assert decision.p2 == partial_cfg.p2_local_max

    def test_case2(self, partial_cfg, rayleigh):
        decision = psmd_partial_decide(partial_cfg, rayleigh)
        assert decision.case_id == CASE_2
        assert decision.p2 == pytest.approx(decision.gbar_t / 0.01)
        assert decision.primary_outage_prob <= 0.1 + 1e-12
        view = partial_cfg.snr_view(decision.p2)
        assert decision.r2 == pytest.approx(noise_rate(view.g12, view.g22))

    def test_case3(self, strong_cfg, strong_peak_mean):
        decision = psmd_partial_decide(strong_cfg, RayleighCqi(strong_peak_mean))
        assert decision.case_id == CASE_3
        assert decision.primary_outage_prob == 0.0
        assert decision.secondary_outage_prob == pytest.approx(0.1)
        assert decision.scaling_factor == pytest.approx(np.log(1.0 / 0.9) * strong_peak_mean)
        expected = decodable_rate(
            strong_cfg.g11, strong_cfg.p2_local_max * decision.scaling_factor
        )
        assert decision.r2 == pytest.approx(expected)

    def test_case3_scaling_override(self, strong_cfg, strong_peak_mean):
        cfg = strong_cfg.replace(scaling=1.0)
        decision = psmd_partial_decide(cfg, RayleighCqi(strong_peak_mean))
        assert decision.case_id == CASE_3
        assert decision.scaling_factor == 1.0
        assert decision.secondary_outage_prob <= 0.1

    @pytest.mark.parametrize("scaling", [50.0, 100.0, 0.05])
    def test_case3_override_breaking_outage_or_range_denies_access(
        self, strong_cfg, strong_peak_mean, scaling, caplog
    ):
        # 50 keeps to the decodable range but pushes the secondary outage near 0.98
        cfg = strong_cfg.replace(scaling=scaling)
        with caplog.at_level(logging.WARNING, logger="ucr"):
            decision = psmd_partial_decide(cfg, RayleighCqi(strong_peak_mean))
        assert decision.case_id == CASE_NO_ACCESS
        assert not decision.access
        assert decision.r2 == 0.0
        assert "scaling override" in caplog.text

    def test_case3_override_at_outage_cap(self, strong_cfg, strong_peak_mean):
        cap = np.log(1.0 / 0.9) * strong_peak_mean
        decision = psmd_partial_decide(
            strong_cfg.replace(scaling=cap), RayleighCqi(strong_peak_mean)
        )
        assert decision.case_id == CASE_3
        assert decision.secondary_outage_prob == pytest.approx(0.1)

    def test_no_access_below_feasibility_root(self, partial_cfg):
        cfg = partial_cfg.replace(p1=10.0, p2_local_max=10.0)
        decision = psmd_partial_decide(cfg, RayleighCqi(5.0))
        assert decision.case_id == CASE_NO_ACCESS
        assert not decision.access
        assert decision.r2 == 0.0
        assert decision.c1 == pytest.approx(capacity(cfg.g11))

    def test_case_regions_over_mean(self, partial_cfg):
        cases = [
            psmd_partial_decide(partial_cfg, RayleighCqi(float(mean))).case_id
            for mean in np.geomspace(1e-3, 1e4, 100)
        ]
        assert cases[0] == CASE_2
        assert cases[-1] == CASE_1
        assert CASE_3 not in cases

    def test_degenerate_link(self, partial_cfg, rayleigh):
        with pytest.raises(UcrDegenerateLinkError):
            psmd_partial_decide(partial_cfg.replace(gain2_22=0.0), rayleigh)

    def test_row_shows_case(self, partial_cfg, rayleigh):
        row = psmd_partial_decide(partial_cfg, rayleigh).as_row()
        assert row["branch"] == "psmd:Case2"


class TestTsmdPartial:
    @pytest.fixture
    def cfg(self, tsmd_cfg):
        return tsmd_cfg.replace(gain2_21=None)

    def test_case2_prefers_ssmd_arm(self, cfg, rayleigh):
        decision = tsmd_partial_decide(cfg, rayleigh)
        assert decision.case_id == CASE_2
        assert decision.branch == "tsmd-ssmd-arm"
        assert decision.r2 == pytest.approx(2.3206, abs=2e-3)
        assert decision.scaling_factor == pytest.approx(0.01 * np.log(1.0 / 0.9))
        assert decision.scaling_factor < cfg.gain2_22
        assert decision.primary_outage_prob == pytest.approx(0.1, abs=1e-9)

    def test_case2_decode_arm_without_penalty(self, cfg, rayleigh):
        decision = tsmd_partial_decide(cfg.replace(rho=0.0), rayleigh)
        assert decision.case_id == CASE_2
        assert decision.branch == "tsmd-decode-arm"
        assert decision.r2 == pytest.approx(0.00148, abs=2e-5)
        assert decision.delta_c1 == 0.0

    def test_case1(self, cfg):
        decision = tsmd_partial_decide(cfg, RayleighCqi(20.0))
        scaling = 20.0 * np.log(1.0 / 0.9)
        assert decision.case_id == CASE_1
        assert decision.scaling_factor == pytest.approx(scaling)
        assert decision.scaling_factor > cfg.gain2_22
        view = cfg.snr_view(mean_gain2=20.0)
        expected = min(
            capacity(cfg.p2_local_max * scaling + view.g11), capacity(view.g12 + view.g22)
        ) - capacity(view.g11)
        assert decision.r2 == pytest.approx(expected)
        assert decision.secondary_outage_prob == pytest.approx(0.1)

    def test_case1_needs_mean_above_direct_gain(self, cfg):
        assert 1.0 / np.log(1.0 / 0.9) == pytest.approx(9.49, abs=0.01)
        decision = tsmd_partial_decide(cfg, RayleighCqi(9.0))
        assert decision.case_id != CASE_1

    def test_no_access_between_cases(self, cfg):
        decision = tsmd_partial_decide(cfg, RayleighCqi(1.0))
        assert decision.case_id == CASE_NO_ACCESS
        assert not decision.access

    def test_reduces_to_psmd(self, partial_cfg, rayleigh):
        decision = tsmd_partial_decide(partial_cfg, rayleigh)
        assert decision.mode == "tsmd"
        assert decision.branch == "tsmd-as-psmd"
        assert decision.case_id == CASE_2


class TestPartialDeciders:
    def test_every_mode_has_a_decider(self):
        assert set(PARTIAL_CQI_DECIDERS) == set(MODES)
