"""EVT CVaR estimator: tail quantile, tail mean, full pipeline."""

import numpy as np
import pytest

import evtcvar as ec
from evtcvar.errors import (
    DomainError,
    InsufficientDataError,
    NonIntegrableTailError,
)


class TestEvtQuantile:
    def test_threshold_at_target_level(self):
        assert ec.evt_quantile(3.7, 0.4, 1.0, 0.95, 0.95) == pytest.approx(3.7)

    def test_matches_gpd_quantile_from_origin(self):
        assert ec.evt_quantile(0.0, 1.0, 1.0, 0.0, 0.5) == pytest.approx(
            ec.gpd_quantile(1.0, 1.0, 0.5)
        )

    def test_extreme_level_from_origin(self):
        q = ec.evt_quantile(0.0, 0.4, 1.0, 0.0, 0.999)
        assert q == pytest.approx(ec.gpd_quantile(0.4, 1.0, 0.999), rel=1e-12)
        assert q == pytest.approx(37.1223, abs=1e-3)

    def test_exponential_branch(self):
        q = ec.evt_quantile(2.0, 0.0, 1.5, 0.7, 0.99)
        assert q == pytest.approx(2.0 + 1.5 * np.log(0.3 / 0.01))

    def test_threshold_above_target_rejected(self):
        with pytest.raises(DomainError):
            ec.evt_quantile(1.0, 0.4, 1.0, 0.99, 0.95)


class TestEvtCvarFromFit:
    def test_exponential_tail(self):
        assert ec.evt_cvar_from_fit(5.0, 1.0, 0.0, 2.0, 0.99) == pytest.approx(7.0)

    def test_zero_excess_offset(self):
        # q = u: tail mean collapses to u + sigma / (1 - xi)
        assert ec.evt_cvar_from_fit(2.0, 2.0, 0.5, 1.0, 0.99) == pytest.approx(4.0)

    def test_recovers_exact_gpd_cvar(self):
        q = 37.12232981152782
        val = ec.evt_cvar_from_fit(q, 0.0, 0.4, 1.0, 0.999)
        assert val == pytest.approx(
            ec.cvar_exact(ec.GeneralizedPareto(0.4, 1.0), 0.999), rel=1e-12
        )
        assert val == pytest.approx(63.54, abs=5e-3)

    def test_nonintegrable_shape(self):
        with pytest.raises(NonIntegrableTailError):
            ec.evt_cvar_from_fit(5.0, 1.0, 1.0, 1.0, 0.99)

    def test_quantile_below_threshold_rejected(self):
        with pytest.raises(DomainError):
            ec.evt_cvar_from_fit(0.5, 1.0, 0.3, 1.0, 0.99)


class TestExactInputIdentities:
    @pytest.mark.parametrize("xi", [0.0, 0.4, 0.8])
    @pytest.mark.parametrize("level", [0.7, 0.9])
    def test_pipeline_formulas_recover_truth(self, xi, level):
        # with the true excess parameters and exact F(u), the quantile and
        # tail-mean approximations are identities for GPD data
        sigma, alpha = 1.0, 0.999
        u = ec.gpd_quantile(xi, sigma, level)
        exi, esig = ec.gpd_excess_params(xi, sigma, u)
        f_u = ec.gpd_cdf(xi, sigma, u)
        q_hat = ec.evt_quantile(u, exi, esig, f_u, alpha)
        assert q_hat == pytest.approx(ec.gpd_quantile(xi, sigma, alpha), rel=1e-10)
        value = ec.evt_cvar_from_fit(q_hat, u, exi, esig, alpha)
        truth = ec.cvar_exact(ec.GeneralizedPareto(xi, sigma), alpha)
        assert value == pytest.approx(truth, rel=1e-10)

    def test_translation_covariance(self):
        # shifting u and q by c shifts the tail mean by exactly c
        q, u, xi, sig = 12.0, 4.0, 0.3, 1.5
        base = ec.evt_cvar_from_fit(q, u, xi, sig, 0.99)
        for c in (-2.0, 1.0, 10.0):
            shifted = ec.evt_cvar_from_fit(q + c, u + c, xi, sig, 0.99)
            assert shifted == pytest.approx(base + c, rel=1e-13)


class TestEstimateEvtCvar:
    def test_empty_sample(self):
        with pytest.raises(InsufficientDataError):
            ec.estimate_evt_cvar(ec.Sample(), 0.999)

    def test_small_sample_falls_back(self):
        est = ec.estimate_evt_cvar(ec.Sample(range(15)), 0.999)
        assert est.method is ec.Method.EVT_FALLBACK_SA
        sa = ec.sample_cvar(ec.Sample(range(15)), 0.999)
        assert est.value == sa.value

    def test_selection_failure_falls_back(self):
        y = ec.sample_iid(ec.GeneralizedPareto(5.0, 1.0), 2000, ec.RngStream(21, 0))
        est = ec.estimate_evt_cvar(ec.Sample(y), 0.999)
        assert est.method is ec.Method.EVT_FALLBACK_SA

    def test_evt_path_populates_fit(self):
        y = ec.sample_iid(ec.GeneralizedPareto(0.4, 1.0), 5000, ec.RngStream(22, 0))
        est = ec.estimate_evt_cvar(ec.Sample(y), 0.999)
        assert est.method is ec.Method.EVT
        assert est.fit is not None and est.fit.xi_hat <= 0.9
        assert est.threshold is not None
        assert est.value >= est.quantile >= est.threshold

    def test_never_below_threshold(self):
        for seed in range(20):
            y = ec.sample_iid(
                ec.GeneralizedPareto(0.8, 1.0), 1500, ec.RngStream(23, seed)
            )
            est = ec.estimate_evt_cvar(ec.Sample(y), 0.999)
            if est.method is ec.Method.EVT:
                assert est.value >= est.threshold

    def test_matches_manual_pipeline(self):
        # the wrapper agrees with select_threshold + the two formulas
        sample = ec.Sample(
            ec.sample_iid(ec.GeneralizedPareto(0.4, 1.0), 4000, ec.RngStream(24, 0))
        )
        est = ec.estimate_evt_cvar(sample, 0.999)
        sel = ec.select_threshold(sample, 0.999)
        assert est.threshold == sel.chosen.u
        f_u = ec.empirical_cdf(sample, sel.chosen.u)
        q = ec.evt_quantile(
            sel.chosen.u, sel.chosen.fit.xi_hat, sel.chosen.fit.sigma_hat, f_u, 0.999
        )
        assert est.quantile == pytest.approx(q, rel=1e-14)
        assert est.value == pytest.approx(
            ec.evt_cvar_from_fit(
                q, sel.chosen.u, sel.chosen.fit.xi_hat, sel.chosen.fit.sigma_hat, 0.999
            ),
            rel=1e-14,
        )

    def test_reasonable_on_heavy_tail(self):
        dist = ec.GeneralizedPareto(0.8, 1.0)
        truth = ec.cvar_exact(dist, 0.999)
        vals = []
        for seed in range(10):
            y = ec.sample_iid(dist, 5000, ec.RngStream(25, seed))
            vals.append(ec.estimate_evt_cvar(ec.Sample(y), 0.999).value)
        # median within a factor 2 of the truth at this sample size
        med = np.median(vals)
        assert truth / 2 < med < truth * 2
