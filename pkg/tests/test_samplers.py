import math

import numpy as np
import pytest
from scipy.stats import kstest

from issmcmc import Ar2Model, Dataset, ProbitModel, SamplerConfig, SubsetIndex, run_iss, run_mh
from issmcmc.diagnostics import posterior_grid, probit_subset_with_ones
from issmcmc.models.base import Model, subset_rows
from issmcmc.samplers import (
    AdaptiveSingleSiteRW,
    GaussianRandomWalk,
    InvalidChainState,
    adaptive_rw_update,
    check_state,
    mh_log_accept,
    pilot_scale,
    resolve_engine,
    scaled_log_sub_posterior,
)


class GaussianMean(Model):
    """y_i ~ N(θ, 1), θ ~ N(0, τ²): conjugate toy target."""

    name = "gauss_mean"
    param_dim = 1
    summary_dim = 1
    additive = True

    def __init__(self, tau2=10.0):
        self.tau2 = tau2

    def log_prior(self, theta):
        return -0.5 * theta[0] ** 2 / self.tau2 - 0.5 * math.log(2 * math.pi * self.tau2)

    def log_likelihood(self, dataset, subset, theta):
        y = subset_rows(dataset.y, subset)
        return float(-0.5 * ((y - theta[0]) ** 2).sum() - 0.5 * y.size * math.log(2 * math.pi))

    def summary(self, dataset, subset):
        return np.array([subset_rows(dataset.y, subset).mean()])

    def observation_summaries(self, dataset):
        return dataset.y.reshape(-1, 1)

    def simulate(self, theta, N, rng):
        return Dataset(rng.normal(theta[0], 1.0, N))

    def sample_prior(self, rng):
        return np.array([rng.normal(0, math.sqrt(self.tau2))])


class CountingProbit(ProbitModel):
    def __init__(self):
        super().__init__()
        self.full_calls = 0
        self.calls = 0

    def log_likelihood(self, dataset, subset, theta):
        self.calls += 1
        if subset is None or subset.n == dataset.N:
            self.full_calls += 1
        return super().log_likelihood(dataset, subset, theta)


def batch_means_se(x, batches=50):
    b = np.array_split(x, batches)
    return np.std([c.mean() for c in b], ddof=1) / math.sqrt(batches)


class TestAcceptanceRule:
    def test_same_point(self):
        assert mh_log_accept(-3.2, -3.2) == 0.0

    def test_outside_support(self):
        assert mh_log_accept(-1.0, -np.inf) == -np.inf

    def test_uphill(self):
        la = mh_log_accept(-2.0, -1.3)
        assert la == pytest.approx(0.7) and min(1.0, math.exp(la)) == 1.0

    def test_invalid_current(self):
        with pytest.raises(InvalidChainState):
            mh_log_accept(-np.inf, -1.0)


class TestAdaptiveRule:
    def test_in_band(self):
        assert adaptive_rw_update(0.3, [1] * 45 + [0] * 55) == 0.3

    def test_high(self):
        assert adaptive_rw_update(0.3, [1] * 9 + [0]) == pytest.approx(0.33)

    def test_low(self):
        assert adaptive_rw_update(0.3, [1] + [0] * 9) == pytest.approx(0.27)

    def test_clamped(self):
        assert adaptive_rw_update(1e8, [1]) == 1e8
        assert adaptive_rw_update(1e-8, [0]) == 1e-8

    def test_empty(self):
        with pytest.raises(ValueError):
            adaptive_rw_update(1.0, [])

    def test_single_site_freezes(self):
        prop = AdaptiveSingleSiteRW([0.1, 0.2], 2, adapt_every=5)
        rng = np.random.default_rng(0)
        th = np.zeros(2)
        for _ in range(10):
            new = prop.propose(th, rng)
            assert np.count_nonzero(new - th) == 1
            prop.observe(True)
        assert prop.scales == pytest.approx([0.11, 0.22])
        prop.freeze()
        for _ in range(20):
            prop.propose(th, rng)
            prop.observe(False)
        assert prop.scales == pytest.approx([0.11, 0.22])


class TestProposals:
    def test_covariance_matrix(self):
        cov = np.array([[1.0, 0.5], [0.5, 2.0]])
        prop = GaussianRandomWalk(cov, 2)
        rng = np.random.default_rng(1)
        steps = np.array([prop.propose(np.zeros(2), rng) for _ in range(40_000)])
        assert np.allclose(np.cov(steps.T), cov, atol=0.05)

    def test_bad_shapes(self):
        with pytest.raises(ValueError):
            GaussianRandomWalk([1.0, 2.0], 3)
        with pytest.raises(ValueError):
            GaussianRandomWalk(np.array([[1.0, 0.2], [0.0, 1.0]]), 2)


class TestTargets:
    def test_full_subset_is_posterior(self, rng):
        m = ProbitModel()
        d = m.simulate([1.0], 200, rng)
        th = np.array([0.8])
        assert scaled_log_sub_posterior(m, d, SubsetIndex.full(200), th, 200, 200) == pytest.approx(
            m.log_posterior(d, th), abs=1e-12)

    def test_probit_counts_formula(self, rng):
        m = ProbitModel()
        d = m.simulate([1.0], 300, rng)
        U = SubsetIndex.from_sorted(np.sort(rng.choice(300, 40, replace=False)))
        c1 = d.y[U.indices].sum()
        a = m.alpha(0.9)
        expected = m.log_prior([0.9]) + 300 / 40 * (c1 * math.log(a) + (40 - c1) * math.log(1 - a))
        assert scaled_log_sub_posterior(m, d, U, np.array([0.9]), 300, 40) == pytest.approx(expected, abs=1e-9)

    def test_doubling_n_same_proportion(self):
        m = ProbitModel()
        d = Dataset(np.r_[np.ones(60), np.zeros(40)])
        U1 = probit_subset_with_ones(d, 10, 6)
        U2 = probit_subset_with_ones(d, 20, 12)
        th = np.array([0.4])
        assert scaled_log_sub_posterior(m, d, U1, th, 100, 10) == pytest.approx(
            scaled_log_sub_posterior(m, d, U2, th, 100, 20), abs=1e-10)


class TestRunMH:
    def test_conjugate_mean(self):
        m = GaussianMean(10.0)
        d = m.simulate([1.5], 50, np.random.default_rng(2))
        post_var = 1.0 / (1 / 10.0 + 50)
        post_mean = post_var * d.y.sum()
        cfg = SamplerConfig(n=50, iterations=100_000, proposal_scale=2.4 * math.sqrt(post_var), burn_in=0.1)
        rec = run_mh(m, d, cfg, np.random.default_rng(3))
        x = rec.post_burn_in()[:, 0]
        assert abs(x.mean() - post_mean) < 3 * batch_means_se(x)
        assert x.var() == pytest.approx(post_var, rel=0.05)

    def test_zero_scale_constant(self, rng):
        m = ProbitModel()
        d = m.simulate([1.0], 100, rng)
        rec = run_mh(m, d, SamplerConfig(n=100, iterations=200, proposal_scale=0.0), rng, theta0=[0.7])
        assert np.all(rec.theta == 0.7)

    def test_probit_acceptance(self):
        m = ProbitModel()
        d = m.simulate([1.0], 10_000, np.random.default_rng(4))
        sd = pilot_scale(m, d, np.random.default_rng(5))
        rec = run_mh(m, d, SamplerConfig(n=10_000, iterations=20_000, proposal_scale=2.4 * sd),
                     np.random.default_rng(6))
        assert 0.1 < rec.param_acceptance_rate < 0.7

    def test_invalid_start(self, rng):
        m = Ar2Model()
        d = m.simulate([1.0, -0.5, 1.0], 100, rng)
        with pytest.raises(InvalidChainState):
            run_mh(m, d, SamplerConfig(n=100, iterations=10), rng, theta0=[0.5, 0.9, 1.0])

    def test_record_shapes(self, rng):
        m = ProbitModel()
        d = m.simulate([1.0], 100, rng)
        rec = run_mh(m, d, SamplerConfig(n=100, iterations=500, proposal_scale=0.2), rng)
        assert len(rec) == 500 and rec.theta.shape == (500, 1)
        assert np.all(np.diff(rec.t_wall_ns) >= 0) and rec.burn_in == 100


class TestRunISS:
    def test_never_evaluates_full_likelihood(self):
        m = CountingProbit()
        d = m.simulate([1.0], 2000, np.random.default_rng(7))
        cfg = SamplerConfig(n=100, epsilon=0.01, iterations=2000, proposal_scale=0.1, anneal_steps=50)
        run_iss(m, d, cfg, np.random.default_rng(8))
        assert m.full_calls == 0 and m.calls > 0

    def test_one_likelihood_per_rejected_subset_iteration(self):
        m = CountingProbit()
        d = m.simulate([1.0], 2000, np.random.default_rng(7))
        U = probit_subset_with_ones(d, 100, int(round(d.y.mean() * 100)))
        cfg = SamplerConfig(n=100, epsilon=1e9, iterations=1000, proposal_scale=0.1)
        rec = run_iss(m, d, cfg, np.random.default_rng(9), initial_subset=U)
        extra = int(rec.subset_accept.sum())
        assert m.calls == 1 + 1000 + extra

    def test_cache_check_passes(self):
        m = ProbitModel()
        d = m.simulate([1.0], 2000, np.random.default_rng(10))
        cfg = SamplerConfig(n=200, epsilon=0.001, iterations=5000, proposal_scale=0.1, anneal_steps=10)
        run_iss(m, d, cfg, np.random.default_rng(11), check_every=1000)

    def test_cache_check_detects_corruption(self):
        from issmcmc.core import ChainState
        m = ProbitModel()
        d = m.simulate([1.0], 100, np.random.default_rng(12))
        U = SubsetIndex.from_sorted(np.arange(10))
        st = ChainState(np.array([1.0]), U, m.summary(d, U), None, -1.0)
        with pytest.raises(InvalidChainState):
            check_state(m, d, st, 10, m.summary(d, None), U)

    def test_huge_epsilon_keeps_mismatch(self):
        m = ProbitModel()
        d = m.simulate([1.0], 1000, np.random.default_rng(13))
        best = int(round(d.y.sum() / 10))
        U = probit_subset_with_ones(d, 100, best)
        cfg = SamplerConfig(n=100, epsilon=1e12, iterations=20_000, proposal_scale=0.15, burn_in=0.1)
        rec = run_iss(m, d, cfg, np.random.default_rng(14), initial_subset=U)
        # Only swaps between equal labels leave the mismatch unchanged, so those are the only accepted moves.
        assert rec.subset_accept.any()
        # With the best count fixed, the recorded target is the scaled counts formula at every iteration.
        a = m.alpha(rec.theta[:, 0])
        expect = np.array([m.log_prior([t]) for t in rec.theta[:, 0]]) + 10 * (best * np.log(a) + (100 - best) * np.log1p(-a))
        assert np.allclose(rec.log_target, expect, atol=1e-8)

    @pytest.mark.slow
    def test_zero_delta_subset_reproduces_posterior(self):
        m = ProbitModel()
        N, n = 10_000, 1000
        # 8400 ones gives an exactly matched subset with 840 ones.
        d = Dataset(np.r_[np.ones(8400), np.zeros(1600)], kind="probit")
        U = probit_subset_with_ones(d, n, 840, np.random.default_rng(16))
        sd = 0.017
        cfg = SamplerConfig(n=n, epsilon=1e6, iterations=125_000, proposal_scale=2.4 * sd)
        rec = run_iss(m, d, cfg, np.random.default_rng(17), initial_subset=U)
        g = posterior_grid(m, d, None)
        cdf = np.cumsum(g.weights)
        x = rec.post_burn_in()[::5, 0]
        stat = kstest(x, lambda t: np.interp(t, g.grid, cdf)).statistic
        assert stat < 0.02

    @pytest.mark.slow
    def test_large_eps_matches_mh(self):
        m = ProbitModel()
        d = m.simulate([1.0], 10_000, np.random.default_rng(18))
        sd = pilot_scale(m, d, np.random.default_rng(19))
        ref = run_mh(m, d, SamplerConfig(n=10_000, iterations=125_000, proposal_scale=sd), np.random.default_rng(20))
        cfg = SamplerConfig(n=1000, epsilon=1.0, iterations=125_000, proposal_scale=sd, anneal_steps=1000)
        rec = run_iss(m, d, cfg, np.random.default_rng(21))
        stat = kstest(rec.post_burn_in()[:, 0], ref.post_burn_in()[:, 0]).statistic
        assert stat < 0.05

    def test_reduction_python_engine(self):
        m = ProbitModel()
        d = m.simulate([1.0], 500, np.random.default_rng(22))
        cfg = SamplerConfig(n=500, epsilon=3.0, iterations=2000, proposal_scale=0.1, adaptive=True)
        a = run_mh(m, d, cfg, np.random.default_rng(23))
        b = run_iss(m, d, cfg, np.random.default_rng(23))
        assert np.array_equal(a.theta, b.theta)

    def test_window_model_needs_window_proposal(self, rng):
        m = Ar2Model()
        d = m.simulate([1.0, -0.5, 1.0], 500, rng)
        with pytest.raises(ValueError):
            run_iss(m, d, SamplerConfig(n=50, iterations=10, subset_proposal="swap"), rng, engine="python")


class TestEngines:
    def test_auto_selection(self):
        ar, pr = Ar2Model(), ProbitModel()
        diag = GaussianRandomWalk(0.1, 3)
        assert resolve_engine("auto", ar, diag) == "compiled"
        assert resolve_engine("auto", ar, diag, check_every=10) == "python"
        assert resolve_engine("auto", pr, GaussianRandomWalk(0.1, 1)) == "python"
        assert resolve_engine("auto", Ar2Model(summary="autocorr"), diag) == "python"
        with pytest.raises(ValueError):
            resolve_engine("compiled", pr, GaussianRandomWalk(0.1, 1))

    @pytest.mark.parametrize("wl", ["marginal", "conditional"])
    def test_compiled_matches_python_ar2(self, wl):
        m = Ar2Model(window_likelihood=wl)
        d = m.simulate([1.0, -0.5, 1.0], 3000, np.random.default_rng(24))
        cfg = SamplerConfig(n=300, epsilon=50.0, delta_scale="per_obs", iterations=3000,
                            proposal_scale=[0.03, 0.03, 0.03], subset_proposal="window", anneal_steps=100)
        py = run_iss(m, d, cfg, np.random.default_rng(25), engine="python")
        cc = run_iss(m, d, cfg, np.random.default_rng(25), engine="compiled")
        # Different random-number layouts, same target: compare distributions.
        assert cc.meta.get("engine") == "compiled"
        for j in range(3):
            assert kstest(py.post_burn_in()[:, j], cc.post_burn_in()[:, j]).statistic < 0.25

    def test_compiled_reduction(self):
        m = Ar2Model()
        d = m.simulate([1.0, -0.5, 1.0], 2000, np.random.default_rng(26))
        cfg = SamplerConfig(n=2000, iterations=3000, proposal_scale=[0.02, 0.02, 0.02], subset_proposal="window")
        a = run_mh(m, d, cfg, np.random.default_rng(27), engine="compiled")
        b = run_iss(m, d, cfg, np.random.default_rng(27), engine="compiled")
        assert np.array_equal(a.theta, b.theta)
