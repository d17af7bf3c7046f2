import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.optimize import root
from scipy.signal import lfilter
from scipy.stats import norm

from issmcmc import Ar2Model, Dataset, GaussMixModel, InadmissibleSubset, LogisticModel, ProbitModel, SubsetIndex
from issmcmc.models import MLEConvergenceError, build_model, gaussmix_summary, logistic_mle, yule_walker_ar2
from issmcmc.models.ar2 import STATIONARY_GAUSS_MASS


def exact_acf_series(rho1, rho2, seed=0, length=3000):
    """Series whose biased empirical lag-1/lag-2 autocorrelations equal (rho1, rho2)."""
    rng = np.random.default_rng(seed)
    t1 = rho1 * (1 - rho2) / (1 - rho1 ** 2)
    t2 = (rho2 - rho1 ** 2) / (1 - rho1 ** 2)
    base = lfilter([1.0], [1.0, -t1, -t2], rng.normal(size=length))
    v1, v2 = np.roll(base, 1), np.roll(base, 2)

    def acf(x):
        z = x - x.mean()
        return (z[1:] @ z[:-1]) / (z @ z), (z[2:] @ z[:-2]) / (z @ z)

    resid = lambda ab: np.subtract(acf(base + ab[0] * v1 + ab[1] * v2), (rho1, rho2))
    ab = root(resid, [0.0, 0.0], tol=1e-15).x
    assert np.max(np.abs(resid(ab))) < 1e-14
    return base + ab[0] * v1 + ab[1] * v2


class TestProbit:
    def test_symmetric_point(self):
        d = Dataset(np.array([1.0, 0.0]))
        assert ProbitModel().log_likelihood(d, None, [0.0]) == pytest.approx(2 * math.log(0.5), abs=1e-14)

    def test_log_phi_one(self):
        d = Dataset(np.array([1.0]))
        assert ProbitModel().log_likelihood(d, None, [1.0]) == pytest.approx(-0.17275377902344988, abs=1e-14)

    def test_all_ones_increases_to_zero(self):
        d = Dataset(np.ones(5))
        vals = [ProbitModel().log_likelihood(d, None, [t]) for t in np.linspace(0, 30, 61)]
        assert np.all(np.diff(vals) > 0) and -1e-12 < vals[-1] <= 0

    def test_tails_are_finite(self):
        d = Dataset(np.array([1.0, 0.0]))
        assert np.isfinite(ProbitModel().log_likelihood(d, None, [60.0]))
        assert np.isfinite(ProbitModel().log_likelihood(d, None, [-60.0]))

    def test_alpha_increasing(self):
        a = ProbitModel(gamma=2.0).alpha(np.linspace(-5, 5, 101))
        assert np.all(np.diff(a) > 0)

    def test_concave(self, rng):
        m = ProbitModel()
        d = m.simulate([1.0], 500, rng)
        grid = np.linspace(-3, 4, 200)
        ll = m.log_likelihood_many(d, None, grid)
        assert np.all(np.diff(ll, 2) < 0)

    def test_simulated_fraction(self):
        d = ProbitModel().simulate([1.0], 100_000, np.random.default_rng(0))
        p = norm.cdf(1.0)
        assert abs(d.y.mean() - p) < 3 * math.sqrt(p * (1 - p) / 1e5)

    def test_bad_gamma(self):
        with pytest.raises(ValueError):
            ProbitModel(gamma=0.0)


class TestAr2Likelihood:
    def test_zero_window(self):
        d = Dataset(np.zeros(3))
        assert Ar2Model().log_likelihood(d, SubsetIndex.window(0, 3), np.array([0.5, -0.2, 1.0])) == pytest.approx(
            3 * -0.9189385332046727, abs=1e-12)

    def test_hand_window(self):
        # log N2((1,2); 0, I) + log N(0.5; 1*2 - 0.5*1, 1) = -2.5 - log 2pi - 0.5 - 0.5 log 2pi
        d = Dataset(np.array([1.0, 2.0, 0.5]))
        expected = -2.5 - math.log(2 * math.pi) - 0.5 - 0.5 * math.log(2 * math.pi)
        assert expected == pytest.approx(-5.756815599614018, abs=1e-12)
        got = Ar2Model().log_likelihood(d, SubsetIndex.window(0, 3), np.array([1.0, -0.5, 1.0]))
        assert got == pytest.approx(expected, abs=1e-12)

    def test_full_window_equals_full(self, rng):
        m = Ar2Model()
        d = m.simulate([1.0, -0.5, 1.0], 300, rng)
        th = np.array([0.9, -0.4, 1.1])
        assert m.log_likelihood(d, SubsetIndex.full(300), th) == m.log_likelihood(d, None, th)

    def test_conditional_drops_initial_pair(self, rng):
        d = Ar2Model().simulate([1.0, -0.5, 1.0], 300, rng)
        th = np.array([0.9, -0.4, 1.1])
        U = SubsetIndex.window(10, 50)
        seg = d.y[10:60]
        init = norm.logpdf(seg[:2], 0, 1.1).sum()
        gap = Ar2Model().log_likelihood(d, U, th) - Ar2Model(window_likelihood="conditional").log_likelihood(d, U, th)
        assert gap == pytest.approx(init, abs=1e-10)

    def test_rejects_nonpositive_scale(self, rng):
        d = Ar2Model().simulate([1.0, -0.5, 1.0], 30, rng)
        with pytest.raises(ValueError):
            Ar2Model().log_likelihood(d, None, np.array([1.0, -0.5, 0.0]))

    def test_rejects_general_subset(self, rng):
        d = Ar2Model().simulate([1.0, -0.5, 1.0], 30, rng)
        with pytest.raises(ValueError):
            Ar2Model().log_likelihood(d, SubsetIndex.from_sorted(np.array([0, 2, 5])), np.array([1.0, -0.5, 1.0]))

    def test_simulated_lag1(self):
        d = Ar2Model().simulate([1.0, -0.5, 1.0], 100_000, np.random.default_rng(1))
        z = d.y - d.y.mean()
        assert abs((z[1:] @ z[:-1]) / (z @ z) - 2 / 3) < 0.02

    def test_simulate_rejects_bad_theta(self, rng):
        with pytest.raises(ValueError):
            Ar2Model().simulate([1.0, -0.5, -1.0], 10, rng)


class TestAr2Prior:
    def test_stationarity_mass(self):
        mass, _ = quad(lambda t2: norm.pdf(t2) * (2 * norm.cdf(1 - t2) - 1), -1, 1, epsabs=1e-14)
        assert STATIONARY_GAUSS_MASS == pytest.approx(mass, abs=1e-12)

    def test_prior_outside_support(self):
        assert Ar2Model().log_prior([0.5, 0.9, 1.0]) == -np.inf
        assert Ar2Model().log_prior([0.5, -0.5, -1.0]) == -np.inf

    def test_prior_normalised_in_theta3(self):
        m = Ar2Model()
        base = m.log_prior([0.0, 0.0, 1.0]) - (-math.log(2 * math.pi) - math.log(STATIONARY_GAUSS_MASS))
        total, _ = quad(lambda s: math.exp(m.log_prior([0.0, 0.0, s]) - m.log_prior([0.0, 0.0, 1.0]) + base),
                        0, np.inf)
        assert total == pytest.approx(1.0, abs=1e-8)

    def test_prior_draws_in_support(self, rng):
        m = Ar2Model()
        assert all(m.in_support(m.sample_prior(rng)) for _ in range(200))


class TestYuleWalker:
    def test_constructed_autocorrelations(self):
        th = yule_walker_ar2(exact_acf_series(0.8, 0.5))
        assert th[0] == pytest.approx(0.8 * 0.5 / 0.36, abs=1e-10)
        assert th[1] == pytest.approx((0.5 - 0.64) / 0.36, abs=1e-10)
        assert th[0] == pytest.approx(1.1111111111, abs=1e-9) and th[1] == pytest.approx(-0.3888888889, abs=1e-9)

    def test_iid_noise(self):
        th = yule_walker_ar2(np.random.default_rng(2).normal(size=100_000))
        assert abs(th[0]) < 0.02 and abs(th[1]) < 0.02

    def test_zero_series(self):
        with pytest.raises(ValueError, match="variance"):
            yule_walker_ar2(np.zeros(10))

    def test_short_series(self):
        with pytest.raises(ValueError):
            yule_walker_ar2(np.array([1.0, 2.0]))

    def test_innovation_scale(self):
        d = Ar2Model().simulate([1.0, -0.5, 2.0], 200_000, np.random.default_rng(3))
        assert yule_walker_ar2(d.y)[2] == pytest.approx(2.0, rel=0.02)

    def test_error_shrinks_with_length(self):
        rng = np.random.default_rng(4)
        m = Ar2Model()
        errs = []
        for L in (2_000, 8_000, 32_000):
            errs.append(np.mean([np.abs(yule_walker_ar2(m.simulate([1.0, -0.5, 1.0], L, rng).y)[:2]
                                        - [1.0, -0.5]).sum() for _ in range(200)]))
        ratios = np.array(errs[:-1]) / np.array(errs[1:])
        assert np.all((ratios > 1.6) & (ratios < 2.5))

    def test_model_summary_is_yule_walker(self, rng):
        m = Ar2Model()
        d = m.simulate([1.0, -0.5, 1.0], 500, rng)
        assert np.allclose(m.summary(d, SubsetIndex.window(100, 200)), yule_walker_ar2(d.y[100:300]), atol=1e-14)

    def test_autocorr_summary(self, rng):
        m = Ar2Model(summary="autocorr", n_autocorr=4)
        d = m.simulate([1.0, -0.5, 1.0], 500, rng)
        s = m.summary(d, None)
        assert s.shape == (4,) and np.all(np.abs(s) <= 1)


class TestLogistic:
    def test_zero_theta(self, rng):
        m = LogisticModel(d=3)
        d = m.simulate([1, 2, -1], 37, rng)
        assert m.log_likelihood(d, None, np.zeros(3)) == pytest.approx(-37 * math.log(2), abs=1e-12)

    def test_single_point(self):
        d = Dataset(np.array([1.0]), X=np.array([[1.0, 0.0, 0.0]]))
        assert LogisticModel().log_likelihood(d, None, np.array([2.0, 0, 0])) == pytest.approx(
            -0.12692801104297263, abs=1e-14)

    def test_label_flip_symmetry(self, rng):
        m = LogisticModel(d=3)
        d = m.simulate([1, 2, -1], 80, rng)
        flipped = Dataset(1 - d.y, X=d.X)
        th = rng.normal(size=3)
        assert m.log_likelihood(flipped, None, -th) == pytest.approx(m.log_likelihood(d, None, th), abs=1e-10)

    def test_extreme_eta_finite(self):
        d = Dataset(np.array([0.0, 1.0]), X=np.array([[1000.0], [-1000.0]]))
        assert np.isfinite(LogisticModel(d=1).log_likelihood(d, None, np.array([5.0])))

    def test_mle_gradient_and_optimality(self, rng):
        m = LogisticModel(d=3)
        d = m.simulate([1, 2, -1], 400, rng)
        th = logistic_mle(d.X, d.y)
        assert np.max(np.abs(m.score(d, None, th))) < 1e-8
        assert m.log_likelihood(d, None, th) >= m.log_likelihood(d, None, np.zeros(3))

    def test_symmetric_design_mle(self):
        X = np.array([[1.0, 0.5], [0.3, -1.0], [-0.2, 0.8], [0.9, 0.1]])
        Xs = np.vstack([X, -X, X, -X])
        y = np.r_[1, 1, 0, 1, 0, 0, 1, 0, 0, 1, 1, 0, 1, 0, 0, 1.0]
        th = logistic_mle(Xs, y)
        assert np.max(np.abs(LogisticModel(d=2).score(Dataset(y, X=Xs), None, th))) < 1e-8

    def test_separable(self):
        with pytest.raises(MLEConvergenceError):
            logistic_mle(np.array([[1.0], [-1.0]]), np.array([1.0, 0.0]))

    def test_summary_is_mle(self, rng):
        m = LogisticModel(d=2)
        d = m.simulate([1.0, -1.0], 300, rng)
        assert np.allclose(m.summary(d, None), logistic_mle(d.X, d.y), atol=1e-12)

    def test_covariate_variance(self):
        d = LogisticModel(d=4).simulate([1, 0, 0, 0], 100_000, np.random.default_rng(5))
        assert np.allclose(d.X.var(axis=0), 1 / 16, rtol=0.03)


class TestGaussMix:
    def test_hand_summary(self):
        pts = np.array([[0, 0], [2, 0], [1, 1], [1, 3.0]])
        s = gaussmix_summary(pts, np.array([1, 1, 2, 2]))
        assert np.allclose(s, [1, 0, 2, 1, 2, 2], atol=1e-15)

    def test_unbalanced(self):
        with pytest.raises(InadmissibleSubset):
            gaussmix_summary(np.zeros((3, 2)), np.array([1, 1, 2]))

    def test_duplicates_zero_trace(self):
        pts = np.array([[1, 1], [1, 1], [0, 2], [0, 2.0]])
        s = gaussmix_summary(pts, np.array([1, 1, 2, 2]))
        assert s[2] == 0 and s[5] == 0

    def test_balanced_simulation(self, rng):
        d = GaussMixModel().simulate([-1, 1, 0.5, 0.5], 100, rng)
        assert (d.labels == 1).sum() == 50 and (d.labels == 2).sum() == 50

    def test_loglik_against_scipy(self, rng):
        from scipy.stats import multivariate_normal
        m = GaussMixModel()
        d = m.simulate([-1, 1, 0.5, 0.8], 40, rng)
        th = np.array([-0.8, 1.2, 0.6, 0.7])
        ref = sum(multivariate_normal.logpdf(p, [th[l - 1], 0], np.diag([th[l + 1] / 2, th[l + 1]]))
                  for p, l in zip(d.y, d.labels))
        assert m.log_likelihood(d, None, th) == pytest.approx(ref, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), name=st.sampled_from(["probit", "logistic", "gaussmix"]))
def test_loglik_additive_over_disjoint_union(seed, name):
    rng = np.random.default_rng(seed)
    m = build_model(name)
    theta = {"probit": [0.7], "logistic": [1, 2, -1], "gaussmix": [-1, 1, 0.5, 0.5]}[name]
    d = m.simulate(theta, 60, rng)
    perm = rng.permutation(60)
    a, b = np.sort(perm[:20]), np.sort(perm[20:45])
    U = lambda idx: SubsetIndex.from_sorted(idx)
    th = m.sample_prior(rng)
    whole = m.log_likelihood(d, U(np.sort(np.r_[a, b])), th)
    assert whole == pytest.approx(m.log_likelihood(d, U(a), th) + m.log_likelihood(d, U(b), th), abs=1e-10)


@pytest.mark.parametrize("name,theta", [("probit", [1.0]), ("ar2", [1, -0.5, 1]), ("logistic", [1, 2, -1]),
                                        ("gaussmix", [-1, 1, 0.5, 0.5])])
def test_simulate_deterministic(name, theta):
    m = build_model(name)
    a = m.simulate(theta, 100, np.random.default_rng(9))
    b = m.simulate(theta, 100, np.random.default_rng(9))
    assert np.array_equal(a.y, b.y)


def test_unknown_model():
    with pytest.raises(ValueError):
        build_model("nope")
