"""Second-order autoregressive time series observed on contiguous windows."""

from __future__ import annotations

import math

import numpy as np
from scipy.signal import lfilter, lfiltic
from scipy.special import gammaln

from ..core import Dataset
from .base import Model

LOG_2PI = math.log(2.0 * math.pi)
# Mass of N(0, I) on the AR(2) stationarity triangle.
STATIONARY_GAUSS_MASS = 0.4222038590716851


def empirical_autocovariances(series, max_lag: int) -> np.ndarray:
    """Biased (divisor n) autocovariances of the demeaned series, lags 0..max_lag."""
    z = np.asarray(series, dtype=float)
    z = z - z.mean()
    n = z.shape[0]
    return np.array([z[k:] @ z[:n - k] for k in range(max_lag + 1)]) / n


def yule_walker_ar2(series) -> np.ndarray:
    """Solve the AR(2) Yule-Walker equations; returns (θ1, θ2, θ3).

    θ3 is the innovation standard deviation from c0·(1 - θ1ρ1 - θ2ρ2),
    floored at 1e-12.
    """
    series = np.asarray(series, dtype=float)
    if series.shape[0] < 3:
        raise ValueError("Yule-Walker needs at least 3 observations")
    return _yw_segment(series)


def _yw_segment(seg):
    # Inlined Yule-Walker for the sampler's hot path.
    z = seg - seg.mean()
    c0 = z @ z
    if not c0 > 0:
        raise ValueError("zero-variance series")
    c1 = z[1:] @ z[:-1]
    c2 = z[2:] @ z[:-2]
    r1, r2 = c1 / c0, c2 / c0
    det = 1.0 - r1 * r1
    if abs(det) < 1e-12:
        raise ValueError("singular Yule-Walker system")
    t1 = r1 * (1.0 - r2) / det
    t2 = (r2 - r1 * r1) / det
    var = c0 / seg.shape[0] * (1.0 - t1 * r1 - t2 * r2)
    return np.array([t1, t2, math.sqrt(max(var, 1e-24))])


def is_stationary(t1: float, t2: float) -> bool:
    return t2 < 1.0 - t1 and t2 < 1.0 + t1 and t2 > -1.0


class Ar2Model(Model):
    """AR(2) with (Y0, Y1) ~ N(0, θ3² I) and Gaussian innovations of sd θ3.

    Subsets are windows of consecutive observations, each treated as a
    standalone series. With ``window_likelihood="conditional"`` the first
    two points of a proper sub-window are conditioned on instead of scored
    under the initial density; the full series always uses the initial
    density.

    Prior: (θ1, θ2) ~ N(0, I) truncated to the stationarity triangle,
    θ3² ~ InvGamma(a, b).
    """

    name = "ar2"
    param_dim = 3
    additive = False
    window_only = True

    def __init__(self, summary: str = "yule_walker", n_autocorr: int = 5,
                 window_likelihood: str = "marginal", prior_a: float = 2.0, prior_b: float = 2.0):
        if summary not in ("yule_walker", "autocorr"):
            raise ValueError(f"unknown AR(2) summary {summary!r}")
        if window_likelihood not in ("marginal", "conditional"):
            raise ValueError(f"unknown window likelihood {window_likelihood!r}")
        self.summary_kind = summary
        self.n_autocorr = int(n_autocorr)
        self.window_likelihood = window_likelihood
        self.prior_a = float(prior_a)
        self.prior_b = float(prior_b)
        self.summary_dim = 3 if summary == "yule_walker" else self.n_autocorr

    def config(self):
        return {"model": self.name, "summary": self.summary_kind, "n_autocorr": self.n_autocorr,
                "window_likelihood": self.window_likelihood, "prior_a": self.prior_a, "prior_b": self.prior_b}

    def in_support(self, theta):
        t1, t2, t3 = theta
        return bool(np.all(np.isfinite(theta)) and t3 > 0 and is_stationary(t1, t2))

    def log_prior(self, theta):
        t1, t2, t3 = (float(v) for v in theta)
        if not (t3 > 0 and is_stationary(t1, t2)):
            return -np.inf
        lp = -0.5 * (t1 * t1 + t2 * t2) - LOG_2PI - math.log(STATIONARY_GAUSS_MASS)
        a, b = self.prior_a, self.prior_b
        v = t3 * t3
        # Inverse-gamma density on θ3², with the Jacobian 2θ3 of θ3 -> θ3².
        lp += a * math.log(b) - gammaln(a) - (a + 1) * math.log(v) - b / v + math.log(2 * t3)
        return lp

    def _segment(self, dataset, subset):
        if subset is None:
            return dataset.y, True
        if subset.start is None:
            raise ValueError("AR(2) likelihood needs a window subset")
        if subset.n < 3:
            raise ValueError("AR(2) window must contain at least 3 observations")
        return dataset.y[subset.start:subset.start + subset.n], subset.n == dataset.N

    def initial_theta(self, dataset):
        return yule_walker_ar2(dataset.y)

    def log_likelihood(self, dataset, subset, theta):
        t1, t2, t3 = theta[0], theta[1], theta[2]
        if not t3 > 0:
            raise ValueError("θ3 must be positive")
        seg, whole = self._segment(dataset, subset)
        resid = seg[2:] - t1 * seg[1:-1] - t2 * seg[:-2]
        m = resid.shape[0]
        inv_var = 1.0 / (t3 * t3)
        log_t3 = math.log(t3)
        ll = -0.5 * inv_var * (resid @ resid) - m * (log_t3 + 0.5 * LOG_2PI)
        if whole or self.window_likelihood == "marginal":
            ll += -LOG_2PI - 2.0 * log_t3 - 0.5 * inv_var * (seg[0] * seg[0] + seg[1] * seg[1])
        return float(ll)

    def summary(self, dataset, subset):
        seg, _ = self._segment(dataset, subset)
        if self.summary_kind == "yule_walker":
            return _yw_segment(seg)
        c = empirical_autocovariances(seg, self.n_autocorr)
        if not c[0] > 0:
            raise ValueError("zero-variance series")
        return c[1:] / c[0]

    def simulate(self, theta, N, rng):
        theta = self.check_theta(theta)
        t1, t2, t3 = theta
        if N < 3:
            raise ValueError("AR(2) series needs N >= 3")
        y0, y1 = rng.normal(0.0, t3, size=2)
        z = rng.normal(0.0, t3, size=N - 2)
        a = [1.0, -t1, -t2]
        zi = lfiltic([1.0], a, y=[y1, y0])
        rest, _ = lfilter([1.0], a, z, zi=zi)
        return Dataset(np.concatenate([[y0, y1], rest]), kind=self.name)

    def sample_prior(self, rng):
        while True:
            t1, t2 = rng.normal(size=2)
            if is_stationary(t1, t2):
                break
        v = self.prior_b / rng.gamma(self.prior_a)
        return np.array([t1, t2, math.sqrt(v)])
