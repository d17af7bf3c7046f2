"""Probit model with known noise scale (binary observations)."""

from __future__ import annotations

from typing import Optional

import numpy as np
from scipy.special import expit, log_ndtr, ndtri

from ..core import Dataset, SubsetIndex
from .base import Model, subset_rows


class ProbitModel(Model):
    """Y_k = 1{X_k > 0} with X_k ~ N(θ, γ²), so P(Y_k = 1) = Φ(θ/γ).

    The prior on θ is Gaussian (defaults N(0, 10), variance parameterised).
    The summary statistic is the observation itself, which is sufficient.
    """

    name = "probit"
    param_dim = 1
    summary_dim = 1
    additive = True

    def __init__(self, gamma: float = 1.0, prior_mean: float = 0.0, prior_var: float = 10.0):
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        if prior_var <= 0:
            raise ValueError("prior variance must be positive")
        self.gamma = float(gamma)
        self.prior_mean = float(prior_mean)
        self.prior_var = float(prior_var)

    def config(self):
        return {"model": self.name, "gamma": self.gamma, "prior_mean": self.prior_mean, "prior_var": self.prior_var}

    def alpha(self, theta):
        """Success probability Φ(θ/γ)."""
        return np.exp(log_ndtr(np.asarray(theta, dtype=float) / self.gamma))

    def natural_param(self, theta):
        """Natural parameter g(θ) = log α(θ) - log(1 - α(θ))."""
        t = np.asarray(theta, dtype=float) / self.gamma
        return log_ndtr(t) - log_ndtr(-t)

    def natural_param_inverse(self, eta):
        return self.gamma * ndtri(expit(np.asarray(eta, dtype=float)))

    def initial_theta(self, dataset):
        N = dataset.N
        p = min(max(float(dataset.y.mean()), 0.5 / N), 1.0 - 0.5 / N)
        return np.array([self.gamma * ndtri(p)])

    def log_prior(self, theta):
        t = float(np.asarray(theta).reshape(-1)[0])
        return -0.5 * (t - self.prior_mean) ** 2 / self.prior_var - 0.5 * np.log(2 * np.pi * self.prior_var)

    def counts(self, dataset: Dataset, subset: Optional[SubsetIndex]):
        y = subset_rows(dataset.y, subset)
        ones = float(y.sum())
        return ones, y.shape[0] - ones

    def log_likelihood_counts(self, ones, zeros, theta):
        # log_ndtr switches to its asymptotic expansion in the tails, so
        # finite θ never yields -inf.
        t = np.asarray(theta, dtype=float) / self.gamma
        return ones * log_ndtr(t) + zeros * log_ndtr(-t)

    def log_likelihood(self, dataset, subset, theta):
        ones, zeros = self.counts(dataset, subset)
        t = float(np.asarray(theta).reshape(-1)[0])
        return float(self.log_likelihood_counts(ones, zeros, t))

    def log_likelihood_many(self, dataset, subset, thetas):
        ones, zeros = self.counts(dataset, subset)
        return self.log_likelihood_counts(ones, zeros, np.asarray(thetas, dtype=float).reshape(-1))

    def summary(self, dataset, subset):
        return np.array([subset_rows(dataset.y, subset).mean()])

    def observation_summaries(self, dataset):
        return dataset.y.reshape(-1, 1)

    def simulate(self, theta, N, rng):
        theta = self.check_theta(theta)
        latent = rng.normal(theta[0], self.gamma, size=N)
        return Dataset((latent > 0).astype(float), kind=self.name)

    def sample_prior(self, rng):
        return np.array([rng.normal(self.prior_mean, np.sqrt(self.prior_var))])
