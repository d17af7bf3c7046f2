"""Logistic regression with a fixed design; subset MLE as summary statistic."""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from ..core import Dataset
from .base import Model, subset_rows


class MLEConvergenceError(RuntimeError):
    """Newton-Raphson did not reach a finite maximiser (separable or ill-conditioned data)."""


def logistic_loglik(X, y, theta) -> float:
    eta = X @ theta
    # log(1 + e^eta) evaluated without overflow.
    return float(y @ eta - np.logaddexp(0.0, eta).sum())


def logistic_score(X, y, theta) -> np.ndarray:
    return X.T @ (y - expit(X @ theta))


def logistic_mle(X, y, max_iter: int = 100, tol: float = 1e-8, theta0=None) -> np.ndarray:
    """Maximum likelihood estimate by Newton-Raphson (IRLS).

    Converged when the max-norm of the score drops below ``tol``. Raises
    :class:`MLEConvergenceError` if the iteration cap is hit or the observed
    information degenerates, which is how separable data shows up.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    theta = np.zeros(d) if theta0 is None else np.array(theta0, dtype=float)
    for _ in range(max_iter):
        p = expit(X @ theta)
        grad = X.T @ (y - p)
        w = p * (1.0 - p)
        info = (X * w[:, None]).T @ X
        if np.linalg.eigvalsh(info)[0] < 1e-8 * n:
            raise MLEConvergenceError("observed information is degenerate (separable data?)")
        if np.max(np.abs(grad)) < tol:
            return theta
        theta = theta + np.linalg.solve(info, grad)
        if not np.all(np.isfinite(theta)):
            break
    raise MLEConvergenceError(f"Newton-Raphson did not converge in {max_iter} iterations")


class LogisticModel(Model):
    """P(Y_i = 1 | X_i) = 1/(1 + exp(-θ·X_i)), prior θ ~ N(0, prior_var I).

    Covariates are simulated i.i.d. N(0, (1/d)²) per coordinate and kept
    with the dataset. The summary of a subset is its MLE.
    """

    name = "logistic"
    additive = False

    def __init__(self, d: int = 3, prior_var: float = 10.0):
        if d < 1:
            raise ValueError("dimension must be >= 1")
        self.param_dim = int(d)
        self.summary_dim = int(d)
        self.prior_var = float(prior_var)

    def config(self):
        return {"model": self.name, "d": self.param_dim, "prior_var": self.prior_var}

    def log_prior(self, theta):
        theta = np.asarray(theta, dtype=float)
        return float(-0.5 * theta @ theta / self.prior_var
                     - 0.5 * self.param_dim * np.log(2 * np.pi * self.prior_var))

    def log_likelihood(self, dataset, subset, theta):
        return logistic_loglik(subset_rows(dataset.X, subset), subset_rows(dataset.y, subset),
                               np.asarray(theta, dtype=float))

    def score(self, dataset, subset, theta):
        return logistic_score(subset_rows(dataset.X, subset), subset_rows(dataset.y, subset),
                              np.asarray(theta, dtype=float))

    def initial_theta(self, dataset):
        try:
            return logistic_mle(dataset.X, dataset.y)
        except MLEConvergenceError:
            return np.zeros(self.param_dim)

    def summary(self, dataset, subset):
        return logistic_mle(subset_rows(dataset.X, subset), subset_rows(dataset.y, subset))

    def simulate(self, theta, N, rng):
        theta = self.check_theta(theta)
        d = self.param_dim
        X = rng.normal(0.0, 1.0 / d, size=(N, d))
        y = (rng.random(N) < expit(X @ theta)).astype(float)
        return Dataset(y, X=X, kind=self.name)

    def sample_prior(self, rng):
        return rng.normal(0.0, np.sqrt(self.prior_var), size=self.param_dim)
