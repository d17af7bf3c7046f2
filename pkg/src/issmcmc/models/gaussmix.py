"""Two-class Gaussian model with observed labels (binary classification)."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from ..core import Dataset, InadmissibleSubset
from .base import Model, subset_rows

LOG_2PI = math.log(2.0 * math.pi)


def gaussmix_summary(points, labels) -> np.ndarray:
    """[class-1 mean (2), class-1 cov trace, class-2 mean (2), class-2 cov trace].

    Covariances use the unbiased (n-1) normalisation. Subsets whose class
    counts differ, or with fewer than two points per class, are
    inadmissible.
    """
    points = np.asarray(points, dtype=float)
    labels = np.asarray(labels)
    in1 = labels == 1
    in2 = labels == 2
    c1, c2 = int(in1.sum()), int(in2.sum())
    if c1 != c2:
        raise InadmissibleSubset(f"unbalanced subset: {c1} vs {c2} points per class")
    if c1 < 2:
        raise InadmissibleSubset("need at least two points per class")
    out = np.empty(6)
    for k, mask in enumerate((in1, in2)):
        pts = points[mask]
        out[3 * k:3 * k + 2] = pts.mean(axis=0)
        out[3 * k + 2] = pts.var(axis=0, ddof=1).sum()
    return out


class GaussMixModel(Model):
    """Y_k | I_k = i ~ N(μ_i, Γ_i) with μ_i = [m_i, 0], Γ_i = diag(v_i/2, v_i).

    θ = (m1, m2, v1, v2). Prior per class: m_i ~ N(0, 1/2) (variance),
    v_i ~ Gamma(shape 1, rate 2).
    """

    name = "gaussmix"
    param_dim = 4
    summary_dim = 6
    additive = False

    def __init__(self, mean_prior_var: float = 0.5, var_prior_shape: float = 1.0, var_prior_rate: float = 2.0):
        self.mean_prior_var = float(mean_prior_var)
        self.var_prior_shape = float(var_prior_shape)
        self.var_prior_rate = float(var_prior_rate)

    def config(self):
        return {"model": self.name, "mean_prior_var": self.mean_prior_var,
                "var_prior_shape": self.var_prior_shape, "var_prior_rate": self.var_prior_rate}

    def in_support(self, theta):
        return bool(np.all(np.isfinite(theta)) and theta[2] > 0 and theta[3] > 0)

    def log_prior(self, theta):
        m1, m2, v1, v2 = (float(t) for t in theta)
        if not (v1 > 0 and v2 > 0):
            return -np.inf
        s2 = self.mean_prior_var
        a, b = self.var_prior_shape, self.var_prior_rate
        lp = -0.5 * (m1 * m1 + m2 * m2) / s2 - math.log(2 * math.pi * s2)
        for v in (v1, v2):
            lp += a * math.log(b) - gammaln(a) + (a - 1) * math.log(v) - b * v
        return lp

    def log_likelihood(self, dataset, subset, theta):
        m1, m2, v1, v2 = (float(t) for t in theta)
        if not (v1 > 0 and v2 > 0):
            raise ValueError("class variances must be positive")
        pts = subset_rows(dataset.y, subset)
        lab = subset_rows(dataset.labels, subset)
        ll = 0.0
        for label, m, v in ((1, m1, v1), (2, m2, v2)):
            p = pts[lab == label]
            if p.shape[0] == 0:
                continue
            dx = p[:, 0] - m
            dy = p[:, 1]
            # diag(v/2, v): log det = log(v/2) + log(v)
            ll += (-0.5 * ((dx @ dx) * 2.0 / v + (dy @ dy) / v)
                   - p.shape[0] * (LOG_2PI + 0.5 * (math.log(v / 2.0) + math.log(v))))
        return float(ll)

    def initial_theta(self, dataset):
        # Class means and covariance traces; the trace of diag(v/2, v) is 1.5 v.
        s = self.summary(dataset, None)
        return np.array([s[0], s[3], s[2] / 1.5, s[5] / 1.5])

    def summary(self, dataset, subset):
        return gaussmix_summary(subset_rows(dataset.y, subset), subset_rows(dataset.labels, subset))

    def simulate(self, theta, N, rng):
        theta = self.check_theta(theta)
        if N % 2:
            raise ValueError("mixture data needs an even N (equal class sizes)")
        m1, m2, v1, v2 = theta
        labels = np.repeat([1, 2], N // 2)
        rng.shuffle(labels)
        mean_x = np.where(labels == 1, m1, m2)
        var = np.where(labels == 1, v1, v2)
        pts = np.column_stack([rng.normal(mean_x, np.sqrt(var / 2.0)), rng.normal(0.0, np.sqrt(var))])
        return Dataset(pts, labels=labels, kind=self.name)

    def sample_prior(self, rng):
        m = rng.normal(0.0, math.sqrt(self.mean_prior_var), size=2)
        v = rng.gamma(self.var_prior_shape, 1.0 / self.var_prior_rate, size=2)
        return np.array([m[0], m[1], v[0], v[1]])
