"""Approximation diagnostics: grid posteriors, KL divergences and their bound,
summary-statistic validation, A_n estimation, KDE total variation and the
subset refresh rate.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp
from scipy.stats import gaussian_kde

from .core import Dataset, InadmissibleSubset, SubsetIndex, random_subset
from .subsets import (
    DeltaVector,
    SwapProposal,
    WindowProposal,
    anneal_initial_subset,
    delta_n,
    run_subset_chain,
)

COVERAGE_DROP = 25.0


class GridCoverageError(ValueError):
    """The quadrature grid does not contain the posterior mass."""


class LowRefreshWarning(UserWarning):
    """Fewer than 1% of subset moves were accepted."""


# ---------------------------------------------------------------------------
# 1-D grid posteriors


@dataclass(frozen=True)
class PosteriorGrid:
    """Unnormalised log density tabulated on an increasing 1-D grid."""

    grid: np.ndarray
    log_density: np.ndarray

    def __post_init__(self):
        if self.grid.ndim != 1 or self.grid.shape != self.log_density.shape:
            raise ValueError("grid and log density must be 1-D arrays of equal length")
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")

    @property
    def trapezoid(self) -> np.ndarray:
        h = np.diff(self.grid)
        w = np.zeros_like(self.grid)
        w[:-1] += h / 2
        w[1:] += h / 2
        return w

    @property
    def log_norm(self) -> float:
        """log ∫ exp(log_density) by the trapezoid rule."""
        return float(logsumexp(self.log_density, b=self.trapezoid))

    @property
    def density(self) -> np.ndarray:
        return np.exp(self.log_density - self.log_norm)

    @property
    def weights(self) -> np.ndarray:
        """Quadrature weights of the normalised density; they sum to 1."""
        w = self.trapezoid * np.exp(self.log_density - self.log_density.max())
        return w / w.sum()

    def covers(self, drop: float = COVERAGE_DROP) -> bool:
        top = self.log_density.max()
        return bool(self.log_density[0] <= top - drop and self.log_density[-1] <= top - drop)

    def expect(self, values) -> float:
        return float(self.weights @ np.asarray(values, dtype=float))


def _log_target_fn(model, dataset, subset):
    N = dataset.N
    n = N if subset is None else subset.n

    def f(thetas):
        thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
        lp = np.array([model.log_prior(np.array([t])) for t in thetas])
        return lp + (N / n) * model.log_likelihood_many(dataset, subset, thetas)

    return f


def _mode_and_sd(f, start: float):
    res = minimize_scalar(lambda t: -f(np.array([t]))[0], bracket=(start - 1.0, start + 1.0))
    mode = float(res.x)
    h = 1e-4 * (1.0 + abs(mode))
    vals = f(np.array([mode - h, mode, mode + h]))
    curv = -(vals[0] - 2 * vals[1] + vals[2]) / (h * h)
    sd = 1.0 / math.sqrt(curv) if curv > 0 else 1.0
    return mode, sd


def posterior_grid(model, dataset: Dataset, subset: Optional[SubsetIndex] = None, n_nodes: int = 4001,
                   width: float = 10.0, also: Optional[list] = None) -> PosteriorGrid:
    """Grid for π (``subset=None``) or π̃_n(·|Y_U), centred at the mode ± ``width`` sd.

    ``also`` lists further subsets (or None for the full posterior) whose
    mass the grid must contain as well. The range widens until every
    density has dropped by 25 log units at both ends.
    """
    if model.param_dim != 1:
        raise ValueError("grid posteriors are for one-dimensional models")
    targets = [subset] + list(also or [])
    fns = [_log_target_fn(model, dataset, s) for s in targets]
    start = float(model.initial_theta(dataset)[0])
    lo, hi = np.inf, -np.inf
    for f in fns:
        mode, sd = _mode_and_sd(f, start)
        lo, hi = min(lo, mode - width * sd), max(hi, mode + width * sd)
    for _ in range(30):
        grid = np.linspace(lo, hi, n_nodes)
        grids = [PosteriorGrid(grid, f(grid)) for f in fns]
        if all(g.covers() for g in grids):
            return grids[0]
        span = hi - lo
        lo, hi = lo - 0.25 * span, hi + 0.25 * span
    raise GridCoverageError("could not find a grid containing the posterior mass")


def kl_exact_1d(model, dataset: Dataset, subset: SubsetIndex, n_nodes: int = 4001, width: float = 10.0) -> float:
    """KL{π, π̃_n(U)} by trapezoid quadrature on a grid covering both densities."""
    g_full = posterior_grid(model, dataset, None, n_nodes, width, also=[subset])
    g_sub = PosteriorGrid(g_full.grid, _log_target_fn(model, dataset, subset)(g_full.grid))
    if not g_sub.covers():
        raise GridCoverageError("sub-posterior mass leaks outside the grid")
    diff = g_full.log_density - g_sub.log_density
    return g_full.expect(diff) - g_full.log_norm + g_sub.log_norm


def _natural_gap(model, dataset, subset, n_nodes, width):
    if not hasattr(model, "natural_param"):
        raise ValueError(f"{model.name} is not a one-parameter exponential family")
    grid = posterior_grid(model, dataset, None, n_nodes, width, also=[subset])
    g = model.natural_param(grid.grid)
    delta = float(delta_n(model, dataset, subset).total[0])
    return grid, grid.expect(g) - g, delta


def kl_exponential_family(model, dataset: Dataset, subset: SubsetIndex, n_nodes: int = 4001,
                          width: float = 10.0) -> float:
    """KL via the exponential-family identity log E_π exp[(E_π g - g) Δ_n(U)]."""
    grid, gap, delta = _natural_gap(model, dataset, subset, n_nodes, width)
    return float(logsumexp(gap * delta, b=grid.weights))


def kl_bound(model, dataset: Dataset, subset: SubsetIndex, n_nodes: int = 4001, width: float = 10.0) -> float:
    """B(Y, U) = log E_π exp{|E_π g - g| |Δ_n(U)|}, an upper bound on the KL."""
    grid, gap, delta = _natural_gap(model, dataset, subset, n_nodes, width)
    return float(logsumexp(np.abs(gap) * abs(delta), b=grid.weights))


# ---------------------------------------------------------------------------
# Gaussian approximation


def gaussian_kl(delta, gamma_N) -> float:
    """½ Δᵀ Γ_N Δ with Δ the total-scale mismatch."""
    d = np.atleast_1d(np.asarray(delta.total if isinstance(delta, DeltaVector) else delta, dtype=float))
    G = np.atleast_2d(np.asarray(gamma_N, dtype=float))
    if G.shape != (d.size, d.size):
        raise ValueError("Γ_N must be an s×s matrix")
    if not np.allclose(G, G.T):
        raise ValueError("Γ_N must be symmetric")
    eig = np.linalg.eigvalsh(G)
    if eig[0] < -1e-12 * max(1.0, abs(eig[-1])):
        raise ValueError("Γ_N must be positive semidefinite")
    return float(0.5 * d @ G @ d)


def fisher_gamma_N(model, dataset: Dataset) -> np.ndarray:
    """Γ_N = I(η̂)⁻¹/N in the natural parameter, from a central second difference
    of the full log-likelihood at the maximum likelihood estimate."""
    if not hasattr(model, "natural_param_inverse"):
        raise ValueError(f"{model.name} has no natural parametrisation")
    eta_hat = float(model.natural_param(model.initial_theta(dataset))[0])
    h = 1e-4 * (1.0 + abs(eta_hat))
    etas = np.array([eta_hat - h, eta_hat, eta_hat + h])
    ll = model.log_likelihood_many(dataset, None, model.natural_param_inverse(etas))
    curv = -(ll[0] - 2.0 * ll[1] + ll[2]) / (h * h)
    if not curv > 0:
        raise ValueError("log-likelihood is not concave at the estimate")
    return np.array([[1.0 / curv]])


# ---------------------------------------------------------------------------
# summary-statistic validation


@dataclass
class A4ValidationReport:
    """Scatter of x = ‖Δ̄_n(U)‖ against y = log f(Y|θ) - (N/n) log f(Y_U|θ)."""

    x: np.ndarray
    y: np.ndarray
    theta_index: np.ndarray
    subset_index: np.ndarray
    gamma_hat: float
    N: int
    n: int
    num_theta: int
    num_subsets: int
    seed: Optional[int] = None
    x_floor: float = 1e-12
    excluded: int = 0

    @property
    def slope_per_obs(self) -> float:
        """Largest |y|/x, the slope in per-observation units (N γ̂)."""
        return self.gamma_hat * self.N

    def epsilon_suggestions(self) -> dict:
        """ε of the same order as γ̂, stated for both Δ conventions of ν.

        ``total``: use with ν ∝ exp(-ε‖Δ_n‖²). ``per_obs``: use with
        ν ∝ exp(-ε‖Δ̄_n‖²); it is the per-observation slope N γ̂.
        """
        return {"total": self.gamma_hat, "per_obs": self.slope_per_obs}

    def to_dict(self) -> dict:
        return {
            "gamma_hat": self.gamma_hat,
            "slope_per_obs": self.slope_per_obs,
            "epsilon": self.epsilon_suggestions(),
            "N": self.N, "n": self.n,
            "num_theta": self.num_theta, "num_subsets": self.num_subsets,
            "num_points": int(self.x.size), "excluded": self.excluded,
            "x_floor": self.x_floor, "seed": self.seed,
        }


def draw_admissible_subset(model, dataset: Dataset, n: int, rng, kind: str, max_tries: int = 100000):
    """Uniform subset conditioned on admissibility (rejection sampling)."""
    for _ in range(max_tries):
        U = random_subset(dataset.N, n, rng, kind)
        try:
            return U, model.summary(dataset, U)
        except InadmissibleSubset:
            continue
    raise RuntimeError("no admissible subset found")


def validate_a4(model, dataset: Dataset, n: int, num_theta: int, num_subsets: int, rng,
                x_floor: float = 1e-12, seed: Optional[int] = None) -> A4ValidationReport:
    """θ_k from the prior, U_i uniform (admissible), all pairs (θ_k, U_i) scored.

    γ̂ = max |y| / (N x) over points with x > ``x_floor``.
    """
    if num_theta < 1 or num_subsets < 1:
        raise ValueError("num_theta and num_subsets must be >= 1")
    N = dataset.N
    if not 1 <= n < N:
        raise ValueError("subset size must satisfy 1 <= n < N")
    kind = "window" if model.window_only else "general"
    thetas = [model.sample_prior(rng) for _ in range(num_theta)]
    full_summary = model.summary(dataset, None)
    full_ll = np.array([model.log_likelihood(dataset, None, t) for t in thetas])
    xs, ys, ti, si = [], [], [], []
    excluded = 0
    for i in range(num_subsets):
        U, summ = draw_admissible_subset(model, dataset, n, rng, kind)
        x = float(np.linalg.norm(full_summary - summ))
        sub_ll = np.array([model.log_likelihood(dataset, U, t) for t in thetas])
        y = full_ll - (N / n) * sub_ll
        if x <= x_floor:
            excluded += num_theta
            continue
        xs.append(np.full(num_theta, x))
        ys.append(y)
        ti.append(np.arange(num_theta))
        si.append(np.full(num_theta, i))
    x = np.concatenate(xs) if xs else np.empty(0)
    y = np.concatenate(ys) if ys else np.empty(0)
    gamma_hat = float(np.max(np.abs(y) / (N * x))) if x.size else 0.0
    if not np.isfinite(gamma_hat):
        raise FloatingPointError("non-finite γ̂: a likelihood evaluation overflowed")
    return A4ValidationReport(x, y, np.concatenate(ti) if ti else np.empty(0, int),
                              np.concatenate(si) if si else np.empty(0, int), gamma_hat, N, n,
                              num_theta, num_subsets, seed, x_floor, excluded)


# ---------------------------------------------------------------------------
# A_n


@dataclass
class AnEstimate:
    """Monte Carlo estimate of A_n = E_ν sup_θ f(Y|θ) / f(Y_U|θ)^{N/n}."""

    log_value: float
    log_terms: np.ndarray
    divergent: bool
    epsilon: float
    threshold: float = 1e6

    @property
    def value(self) -> float:
        return math.exp(self.log_value) if self.log_value < 709.0 else math.inf

    def to_dict(self) -> dict:
        return {"epsilon": self.epsilon, "value": self.value, "log_value": self.log_value,
                "divergent": self.divergent, "draws": int(self.log_terms.size),
                "max_log_term": float(self.log_terms.max())}


def estimate_An(model, dataset: Dataset, n: int, epsilon: float, theta_grid, num_draws: int, rng,
                thinning: int = 100, scale: str = "total", anneal_steps: int = 1000,
                threshold: float = 1e6, proposal=None) -> AnEstimate:
    """Average over thinned ν_{n,ε}-chain draws of max over ``theta_grid`` of
    exp{log f(Y|θ) - (N/n) log f(Y_U|θ)}, accumulated in log space.

    Flagged divergent when the estimate exceeds ``threshold`` (or overflows).
    """
    N = dataset.N
    theta_grid = np.asarray(theta_grid, dtype=float).reshape(-1, model.param_dim)
    full_ll = model.log_likelihood_many(dataset, None, theta_grid)
    if proposal is None:
        proposal = WindowProposal(N - n + 1) if model.window_only else SwapProposal(N, 1)
    full_summary = model.summary(dataset, None)
    U = anneal_initial_subset(model, dataset, n, epsilon, anneal_steps, proposal, rng,
                              full_summary=full_summary, scale=scale)
    log_terms = np.empty(num_draws)
    for k in range(num_draws):
        U = run_subset_chain(model, dataset, n, epsilon, proposal, rng, steps=thinning, initial=U,
                             full_summary=full_summary, scale=scale).final
        sub_ll = model.log_likelihood_many(dataset, U, theta_grid)
        log_terms[k] = np.max(full_ll - (N / n) * sub_ll)
    log_value = float(logsumexp(log_terms) - math.log(num_draws))
    divergent = not np.isfinite(log_value) or log_value > math.log(threshold)
    return AnEstimate(log_value, log_terms, bool(divergent), float(epsilon), threshold)


# ---------------------------------------------------------------------------
# total variation between sample sets


@dataclass
class TVResult:
    per_marginal: np.ndarray
    mean: float

    def to_dict(self) -> dict:
        return {"per_marginal": self.per_marginal.tolist(), "mean": self.mean}


def _tv_1d(a: np.ndarray, b: np.ndarray, nodes: int) -> float:
    ka = gaussian_kde(a, bw_method="silverman")
    kb = gaussian_kde(b, bw_method="silverman")
    bw = max(math.sqrt(ka.covariance[0, 0]), math.sqrt(kb.covariance[0, 0]))
    # One dense grid per sample range, merged, so that two narrow, far-apart
    # densities are both resolved. Intervals between non-overlapping pieces
    # carry no mass at 8 bandwidths out and are left out of the quadrature.
    pieces = [np.linspace(s.min() - 8 * bw, s.max() + 8 * bw, nodes) for s in (a, b)]
    step = max(p[1] - p[0] for p in pieces)
    grid = np.unique(np.concatenate(pieces))
    diff = np.abs(ka(grid) - kb(grid))
    dx = np.diff(grid)
    inside = dx <= step * (1 + 1e-9)
    return float(0.25 * np.sum(dx[inside] * (diff[1:][inside] + diff[:-1][inside])))


def tv_kde(samples_a, samples_b, dims=None, nodes: int = 1024) -> TVResult:
    """Per-marginal total variation between Gaussian KDEs (Silverman bandwidth) and their mean."""
    a = np.asarray(samples_a, dtype=float)
    b = np.asarray(samples_b, dtype=float)
    a = a.reshape(a.shape[0], -1)
    b = b.reshape(b.shape[0], -1)
    if a.shape[1] != b.shape[1]:
        raise ValueError("sample sets have different dimensions")
    if a.shape[0] < 10 or b.shape[0] < 10:
        raise ValueError("need at least 10 samples in each set")
    dims = range(a.shape[1]) if dims is None else dims
    tvs = np.array([_tv_1d(a[:, j], b[:, j], nodes) for j in dims])
    return TVResult(tvs, float(tvs.mean()))


# ---------------------------------------------------------------------------
# refresh rate


def refresh_rate(record, window: Optional[int] = None, threshold: float = 0.01) -> float:
    """Fraction of iterations (last ``window`` of them) whose subset move was accepted.

    ``record`` is a :class:`ChainRecord` or a boolean array of subset
    acceptances. Emits :class:`LowRefreshWarning` below ``threshold``.
    """
    flags = np.asarray(getattr(record, "subset_accept", record), dtype=bool)
    if window is not None:
        if window < 1:
            raise ValueError("window must be positive")
        flags = flags[-window:]
    if flags.size == 0:
        raise ValueError("empty refresh window")
    rate = float(flags.mean())
    if rate < threshold:
        warnings.warn(f"subset refresh rate {rate:.4f} below {threshold}", LowRefreshWarning, stacklevel=2)
    return rate


# ---------------------------------------------------------------------------
# probit helpers


def probit_subset_with_ones(dataset: Dataset, n: int, ones: int, rng=None) -> SubsetIndex:
    """A size-n subset containing exactly ``ones`` positive observations."""
    y = dataset.y
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == 0)
    if not (0 <= ones <= min(n, pos.size) and n - ones <= neg.size):
        raise ValueError(f"no subset of size {n} with {ones} ones")
    if rng is None:
        pick = np.concatenate([pos[:ones], neg[:n - ones]])
    else:
        pick = np.concatenate([rng.choice(pos, ones, replace=False), rng.choice(neg, n - ones, replace=False)])
    return SubsetIndex.from_sorted(np.sort(pick))


def probit_subset_near_delta(dataset: Dataset, n: int, target: float, rng=None) -> SubsetIndex:
    """Subset whose |Δ_n(U)| is as close as possible to ``target``.

    Δ_n = S - (N/n) s with s the number of ones in U, so only a lattice of
    values spaced N/n apart is attainable.
    """
    N = dataset.N
    S = float(dataset.y.sum())
    pos, neg = int(S), N - int(S)
    best = None
    for s in range(max(0, n - neg), min(n, pos) + 1):
        gap = abs(abs(S - N / n * s) - target)
        if best is None or gap < best[0]:
            best = (gap, s)
    return probit_subset_with_ones(dataset, n, best[1], rng)
