"""Exact Metropolis-Hastings and informed sub-sampling MCMC.

Both samplers consume random numbers in the same order per iteration
(parameter proposal draws, then one uniform for the accept test), and the
sub-sampling sampler skips its subset moves entirely when n = N. With a
shared seed the two therefore produce identical θ-chains in that case.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import ChainState, Dataset, SamplerConfig, SubsetIndex
from .subsets import (
    anneal_initial_subset,
    delta_from_summaries,
    make_subset_proposal,
    subset_mh_step,
)

SCALE_MIN = 1e-8
SCALE_MAX = 1e8


class InvalidChainState(RuntimeError):
    """The chain sits at a point of zero target density, or its caches are stale."""


# ---------------------------------------------------------------------------
# parameter proposals


class GaussianRandomWalk:
    """θ' = θ + L z with z ~ N(0, I).

    ``scale`` may be a scalar step, a vector of per-coordinate standard
    deviations, or a full covariance matrix.
    """

    symmetric = True

    def __init__(self, scale, dim: int):
        s = np.asarray(scale, dtype=float)
        if s.ndim == 0:
            s = np.full(dim, float(s))
        if s.ndim == 1:
            if s.shape != (dim,) or np.any(s < 0):
                raise ValueError("per-coordinate scales must be nonnegative and match the dimension")
            self._diag = s.copy()
            self._chol = None
        elif s.shape == (dim, dim):
            if not np.allclose(s, s.T):
                raise ValueError("proposal covariance must be symmetric")
            self._diag = None
            self._chol = np.linalg.cholesky(s)
        else:
            raise ValueError(f"proposal scale of shape {s.shape} does not match dimension {dim}")
        self.dim = dim

    def propose(self, theta: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal(self.dim)
        if self._chol is None:
            return theta + self._diag * z
        return theta + self._chol @ z

    def log_ratio(self, theta, theta_new) -> float:
        return 0.0

    def observe(self, accepted: bool) -> None:
        pass

    def freeze(self) -> None:
        pass

    def describe(self):
        if self._chol is None:
            return {"kind": "gaussian_rw", "sd": self._diag.tolist()}
        return {"kind": "gaussian_rw", "cov": (self._chol @ self._chol.T).tolist()}


def adaptive_rw_update(scale: float, accept_history, band_low: float = 0.40, band_high: float = 0.50) -> float:
    """Scale ×1.1 above the acceptance band, ×0.9 below it, unchanged inside."""
    hist = np.asarray(accept_history, dtype=float)
    if hist.size == 0:
        raise ValueError("acceptance history is empty")
    rate = hist.mean()
    if rate > band_high:
        scale *= 1.1
    elif rate < band_low:
        scale *= 0.9
    return float(min(max(scale, SCALE_MIN), SCALE_MAX))


class AdaptiveSingleSiteRW:
    """Single-site random walk cycling through coordinates.

    Each coordinate keeps its own step size, updated by
    :func:`adaptive_rw_update` after every ``adapt_every`` of its own moves
    until :meth:`freeze` is called (the samplers do so at the end of burn-in).
    """

    symmetric = True

    def __init__(self, scales, dim: int, adapt_every: int = 50, band=(0.40, 0.50)):
        s = np.asarray(scales, dtype=float)
        self.scales = np.full(dim, float(s)) if s.ndim == 0 else s.astype(float).copy()
        if self.scales.shape != (dim,):
            raise ValueError("one scale per coordinate required")
        self.dim = dim
        self.adapt_every = int(adapt_every)
        self.band = band
        self.frozen = False
        self._coord = 0
        self._last = 0
        self._hist = [[] for _ in range(dim)]

    def propose(self, theta, rng):
        self._last = self._coord
        self._coord = (self._coord + 1) % self.dim
        out = theta.copy()
        out[self._last] += self.scales[self._last] * rng.standard_normal()
        return out

    def log_ratio(self, theta, theta_new) -> float:
        return 0.0

    def observe(self, accepted: bool) -> None:
        if self.frozen:
            return
        h = self._hist[self._last]
        h.append(accepted)
        if len(h) >= self.adapt_every:
            self.scales[self._last] = adaptive_rw_update(self.scales[self._last], h, *self.band)
            h.clear()

    def freeze(self) -> None:
        self.frozen = True

    def describe(self):
        return {"kind": "adaptive_single_site", "sd": self.scales.tolist(), "frozen": self.frozen}


def make_parameter_proposal(config: SamplerConfig, dim: int, scale=None):
    scale = config.proposal_scale if scale is None else scale
    if config.adaptive:
        s = np.asarray(scale, dtype=float)
        if s.ndim == 2:
            s = np.sqrt(np.diag(s))
        return AdaptiveSingleSiteRW(s, dim, config.adapt_every)
    return GaussianRandomWalk(scale, dim)


def mh_log_accept(log_post_cur: float, log_post_prop: float, proposal_log_ratio: float = 0.0) -> float:
    """log a = log π(θ') - log π(θ) + log Q(θ', θ) - log Q(θ, θ')."""
    if not np.isfinite(log_post_cur):
        raise InvalidChainState("current log target is not finite")
    if log_post_prop == -np.inf:
        return -np.inf
    return log_post_prop - log_post_cur + proposal_log_ratio


# ---------------------------------------------------------------------------
# targets


def scaled_log_sub_posterior(model, dataset: Dataset, subset: Optional[SubsetIndex], theta, N: int, n: int) -> float:
    """log p(θ) + (N/n) log f(Y_U|θ), unnormalised. ``subset=None`` is the full data."""
    lp = model.log_prior(theta)
    if lp == -np.inf or not model.in_support(theta):
        return -np.inf
    return lp + (N / n) * model.log_likelihood(dataset, subset, theta)


# ---------------------------------------------------------------------------
# chain records


@dataclass
class ChainRecord:
    """Per-iteration output of a sampler run."""

    theta: np.ndarray
    param_accept: np.ndarray
    subset_accept: np.ndarray
    log_target: np.ndarray
    t_wall_ns: np.ndarray
    subset_key: list = field(default_factory=list)
    burn_in: int = 0
    mode: str = "mh"
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.theta.shape[0]

    @property
    def iterations(self) -> int:
        return len(self)

    def post_burn_in(self) -> np.ndarray:
        return self.theta[self.burn_in:]

    @property
    def param_acceptance_rate(self) -> float:
        return float(self.param_accept.mean())

    @property
    def subset_acceptance_rate(self) -> float:
        return float(self.subset_accept.mean())

    @property
    def elapsed_s(self) -> float:
        return float(self.t_wall_ns[-1]) * 1e-9 if len(self) else 0.0

    def summary(self) -> dict:
        post = self.post_burn_in()
        return {
            "mode": self.mode,
            "iterations": self.iterations,
            "burn_in": self.burn_in,
            "param_acceptance": self.param_acceptance_rate,
            "subset_acceptance": self.subset_acceptance_rate,
            "posterior_mean": post.mean(axis=0).tolist(),
            "posterior_sd": post.std(axis=0, ddof=1).tolist() if post.shape[0] > 1 else [0.0] * post.shape[1],
            "elapsed_s": self.elapsed_s,
        }


class _Recorder:
    def __init__(self, iterations: int, dim: int, record_subsets: bool):
        self.theta = np.empty((iterations, dim))
        self.param_accept = np.zeros(iterations, bool)
        self.subset_accept = np.zeros(iterations, bool)
        self.log_target = np.empty(iterations)
        self.t_wall = np.empty(iterations, np.int64)
        self.keys = [] if record_subsets else None
        self.t0 = time.perf_counter_ns()

    def finish(self, burn_in, mode, meta):
        return ChainRecord(self.theta, self.param_accept, self.subset_accept, self.log_target, self.t_wall,
                           self.keys if self.keys is not None else [], burn_in, mode, meta)


# ---------------------------------------------------------------------------
# samplers


def initial_theta(model, dataset: Dataset, theta0=None) -> np.ndarray:
    if theta0 is None:
        theta0 = model.initial_theta(dataset)
    theta0 = np.asarray(theta0, dtype=float).reshape(-1)
    if theta0.shape != (model.param_dim,):
        raise InvalidChainState(f"initial θ must have {model.param_dim} entries")
    return theta0


def _burn_in(config: SamplerConfig) -> int:
    return int(config.burn_in * config.iterations)


def resolve_engine(engine: str, model, proposal, check_every: int = 0) -> str:
    """'auto' picks the compiled engine whenever it supports the run."""
    from . import fast
    if engine not in ("auto", "python", "compiled"):
        raise ValueError(f"unknown engine {engine!r}")
    ok = fast.supports(model, proposal) and not check_every
    if engine == "compiled" and not ok:
        raise ValueError("the compiled engine supports the AR(2) model with Yule-Walker summaries, "
                         "a fixed diagonal random walk and no cache checks")
    if engine == "auto":
        return "compiled" if ok else "python"
    return engine


def run_mh(model, dataset: Dataset, config: SamplerConfig, rng: np.random.Generator,
           theta0=None, proposal=None, progress: Optional[Callable[[int], None]] = None,
           engine: str = "auto") -> ChainRecord:
    """Algorithm 1: random-walk MH on the full-data posterior.

    One full-data likelihood evaluation per iteration; the current value is cached.
    """
    N = dataset.N
    theta = initial_theta(model, dataset, theta0 if theta0 is not None else config.theta0)
    log_t = scaled_log_sub_posterior(model, dataset, None, theta, N, N)
    if not np.isfinite(log_t):
        raise InvalidChainState("initial θ has zero posterior density")
    if proposal is None:
        proposal = make_parameter_proposal(config, model.param_dim)
    if resolve_engine(engine, model, proposal) == "compiled":
        from .fast import run_ar2_chain
        return run_ar2_chain(model, dataset, config, rng, theta, proposal._diag, mode="mh", progress=progress)
    burn = _burn_in(config)
    rec = _Recorder(config.iterations, model.param_dim, False)
    for i in range(config.iterations):
        if i == burn:
            proposal.freeze()
        prop = proposal.propose(theta, rng)
        u = rng.random()
        log_p = scaled_log_sub_posterior(model, dataset, None, prop, N, N)
        log_a = mh_log_accept(log_t, log_p, proposal.log_ratio(theta, prop))
        acc = log_a >= 0.0 or u <= math.exp(log_a)
        if acc:
            theta, log_t = prop, log_p
        proposal.observe(acc)
        rec.theta[i] = theta
        rec.param_accept[i] = acc
        rec.log_target[i] = log_t
        rec.t_wall[i] = time.perf_counter_ns() - rec.t0
        if progress is not None:
            progress(i)
    return rec.finish(burn, "mh", {"proposal": proposal.describe()})


def run_iss(model, dataset: Dataset, config: SamplerConfig, rng: np.random.Generator,
            theta0=None, initial_subset: Optional[SubsetIndex] = None, proposal=None,
            full_summary: Optional[np.ndarray] = None, check_every: int = 0,
            progress: Optional[Callable[[int], None]] = None, engine: str = "auto") -> ChainRecord:
    """Algorithm 2: informed sub-sampling MCMC on (θ, U).

    Each iteration makes ``subset_inner_steps`` subset moves targeting
    ν_{n,ε}, re-evaluates the cached target if U changed, then makes one
    parameter move against π̃_n(·|Y_U). Only subset likelihoods are
    evaluated (O(n) per iteration). With ``check_every=K`` the caches are
    recomputed from scratch every K iterations and compared. ``engine``
    selects the Python loop or the compiled AR(2) kernels (see
    :mod:`issmcmc.fast`); "auto" uses the latter when it can.
    """
    N = dataset.N
    n = config.n
    config.check_dataset(N)
    theta = initial_theta(model, dataset, theta0 if theta0 is not None else config.theta0)
    if proposal is None:
        proposal = make_parameter_proposal(config, model.param_dim)
    full = n == N
    burn = _burn_in(config)
    rec = _Recorder(config.iterations, model.param_dim, config.record_subsets)
    meta = {"proposal": None, "n": n, "epsilon": config.epsilon, "delta_scale": config.delta_scale}

    if full:
        # U is the whole dataset: no subset moves and no random draws for them.
        subset = None
        state = ChainState(theta, SubsetIndex.full(N), None, None, None)
        key = "full"
    else:
        if model.window_only and config.subset_proposal != "window":
            raise ValueError(f"{model.name} requires the window subset proposal")
        sub_prop = make_subset_proposal(config.subset_proposal, N, n, config.swap_k,
                                        config.window_omega, config.window_lambda)
        if full_summary is None:
            full_summary = model.summary(dataset, None)
        if initial_subset is None:
            initial_subset = anneal_initial_subset(model, dataset, n, config.epsilon, max(config.anneal_steps, 1),
                                                   sub_prop, rng, full_summary=full_summary,
                                                   scale=config.delta_scale)
        if initial_subset.n != n:
            raise InvalidChainState("initial subset has the wrong size")
        summ = model.summary(dataset, initial_subset)
        state = ChainState(theta, initial_subset, summ, delta_from_summaries(full_summary, summ, N), None)
        subset = initial_subset
        key = subset.key
    if resolve_engine(engine, model, proposal, check_every) == "compiled":
        from .fast import run_ar2_chain
        return run_ar2_chain(model, dataset, config, rng, theta, proposal._diag, None if full else subset,
                             full_summary, mode="iss", progress=progress)
    state.log_target = scaled_log_sub_posterior(model, dataset, subset, theta, N, n)
    if not np.isfinite(state.log_target):
        raise InvalidChainState("initial (θ, U) has zero target density")

    for i in range(config.iterations):
        if i == burn:
            proposal.freeze()
        sub_acc = False
        if not full:
            for _ in range(config.subset_inner_steps):
                state, acc = subset_mh_step(state, model, dataset, config.epsilon, sub_prop, rng,
                                            full_summary, config.delta_scale)
                sub_acc |= acc
            if state.log_target is None:
                subset = state.subset
                state.log_target = scaled_log_sub_posterior(model, dataset, subset, state.theta, N, n)
                if rec.keys is not None:
                    key = subset.key
        theta = state.theta
        prop = proposal.propose(theta, rng)
        u = rng.random()
        log_p = scaled_log_sub_posterior(model, dataset, subset, prop, N, n)
        log_a = mh_log_accept(state.log_target, log_p, proposal.log_ratio(theta, prop))
        acc = log_a >= 0.0 or u <= math.exp(log_a)
        if acc:
            state.theta = prop
            state.log_target = log_p
        proposal.observe(acc)
        rec.theta[i] = state.theta
        rec.param_accept[i] = acc
        rec.subset_accept[i] = sub_acc
        rec.log_target[i] = state.log_target
        rec.t_wall[i] = time.perf_counter_ns() - rec.t0
        if rec.keys is not None:
            rec.keys.append(key)
        if check_every and (i + 1) % check_every == 0:
            check_state(model, dataset, state, n, None if full else full_summary, subset)
        if progress is not None:
            progress(i)
    meta["proposal"] = proposal.describe()
    return rec.finish(burn, "iss", meta)


def check_state(model, dataset: Dataset, state: ChainState, n: int, full_summary, subset) -> None:
    """Recompute the cached summary and log target from scratch and compare."""
    N = dataset.N
    fresh = scaled_log_sub_posterior(model, dataset, subset, state.theta, N, n)
    if not math.isclose(fresh, state.log_target, rel_tol=1e-10, abs_tol=1e-10):
        raise InvalidChainState(f"cached log target {state.log_target!r} != recomputed {fresh!r}")
    if full_summary is not None:
        summ = model.summary(dataset, state.subset)
        if not np.allclose(summ, state.summary, rtol=1e-12, atol=1e-12):
            raise InvalidChainState("cached summary does not match the subset")


def pilot_scale(model, dataset: Dataset, rng: np.random.Generator, iterations: int = 2000,
                theta0=None, init_scale: Optional[float] = None) -> np.ndarray:
    """Per-coordinate posterior sd from a short adaptive full-data MH pilot.

    This is Σ = diag(m)/√N with m the per-observation spread, which is
    the default random-walk scale of both samplers.
    """
    theta = initial_theta(model, dataset, theta0)
    if init_scale is None:
        init_scale = 1.0 / math.sqrt(dataset.N)
    cfg = SamplerConfig(n=dataset.N, iterations=iterations, proposal_scale=init_scale, adaptive=True,
                        adapt_every=25, burn_in=0.5)
    rec = run_mh(model, dataset, cfg, rng, theta0=theta)
    sd = rec.post_burn_in().std(axis=0, ddof=1)
    fallback = np.asarray(rec.meta["proposal"]["sd"])
    return np.where(sd > 0, sd, fallback)
