"""Compiled chain engine for the AR(2) window model.

The generic samplers in :mod:`issmcmc.samplers` are Python loops whose
interpreter overhead (tens of microseconds per iteration) swamps the O(n)
work of a window likelihood. This module runs whole blocks of iterations of
either sampler inside one numba kernel.

Random numbers are pre-drawn per block: an (B, d) array of standard normals
for the random-walk increments, then an (B, c) array of uniforms holding
4 per subset move (3 for the window proposal, 1 for its accept test) and a
final column for the parameter accept test. When n = N no subset columns
are drawn, so exact MH and sub-sampling MCMC share one stream layout.
Per-iteration timestamps are interpolated linearly within each block.
"""

from __future__ import annotations

import math
import time

import numba
import numpy as np

from .core import SubsetIndex
from .models.ar2 import LOG_2PI, STATIONARY_GAUSS_MASS, Ar2Model

BLOCK = 1024


@numba.njit(cache=True)
def ar2_log_prior_nb(t1, t2, t3, a, b, log_mass):
    if not (t3 > 0.0 and t2 < 1.0 - t1 and t2 < 1.0 + t1 and t2 > -1.0):
        return -np.inf
    lp = -0.5 * (t1 * t1 + t2 * t2) - LOG_2PI - log_mass
    v = t3 * t3
    lp += a * math.log(b) - math.lgamma(a) - (a + 1.0) * math.log(v) - b / v + math.log(2.0 * t3)
    return lp


@numba.njit(cache=True)
def ar2_loglik_nb(y, start, n, t1, t2, t3, with_initial):
    q = 0.0
    for k in range(start + 2, start + n):
        e = y[k] - t1 * y[k - 1] - t2 * y[k - 2]
        q += e * e
    inv_var = 1.0 / (t3 * t3)
    log_t3 = math.log(t3)
    ll = -0.5 * inv_var * q - (n - 2) * (log_t3 + 0.5 * LOG_2PI)
    if with_initial:
        y0 = y[start]
        y1 = y[start + 1]
        ll += -LOG_2PI - 2.0 * log_t3 - 0.5 * inv_var * (y0 * y0 + y1 * y1)
    return ll


@numba.njit(cache=True)
def ar2_loglik_pair_nb(y, start, n, a1, a2, a3, b1, b2, b3, with_initial):
    """Window log-likelihood at two parameter values in one pass over the data."""
    qa = 0.0
    qb = 0.0
    for k in range(start + 2, start + n):
        ea = y[k] - a1 * y[k - 1] - a2 * y[k - 2]
        eb = y[k] - b1 * y[k - 1] - b2 * y[k - 2]
        qa += ea * ea
        qb += eb * eb
    out = np.empty(2)
    for idx, t3, q in ((0, a3, qa), (1, b3, qb)):
        inv_var = 1.0 / (t3 * t3)
        log_t3 = math.log(t3)
        ll = -0.5 * inv_var * q - (n - 2) * (log_t3 + 0.5 * LOG_2PI)
        if with_initial:
            y0 = y[start]
            y1 = y[start + 1]
            ll += -LOG_2PI - 2.0 * log_t3 - 0.5 * inv_var * (y0 * y0 + y1 * y1)
        out[idx] = ll
    return out


@numba.njit(cache=True)
def ar2_yw_nb(y, start, n, out):
    """Yule-Walker fit of one window into ``out``; False if degenerate."""
    mean = 0.0
    for k in range(start, start + n):
        mean += y[k]
    mean /= n
    c0 = 0.0
    c1 = 0.0
    c2 = 0.0
    for k in range(start, start + n):
        z = y[k] - mean
        c0 += z * z
        if k >= start + 1:
            c1 += z * (y[k - 1] - mean)
        if k >= start + 2:
            c2 += z * (y[k - 2] - mean)
    if not c0 > 0.0:
        return False
    r1 = c1 / c0
    r2 = c2 / c0
    det = 1.0 - r1 * r1
    if abs(det) < 1e-12:
        return False
    t1 = r1 * (1.0 - r2) / det
    t2 = (r2 - r1 * r1) / det
    var = c0 / n * (1.0 - t1 * r1 - t2 * r2)
    out[0] = t1
    out[1] = t2
    out[2] = math.sqrt(max(var, 1e-24))
    return True


@numba.njit(cache=True)
def _side_mass(r, m):
    return r * (1.0 - r ** m) / (1.0 - r)


@numba.njit(cache=True)
def _log_r(i, j, W, omega, r):
    z = _side_mass(r, i) + _side_mass(r, W - 1 - i)
    return math.log(omega * r ** abs(j - i) / z + (1.0 - omega) / (W - 1))


@numba.njit(cache=True)
def _ar2_block(y, n, full, marginal, prior, state, sd, full_summary, eps, factor, W, omega, r, inner,
               Z, U, theta_out, param_acc, subset_acc, log_target, starts):
    """Run Z.shape[0] iterations. ``state`` = [t1, t2, t3, start, log_target, cur_sq]."""
    N = y.shape[0]
    scale = N / n
    a = prior[0]
    b = prior[1]
    log_mass = prior[2]
    t1 = state[0]
    t2 = state[1]
    t3 = state[2]
    cur = int(state[3])
    lt = state[4]
    cur_sq = state[5]
    summ = np.empty(3)
    log_rr = math.log(r)
    for i in range(Z.shape[0]):
        s_acc = False
        if not full:
            for s in range(inner):
                u0 = U[i, 4 * s]
                u1 = U[i, 4 * s + 1]
                u2 = U[i, 4 * s + 2]
                if u0 < omega:
                    left = _side_mass(r, cur)
                    right = _side_mass(r, W - 1 - cur)
                    if u1 * (left + right) < left:
                        side = -1
                        m = cur
                    else:
                        side = 1
                        m = W - 1 - cur
                    kk = math.ceil(math.log(1.0 - u2 * (1.0 - r ** m)) / log_rr)
                    if kk < 1:
                        kk = 1
                    if kk > m:
                        kk = m
                    j = cur + side * kk
                else:
                    j = int(u1 * (W - 1))
                    if j >= cur:
                        j += 1
                if not ar2_yw_nb(y, j, n, summ):
                    continue
                new_sq = 0.0
                for c in range(3):
                    d = factor * (full_summary[c] - summ[c])
                    new_sq += d * d
                log_b = _log_r(j, cur, W, omega, r) - _log_r(cur, j, W, omega, r)
                if eps > 0.0:
                    log_b += eps * (cur_sq - new_sq)
                if log_b >= 0.0 or U[i, 4 * s + 3] <= math.exp(log_b):
                    cur = j
                    cur_sq = new_sq
                    s_acc = True
        p1 = t1 + sd[0] * Z[i, 0]
        p2 = t2 + sd[1] * Z[i, 1]
        p3 = t3 + sd[2] * Z[i, 2]
        u = U[i, U.shape[1] - 1]
        lp = ar2_log_prior_nb(p1, p2, p3, a, b, log_mass)
        with_initial = n == N or marginal
        acc = False
        if s_acc:
            # The subset moved: the cached target is stale. Refresh it and
            # score the proposal in a single pass over the new window.
            if lp > -np.inf:
                pair = ar2_loglik_pair_nb(y, cur, n, t1, t2, t3, p1, p2, p3, with_initial)
                lt = ar2_log_prior_nb(t1, t2, t3, a, b, log_mass) + scale * pair[0]
                log_p = lp + scale * pair[1]
            else:
                lt = ar2_log_prior_nb(t1, t2, t3, a, b, log_mass) + scale * ar2_loglik_nb(
                    y, cur, n, t1, t2, t3, with_initial)
        elif lp > -np.inf:
            log_p = lp + scale * ar2_loglik_nb(y, cur, n, p1, p2, p3, with_initial)
        if lp > -np.inf:
            log_a = log_p - lt
            if log_a >= 0.0 or u <= math.exp(log_a):
                t1 = p1
                t2 = p2
                t3 = p3
                lt = log_p
                acc = True
        theta_out[i, 0] = t1
        theta_out[i, 1] = t2
        theta_out[i, 2] = t3
        param_acc[i] = acc
        subset_acc[i] = s_acc
        log_target[i] = lt
        starts[i] = cur
    state[0] = t1
    state[1] = t2
    state[2] = t3
    state[3] = cur
    state[4] = lt
    state[5] = cur_sq


def supports(model, proposal=None) -> bool:
    """Whether the compiled engine can run this model (AR(2), Yule-Walker summaries)."""
    from .samplers import GaussianRandomWalk
    ok = isinstance(model, Ar2Model) and model.summary_kind == "yule_walker"
    if proposal is not None:
        ok = ok and isinstance(proposal, GaussianRandomWalk) and proposal._chol is None
    return ok


def run_ar2_chain(model: Ar2Model, dataset, config, rng, theta, sd, initial_subset=None, full_summary=None,
                  mode="iss", progress=None):
    """Compiled counterpart of :func:`run_mh` (``mode="mh"``) and :func:`run_iss`.

    Returns the same :class:`ChainRecord` layout. The subset key column
    holds window starts.
    """
    from .samplers import ChainRecord, InvalidChainState, scaled_log_sub_posterior

    y = np.ascontiguousarray(dataset.y)
    N = dataset.N
    n = N if mode == "mh" else config.n
    full = n == N
    iters = config.iterations
    theta = np.asarray(theta, dtype=float)
    sd = np.asarray(sd, dtype=float)
    if full:
        subset = SubsetIndex.full(N)
        full_summary = np.zeros(3)
        start = 0
        W = 2
    else:
        if config.subset_proposal != "window":
            raise ValueError("AR(2) requires the window subset proposal")
        if full_summary is None:
            full_summary = model.summary(dataset, None)
        subset = initial_subset
        start = subset.start
        W = N - n + 1
    marginal = model.window_likelihood == "marginal"
    log_t = scaled_log_sub_posterior(model, dataset, None if full else subset, theta, N, n)
    if not np.isfinite(log_t):
        raise InvalidChainState("initial (θ, U) has zero target density")
    factor = float(N) if config.delta_scale == "total" else 1.0
    cur_sq = 0.0
    if not full:
        d = factor * (full_summary - model.summary(dataset, subset))
        cur_sq = float(d @ d)
    state = np.array([theta[0], theta[1], theta[2], start, log_t, cur_sq])
    prior = np.array([model.prior_a, model.prior_b, math.log(STATIONARY_GAUSS_MASS)])
    cols = 1 if full else 4 * config.subset_inner_steps + 1
    out_theta = np.empty((iters, 3))
    pacc = np.zeros(iters, bool)
    sacc = np.zeros(iters, bool)
    lt = np.empty(iters)
    starts = np.empty(iters, np.int64)
    tw = np.empty(iters, np.int64)
    t0 = time.perf_counter_ns()
    prev = 0
    burn = int(config.burn_in * iters)
    for b0 in range(0, iters, BLOCK):
        b1 = min(iters, b0 + BLOCK)
        Z = rng.standard_normal((b1 - b0, 3))
        U = rng.random((b1 - b0, cols))
        _ar2_block(y, n, full, marginal, prior, state, sd, full_summary, config.epsilon, factor, W,
                   config.window_omega, math.exp(-config.window_lambda), config.subset_inner_steps,
                   Z, U, out_theta[b0:b1], pacc[b0:b1], sacc[b0:b1], lt[b0:b1], starts[b0:b1])
        now = time.perf_counter_ns() - t0
        tw[b0:b1] = prev + (np.arange(1, b1 - b0 + 1) * (now - prev)) // (b1 - b0)
        prev = now
        if progress is not None:
            progress(b1 - 1)
    keys = ["full"] * iters if full else [str(s) for s in starts] if config.record_subsets else []
    meta = {"proposal": {"kind": "gaussian_rw", "sd": sd.tolist()}, "engine": "compiled"}
    if mode == "iss":
        meta.update({"n": n, "epsilon": config.epsilon, "delta_scale": config.delta_scale})
    return ChainRecord(out_theta, pacc, sacc, lt, tw, keys, burn, mode, meta)
