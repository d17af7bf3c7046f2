"""Subset-space machinery: summary mismatch, subset weights, proposals and subset MH moves.

The subset chain targets ν_{n,ε}(U) ∝ exp(-ε‖Δ_n(U)‖²). Two proposal
kernels are provided: a k-swap kernel on general subsets and a local/global
mixture kernel on window start indices. Every proposal returns the exact
log proposal ratio log R(U',U) - log R(U,U'), which enters the acceptance
ratio, so ν-reversibility holds even where the window kernel is asymmetric
(near the ends of the series).

Random numbers are consumed in a fixed layout per step (2k uniforms for a
swap, 3 for a window move, then one for the accept test). The compiled
chains for additive summaries draw the same uniforms in blocks, so they
follow the step-by-step Python path exactly whenever subset sums are exact
(integer-valued summaries such as binary observations).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numba
import numpy as np

from .core import ChainState, Dataset, InadmissibleSubset, SubsetIndex, random_subset

_BLOCK = 1 << 15


@dataclass(frozen=True)
class DeltaVector:
    """Summary mismatch at both scales.

    ``per_obs`` is S̄(Y) - S̄(Y_U); ``total`` is N times that, which for
    additive summaries equals Σ_k S(Y_k) - (N/n) Σ_{k∈U} S(Y_k).
    """

    total: np.ndarray
    per_obs: np.ndarray
    sq_total: float
    sq_per_obs: float

    @property
    def norm_total(self) -> float:
        return math.sqrt(self.sq_total)

    @property
    def norm_per_obs(self) -> float:
        return math.sqrt(self.sq_per_obs)

    def sq(self, scale: str = "total") -> float:
        if scale == "total":
            return self.sq_total
        if scale == "per_obs":
            return self.sq_per_obs
        raise ValueError(f"unknown delta scale {scale!r}")


def delta_from_summaries(full_summary: np.ndarray, subset_summary: np.ndarray, N: int) -> DeltaVector:
    per_obs = full_summary - subset_summary
    total = N * per_obs
    return DeltaVector(total, per_obs, float(total @ total), float(per_obs @ per_obs))


def delta_n(model, dataset: Dataset, subset: SubsetIndex, full_summary: Optional[np.ndarray] = None) -> DeltaVector:
    """Δ_n(U) and Δ̄_n(U) for one subset. Pass ``full_summary`` to avoid recomputing S̄(Y)."""
    if full_summary is None:
        full_summary = model.summary(dataset, None)
    return delta_from_summaries(full_summary, model.summary(dataset, subset), dataset.N)


def nu_log_weight(delta: DeltaVector, epsilon: float, scale: str = "total") -> float:
    """Unnormalised log ν_{n,ε}(U) = -ε‖Δ‖²."""
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    if epsilon == 0:
        return 0.0
    return -epsilon * delta.sq(scale)


def subset_accept_log_ratio(delta_cur: DeltaVector, delta_prop: DeltaVector, epsilon: float,
                            proposal_log_ratio: float = 0.0, scale: str = "total") -> float:
    """log b = ε(‖Δ(U)‖² - ‖Δ(U')‖²) + log R(U',U) - log R(U,U')."""
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    log_b = proposal_log_ratio
    if epsilon > 0:
        log_b += epsilon * (delta_cur.sq(scale) - delta_prop.sq(scale))
    return log_b


def accept_prob(log_ratio: float) -> float:
    return 1.0 if log_ratio >= 0 else math.exp(log_ratio)


# ---------------------------------------------------------------------------
# proposals


def _distinct_positions(u: np.ndarray, m: int) -> list:
    # Sparse partial Fisher-Yates: k distinct positions in [0, m).
    swaps = {}
    out = []
    for i, ui in enumerate(u):
        j = i + int(ui * (m - i))
        vi = swaps.get(i, i)
        vj = swaps.get(j, j)
        swaps[i] = vj
        swaps[j] = vi
        out.append(vj)
    return out


class SwapProposal:
    """Replace k uniformly chosen members of U by k uniformly chosen non-members.

    Symmetric, so the log proposal ratio is always 0.
    """

    symmetric = True
    draws = None  # set in __init__: uniforms per step

    def __init__(self, N: int, k: int = 1):
        if k < 1:
            raise ValueError("swap count k must be >= 1")
        self.N = int(N)
        self.k = int(k)
        self.draws = 2 * self.k

    def check(self, n: int) -> None:
        if n >= self.N:
            raise ValueError("swap proposal needs non-members (n < N)")
        if self.k > min(n, self.N - n):
            raise ValueError(f"swap count k={self.k} exceeds min(n, N-n)={min(n, self.N - n)}")

    def initial(self, n: int, rng) -> SubsetIndex:
        return random_subset(self.N, n, rng, "general")

    def propose(self, subset: SubsetIndex, rng: np.random.Generator):
        n = subset.n
        self.check(n)
        u = rng.random(self.draws)
        return self.apply(subset, u), 0.0

    def apply(self, subset: SubsetIndex, u: np.ndarray) -> SubsetIndex:
        k, n = self.k, subset.n
        members = subset.indices
        out_pos = _distinct_positions(u[:k], n)
        ranks = np.array(_distinct_positions(u[k:], self.N - n), dtype=np.int64)
        # The r-th non-member is r plus the number of members at or below it.
        gaps = members - np.arange(n)
        added = ranks + np.searchsorted(gaps, ranks, side="right")
        new = np.concatenate([np.delete(members, out_pos), added])
        new.sort()
        return SubsetIndex.from_sorted(new)

    def log_prob(self, cur: SubsetIndex, new: SubsetIndex) -> float:
        """log R(U, U') (used by exact enumeration checks)."""
        common = np.intersect1d(cur.indices, new.indices).size
        if cur.n != new.n or cur.n - common != self.k:
            return -np.inf
        n = cur.n
        return -(math.lgamma(n + 1) - math.lgamma(self.k + 1) - math.lgamma(n - self.k + 1)
                 + math.lgamma(self.N - n + 1) - math.lgamma(self.k + 1) - math.lgamma(self.N - n - self.k + 1))


def swap_proposal(subset: SubsetIndex, k: int, N: int, rng: np.random.Generator):
    """Functional form of :class:`SwapProposal`; returns (U', 0.0)."""
    return SwapProposal(N, k).propose(subset, rng)


class WindowProposal:
    """Mixture kernel on window starts: with probability ω a local move with
    weights ∝ exp(-λ|j-i|), otherwise a uniform jump to another window.
    """

    symmetric = False
    draws = 3

    def __init__(self, num_windows: int, omega: float = 0.9, lam: float = 0.1):
        if num_windows < 2:
            raise ValueError("window proposal needs at least two windows")
        if not 0.0 <= omega <= 1.0:
            raise ValueError("omega must lie in [0, 1]")
        if lam <= 0:
            raise ValueError("lambda must be positive")
        self.W = int(num_windows)
        self.omega = float(omega)
        self.lam = float(lam)
        self.r = math.exp(-lam)

    def check(self, n: int) -> None:
        pass

    def initial(self, n: int, rng) -> SubsetIndex:
        return SubsetIndex.window(int(rng.integers(self.W)), n)

    def _side_mass(self, m: int) -> float:
        r = self.r
        return r * (1.0 - r ** m) / (1.0 - r)

    def log_prob(self, i: int, j: int) -> float:
        """log R(i; j)."""
        if i == j or not (0 <= j < self.W):
            return -np.inf
        z = self._side_mass(i) + self._side_mass(self.W - 1 - i)
        local = self.omega * self.r ** abs(j - i) / z
        return math.log(local + (1.0 - self.omega) / (self.W - 1))

    def row(self, i: int) -> np.ndarray:
        """Full transition row R(i; ·)."""
        j = np.arange(self.W)
        z = self._side_mass(i) + self._side_mass(self.W - 1 - i)
        p = self.omega * self.r ** np.abs(j - i) / z + (1.0 - self.omega) / (self.W - 1)
        p[i] = 0.0
        return p

    def move(self, i: int, u: np.ndarray) -> int:
        W, r = self.W, self.r
        if u[0] < self.omega:
            left = self._side_mass(i)
            right = self._side_mass(W - 1 - i)
            if u[1] * (left + right) < left:
                side, m = -1, i
            else:
                side, m = 1, W - 1 - i
            k = math.ceil(math.log(1.0 - u[2] * (1.0 - r ** m)) / math.log(r))
            k = min(max(k, 1), m)
            return i + side * k
        j = int(u[1] * (W - 1))
        return j + 1 if j >= i else j

    def propose(self, subset: SubsetIndex, rng: np.random.Generator):
        i = subset.start
        if i is None:
            raise ValueError("window proposal needs a window subset")
        u = rng.random(3)
        j = self.move(i, u)
        return SubsetIndex.window(j, subset.n), self.log_prob(j, i) - self.log_prob(i, j)


def window_proposal(start: int, omega: float, lam: float, num_windows: int, rng: np.random.Generator):
    """Functional form of :class:`WindowProposal`; returns (start', log ratio)."""
    prop = WindowProposal(num_windows, omega, lam)
    j = prop.move(start, rng.random(3))
    return j, prop.log_prob(j, start) - prop.log_prob(start, j)


def make_subset_proposal(kind: str, N: int, n: int, k: int = 1, omega: float = 0.9, lam: float = 0.1):
    if kind == "swap":
        return SwapProposal(N, k)
    if kind == "window":
        return WindowProposal(N - n + 1, omega, lam)
    raise ValueError(f"unknown subset proposal {kind!r}")


# ---------------------------------------------------------------------------
# subset MH step


def init_state(model, dataset: Dataset, subset: SubsetIndex, full_summary: np.ndarray,
               theta=None, log_target=None) -> ChainState:
    summ = model.summary(dataset, subset)
    return ChainState(theta, subset, summ, delta_from_summaries(full_summary, summ, dataset.N), log_target)


def subset_mh_step(state: ChainState, model, dataset: Dataset, epsilon: float, proposal, rng,
                   full_summary: np.ndarray, scale: str = "total"):
    """One Metropolis-Hastings move on the subset; returns (state, accepted).

    On acceptance the subset, its summary and Δ are replaced and the cached
    log target is marked stale (None). Inadmissible proposals are rejected.
    """
    prop, log_q = proposal.propose(state.subset, rng)
    u = rng.random()
    try:
        summ = model.summary(dataset, prop)
    except InadmissibleSubset:
        return state, False
    delta = delta_from_summaries(full_summary, summ, dataset.N)
    log_b = subset_accept_log_ratio(state.delta, delta, epsilon, log_q, scale)
    if log_b >= 0.0 or u <= math.exp(log_b):
        return ChainState(state.theta, prop, summ, delta, None), True
    return state, False


# ---------------------------------------------------------------------------
# compiled chains for additive summaries


@numba.njit(cache=True)
def _swap_kernel(S, full_mean, members, N, k, factor, eps, U, trace, record):
    n = members.shape[0]
    s = S.shape[1]
    m_out = N - n
    cur_sum = np.zeros(s)
    for i in range(n):
        for c in range(s):
            cur_sum[c] += S[members[i], c]
    cur_sq = 0.0
    for c in range(s):
        d = factor * (full_mean[c] - cur_sum[c] / n)
        cur_sq += d * d
    accepted = 0
    pos_a = np.empty(2 * k, np.int64)
    pos_b = np.empty(2 * k, np.int64)
    out_pos = np.empty(k, np.int64)
    ranks = np.empty(k, np.int64)
    added = np.empty(k, np.int64)
    new = np.empty(n, np.int64)
    new_sum = np.empty(s)
    steps = U.shape[0]
    for t in range(steps):
        # distinct member positions, then distinct non-member ranks
        for half in range(2):
            m = n if half == 0 else m_out
            used = 0
            for i in range(k):
                j = i + int(U[t, half * k + i] * (m - i))
                vi = i
                vj = j
                for q in range(used):
                    if pos_a[q] == i:
                        vi = pos_b[q]
                for q in range(used):
                    if pos_a[q] == j:
                        vj = pos_b[q]
                # record swaps[i] = vj, swaps[j] = vi
                found = False
                for q in range(used):
                    if pos_a[q] == i:
                        pos_b[q] = vj
                        found = True
                if not found:
                    pos_a[used] = i
                    pos_b[used] = vj
                    used += 1
                found = False
                for q in range(used):
                    if pos_a[q] == j:
                        pos_b[q] = vi
                        found = True
                if not found:
                    pos_a[used] = j
                    pos_b[used] = vi
                    used += 1
                if half == 0:
                    out_pos[i] = vj
                else:
                    ranks[i] = vj
        # non-member ranks -> indices, then the incremental summary sum
        for q in range(k):
            r = ranks[q]
            # number of members whose gap (members[i] - i) is <= r
            lo = 0
            hi = n
            while lo < hi:
                mid = (lo + hi) // 2
                if members[mid] - mid <= r:
                    lo = mid + 1
                else:
                    hi = mid
            added[q] = r + lo
        added.sort()
        for c in range(s):
            new_sum[c] = cur_sum[c]
        for q in range(k):
            for c in range(s):
                new_sum[c] += S[added[q], c] - S[members[out_pos[q]], c]
        new_sq = 0.0
        for c in range(s):
            d = factor * (full_mean[c] - new_sum[c] / n)
            new_sq += d * d
        log_b = 0.0
        if eps[t] > 0.0:
            log_b = eps[t] * (cur_sq - new_sq)
        if log_b >= 0.0 or U[t, 2 * k] <= math.exp(log_b):
            # merge the kept members with the sorted additions
            a = 0
            cnt = 0
            for i in range(n):
                drop = False
                for q in range(k):
                    if out_pos[q] == i:
                        drop = True
                if drop:
                    continue
                while a < k and added[a] < members[i]:
                    new[cnt] = added[a]
                    cnt += 1
                    a += 1
                new[cnt] = members[i]
                cnt += 1
            while a < k:
                new[cnt] = added[a]
                cnt += 1
                a += 1
            for i in range(n):
                members[i] = new[i]
            for c in range(s):
                cur_sum[c] = new_sum[c]
            cur_sq = new_sq
            accepted += 1
        if record:
            for i in range(n):
                trace[t, i] = members[i]
    return accepted


@numba.njit(cache=True)
def _window_kernel(P, full_mean, start, n, W, omega, r, factor, eps, U, trace, record):
    s = P.shape[1]
    log_r = math.log(r)

    def side_mass(m):
        return r * (1.0 - r ** m) / (1.0 - r)

    def log_prob(i, j):
        z = side_mass(i) + side_mass(W - 1 - i)
        return math.log(omega * r ** abs(j - i) / z + (1.0 - omega) / (W - 1))

    def sq_at(i):
        acc = 0.0
        for c in range(s):
            # pairwise-free window sum from prefix sums
            d = factor * (full_mean[c] - (P[i + n, c] - P[i, c]) / n)
            acc += d * d
        return acc

    cur = start
    cur_sq = sq_at(cur)
    accepted = 0
    for t in range(U.shape[0]):
        u0 = U[t, 0]
        u1 = U[t, 1]
        u2 = U[t, 2]
        if u0 < omega:
            left = side_mass(cur)
            right = side_mass(W - 1 - cur)
            if u1 * (left + right) < left:
                side = -1
                m = cur
            else:
                side = 1
                m = W - 1 - cur
            kk = math.ceil(math.log(1.0 - u2 * (1.0 - r ** m)) / log_r)
            if kk < 1:
                kk = 1
            if kk > m:
                kk = m
            j = cur + side * kk
        else:
            j = int(u1 * (W - 1))
            if j >= cur:
                j += 1
        new_sq = sq_at(j)
        log_b = log_prob(j, cur) - log_prob(cur, j)
        if eps[t] > 0.0:
            log_b += eps[t] * (cur_sq - new_sq)
        if log_b >= 0.0 or U[t, 3] <= math.exp(log_b):
            cur = j
            cur_sq = new_sq
            accepted += 1
        if record:
            trace[t] = cur
    return cur, accepted


@dataclass
class SubsetChainResult:
    final: SubsetIndex
    accepted: int
    steps: int
    trace: Optional[np.ndarray] = None  # (steps, n) indices for swaps, (steps,) starts for windows

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.steps if self.steps else 0.0


def _schedule(epsilon, steps):
    eps = np.broadcast_to(np.asarray(epsilon, dtype=float), (steps,)).copy()
    if np.any(eps < 0):
        raise ValueError("epsilon must be >= 0")
    return eps


def supports_compiled(model, proposal) -> bool:
    return bool(getattr(model, "additive", False)) and isinstance(proposal, (SwapProposal, WindowProposal))


def run_subset_chain(model, dataset: Dataset, n: int, epsilon: Union[float, Sequence[float]], proposal, rng,
                     steps: Optional[int] = None, initial: Optional[SubsetIndex] = None,
                     full_summary: Optional[np.ndarray] = None, scale: str = "total",
                     record: bool = False, compiled: Optional[bool] = None) -> SubsetChainResult:
    """Run the subset chain alone (fixed ε or a per-step ε schedule).

    With an additive model the compiled kernels are used unless
    ``compiled=False``; both paths consume ``rng`` identically.
    """
    if steps is None:
        steps = int(np.size(epsilon))
    eps = _schedule(epsilon, steps)
    N = dataset.N
    proposal.check(n)
    if initial is None:
        initial = proposal.initial(n, rng)
    if full_summary is None:
        full_summary = model.summary(dataset, None)
    factor = float(N) if scale == "total" else 1.0
    if compiled is None:
        compiled = supports_compiled(model, proposal)
    if compiled and not supports_compiled(model, proposal):
        raise ValueError("compiled subset chains need an additive model and a built-in proposal")

    if not compiled:
        state = init_state(model, dataset, initial, full_summary)
        trace = None
        if record:
            trace = np.empty((steps,), np.int64) if isinstance(proposal, WindowProposal) else np.empty((steps, n), np.int64)
        accepted = 0
        for t in range(steps):
            state, acc = subset_mh_step(state, model, dataset, eps[t], proposal, rng, full_summary, scale)
            accepted += acc
            if record:
                trace[t] = state.subset.start if trace.ndim == 1 else state.subset.indices
        return SubsetChainResult(state.subset, accepted, steps, trace)

    S = np.ascontiguousarray(model.observation_summaries(dataset), dtype=float)
    fm = np.asarray(full_summary, dtype=float)
    accepted = 0
    if isinstance(proposal, SwapProposal):
        members = np.array(initial.indices, dtype=np.int64)
        trace = np.empty((steps, n), np.int64) if record else np.empty((1, n), np.int64)
        for b0 in range(0, steps, _BLOCK):
            b1 = min(steps, b0 + _BLOCK)
            U = rng.random((b1 - b0, proposal.draws + 1))
            tr = trace[b0:b1] if record else trace
            accepted += _swap_kernel(S, fm, members, N, proposal.k, factor, eps[b0:b1], U, tr, record)
        final = SubsetIndex.from_sorted(members)
    else:
        if initial.start is None:
            raise ValueError("window proposal needs a window subset")
        P = np.vstack([np.zeros((1, S.shape[1])), np.cumsum(S, axis=0)])
        cur = initial.start
        trace = np.empty(steps, np.int64) if record else np.empty(1, np.int64)
        for b0 in range(0, steps, _BLOCK):
            b1 = min(steps, b0 + _BLOCK)
            U = rng.random((b1 - b0, proposal.draws + 1))
            tr = trace[b0:b1] if record else trace
            cur, acc = _window_kernel(P, fm, cur, n, proposal.W, proposal.omega, proposal.r, factor,
                                      eps[b0:b1], U, tr, record)
            accepted += acc
        final = SubsetIndex.window(int(cur), n)
    return SubsetChainResult(final, accepted, steps, trace if record else None)


def anneal_schedule(epsilon: float, L: int) -> np.ndarray:
    """ε_k = t_k ε with t linear from 0 to 1 (t_1 = 0, t_L = 1)."""
    if L < 1:
        raise ValueError("annealing needs L >= 1")
    return np.linspace(0.0, 1.0, L) * epsilon


def anneal_initial_subset(model, dataset: Dataset, n: int, epsilon: float, L: int, proposal, rng,
                          initial: Optional[SubsetIndex] = None, full_summary: Optional[np.ndarray] = None,
                          scale: str = "total", compiled: Optional[bool] = None) -> SubsetIndex:
    """Tempered preliminary subset chain: one subset move per rung at ε_k = t_k ε."""
    res = run_subset_chain(model, dataset, n, anneal_schedule(epsilon, L), proposal, rng,
                           initial=initial, full_summary=full_summary, scale=scale, compiled=compiled)
    return res.final
