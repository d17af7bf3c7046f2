"""Shared value types: datasets, subsets, chain state and sampler configuration."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class SubsetError(ValueError):
    """Raised when a subset index list violates the subset invariants."""


class InadmissibleSubset(ValueError):
    """The model's summary statistic is undefined on this subset."""


@dataclass(frozen=True, eq=False)
class Dataset:
    """Full observation set Y_{1:N}.

    ``y`` holds the observations: a 0/1 vector (probit, logistic labels), a
    real time series (AR(2)) or an (N, 2) array of points (mixture).
    ``X`` carries logistic covariates, ``labels`` the mixture classes (1 or 2).
    """

    y: np.ndarray
    X: Optional[np.ndarray] = None
    labels: Optional[np.ndarray] = None
    kind: str = ""

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        object.__setattr__(self, "y", y)
        if y.ndim == 0 or y.shape[0] < 1:
            raise ValueError("dataset needs at least one observation")
        if not np.all(np.isfinite(y)):
            raise ValueError("observations must be finite")
        if self.X is not None:
            X = np.asarray(self.X, dtype=float)
            if X.ndim != 2 or X.shape[0] != y.shape[0]:
                raise ValueError("covariates must be an (N, d) matrix")
            if not np.all(np.isfinite(X)):
                raise ValueError("covariates must be finite")
            object.__setattr__(self, "X", X)
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int64)
            if labels.shape != (y.shape[0],):
                raise ValueError("labels must have one entry per observation")
            object.__setattr__(self, "labels", labels)
        for arr in (self.y, self.X, self.labels):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def N(self) -> int:
        return int(self.y.shape[0])


@dataclass(frozen=True, eq=False)
class SubsetIndex:
    """A size-n selection U of {0, ..., N-1}, stored sorted.

    Window subsets additionally carry their start so that the window
    proposal can work on starting indices directly.
    """

    indices: np.ndarray
    start: Optional[int] = None

    @classmethod
    def window(cls, start: int, n: int) -> "SubsetIndex":
        idx = np.arange(start, start + n, dtype=np.int64)
        idx.setflags(write=False)
        return cls(idx, int(start))

    @classmethod
    def full(cls, N: int) -> "SubsetIndex":
        return cls.window(0, N)

    @classmethod
    def from_sorted(cls, indices: np.ndarray) -> "SubsetIndex":
        # Trusted constructor for proposals that already maintain the invariants.
        indices = np.asarray(indices, dtype=np.int64)
        indices.setflags(write=False)
        return cls(indices, None)

    @property
    def n(self) -> int:
        return int(self.indices.shape[0])

    @property
    def kind(self) -> str:
        return "general" if self.start is None else "window"

    @property
    def key(self) -> str:
        """Short identifier used in chain files."""
        if self.start is not None:
            return str(self.start)
        digest = hashlib.blake2b(self.indices.tobytes(), digest_size=8)
        return digest.hexdigest()

    def is_full(self, N: int) -> bool:
        return self.n == N

    def __eq__(self, other):
        if not isinstance(other, SubsetIndex):
            return NotImplemented
        return self.start == other.start and np.array_equal(self.indices, other.indices)

    def __hash__(self):
        return hash((self.start, self.indices.tobytes()))

    def __repr__(self):
        if self.start is not None:
            return f"SubsetIndex(window start={self.start}, n={self.n})"
        return f"SubsetIndex(n={self.n}, indices={self.indices.tolist()[:8]}{'...' if self.n > 8 else ''})"


def make_subset(indices: Sequence[int], N: int) -> SubsetIndex:
    """Validate an index list and return a sorted :class:`SubsetIndex`.

    A list given as an increasing run ``start, start+1, ...`` is recognised
    as a window subset; anything else is a general subset.
    """
    raw = np.asarray(list(indices), dtype=np.int64)
    if raw.size == 0:
        raise SubsetError("empty subset")
    if raw.min() < 0 or raw.max() >= N:
        raise SubsetError(f"index out of range [0, {N})")
    srt = np.sort(raw)
    if np.any(np.diff(srt) == 0):
        raise SubsetError("duplicate index in subset")
    if np.array_equal(raw, np.arange(raw[0], raw[0] + raw.size)):
        return SubsetIndex.window(int(raw[0]), raw.size)
    return SubsetIndex.from_sorted(srt)


def random_subset(N: int, n: int, rng: np.random.Generator, kind: str = "general") -> SubsetIndex:
    """Uniform draw from the general (or window) subset space."""
    if not 1 <= n <= N:
        raise SubsetError(f"subset size {n} outside [1, {N}]")
    if kind == "window":
        return SubsetIndex.window(int(rng.integers(N - n + 1)), n)
    return SubsetIndex.from_sorted(np.sort(rng.choice(N, size=n, replace=False)))


def mean_summary(model, dataset: Dataset, subset: Optional[SubsetIndex]) -> np.ndarray:
    """Per-observation summary S̄(Y_U); ``subset=None`` means the full dataset."""
    return model.summary(dataset, subset)


@dataclass
class ChainState:
    """Current (θ, U) of a chain with its cached quantities.

    ``log_target`` is None while stale, i.e. right after a subset move was
    accepted and before the parameter step re-evaluates it.
    """

    theta: np.ndarray
    subset: SubsetIndex
    summary: np.ndarray
    delta: "object"
    log_target: Optional[float]


@dataclass
class SamplerConfig:
    """Run parameters shared by the exact and the sub-sampling sampler."""

    n: int
    epsilon: float = 0.0
    iterations: int = 1000
    proposal_scale: object = 0.1
    subset_proposal: str = "swap"
    swap_k: int = 1
    window_omega: float = 0.9
    window_lambda: float = 0.1
    anneal_steps: int = 0
    seed: int = 0
    subset_inner_steps: int = 1
    burn_in: float = 0.2
    delta_scale: str = "total"
    adaptive: bool = False
    adapt_every: int = 50
    record_subsets: bool = True
    theta0: Optional[Sequence[float]] = field(default=None)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("subset size n must be >= 1")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if not 0.0 <= self.window_omega <= 1.0:
            raise ValueError("window omega must lie in [0, 1]")
        if self.window_lambda <= 0:
            raise ValueError("window lambda must be > 0")
        if self.anneal_steps < 0:
            raise ValueError("anneal_steps must be >= 0")
        if self.subset_inner_steps < 1:
            raise ValueError("subset_inner_steps must be >= 1")
        if not 0.0 <= self.burn_in < 1.0:
            raise ValueError("burn_in must be a fraction in [0, 1)")
        if self.subset_proposal not in ("swap", "window"):
            raise ValueError(f"unknown subset proposal {self.subset_proposal!r}")
        if self.delta_scale not in ("total", "per_obs"):
            raise ValueError("delta_scale must be 'total' or 'per_obs'")

    def check_dataset(self, N: int) -> None:
        if self.n > N:
            raise ValueError(f"subset size n={self.n} exceeds N={N}")
