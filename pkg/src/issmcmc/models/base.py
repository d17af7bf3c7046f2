"""Model interface used by the samplers and diagnostics."""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Optional

import numpy as np

from ..core import Dataset, SubsetIndex


class Model(ABC):
    """Prior, likelihood, summary statistic and simulator of one model.

    ``subset=None`` always denotes the full dataset. Subclasses with an
    additive (i.i.d.) summary set ``additive = True`` and implement
    :meth:`observation_summaries`, which unlocks the compiled subset chains.
    """

    name: str = "model"
    param_dim: int
    summary_dim: int
    additive: bool = False
    window_only: bool = False

    @abstractmethod
    def log_prior(self, theta: np.ndarray) -> float:
        ...

    @abstractmethod
    def log_likelihood(self, dataset: Dataset, subset: Optional[SubsetIndex], theta: np.ndarray) -> float:
        ...

    @abstractmethod
    def summary(self, dataset: Dataset, subset: Optional[SubsetIndex]) -> np.ndarray:
        ...

    @abstractmethod
    def simulate(self, theta, N: int, rng: np.random.Generator) -> Dataset:
        ...

    @abstractmethod
    def sample_prior(self, rng: np.random.Generator) -> np.ndarray:
        ...

    def in_support(self, theta: np.ndarray) -> bool:
        return bool(np.all(np.isfinite(theta)))

    def initial_theta(self, dataset: Dataset) -> np.ndarray:
        """Starting point for the samplers; models override with a data-driven estimate."""
        return self.sample_prior(np.random.default_rng(0))

    def observation_summaries(self, dataset: Dataset) -> np.ndarray:
        """(N, s) array of S(Y_k); only for additive summaries."""
        raise NotImplementedError(f"{self.name} has no additive summary")

    def log_likelihood_many(self, dataset: Dataset, subset: Optional[SubsetIndex], thetas) -> np.ndarray:
        """Log-likelihood at each row of ``thetas`` (overridden where vectorisable)."""
        thetas = np.asarray(thetas, dtype=float).reshape(-1, self.param_dim)
        return np.array([self.log_likelihood(dataset, subset, t) for t in thetas])

    def log_posterior(self, dataset: Dataset, theta: np.ndarray) -> float:
        lp = self.log_prior(theta)
        if not np.isfinite(lp):
            return -np.inf
        return lp + self.log_likelihood(dataset, None, theta)

    def config(self) -> dict:
        """JSON-serialisable description, echoed in manifests."""
        return {"model": self.name}

    def check_theta(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.shape != (self.param_dim,):
            raise ValueError(f"{self.name} expects {self.param_dim} parameters, got {theta.shape[0]}")
        if not self.in_support(theta):
            raise ValueError(f"parameter {theta.tolist()} outside the {self.name} parameter space")
        return theta


def subset_rows(dataset_array: np.ndarray, subset: Optional[SubsetIndex]) -> np.ndarray:
    if subset is None:
        return dataset_array
    if subset.start is not None:
        return dataset_array[subset.start:subset.start + subset.n]
    return dataset_array[subset.indices]
