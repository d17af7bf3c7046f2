"""Informed sub-sampling MCMC for tall datasets."""

from .core import (
    ChainState,
    Dataset,
    InadmissibleSubset,
    SamplerConfig,
    SubsetError,
    SubsetIndex,
    make_subset,
    mean_summary,
    random_subset,
)
from .models import Ar2Model, GaussMixModel, LogisticModel, ProbitModel, build_model
from .samplers import ChainRecord, run_iss, run_mh

__version__ = "0.1.0"

__all__ = [
    "ChainState", "Dataset", "InadmissibleSubset", "SamplerConfig", "SubsetError", "SubsetIndex",
    "make_subset", "mean_summary", "random_subset", "Ar2Model", "GaussMixModel", "LogisticModel",
    "ProbitModel", "build_model", "ChainRecord", "run_iss", "run_mh", "__version__",
]
