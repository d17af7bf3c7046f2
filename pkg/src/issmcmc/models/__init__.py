from .base import Model
from .probit import ProbitModel
from .ar2 import Ar2Model, yule_walker_ar2, empirical_autocovariances
from .logistic import LogisticModel, MLEConvergenceError, logistic_mle, logistic_loglik, logistic_score
from .gaussmix import GaussMixModel, gaussmix_summary

MODELS = {
    "probit": ProbitModel,
    "ar2": Ar2Model,
    "logistic": LogisticModel,
    "gaussmix": GaussMixModel,
}


def build_model(name: str, **params) -> Model:
    try:
        cls = MODELS[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None
    return cls(**params)


__all__ = [
    "Model", "ProbitModel", "Ar2Model", "LogisticModel", "GaussMixModel", "MLEConvergenceError",
    "MODELS", "build_model", "yule_walker_ar2", "empirical_autocovariances", "logistic_mle",
    "logistic_loglik", "logistic_score", "gaussmix_summary",
]
