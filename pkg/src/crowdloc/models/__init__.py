"""Position regressors sharing the scikit-learn estimator contract."""

from .base import CentroidRegressor, Regressor2D
from .ensemble import EnsembleRegressor, weighted_average
from .gbm import GBMRegressor
from .knn import KNNRegressor
from .nn import NNRegressor
from .persistence import load_model, save_model
from .preprocessing import RssiScaler

MODEL_REGISTRY = {
    "centroid": CentroidRegressor,
    "knn": KNNRegressor,
    "gbm": GBMRegressor,
    "nn": NNRegressor,
}


def make_model(name, **params):
    """Build a regressor from a registry name such as ``"gbm"``."""
    try:
        return MODEL_REGISTRY[name](**params)
    except KeyError:
        raise KeyError(f"unknown model {name!r}; choose from {sorted(MODEL_REGISTRY)}") from None


__all__ = [
    "CentroidRegressor", "EnsembleRegressor", "GBMRegressor", "KNNRegressor", "MODEL_REGISTRY",
    "NNRegressor", "Regressor2D", "RssiScaler", "load_model", "make_model", "save_model",
    "weighted_average",
]
