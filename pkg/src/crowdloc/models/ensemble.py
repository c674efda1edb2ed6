import numpy as np
from sklearn.base import clone

from ..exceptions import InvalidParams, ZeroWeightSum
from .base import Regressor2D, check_fit_data, check_predict_data


def weighted_average(predictions, weights):
    """Coordinate-wise weighted mean of a list of (n, 2) predictions."""
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0):
        raise InvalidParams("ensemble weights must be non-negative")
    total = weights.sum()
    if not total > 0:
        raise ZeroWeightSum("ensemble weights sum to zero")
    acc = np.zeros_like(np.asarray(predictions[0], dtype=float))
    for w, p in zip(weights, predictions):
        if w:
            acc = acc + w * np.asarray(p, dtype=float)
    return acc / total


class EnsembleRegressor(Regressor2D):
    """Weighted average of component regressors, e.g. ``2*GBM + 1*NN``.

    ``estimators`` is a list of ``(name, estimator, weight)``. Components are
    cloned and fitted on the same data; ``from_fitted`` wraps models that
    are already trained.
    """

    def __init__(self, estimators):
        self.estimators = estimators

    def _weights(self):
        weights = [w for _, _, w in self.estimators]
        if not self.estimators:
            raise InvalidParams("ensemble needs at least one component")
        if not sum(weights) > 0:
            raise ZeroWeightSum("ensemble weights sum to zero")
        return weights

    def fit(self, X, y, **fit_params):
        self._weights()
        X, y = check_fit_data(X, y)
        self.n_features_in_ = X.shape[1]
        self.estimators_ = [(name, clone(est).fit(X, y), w) for name, est, w in self.estimators]
        return self

    @classmethod
    def from_fitted(cls, components):
        ens = cls(list(components))
        ens._weights()
        ens.estimators_ = list(components)
        ens.n_features_in_ = components[0][1].n_features_in_
        return ens

    def predict(self, X):
        X = check_predict_data(self, X)
        preds = [est.predict(X) for _, est, _ in self.estimators_]
        return weighted_average(preds, [w for _, _, w in self.estimators_])
