"""Shared estimator plumbing for the (x, y) regressors."""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..exceptions import DataError


def check_fit_data(X, y):
    """Validate training data; targets must be (n, 2) meters."""
    X, y = check_X_y(X, y, multi_output=True, y_numeric=True, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2 or y.shape[1] != 2:
        raise DataError(f"targets must have shape (n, 2), got {y.shape}")
    return X, y


def check_predict_data(estimator, X):
    check_is_fitted(estimator)
    X = check_array(X, dtype=np.float64)
    if X.shape[1] != estimator.n_features_in_:
        raise DataError(
            f"{type(estimator).__name__} was fitted on {estimator.n_features_in_} "
            f"features, got {X.shape[1]}"
        )
    return X


class Regressor2D(RegressorMixin, BaseEstimator):
    """Base class: ``fit(X, y)`` with ``y`` of shape (n, 2), ``predict(X) -> (n, 2)``."""

    def _more_tags(self):
        return {"multioutput": True, "multioutput_only": True}


class CentroidRegressor(Regressor2D):
    """Predicts the mean training position everywhere; the MPE baseline."""

    def fit(self, X, y):
        X, y = check_fit_data(X, y)
        self.n_features_in_ = X.shape[1]
        self.centroid_ = y.mean(axis=0)
        return self

    def predict(self, X):
        X = check_predict_data(self, X)
        return np.tile(self.centroid_, (X.shape[0], 1))

    def _get_state(self):
        return {"n_features_in_": self.n_features_in_}, {"centroid_": self.centroid_}

    def _set_state(self, scalars, arrays):
        self.n_features_in_ = scalars["n_features_in_"]
        self.centroid_ = arrays["centroid_"]
