"""Brute-force k-nearest-neighbour regression on raw fingerprints."""

import numpy as np

from ..exceptions import InvalidParams, KTooLarge
from .base import Regressor2D, check_fit_data, check_predict_data

# squared distances below this are exact in float64 for integer inputs
_EXACT_LIMIT = 2.0**52


def _is_integral(A):
    return bool(np.all(np.isfinite(A)) and np.all(A == np.round(A)))


class KNNRegressor(Regressor2D):
    """Unweighted mean target of the ``n_neighbors`` closest training rows.

    Distances are Euclidean over the raw feature vectors, sentinels included.
    Ties at the k-th distance are resolved in favour of earlier training rows.

    For integer-valued features (RSSI readings) the squared distances come
    from the dot-product expansion, which is exact in float64 while the
    values stay below 2**52; otherwise the differences are summed directly.
    """

    def __init__(self, n_neighbors=45, chunk_size=512):
        self.n_neighbors = n_neighbors
        self.chunk_size = chunk_size

    def fit(self, X, y):
        if self.n_neighbors < 1:
            raise InvalidParams("n_neighbors must be >= 1")
        X, y = check_fit_data(X, y)
        self.n_features_in_ = X.shape[1]
        self.X_train_ = X
        self.y_train_ = y
        self.integral_train_ = _is_integral(X)
        self.sq_norms_ = (X**2).sum(axis=1)
        return self

    def _sq_distances(self, Q):
        Xt = self.X_train_
        if self.integral_train_ and _is_integral(Q):
            q_norms = (Q**2).sum(axis=1)
            bound = q_norms.max(initial=0.0) + self.sq_norms_.max(initial=0.0)
            if 2.0 * bound < _EXACT_LIMIT:
                d2 = q_norms[:, None] + self.sq_norms_[None, :] - 2.0 * (Q @ Xt.T)
                return np.maximum(d2, 0.0)
        d2 = np.empty((Q.shape[0], Xt.shape[0]))
        for i in range(Q.shape[0]):
            diff = Xt - Q[i]
            d2[i] = (diff * diff).sum(axis=1)
        return d2

    def kneighbors(self, X):
        """Indices (ascending row order) of each query's k nearest rows."""
        X = check_predict_data(self, X)
        k = self.n_neighbors
        n_train = self.X_train_.shape[0]
        if k > n_train:
            raise KTooLarge(f"k={k} exceeds the {n_train} training rows")
        out = np.empty((X.shape[0], k), dtype=np.int64)
        step = max(1, int(self.chunk_size))
        for start in range(0, X.shape[0], step):
            d2 = self._sq_distances(X[start:start + step])
            if k == n_train:
                out[start:start + step] = np.arange(n_train)
                continue
            kth = np.partition(d2, k - 1, axis=1)[:, k - 1:k]
            chosen = d2 <= kth
            extra = np.flatnonzero(chosen.sum(axis=1) > k)
            if extra.size:
                # more rows tie at the k-th distance than fit; keep the earliest
                sub = d2[extra]
                tied = sub == kth[extra]
                need = k - (sub < kth[extra]).sum(axis=1, keepdims=True)
                chosen[extra] = (sub < kth[extra]) | (tied & (np.cumsum(tied, axis=1) <= need))
            out[start:start + step] = np.nonzero(chosen)[1].reshape(-1, k)
        return out

    def predict(self, X):
        idx = self.kneighbors(X)
        return self.y_train_[idx].mean(axis=1)

    def _get_state(self):
        scalars = {"n_features_in_": self.n_features_in_, "integral_train_": self.integral_train_}
        return scalars, {"X_train_": self.X_train_, "y_train_": self.y_train_, "sq_norms_": self.sq_norms_}

    def _set_state(self, scalars, arrays):
        self.n_features_in_ = scalars["n_features_in_"]
        self.integral_train_ = scalars["integral_train_"]
        self.X_train_ = arrays["X_train_"]
        self.y_train_ = arrays["y_train_"]
        self.sq_norms_ = arrays["sq_norms_"]
