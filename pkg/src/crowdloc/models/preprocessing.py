import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array

from ..dataset import MISSING


class RssiScaler(TransformerMixin, BaseEstimator):
    """Map dBm readings onto (0, 1] and the missing sentinel onto 0.

    ``low_dbm`` lands just above 0 and ``high_dbm`` on 1; readings outside
    that range are clipped. The transform is fixed, so ``fit`` only records
    the input width.
    """

    def __init__(self, low_dbm=-100.0, high_dbm=-30.0, missing=MISSING):
        self.low_dbm = low_dbm
        self.high_dbm = high_dbm
        self.missing = missing

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        X = check_array(X, dtype=np.float64)
        span = self.high_dbm - self.low_dbm + 1.0
        scaled = np.clip((X - self.low_dbm + 1.0) / span, 1.0 / span, 1.0)
        return np.where(X == self.missing, 0.0, scaled)
