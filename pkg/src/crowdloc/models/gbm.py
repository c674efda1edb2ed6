"""Histogram gradient-boosted regression trees.

Two independent single-output boosters, one per coordinate. Trees are grown
leaf-wise (best gain first) on binned features under an L2 objective.
Sentinel values are binned like any other reading.
"""

import heapq

import numpy as np

from ..exceptions import InvalidParams
from . import _hist
from .base import Regressor2D, check_fit_data, check_predict_data


class BinMapper:
    """Per-feature bin thresholds; ``x <= thresholds[b]`` falls in bin ``<= b``."""

    def __init__(self, max_bin=512):
        self.max_bin = max_bin

    def fit(self, X):
        self.thresholds_ = []
        for j in range(X.shape[1]):
            col = X[:, j]
            uniq = np.unique(col)
            if len(uniq) <= self.max_bin:
                thr = (uniq[:-1] + uniq[1:]) / 2.0
            else:
                qs = np.quantile(col, np.linspace(0.0, 1.0, self.max_bin + 1)[1:-1])
                thr = np.unique(qs)
                # a threshold at the column max would leave the last bin empty
                thr = thr[thr < uniq[-1]]
            self.thresholds_.append(thr.astype(np.float64))
        self.n_bins_ = np.array([len(t) + 1 for t in self.thresholds_], dtype=np.int64)
        return self

    def transform(self, X):
        out = np.empty((X.shape[1], X.shape[0]), dtype=_hist.BIN_DTYPE)
        for j, thr in enumerate(self.thresholds_):
            out[j] = np.searchsorted(thr, X[:, j], side="left")
        return out


class _TreeBuilder:
    """Leaf-wise growth of one regression tree on the rows in ``samples``."""

    def __init__(self, binned, n_bins, thresholds, num_leaves, max_depth, min_leaf):
        self.binned = binned
        self.n_bins = n_bins
        self.n_bins_max = int(n_bins.max())
        self.thresholds = thresholds
        self.num_leaves = num_leaves
        self.max_depth = max_depth
        self.min_leaf = min_leaf

    def _splittable(self, depth, n):
        return depth < self.max_depth and n >= 2 * self.min_leaf

    def grow(self, samples, grad, features):
        feature, split_bin, threshold = [-1], [-1], [0.0]
        left, right, value, depth = [-1], [-1], [0.0], [0]

        g_root = _hist.sum_grad(samples, grad)
        n_root = len(samples)
        value[0] = -g_root / n_root
        heap = []
        info = {}

        def consider(node, samp, g, n, hg, hn):
            gain, f, b = _hist.find_best_split(hg, hn, features, self.n_bins, g, n, self.min_leaf)
            if f >= 0:
                info[node] = (samp, g, n, hg, hn)
                heapq.heappush(heap, (-gain, node, f, b))

        if self._splittable(0, n_root):
            hg, hn = _hist.build_histogram(self.binned, samples, grad, features, self.n_bins_max)
            consider(0, samples, g_root, n_root, hg, hn)

        n_leaves = 1
        while heap and n_leaves < self.num_leaves:
            _, node, f, b = heapq.heappop(heap)
            samp, g, n, hg, hn = info.pop(node)
            l_samp, r_samp = _hist.partition(self.binned, samp, f, b)
            g_l = _hist.sum_grad(l_samp, grad)
            g_r = g - g_l
            d = depth[node] + 1

            children = []
            for samp_c, g_c in ((l_samp, g_l), (r_samp, g_r)):
                idx = len(feature)
                feature.append(-1)
                split_bin.append(-1)
                threshold.append(0.0)
                left.append(-1)
                right.append(-1)
                value.append(-g_c / len(samp_c))
                depth.append(d)
                children.append(idx)
            feature[node] = f
            split_bin[node] = b
            threshold[node] = self.thresholds[f][b]
            left[node], right[node] = children
            n_leaves += 1

            want_l = self._splittable(d, len(l_samp))
            want_r = self._splittable(d, len(r_samp))
            if want_l or want_r:
                # histogram the smaller child, derive the larger by subtraction
                if len(l_samp) <= len(r_samp):
                    hg_s, hn_s = _hist.build_histogram(self.binned, l_samp, grad, features, self.n_bins_max)
                    hists = ((hg_s, hn_s), (hg - hg_s, hn - hn_s))
                else:
                    hg_s, hn_s = _hist.build_histogram(self.binned, r_samp, grad, features, self.n_bins_max)
                    hists = ((hg - hg_s, hn - hn_s), (hg_s, hn_s))
                if want_l:
                    consider(children[0], l_samp, g_l, len(l_samp), *hists[0])
                if want_r:
                    consider(children[1], r_samp, g_r, len(r_samp), *hists[1])

        return {
            "feature": np.array(feature, dtype=np.int64),
            "split_bin": np.array(split_bin, dtype=np.int64),
            "threshold": np.array(threshold, dtype=np.float64),
            "left": np.array(left, dtype=np.int64),
            "right": np.array(right, dtype=np.int64),
            "value": np.array(value, dtype=np.float64),
            "n_leaves": n_leaves,
            "depth": max(depth),
        }


def _stack_trees(trees):
    sizes = [len(t["value"]) for t in trees]
    offsets = np.zeros(len(trees) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum(sizes)
    if not trees:
        empty_i = np.zeros(0, dtype=np.int64)
        return {"offsets": offsets, "feature": empty_i, "threshold": np.zeros(0),
                "left": empty_i, "right": empty_i, "value": np.zeros(0)}
    cat = lambda key: np.concatenate([t[key] for t in trees])  # noqa: E731
    return {
        "offsets": offsets,
        "feature": cat("feature"),
        "threshold": cat("threshold"),
        "left": cat("left"),
        "right": cat("right"),
        "value": cat("value"),
    }


class GBMRegressor(Regressor2D):
    """Gradient boosting over histogram trees, one booster per coordinate.

    Defaults follow the reference configuration except ``num_iterations``
    (15000 there, 500 here for desk-scale runs).

    Parameters
    ----------
    learning_rate : float
        Shrinkage applied to every tree's output.
    num_iterations : int
        Trees per coordinate.
    num_leaves, max_depth : int
        Growth limits; the root is at depth 0.
    max_bin : int
        Upper bound on histogram bins per feature.
    feature_fraction : float
        Fraction of features drawn (without replacement) for each tree.
    bagging_fraction, bagging_freq : float, int
        Row subsample fraction, redrawn every ``bagging_freq`` iterations.
        Membership is a hash of (row id, round) so it does not depend on
        row order.
    min_data_in_leaf : int
    random_state : int
    """

    def __init__(
        self,
        learning_rate=0.005,
        num_iterations=500,
        num_leaves=128,
        max_depth=8,
        max_bin=512,
        feature_fraction=0.9,
        bagging_fraction=0.7,
        bagging_freq=10,
        min_data_in_leaf=1,
        random_state=0,
    ):
        self.learning_rate = learning_rate
        self.num_iterations = num_iterations
        self.num_leaves = num_leaves
        self.max_depth = max_depth
        self.max_bin = max_bin
        self.feature_fraction = feature_fraction
        self.bagging_fraction = bagging_fraction
        self.bagging_freq = bagging_freq
        self.min_data_in_leaf = min_data_in_leaf
        self.random_state = random_state

    def _check_params(self):
        if not self.learning_rate > 0:
            raise InvalidParams("learning_rate must be positive")
        if self.num_iterations < 0:
            raise InvalidParams("num_iterations must be >= 0")
        if self.max_depth < 1:
            raise InvalidParams("max_depth must be >= 1")
        if self.num_leaves < 2:
            raise InvalidParams("num_leaves must be >= 2")
        if not 2 <= self.max_bin <= np.iinfo(_hist.BIN_DTYPE).max:
            raise InvalidParams("max_bin out of range")
        for name in ("feature_fraction", "bagging_fraction"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise InvalidParams(f"{name} must be in (0, 1]")
        if self.bagging_freq < 0 or self.min_data_in_leaf < 1:
            raise InvalidParams("bagging_freq must be >= 0 and min_data_in_leaf >= 1")

    def fit(self, X, y, row_ids=None):
        self._check_params()
        X, y = check_fit_data(X, y)
        n, n_feat = X.shape
        if row_ids is None:
            row_ids = np.arange(n, dtype=np.int64)
        row_ids = np.asarray(row_ids, dtype=np.int64)
        if len(row_ids) != n or len(np.unique(row_ids)) != n:
            raise InvalidParams("row_ids must be unique, one per row")
        order = np.argsort(row_ids, kind="stable")
        X, y, row_ids = X[order], y[order], row_ids[order]

        self.n_features_in_ = n_feat
        mapper = BinMapper(self.max_bin).fit(X)
        binned = mapper.transform(X)
        self.n_bins_ = mapper.n_bins_
        builder = _TreeBuilder(binned, mapper.n_bins_, mapper.thresholds_,
                               self.num_leaves, self.max_depth, self.min_data_in_leaf)

        n_sel = max(1, int(round(self.feature_fraction * n_feat)))
        use_bagging = self.bagging_fraction < 1.0 and self.bagging_freq > 0
        all_rows = np.arange(n, dtype=np.int64)

        self.init_ = y.mean(axis=0)
        self.forests_ = []
        self.tree_stats_ = []
        self.train_l2_ = np.zeros((2, self.num_iterations + 1))
        self.train_l1_ = np.zeros((2, self.num_iterations + 1))
        for k in range(2):
            target = y[:, k]
            pred = np.full(n, self.init_[k])
            resid = pred - target
            self.train_l2_[k, 0] = np.mean(resid**2)
            self.train_l1_[k, 0] = np.mean(np.abs(resid))
            trees = []
            degenerate = np.all(target == target[0])
            for it in range(self.num_iterations):
                if degenerate:
                    self.train_l2_[k, it + 1] = self.train_l2_[k, it]
                    self.train_l1_[k, it + 1] = self.train_l1_[k, it]
                    continue
                grad = pred - target
                if use_bagging:
                    key = (self.random_state * 1_000_003 + k) * 1_000_003 + it // self.bagging_freq
                    u = _hist.uniform_by_id(row_ids, key)
                    samples = np.flatnonzero(u < self.bagging_fraction)
                    if len(samples) == 0:
                        samples = all_rows
                else:
                    samples = all_rows
                if n_sel < n_feat:
                    rng = np.random.default_rng([self.random_state, k, it])
                    features = np.sort(rng.choice(n_feat, size=n_sel, replace=False)).astype(np.int64)
                else:
                    features = np.arange(n_feat, dtype=np.int64)
                tree = builder.grow(samples, grad, features)
                trees.append(tree)
                pred = pred + self.learning_rate * _hist.predict_binned(
                    binned, tree["feature"], tree["split_bin"], tree["left"], tree["right"], tree["value"]
                )
                resid = pred - target
                self.train_l2_[k, it + 1] = np.mean(resid**2)
                self.train_l1_[k, it + 1] = np.mean(np.abs(resid))
            self.tree_stats_.append([(t["n_leaves"], t["depth"]) for t in trees])
            self.forests_.append(_stack_trees(trees))
        return self

    def _raw_sum(self, X, k):
        f = self.forests_[k]
        return _hist.predict_forest(X, f["offsets"], f["feature"], f["threshold"],
                                    f["left"], f["right"], f["value"])

    def predict(self, X):
        X = np.ascontiguousarray(check_predict_data(self, X))
        out = np.empty((X.shape[0], 2))
        for k in range(2):
            out[:, k] = self.init_[k] + self.learning_rate * self._raw_sum(X, k)
        return out

    def _get_state(self):
        arrays = {"init_": self.init_, "n_bins_": self.n_bins_,
                  "train_l2_": self.train_l2_, "train_l1_": self.train_l1_}
        for k, forest in enumerate(self.forests_):
            for key, arr in forest.items():
                arrays[f"forest{k}_{key}"] = arr
        scalars = {"n_features_in_": self.n_features_in_, "tree_stats_": self.tree_stats_}
        return scalars, arrays

    def _set_state(self, scalars, arrays):
        self.n_features_in_ = scalars["n_features_in_"]
        self.tree_stats_ = [[tuple(s) for s in per] for per in scalars["tree_stats_"]]
        self.init_ = arrays["init_"]
        self.n_bins_ = arrays["n_bins_"]
        self.train_l2_ = arrays["train_l2_"]
        self.train_l1_ = arrays["train_l1_"]
        keys = ("offsets", "feature", "threshold", "left", "right", "value")
        self.forests_ = [{key: arrays[f"forest{k}_{key}"] for key in keys} for k in range(2)]
