"""Numba kernels for histogram-based tree growing.

Binned data is stored feature-major, ``binned[f, i]``, so a node's
histogram for one feature reads a contiguous row.
"""

import numpy as np
from numba import njit

BIN_DTYPE = np.uint16


@njit(cache=True)
def build_histogram(binned, samples, grad, features, n_bins_max):
    """Sum of gradients and sample counts per (feature, bin)."""
    n_feat = binned.shape[0]
    hist_g = np.zeros((n_feat, n_bins_max), dtype=np.float64)
    hist_n = np.zeros((n_feat, n_bins_max), dtype=np.int64)
    for k in range(features.shape[0]):
        f = features[k]
        row = binned[f]
        hg = hist_g[f]
        hn = hist_n[f]
        for s in range(samples.shape[0]):
            i = samples[s]
            b = row[i]
            hg[b] += grad[i]
            hn[b] += 1
    return hist_g, hist_n


@njit(cache=True)
def find_best_split(hist_g, hist_n, features, n_bins, sum_g, count, min_leaf):
    """Best L2 split over the selected features.

    Gain is ``G_l^2/n_l + G_r^2/n_r - G^2/n``. Returns (gain, feature, bin),
    with feature -1 when no split leaves ``min_leaf`` samples on both sides.
    Ties keep the first candidate in (feature order, bin order).
    """
    parent = sum_g * sum_g / count
    best_gain = 0.0
    best_f = -1
    best_b = -1
    for k in range(features.shape[0]):
        f = features[k]
        gl = 0.0
        nl = 0
        for b in range(n_bins[f] - 1):
            gl += hist_g[f, b]
            nl += hist_n[f, b]
            nr = count - nl
            if nl < min_leaf:
                continue
            if nr < min_leaf:
                break
            gr = sum_g - gl
            gain = gl * gl / nl + gr * gr / nr - parent
            if gain > best_gain:
                best_gain = gain
                best_f = f
                best_b = b
    return best_gain, best_f, best_b


@njit(cache=True)
def partition(binned, samples, feature, split_bin):
    row = binned[feature]
    n_left = 0
    for s in range(samples.shape[0]):
        if row[samples[s]] <= split_bin:
            n_left += 1
    left = np.empty(n_left, dtype=samples.dtype)
    right = np.empty(samples.shape[0] - n_left, dtype=samples.dtype)
    li = 0
    ri = 0
    for s in range(samples.shape[0]):
        i = samples[s]
        if row[i] <= split_bin:
            left[li] = i
            li += 1
        else:
            right[ri] = i
            ri += 1
    return left, right


@njit(cache=True)
def sum_grad(samples, grad):
    total = 0.0
    for s in range(samples.shape[0]):
        total += grad[samples[s]]
    return total


@njit(cache=True)
def predict_binned(binned, feature, split_bin, left, right, value):
    """Leaf value of one tree for every column of ``binned``."""
    n = binned.shape[1]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        node = 0
        while left[node] >= 0:
            if binned[feature[node], i] <= split_bin[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


@njit(cache=True)
def predict_forest(X, offsets, feature, threshold, left, right, value):
    """Sum of leaf values over all trees for raw (unbinned) rows.

    Child indices are relative to each tree's offset; ``x <= threshold``
    goes left.
    """
    n = X.shape[0]
    out = np.zeros(n, dtype=np.float64)
    n_trees = offsets.shape[0] - 1
    for i in range(n):
        acc = 0.0
        for t in range(n_trees):
            base = offsets[t]
            node = 0
            while left[base + node] >= 0:
                j = base + node
                if X[i, feature[j]] <= threshold[j]:
                    node = left[j]
                else:
                    node = right[j]
            acc += value[base + node]
        out[i] = acc
    return out


@njit(cache=True)
def uniform_by_id(row_ids, key):
    """Counter-based uniforms in [0, 1) from (row id, key) via splitmix64."""
    n = row_ids.shape[0]
    out = np.empty(n, dtype=np.float64)
    golden = np.uint64(0x9E3779B97F4A7C15)
    m1 = np.uint64(0xBF58476D1CE4E5B9)
    m2 = np.uint64(0x94D049BB133111EB)
    k = np.uint64(key) * golden
    for i in range(n):
        z = np.uint64(row_ids[i]) + k + golden
        z = (z ^ (z >> np.uint64(30))) * m1
        z = (z ^ (z >> np.uint64(27))) * m2
        z = z ^ (z >> np.uint64(31))
        out[i] = np.float64(z >> np.uint64(11)) * (1.0 / 9007199254740992.0)
    return out
