"""Pure-numpy split-search and tree-traversal kernels.

Fallback used when the compiled extension is unavailable. Both backends must
pick identical splits: the split score is computed from exact integer class
counts with a single float division per side, so the float comparisons agree
bit-for-bit with the compiled kernel.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"


def best_split(X, y, idx, features, n_classes):
    """Best Gini split for the node holding rows ``idx``.

    Scans candidate ``features`` in order; for each, sorts the node's values
    and evaluates every boundary between distinct consecutive values.
    Equivalent to minimizing the size-weighted child Gini impurity: the score
    maximized here is sum_c(count_c^2)/n_left + sum_c(count_c^2)/n_right.

    Returns (feature, threshold, left_idx, right_idx), with feature == -1 and
    empty partitions when no candidate feature splits the node. The partition
    preserves the relative order of ``idx``.
    """
    m = idx.shape[0]
    best_score = -np.inf
    best_feature, best_threshold = -1, 0.0
    if m < 2:
        return best_feature, best_threshold, idx[:0], idx[:0]
    yv = y[idx]
    classes = np.arange(n_classes, dtype=np.int64)
    for f in features:
        v = X[idx, f]
        order = np.argsort(v)
        vs = v[order]
        if vs[0] == vs[-1]:
            continue
        ys = yv[order]
        prefix = np.cumsum(ys[:, None] == classes[None, :], axis=0, dtype=np.int64)
        left = prefix[:-1]
        right = prefix[-1][None, :] - left
        sum_sq_left = np.einsum("ij,ij->i", left, left)
        sum_sq_right = np.einsum("ij,ij->i", right, right)
        n_left = np.arange(1, m, dtype=np.float64)
        score = sum_sq_left / n_left + sum_sq_right / (m - n_left)
        score[vs[:-1] == vs[1:]] = -np.inf
        j = int(np.argmax(score))
        if score[j] > best_score:
            best_score = score[j]
            threshold = (vs[j] + vs[j + 1]) / 2.0
            if threshold >= vs[j + 1]:
                threshold = vs[j]
            best_feature, best_threshold = int(f), float(threshold)
    if best_feature < 0:
        return best_feature, best_threshold, idx[:0], idx[:0]
    mask = X[idx, best_feature] <= best_threshold
    return best_feature, best_threshold, idx[mask], idx[~mask]


def tree_leaf_ids(feature, threshold, left, right, X):
    """Leaf node index reached by each row of X."""
    n = X.shape[0]
    rows = np.arange(n)
    cur = np.zeros(n, dtype=np.int64)
    active = feature[cur] >= 0
    while active.any():
        r = rows[active]
        c = cur[active]
        go_left = X[r, feature[c]] <= threshold[c]
        cur[active] = np.where(go_left, left[c], right[c])
        active = feature[cur] >= 0
    return cur
