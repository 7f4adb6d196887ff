# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
# distutils: language = c++
"""Compiled split-search and tree-traversal kernels.

Mirrors _kernels_py exactly: integer class-count arithmetic with one float
division per side keeps split decisions bit-identical across backends.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY
from libcpp.algorithm cimport sort
from libcpp.pair cimport pair
from libcpp.vector cimport vector

BACKEND_NAME = "cython"


def best_split(const double[:, ::1] X, const cnp.int64_t[::1] y,
               const cnp.int64_t[::1] idx, const cnp.int64_t[::1] features,
               Py_ssize_t n_classes):
    cdef Py_ssize_t m = idx.shape[0]
    if m < 2:
        return -1, 0.0
    cdef Py_ssize_t n_feats = features.shape[0]
    cdef vector[pair[double, cnp.int64_t]] buf
    cdef vector[cnp.int64_t] count_left, count_total
    cdef Py_ssize_t fi, i
    cdef cnp.int64_t f, c, best_feature = -1
    cdef double best_score = -INFINITY, best_threshold = 0.0
    cdef double score, threshold, n_left
    cdef cnp.int64_t sum_sq_left, sum_sq_right, before_left, before_right
    buf.resize(m)
    count_left.resize(n_classes)
    count_total.resize(n_classes)
    with nogil:
        for fi in range(n_feats):
            f = features[fi]
            for i in range(m):
                buf[i].first = X[idx[i], f]
                buf[i].second = y[idx[i]]
            sort(buf.begin(), buf.end())
            if buf[0].first == buf[m - 1].first:
                continue
            for c in range(n_classes):
                count_left[c] = 0
                count_total[c] = 0
            for i in range(m):
                count_total[buf[i].second] += 1
            sum_sq_left = 0
            sum_sq_right = 0
            for c in range(n_classes):
                sum_sq_right += count_total[c] * count_total[c]
            for i in range(m - 1):
                c = buf[i].second
                before_left = count_left[c]
                before_right = count_total[c] - before_left
                sum_sq_left += 2 * before_left + 1
                sum_sq_right += 1 - 2 * before_right
                count_left[c] += 1
                if buf[i].first == buf[i + 1].first:
                    continue
                n_left = <double>(i + 1)
                score = sum_sq_left / n_left + sum_sq_right / (<double>m - n_left)
                if score > best_score:
                    best_score = score
                    threshold = (buf[i].first + buf[i + 1].first) / 2.0
                    if threshold >= buf[i + 1].first:
                        threshold = buf[i].first
                    best_feature = f
                    best_threshold = threshold
    return int(best_feature), float(best_threshold)


def tree_leaf_ids(const cnp.int64_t[::1] feature, const double[::1] threshold,
                  const cnp.int64_t[::1] left, const cnp.int64_t[::1] right,
                  const double[:, ::1] X):
    cdef Py_ssize_t n = X.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] out_view = out
    cdef Py_ssize_t i
    cdef cnp.int64_t node
    with nogil:
        for i in range(n):
            node = 0
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out_view[i] = node
    return out
