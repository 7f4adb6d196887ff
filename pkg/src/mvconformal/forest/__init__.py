"""Random-forest classifier with deterministic seeding and swappable kernels.

The split-search inner loop runs in a compiled extension when available and
falls back to a numpy implementation otherwise (selected at import; override
with MVCONFORMAL_BACKEND=python|cython). Both kernels make bit-identical
split decisions, so a forest does not depend on the backend, the thread
count, or the order trees are trained in.

Trees are CART-style: bootstrap resample per tree, Gini impurity minimized
over ``mtry`` uniformly sampled candidate features, midpoint thresholds,
exhaustive threshold scan. Scores are soft votes: the mean over trees of the
leaf class-frequency vectors.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, DataError
from . import _kernels_py

_env_backend = os.environ.get("MVCONFORMAL_BACKEND", "").strip().lower()
if _env_backend == "python":
    _default_kernels = _kernels_py
else:
    try:
        from . import _kernels as _default_kernels  # type: ignore[attr-defined]
    except ImportError:
        if _env_backend == "cython":
            raise
        _default_kernels = _kernels_py

BACKEND = _default_kernels.BACKEND_NAME


def available_backends() -> list:
    names = ["python"]
    try:
        from . import _kernels  # noqa: F401
        names.insert(0, "cython")
    except ImportError:
        pass
    return names


def get_kernels(backend=None):
    """Resolve a backend name ("cython"/"python"/None for default) to a kernel module."""
    if backend is None:
        return _default_kernels
    if backend == "python":
        return _kernels_py
    if backend == "cython":
        from . import _kernels
        return _kernels
    raise ConfigError(f"unknown forest backend {backend!r}")


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int | None = None
    min_samples_split: int = 2
    mtry: int | None = None  # default ceil(sqrt(d)) at fit time

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError("n_trees must be positive")
        if self.max_depth is not None and self.max_depth < 1:
            raise ConfigError("max_depth must be positive or unlimited (None)")
        if self.min_samples_split < 2:
            raise ConfigError("min_samples_split must be at least 2")
        if self.mtry is not None and self.mtry < 1:
            raise ConfigError("mtry must be positive")


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray  # int64, -1 at leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # (n_nodes, k) class frequencies


@dataclass(frozen=True)
class Forest:
    trees: tuple
    n_classes: int
    n_features: int
    params: ForestParams = field(repr=False, default=ForestParams())


def _grow_tree(X, y, boot_idx, n_classes, params, mtry, rng, kernels) -> Tree:
    features_l, thresholds_l, lefts_l, rights_l, values_l = [], [], [], [], []

    def alloc(node_idx):
        counts = np.bincount(y[node_idx], minlength=n_classes)
        features_l.append(-1)
        thresholds_l.append(0.0)
        lefts_l.append(-1)
        rights_l.append(-1)
        values_l.append(counts / len(node_idx))
        return len(features_l) - 1, counts

    stack = [(None, boot_idx, 0)]
    root_created = False
    while stack:
        node_id, node_idx, depth = stack.pop()
        if node_id is None:
            node_id, counts = alloc(node_idx)
            root_created = True
        else:
            counts = np.bincount(y[node_idx], minlength=n_classes)
        m = len(node_idx)
        if (
            m < params.min_samples_split
            or counts.max() == m
            or (params.max_depth is not None and depth >= params.max_depth)
        ):
            continue
        candidates = rng.choice(X.shape[1], size=mtry, replace=False).astype(np.int64)
        feat, thr = kernels.best_split(X, y, node_idx, candidates, n_classes)
        if feat < 0:
            continue
        mask = X[node_idx, feat] <= thr
        left_idx = node_idx[mask]
        right_idx = node_idx[~mask]
        left_id, _ = alloc(left_idx)
        right_id, _ = alloc(right_idx)
        features_l[node_id] = feat
        thresholds_l[node_id] = thr
        lefts_l[node_id] = left_id
        rights_l[node_id] = right_id
        stack.append((right_id, right_idx, depth + 1))
        stack.append((left_id, left_idx, depth + 1))
    assert root_created
    return Tree(
        feature=np.array(features_l, dtype=np.int64),
        threshold=np.array(thresholds_l, dtype=np.float64),
        left=np.array(lefts_l, dtype=np.int64),
        right=np.array(rights_l, dtype=np.int64),
        value=np.array(values_l, dtype=np.float64),
    )


def _tree_seed(seed, tree_index) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(int(tree_index),))
    return np.random.default_rng(ss)


def rf_fit(X, y, params: ForestParams = ForestParams(), seed: int = 0,
           n_classes=None, n_jobs: int = 1, backend=None) -> Forest:
    """Fit a forest. Deterministic given (data, params, seed) at any n_jobs."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[1] < 1:
        raise DataError("X must be 2-D with at least one feature")
    n = X.shape[0]
    if n < 2 or y.shape != (n,):
        raise DataError("need at least 2 examples and matching labels")
    if y.min() < 0:
        raise DataError("labels must be nonnegative integers")
    if n_classes is None:
        n_classes = int(y.max()) + 1
    elif y.max() >= n_classes:
        raise DataError("label exceeds n_classes")
    d = X.shape[1]
    mtry = params.mtry if params.mtry is not None else math.ceil(math.sqrt(d))
    if not 1 <= mtry <= d:
        raise ConfigError(f"mtry={mtry} outside 1..{d}")
    kernels = get_kernels(backend)

    def build(i):
        rng = _tree_seed(seed, i)
        boot = rng.integers(0, n, size=n).astype(np.int64)
        return _grow_tree(X, y, boot, n_classes, params, mtry, rng, kernels)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = tuple(pool.map(build, range(params.n_trees)))
    else:
        trees = tuple(build(i) for i in range(params.n_trees))
    return Forest(trees=trees, n_classes=n_classes, n_features=d, params=params)


def rf_predict_scores(forest: Forest, X, backend=None) -> np.ndarray:
    """Per-row class scores: mean over trees of leaf class frequencies."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != forest.n_features:
        raise DataError(f"expected {forest.n_features} feature columns, got {X.shape}")
    kernels = get_kernels(backend)
    total = np.zeros((X.shape[0], forest.n_classes), dtype=np.float64)
    for tree in forest.trees:
        leaf_ids = kernels.tree_leaf_ids(tree.feature, tree.threshold, tree.left, tree.right, X)
        total += tree.value[np.asarray(leaf_ids)]
    total /= len(forest.trees)
    return total


def argmax_label(score_row) -> int:
    """Index of the maximum score; ties go to the smallest class index."""
    row = np.asarray(score_row)
    if row.size == 0:
        raise DataError("empty score row")
    return int(np.argmax(row))


def argmax_labels(scores) -> np.ndarray:
    scores = np.asarray(scores)
    if scores.size == 0:
        raise DataError("empty score matrix")
    return np.argmax(scores, axis=1).astype(np.int64)


class ForestClassifier:
    """fit/predict_scores wrapper satisfying the pluggable-classifier contract."""

    def __init__(self, params: ForestParams = ForestParams(), n_classes=None,
                 n_jobs: int = 1, backend=None):
        self.params = params
        self.n_classes = n_classes
        self.n_jobs = n_jobs
        self.backend = backend
        self.forest: Forest | None = None

    def fit(self, X, y, seed: int = 0) -> "ForestClassifier":
        self.forest = rf_fit(X, y, self.params, seed=seed, n_classes=self.n_classes,
                             n_jobs=self.n_jobs, backend=self.backend)
        return self

    def predict_scores(self, X) -> np.ndarray:
        if self.forest is None:
            raise DataError("classifier is not fitted")
        return rf_predict_scores(self.forest, X, backend=self.backend)


FOREST_DUMP_VERSION = 1


def save_forest(forest: Forest, path) -> None:
    """Dump to a versioned npz archive (format documented in the README)."""
    offsets = np.zeros(len(forest.trees) + 1, dtype=np.int64)
    for i, tree in enumerate(forest.trees):
        offsets[i + 1] = offsets[i] + len(tree.feature)
    np.savez_compressed(
        path,
        format_version=np.int64(FOREST_DUMP_VERSION),
        n_classes=np.int64(forest.n_classes),
        n_features=np.int64(forest.n_features),
        params=np.array([forest.params.n_trees,
                         -1 if forest.params.max_depth is None else forest.params.max_depth,
                         forest.params.min_samples_split,
                         -1 if forest.params.mtry is None else forest.params.mtry], dtype=np.int64),
        offsets=offsets,
        feature=np.concatenate([t.feature for t in forest.trees]),
        threshold=np.concatenate([t.threshold for t in forest.trees]),
        left=np.concatenate([t.left for t in forest.trees]),
        right=np.concatenate([t.right for t in forest.trees]),
        value=np.concatenate([t.value for t in forest.trees], axis=0),
    )


def load_forest(path) -> Forest:
    with np.load(path) as archive:
        version = int(archive["format_version"])
        if version != FOREST_DUMP_VERSION:
            raise DataError(f"unsupported forest dump version {version}")
        offsets = archive["offsets"]
        raw = archive["params"]
        params = ForestParams(
            n_trees=int(raw[0]),
            max_depth=None if raw[1] < 0 else int(raw[1]),
            min_samples_split=int(raw[2]),
            mtry=None if raw[3] < 0 else int(raw[3]),
        )
        trees = []
        for i in range(len(offsets) - 1):
            lo, hi = offsets[i], offsets[i + 1]
            trees.append(Tree(
                feature=archive["feature"][lo:hi],
                threshold=archive["threshold"][lo:hi],
                left=archive["left"][lo:hi],
                right=archive["right"][lo:hi],
                value=archive["value"][lo:hi],
            ))
        return Forest(trees=tuple(trees), n_classes=int(archive["n_classes"]),
                      n_features=int(archive["n_features"]), params=params)
