"""Multi-view fusion models over conformal predictors.

Three strategies, all exposed behind one duck-typed surface
(``predict_sets(views, epsilon)`` / ``predict_labels(views, epsilon)``):

* aggregation ("mv-a"): concatenate view features, train one model, calibrate.
* stacking ("mv-s"): one first-level learner per view; out-of-fold predictions
  are one-hot encoded (one column dropped against the dummy-variable trap),
  column-bound with the across-view mean score matrix, and fed to a
  meta-learner; the whole pipeline is calibrated as a single classifier.
* intersection ("mv-i"): per-view conformal models; the fused set is the
  intersection of the per-view sets. The attached p-value vector is the
  per-label minimum across views (min p > eps exactly reproduces the
  intersection). Intersected sets are only semi-conformal: the per-view
  coverage guarantee does not survive the intersection.

Single views run as "single:<view_name>". Point predictions are score argmax
for the conformal models; the intersection model picks the best mean-score
label from the intersection, falling back to the union when the intersection
is empty, and to the global mean-score argmax when both are empty.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .conformal import ConformalModel, PredictionSet, calibrate
from .data import MultiViewDataset
from .errors import ConfigError, DataError
from .forest import ForestClassifier, ForestParams, argmax_labels
from .seeding import child_seed, spawn_rng

_FOLD_PARTITION, _FOLD_LEARNER, _REFIT_LEARNER, _META_LEARNER = range(4)


@dataclass(frozen=True)
class AggregatedView:
    features: np.ndarray
    source_dims: tuple


def aggregate_features(views) -> AggregatedView:
    """Horizontally concatenate row-aligned view matrices, in view order."""
    views = [np.asarray(v, dtype=np.float64) for v in views]
    if not views:
        raise DataError("no views to aggregate")
    n = views[0].shape[0]
    if any(v.shape[0] != n for v in views):
        raise DataError("views disagree on row count")
    return AggregatedView(features=np.hstack(views), source_dims=tuple(v.shape[1] for v in views))


def mvs_build_meta_features(predictions, scores, k: int, dropped_class: int) -> np.ndarray:
    """Column-bind per-view one-hot predicted labels (dropped_class column
    removed) with the element-wise mean of the per-view score matrices.

    Output width: n_views * (k - 1) + k.
    """
    predictions = [np.asarray(p, dtype=np.int64) for p in predictions]
    scores = [np.asarray(s, dtype=np.float64) for s in scores]
    if len(predictions) != len(scores) or not predictions:
        raise DataError("need one prediction vector and one score matrix per view")
    n = predictions[0].shape[0]
    blocks = []
    for pred, score in zip(predictions, scores):
        if pred.shape != (n,) or score.shape != (n, k):
            raise DataError("meta-feature inputs are not row-aligned")
        if pred.min() < 0 or pred.max() >= k:
            raise DataError("prediction label out of range")
        onehot = np.zeros((n, k), dtype=np.float64)
        onehot[np.arange(n), pred] = 1.0
        blocks.append(np.delete(onehot, dropped_class, axis=1))
    blocks.append(np.mean(scores, axis=0))
    return np.hstack(blocks)


@dataclass(frozen=True)
class StackModel:
    """Per-view first-level learners feeding a meta-learner; acts as one
    classifier whose inputs are the list of view matrices."""

    first_level: tuple
    meta: ForestClassifier
    dropped_class: int
    k: int
    n_views: int

    def meta_features(self, views) -> np.ndarray:
        scores = [clf.predict_scores(v) for clf, v in zip(self.first_level, views)]
        preds = [argmax_labels(s) for s in scores]
        return mvs_build_meta_features(preds, scores, self.k, self.dropped_class)

    def predict_scores(self, views) -> np.ndarray:
        return self.meta.predict_scores(self.meta_features(views))


class SingleViewModel:
    def __init__(self, view_index: int, conformal: ConformalModel):
        self.view_index = view_index
        self.conformal = conformal

    def _inputs(self, views):
        return views[self.view_index]

    def predict_sets(self, views, epsilon: float) -> list:
        return self.conformal.predict_sets(self._inputs(views), epsilon)

    def predict_labels(self, views, epsilon: float = None) -> np.ndarray:
        return argmax_labels(self.conformal.underlying.predict_scores(self._inputs(views)))


class AggregationModel(SingleViewModel):
    def __init__(self, conformal: ConformalModel):
        super().__init__(view_index=-1, conformal=conformal)

    def _inputs(self, views):
        return aggregate_features(views).features


class StackingModel(SingleViewModel):
    def __init__(self, conformal: ConformalModel):
        super().__init__(view_index=-1, conformal=conformal)

    @property
    def stack(self) -> StackModel:
        return self.conformal.underlying

    def _inputs(self, views):
        return list(views)


class IntersectionModel:
    """Per-view conformal models combined by prediction-set intersection."""

    def __init__(self, per_view):
        if not per_view:
            raise DataError("need at least one per-view model")
        self.per_view = tuple(per_view)

    def pvalue_matrix(self, views) -> np.ndarray:
        """Per-label minimum of the per-view p-values."""
        mats = [cm.pvalue_matrix(v) for cm, v in zip(self.per_view, views)]
        return np.minimum.reduce(mats)

    def mean_scores(self, views) -> np.ndarray:
        scores = [cm.underlying.predict_scores(v) for cm, v in zip(self.per_view, views)]
        return np.mean(scores, axis=0)

    def predict_sets(self, views, epsilon: float) -> list:
        return [PredictionSet.from_pvalues(row, epsilon) for row in self.pvalue_matrix(views)]

    def predict_labels(self, views, epsilon: float) -> np.ndarray:
        mean_scores = self.mean_scores(views)
        per_view_keep = [cm.pvalue_matrix(v) > epsilon for cm, v in zip(self.per_view, views)]
        inter = np.logical_and.reduce(per_view_keep)
        union = np.logical_or.reduce(per_view_keep)
        labels = np.empty(mean_scores.shape[0], dtype=np.int64)
        for i in range(mean_scores.shape[0]):
            candidates = inter[i] if inter[i].any() else (union[i] if union[i].any() else None)
            row = mean_scores[i]
            if candidates is not None:
                row = np.where(candidates, row, -np.inf)
            labels[i] = int(np.argmax(row))
        return labels


def mvi_predict_set(model: IntersectionModel, x_views, epsilon: float) -> PredictionSet:
    """Single-example form: intersection of the per-view prediction sets."""
    return model.predict_sets([np.asarray(x)[None, :] for x in x_views], epsilon)[0]


def mvi_predict_label(model: IntersectionModel, x_views, epsilon: float) -> int:
    return int(model.predict_labels([np.asarray(x)[None, :] for x in x_views], epsilon)[0])


def _view_matrices(ds: MultiViewDataset) -> list:
    return [vm.features for vm in ds.views]


def _classifier(params, k, n_jobs, backend) -> ForestClassifier:
    return ForestClassifier(params=params, n_classes=k, n_jobs=n_jobs, backend=backend)


def train_single(train: MultiViewDataset, calib: MultiViewDataset, view_index: int,
                 params: ForestParams, seed: int, pvalue_mode="inclusive",
                 n_jobs=1, backend=None) -> SingleViewModel:
    clf = _classifier(params, train.k, n_jobs, backend)
    clf.fit(train.views[view_index].features, train.labels, seed=seed)
    table = calibrate(clf, calib.views[view_index].features, calib.labels, pvalue_mode)
    return SingleViewModel(view_index, ConformalModel(underlying=clf, table=table))


def mva_train(train: MultiViewDataset, calib: MultiViewDataset, params: ForestParams,
              seed: int, pvalue_mode="inclusive", n_jobs=1, backend=None) -> AggregationModel:
    clf = _classifier(params, train.k, n_jobs, backend)
    clf.fit(aggregate_features(_view_matrices(train)).features, train.labels, seed=seed)
    table = calibrate(clf, aggregate_features(_view_matrices(calib)).features,
                      calib.labels, pvalue_mode)
    return AggregationModel(ConformalModel(underlying=clf, table=table))


def mvs_train(train: MultiViewDataset, calib: MultiViewDataset, params: ForestParams,
              seed: int, folds: int = 5, pvalue_mode="inclusive",
              n_jobs=1, backend=None) -> StackingModel:
    """Stacking with out-of-fold first-level outputs to avoid overfitting the
    meta-learner, then a full refit of the first-level learners.

    The calibration split never enters any fold; it flows through the final
    pipeline only.
    """
    n, k, n_views = train.n, train.k, len(train.views)
    if folds < 2:
        raise ConfigError("stacking needs at least 2 folds")
    if n < folds:
        raise DataError(f"cannot make {folds} folds from {n} training rows")

    perm = spawn_rng(seed, _FOLD_PARTITION).permutation(n)
    fold_parts = np.array_split(perm, folds)

    oof_scores = [np.zeros((n, k), dtype=np.float64) for _ in range(n_views)]
    for f, hold in enumerate(fold_parts):
        rest = np.setdiff1d(perm, hold)
        for v in range(n_views):
            X = train.views[v].features
            clf = _classifier(params, k, n_jobs, backend)
            clf.fit(X[rest], train.labels[rest], seed=child_seed(seed, _FOLD_LEARNER, f, v))
            oof_scores[v][hold] = clf.predict_scores(X[hold])
    oof_preds = [argmax_labels(s) for s in oof_scores]

    dropped_class = k - 1
    meta_X = mvs_build_meta_features(oof_preds, oof_scores, k, dropped_class)
    meta = _classifier(params, k, n_jobs, backend)
    meta.fit(meta_X, train.labels, seed=child_seed(seed, _META_LEARNER))

    first_level = []
    for v in range(n_views):
        clf = _classifier(params, k, n_jobs, backend)
        clf.fit(train.views[v].features, train.labels, seed=child_seed(seed, _REFIT_LEARNER, v))
        first_level.append(clf)

    stack = StackModel(first_level=tuple(first_level), meta=meta,
                       dropped_class=dropped_class, k=k, n_views=n_views)
    table = calibrate(stack, _view_matrices(calib), calib.labels, pvalue_mode)
    return StackingModel(ConformalModel(underlying=stack, table=table))


def mvi_train(train: MultiViewDataset, calib: MultiViewDataset, params: ForestParams,
              seed: int, pvalue_mode="inclusive", n_jobs=1, backend=None) -> IntersectionModel:
    """One conformal model per view, all calibrated on the same calibration rows."""
    per_view = []
    for v in range(len(train.views)):
        clf = _classifier(params, train.k, n_jobs, backend)
        clf.fit(train.views[v].features, train.labels, seed=child_seed(seed, _REFIT_LEARNER, v))
        table = calibrate(clf, calib.views[v].features, calib.labels, pvalue_mode)
        per_view.append(ConformalModel(underlying=clf, table=table))
    return IntersectionModel(per_view)


def parse_model_name(name: str, view_names) -> tuple:
    """Validate a model name -> ("single", view_index) or (kind, None)."""
    if name in ("mv-a", "mv-s", "mv-i"):
        return name, None
    if name.startswith("single:"):
        view = name.split(":", 1)[1]
        if view not in view_names:
            raise ConfigError(f"unknown view {view!r} in model {name!r}; have {list(view_names)}")
        return "single", list(view_names).index(view)
    raise ConfigError(f"unknown model name {name!r} (expected mv-a, mv-s, mv-i, or single:<view>)")


def train_model(name: str, train: MultiViewDataset, calib: MultiViewDataset,
                params: ForestParams, seed: int, folds: int = 5,
                pvalue_mode="inclusive", n_jobs=1, backend=None):
    kind, view_index = parse_model_name(name, train.view_names)
    common = dict(pvalue_mode=pvalue_mode, n_jobs=n_jobs, backend=backend)
    if kind == "single":
        return train_single(train, calib, view_index, params, seed, **common)
    if kind == "mv-a":
        return mva_train(train, calib, params, seed, **common)
    if kind == "mv-s":
        return mvs_train(train, calib, params, seed, folds=folds, **common)
    return mvi_train(train, calib, params, seed, **common)
