"""Split-conformal wrapper: LAC nonconformity, calibration table, p-values, sets.

Any classifier exposing ``predict_scores`` can be wrapped. Calibration stores
the sorted nonconformity scores ``1 - score_of_true_label`` of a held-out
split; at prediction time each candidate label's p-value is the fraction of
calibration scores at least as nonconforming, and the label is kept when that
p-value exceeds the chosen error rate.

Two p-value conventions are supported. ``inclusive`` (default) counts the
test point itself, (|{a_i >= a}| + 1) / (n + 1), which honors the >= 1 - eps
coverage guarantee. ``paper_verbatim`` omits the +1. Ties count toward the
numerator; no randomized smoothing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError

PVALUE_MODES = ("inclusive", "paper_verbatim")


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def lac_nonconformity(score_row, true_label: int) -> float:
    """One minus the score of the given label."""
    row = np.asarray(score_row, dtype=np.float64)
    if not 0 <= true_label < row.shape[0]:
        raise DataError(f"label {true_label} out of range for {row.shape[0]} classes")
    return float(1.0 - row[true_label])


def lac_nonconformity_all(scores) -> np.ndarray:
    """Candidate nonconformity for every label: 1 - scores, elementwise."""
    return 1.0 - np.asarray(scores, dtype=np.float64)


@dataclass(frozen=True)
class CalibrationTable:
    """Sorted calibration nonconformity scores; the engine of p-values."""

    alphas: np.ndarray
    n_calib: int
    pvalue_mode: str = "inclusive"

    def __post_init__(self):
        alphas = np.sort(np.asarray(self.alphas, dtype=np.float64))
        if alphas.size < 1:
            raise DataError("calibration table needs at least one score")
        if self.pvalue_mode not in PVALUE_MODES:
            raise ConfigError(f"pvalue_mode must be one of {PVALUE_MODES}")
        object.__setattr__(self, "alphas", _frozen(alphas))
        object.__setattr__(self, "n_calib", int(alphas.size))


def calibration_table_from_scores(scores, y, pvalue_mode="inclusive") -> CalibrationTable:
    scores = np.asarray(scores, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if scores.shape[0] != y.shape[0] or scores.shape[0] == 0:
        raise DataError("empty calibration set or score/label mismatch")
    alphas = 1.0 - scores[np.arange(len(y)), y]
    return CalibrationTable(alphas=alphas, n_calib=len(y), pvalue_mode=pvalue_mode)


def calibrate(classifier, X, y, pvalue_mode="inclusive") -> CalibrationTable:
    """Score a held-out calibration split (disjoint from training) into a table."""
    return calibration_table_from_scores(classifier.predict_scores(X), y, pvalue_mode)


def p_value(alpha_new: float, table: CalibrationTable) -> float:
    """Fraction of calibration scores >= alpha_new (binary search on the table)."""
    count = table.n_calib - int(np.searchsorted(table.alphas, alpha_new, side="left"))
    if table.pvalue_mode == "inclusive":
        count += 1
    return count / (table.n_calib + 1)


def p_values(alphas_new, table: CalibrationTable) -> np.ndarray:
    """Vectorized p_value over an array of candidate nonconformity scores."""
    alphas_new = np.asarray(alphas_new, dtype=np.float64)
    counts = table.n_calib - np.searchsorted(table.alphas, alphas_new, side="left")
    if table.pvalue_mode == "inclusive":
        counts = counts + 1
    return counts / (table.n_calib + 1)


@dataclass(frozen=True)
class PredictionSet:
    """Retained labels for one example, with the full per-label p-value vector."""

    retained: frozenset
    pvalues: np.ndarray
    epsilon: float

    @classmethod
    def from_pvalues(cls, pvalues, epsilon: float) -> "PredictionSet":
        if not 0.0 < epsilon < 1.0:
            raise ConfigError(f"epsilon must be in (0,1), got {epsilon}")
        pvalues = np.asarray(pvalues, dtype=np.float64)
        retained = frozenset(int(i) for i in np.flatnonzero(pvalues > epsilon))
        return cls(retained=retained, pvalues=_frozen(pvalues), epsilon=epsilon)

    @property
    def size(self) -> int:
        return len(self.retained)

    def __contains__(self, label: int) -> bool:
        return int(label) in self.retained


@dataclass(frozen=True)
class ConformalModel:
    """A fitted score-producing classifier plus its calibration table.

    ``underlying`` may consume whatever input representation it was trained
    on (a feature matrix, or a list of view matrices for fused pipelines);
    inputs passed here are handed through unchanged.
    """

    underlying: object
    table: CalibrationTable

    def pvalue_matrix(self, inputs) -> np.ndarray:
        scores = self.underlying.predict_scores(inputs)
        return p_values(lac_nonconformity_all(scores), self.table)

    def predict_sets(self, inputs, epsilon: float) -> list:
        pmat = self.pvalue_matrix(inputs)
        return [PredictionSet.from_pvalues(row, epsilon) for row in pmat]

    def predict_set(self, x, epsilon: float) -> PredictionSet:
        x = np.asarray(x, dtype=np.float64)
        return self.predict_sets(x[None, :], epsilon)[0]


def conformal_fit(classifier, X_train, y_train, X_calib, y_calib, seed=0,
                  pvalue_mode="inclusive") -> ConformalModel:
    """Train then calibrate; the two splits must be disjoint."""
    classifier.fit(X_train, y_train, seed=seed)
    table = calibrate(classifier, X_calib, y_calib, pvalue_mode)
    return ConformalModel(underlying=classifier, table=table)
