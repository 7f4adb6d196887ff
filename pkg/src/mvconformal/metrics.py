"""Classical metrics, prediction-set quality measures, diagnostic matrices,
and Welch's t-test.

Set measures follow the standard catalogue for set-valued classifiers:
coverage, mean set size (N), percentage of empty sets, multiple-element rate
(M), fuzziness (F: sum of p-values excluding the largest), Jaccard similarity
to the singleton truth, and the observed variants computed against the true
label (OM, OF, OU, OE). Classical metrics are macro-averaged; conventions for
degenerate classes are documented on ``classical_metrics``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betainc

from .conformal import PredictionSet
from .errors import DataError

CLASSICAL_METRICS = ("accuracy", "sensitivity", "specificity", "f1")
CONFORMAL_MEASURES = (
    "coverage", "jaccard", "setsize", "pctempty", "m_criterion",
    "f_criterion", "om", "of", "ou", "oe",
)
ALL_METRICS = CLASSICAL_METRICS + CONFORMAL_MEASURES


@dataclass(frozen=True)
class EvaluatedExample:
    true_label: int
    point_prediction: int
    set: PredictionSet


@dataclass(frozen=True)
class ConformalReport:
    accuracy: float
    sensitivity: float
    specificity: float
    f1: float
    coverage: float
    jaccard: float
    setsize: float
    pctempty: float
    m_criterion: float
    f_criterion: float
    om: float
    of: float
    ou: float
    oe: float

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in ALL_METRICS}


def _require(examples):
    examples = list(examples)
    if not examples:
        raise DataError("no evaluated examples")
    return examples


def classical_metrics(examples, n_classes: int):
    """(accuracy, sensitivity, specificity, f1), macro-averaged over classes.

    Per-class recall and F1 are 0 when the class never occurs in the truth;
    specificity is 1 when a class has no negatives (vacuous). Sensitivity is
    macro recall, specificity the macro one-vs-rest true-negative rate.
    """
    examples = _require(examples)
    truth = np.array([e.true_label for e in examples])
    pred = np.array([e.point_prediction for e in examples])
    n = len(examples)
    accuracy = float(np.mean(truth == pred))
    recalls, specs, f1s = [], [], []
    for c in range(n_classes):
        tp = int(np.sum((truth == c) & (pred == c)))
        fn = int(np.sum((truth == c) & (pred != c)))
        fp = int(np.sum((truth != c) & (pred == c)))
        tn = n - tp - fn - fp
        recalls.append(tp / (tp + fn) if tp + fn else 0.0)
        specs.append(tn / (tn + fp) if tn + fp else 1.0)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = recalls[-1]
        f1s.append(2 * precision * recall / (precision + recall) if precision + recall else 0.0)
    return accuracy, float(np.mean(recalls)), float(np.mean(specs)), float(np.mean(f1s))


def coverage(examples) -> float:
    examples = _require(examples)
    return float(np.mean([e.true_label in e.set for e in examples]))


def setsize_n_criterion(examples) -> float:
    examples = _require(examples)
    return float(np.mean([e.set.size for e in examples]))


def pct_empty(examples) -> float:
    """Fraction of empty sets (tables report it as a percentage)."""
    examples = _require(examples)
    return float(np.mean([e.set.size == 0 for e in examples]))


def m_criterion(examples) -> float:
    examples = _require(examples)
    return float(np.mean([e.set.size > 1 for e in examples]))


def f_criterion(examples) -> float:
    """Mean fuzziness: sum of the p-values excluding the largest one."""
    examples = _require(examples)
    return float(np.mean([e.set.pvalues.sum() - e.set.pvalues.max() for e in examples]))


def jaccard(examples) -> float:
    """Mean |set ∩ {truth}| / |set ∪ {truth}|; the empty set scores 0."""
    examples = _require(examples)
    vals = []
    for e in examples:
        hit = e.true_label in e.set
        union = e.set.size + (0 if hit else 1)
        vals.append((1.0 if hit else 0.0) / union if union else 0.0)
    return float(np.mean(vals))


def om_criterion(examples) -> float:
    """Fraction of sets containing at least one false label."""
    examples = _require(examples)
    return float(np.mean([
        e.set.size - (1 if e.true_label in e.set else 0) > 0 for e in examples
    ]))


def of_criterion(examples) -> float:
    """Mean sum of the false labels' p-values (observed fuzziness)."""
    examples = _require(examples)
    return float(np.mean([
        e.set.pvalues.sum() - e.set.pvalues[e.true_label] for e in examples
    ]))


def ou_criterion(examples) -> float:
    """Mean largest false-label p-value (observed unconfidence)."""
    examples = _require(examples)
    vals = []
    for e in examples:
        if e.set.pvalues.shape[0] < 2:
            raise DataError("observed unconfidence needs at least 2 classes")
        mask = np.ones(e.set.pvalues.shape[0], dtype=bool)
        mask[e.true_label] = False
        vals.append(e.set.pvalues[mask].max())
    return float(np.mean(vals))


def oe_criterion(examples) -> float:
    """Mean number of false labels in the sets (observed excess)."""
    examples = _require(examples)
    return float(np.mean([
        e.set.size - (1 if e.true_label in e.set else 0) for e in examples
    ]))


def conformal_report(examples, n_classes: int) -> ConformalReport:
    """All 14 metrics for one (model, trial) evaluation.

    Verifies two structural identities on every call: OE = setsize - coverage
    (to 1e-12) and the exact count partition empty/singleton/multiple.
    """
    examples = _require(examples)
    acc, sens, spec, f1 = classical_metrics(examples, n_classes)
    report = ConformalReport(
        accuracy=acc, sensitivity=sens, specificity=spec, f1=f1,
        coverage=coverage(examples), jaccard=jaccard(examples),
        setsize=setsize_n_criterion(examples), pctempty=pct_empty(examples),
        m_criterion=m_criterion(examples), f_criterion=f_criterion(examples),
        om=om_criterion(examples), of=of_criterion(examples),
        ou=ou_criterion(examples), oe=oe_criterion(examples),
    )
    if abs(report.oe - (report.setsize - report.coverage)) > 1e-12:
        raise AssertionError("observed excess must equal setsize - coverage")
    sizes = [e.set.size for e in examples]
    n_empty = sum(s == 0 for s in sizes)
    n_single = sum(s == 1 for s in sizes)
    n_multi = sum(s > 1 for s in sizes)
    if n_empty + n_single + n_multi != len(examples):
        raise AssertionError("set-size partition must cover all examples")
    return report


def cooccurrence_counts(examples, n_classes: int) -> np.ndarray:
    """count[i, j] = prediction sets containing both i and j (diagonal zero)."""
    examples = _require(examples)
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    for e in examples:
        members = sorted(e.set.retained)
        for a in members:
            for b in members:
                if a != b:
                    counts[a, b] += 1
    return counts


def normalize_columns_zero_diag(counts) -> np.ndarray:
    """Zero the diagonal, then scale each column to sum 1 (all-zero columns stay)."""
    mat = np.asarray(counts, dtype=np.float64).copy()
    np.fill_diagonal(mat, 0.0)
    sums = mat.sum(axis=0)
    nonzero = sums > 0
    mat[:, nonzero] /= sums[nonzero]
    return mat


def cooccurrence_matrix(examples, n_classes: int) -> np.ndarray:
    return normalize_columns_zero_diag(cooccurrence_counts(examples, n_classes))


def confusion_counts(examples, n_classes: int) -> np.ndarray:
    """Point-prediction confusion counts, rows = predicted, columns = true."""
    examples = _require(examples)
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    for e in examples:
        counts[e.point_prediction, e.true_label] += 1
    return counts


def zero_diag_confusion(examples, n_classes: int) -> np.ndarray:
    """Column-normalized confusion with zeroed diagonal: given the true class,
    how it was confused (comparable to the co-occurrence matrix)."""
    return normalize_columns_zero_diag(confusion_counts(examples, n_classes))


def welch_t_test(sample_a, sample_b):
    """Two-sided Welch (unequal variance) t-test -> (t_stat, p_value).

    Degrees of freedom by Welch-Satterthwaite; the p-value comes from the
    regularized incomplete beta function. Both samples need size >= 2; two
    zero-variance samples give p = 1 when the means agree, else p = 0.
    """
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise DataError("each sample needs at least 2 observations")
    na, nb = a.size, b.size
    va, vb = a.var(ddof=1), b.var(ddof=1)
    diff = a.mean() - b.mean()
    if va == 0.0 and vb == 0.0:
        return (0.0, 1.0) if diff == 0.0 else (np.inf if diff > 0 else -np.inf, 0.0)
    se_a, se_b = va / na, vb / nb
    t = diff / np.sqrt(se_a + se_b)
    df = (se_a + se_b) ** 2 / (se_a**2 / (na - 1) + se_b**2 / (nb - 1))
    p = float(betainc(df / 2.0, 0.5, df / (df + t * t)))
    return float(t), p
