"""Signal-to-feature conversion: windowing, tri-axial accelerometer features,
and skeleton joint-distance features.

Accelerometer feature order (16, fixed so CSVs round-trip deterministically):
mean_x, mean_y, mean_z, sd_x, sd_y, sd_z, max_x, max_y, max_z,
corr_xy, corr_xz, corr_yz, mean_magnitude, sd_magnitude, auc, meandif.
Standard deviations are population (divisor T); the Pearson correlation of a
zero-variance axis is defined as 0 to keep feature matrices finite.

Skeleton features (90): per-frame Euclidean distance from the spine joint
(index 0) to each of the 30 other joints, then per joint the mean, max, and
min over frames, laid out as the three 30-wide blocks in that order.
"""

from __future__ import annotations

import csv

import numpy as np

from .errors import DataError

ACCEL_FEATURE_NAMES = (
    "mean_x", "mean_y", "mean_z", "sd_x", "sd_y", "sd_z",
    "max_x", "max_y", "max_z", "corr_xy", "corr_xz", "corr_yz",
    "mean_magnitude", "sd_magnitude", "auc", "meandif",
)
N_SKELETON_JOINTS = 31
SKELETON_FEATURE_NAMES = tuple(
    f"{stat}_j{j:02d}" for stat in ("mean", "max", "min") for j in range(1, N_SKELETON_JOINTS)
)


def window_signal(samples, window_len: int) -> list:
    """Split rows into consecutive disjoint windows of exactly window_len rows.

    The trailing partial window is discarded; a signal shorter than one
    window yields an empty list.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if window_len < 2:
        raise DataError("window_len must be at least 2")
    n_windows = samples.shape[0] // window_len
    return [samples[i * window_len:(i + 1) * window_len] for i in range(n_windows)]


def magnitude(ax, ay, az, t: int) -> float:
    """Euclidean norm of the acceleration vector at sample t."""
    ax, ay, az = (np.asarray(a, dtype=np.float64) for a in (ax, ay, az))
    if not 0 <= t < ax.shape[0]:
        raise DataError(f"sample index {t} out of range")
    return float(np.sqrt(ax[t] ** 2 + ay[t] ** 2 + az[t] ** 2))


def _corr(a, b) -> float:
    sa, sb = a.std(), b.std()
    if sa == 0.0 or sb == 0.0:
        return 0.0
    return float(((a - a.mean()) * (b - b.mean())).mean() / (sa * sb))


def accel_features(ax, ay, az) -> np.ndarray:
    """The 16 windowed accelerometer features, in ACCEL_FEATURE_NAMES order.

    auc sums the per-sample magnitudes over the window; meandif averages the
    magnitude differences between consecutive samples (needs T >= 2).
    """
    ax, ay, az = (np.asarray(a, dtype=np.float64) for a in (ax, ay, az))
    if not (ax.shape == ay.shape == az.shape) or ax.ndim != 1:
        raise DataError("axes must be 1-D arrays of equal length")
    size = ax.shape[0]
    if size < 2:
        raise DataError("window needs at least 2 samples")
    mag = np.sqrt(ax**2 + ay**2 + az**2)
    meandif = float(np.diff(mag).sum() / (size - 1))
    return np.array([
        ax.mean(), ay.mean(), az.mean(),
        ax.std(), ay.std(), az.std(),
        ax.max(), ay.max(), az.max(),
        _corr(ax, ay), _corr(ax, az), _corr(ay, az),
        mag.mean(), mag.std(), mag.sum(), meandif,
    ], dtype=np.float64)


def skeleton_features(frames) -> np.ndarray:
    """Joint-distance summary features of a (F, 31, 3) joint-position sequence."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 3 or frames.shape[1] != N_SKELETON_JOINTS or frames.shape[2] != 3:
        raise DataError(f"expected frames shaped (F, {N_SKELETON_JOINTS}, 3), got {frames.shape}")
    if frames.shape[0] < 1:
        raise DataError("need at least one frame")
    dists = np.linalg.norm(frames[:, 1:, :] - frames[:, :1, :], axis=2)  # (F, 30)
    return np.concatenate([dists.mean(axis=0), dists.max(axis=0), dists.min(axis=0)])


def extract_accel_windows(signal, window_len: int) -> np.ndarray:
    """Feature rows for every full window of a (T, 3) accelerometer signal."""
    rows = [accel_features(w[:, 0], w[:, 1], w[:, 2]) for w in window_signal(signal, window_len)]
    return np.array(rows, dtype=np.float64).reshape(len(rows), len(ACCEL_FEATURE_NAMES))


def _read_numeric_csv(path, expect_cols, what):
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot read {what} CSV {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) != expect_cols:
            raise DataError(f"{what} CSV {path}: expected {expect_cols} columns")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append([float(cell) for cell in row])
            except ValueError:
                raise DataError(f"{what} CSV {path}: non-numeric cell at line {lineno}") from None
        if not rows:
            raise DataError(f"{what} CSV {path}: no data rows")
        return np.array(rows, dtype=np.float64)


def read_accel_csv(path) -> np.ndarray:
    """Read a raw signal CSV with header t,ax,ay,az -> (T, 3) samples."""
    return _read_numeric_csv(path, 4, "accelerometer")[:, 1:]


def read_skeleton_csv(path) -> np.ndarray:
    """Read a skeleton frame CSV (frame index + 31 joints x 3) -> (F, 31, 3)."""
    data = _read_numeric_csv(path, 1 + N_SKELETON_JOINTS * 3, "skeleton")
    return data[:, 1:].reshape(-1, N_SKELETON_JOINTS, 3)
