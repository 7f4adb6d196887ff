"""Result emission: CSV tables, per-model diagnostics, and static SVG figures.

Everything written here is reconstructible: per-trial prediction-set dumps
carry retained labels and p-values, so `report --from <dir>` can rebuild the
aggregate matrices, histograms, summaries, and figures from disk.
"""

from __future__ import annotations

import glob
import os

import numpy as np

from .config import load_structured
from .errors import DataError
from .harness import ResultsTable, RunResult, hypothesis_tests, summarize
from .metrics import normalize_columns_zero_diag


def safe_model_dir(name: str) -> str:
    return name.replace(":", "_").replace("/", "_")


def _fmt(value: float) -> str:
    return repr(float(value))


def write_trial_dump(output_dir, trial: int, model: str, examples, label_names) -> str:
    """Per-trial prediction sets (one row per test example) plus the trial's
    normalized diagnostic matrices."""
    from .metrics import cooccurrence_matrix, zero_diag_confusion

    dump_dir = os.path.join(output_dir, "trials", f"trial_{trial:03d}", safe_model_dir(model))
    os.makedirs(dump_dir, exist_ok=True)
    k = len(label_names)
    path = os.path.join(dump_dir, "prediction_sets.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        pcols = ",".join(f"p_{name}" for name in label_names)
        fh.write(f"row,true_label,point_prediction,set,{pcols}\n")
        for i, e in enumerate(examples):
            members = "|".join(label_names[j] for j in sorted(e.set.retained))
            pvals = ",".join(_fmt(v) for v in e.set.pvalues)
            fh.write(f"{i},{label_names[e.true_label]},{label_names[e.point_prediction]},"
                     f"{members},{pvals}\n")
    write_matrix_csv(os.path.join(dump_dir, "cooccurrence.csv"),
                     cooccurrence_matrix(examples, k), label_names)
    write_matrix_csv(os.path.join(dump_dir, "confusion_zerodiag.csv"),
                     zero_diag_confusion(examples, k), label_names)
    return path


def write_matrix_csv(path, matrix, label_names) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("label," + ",".join(label_names) + "\n")
        for name, row in zip(label_names, np.asarray(matrix)):
            fh.write(name + "," + ",".join(_fmt(v) for v in row) + "\n")


def read_matrix_csv(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        fh.readline()
        return np.array([[float(c) for c in line.rstrip("\n").split(",")[1:]] for line in fh])


def _write_run_meta(run: RunResult, output_dir) -> None:
    lines = [
        f"epsilon = {_fmt(run.epsilon)}",
        f"n_trials = {run.table.n_trials}",
        "models = [" + ", ".join(f'"{m}"' for m in run.table.models) + "]",
        "labels = [" + ", ".join(f'"{name}"' for name in run.label_names) + "]",
    ]
    with open(os.path.join(output_dir, "run.toml"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def emit_reports(run: RunResult, output_dir) -> list:
    """Write results.csv, summary.csv/.txt, tests.csv, per-model histogram and
    matrix CSVs, SVG heatmaps, and the F1-vs-setsize scatter. Returns paths."""
    os.makedirs(output_dir, exist_ok=True)
    table = run.table
    written = []

    def note(path):
        written.append(path)
        return path

    table.to_csv(note(os.path.join(output_dir, "results.csv")))
    _write_run_meta(run, output_dir)

    summary = summarize(table)
    with open(note(os.path.join(output_dir, "summary.csv")), "w", encoding="utf-8") as fh:
        fh.write("model,metric,mean,sd\n")
        for model, metric, mean, sd in summary:
            fh.write(f"{model},{metric},{_fmt(mean)},{_fmt(sd)}\n")
    with open(note(os.path.join(output_dir, "summary.txt")), "w", encoding="utf-8") as fh:
        fh.write(format_summary_table(table))

    try:
        tests = hypothesis_tests(table)
    except Exception:
        tests = None
    if tests is not None:
        with open(note(os.path.join(output_dir, "tests.csv")), "w", encoding="utf-8") as fh:
            fh.write("metric,t_stat,p_value,direction\n")
            for metric, t, p, direction in tests:
                fh.write(f"{metric},{_fmt(t)},{_fmt(p)},{direction}\n")

    for model in table.models:
        model_dir = os.path.join(output_dir, "models", safe_model_dir(model))
        os.makedirs(model_dir, exist_ok=True)
        hist = run.histograms[model]
        k_plus_1 = hist.shape[1]
        with open(note(os.path.join(model_dir, "setsize_histogram.csv")), "w", encoding="utf-8") as fh:
            fh.write("trial," + ",".join(f"size_{s}" for s in range(k_plus_1)) + "\n")
            for trial in range(hist.shape[0]):
                fh.write(str(trial) + "," + ",".join(str(c) for c in hist[trial]) + "\n")
        for kind in ("cooccurrence", "confusion"):
            matrix = normalize_columns_zero_diag(run.matrix_counts[model][kind])
            stem = "cooccurrence" if kind == "cooccurrence" else "confusion_zerodiag"
            write_matrix_csv(note(os.path.join(model_dir, f"{stem}.csv")), matrix, run.label_names)
            title = f"{model}: {'co-occurrence' if kind == 'cooccurrence' else 'zero-diagonal confusion'}"
            with open(note(os.path.join(model_dir, f"{stem}.svg")), "w", encoding="utf-8") as fh:
                fh.write(svg_heatmap(matrix, run.label_names, title))

    points = []
    for model in table.models:
        setsize = table.values(model, "setsize").mean()
        f1 = table.values(model, "f1").mean()
        points.append((float(setsize), float(f1), model))
    with open(note(os.path.join(output_dir, "scatter_f1_setsize.svg")), "w", encoding="utf-8") as fh:
        fh.write(svg_scatter(points, "mean set size", "mean F1", "F1 vs set size per model"))
    return written


def format_summary_table(table: ResultsTable) -> str:
    """The human-readable table: metric rows, model columns, mean±sd at 2 decimals."""
    summary = {(m, met): (mean, sd) for m, met, mean, sd in summarize(table)}
    headers = ["metric"] + list(table.models)
    body = []
    for metric in table.metrics:
        row = [metric]
        for model in table.models:
            mean, sd = summary[(model, metric)]
            row.append(f"{mean:.2f}±{sd:.2f}")
        body.append(row)
    widths = [max(len(r[i]) for r in [headers] + body) for i in range(len(headers))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
    for row in body:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)))
    return "\n".join(lines) + "\n"


def rebuild_run(output_dir) -> RunResult:
    """Reconstruct a RunResult from results.csv + per-trial dumps."""
    meta_path = os.path.join(output_dir, "run.toml")
    results_path = os.path.join(output_dir, "results.csv")
    if not (os.path.exists(meta_path) and os.path.exists(results_path)):
        raise DataError(f"{output_dir}: missing run.toml or results.csv")
    meta = load_structured(meta_path)
    labels = tuple(meta["labels"])
    index = {name: i for i, name in enumerate(labels)}
    k = len(labels)
    table = ResultsTable.from_csv(results_path)
    table.models = tuple(meta["models"])
    n_trials = int(meta["n_trials"])

    matrix_counts = {
        m: {"cooccurrence": np.zeros((k, k), dtype=np.int64),
            "confusion": np.zeros((k, k), dtype=np.int64)}
        for m in table.models
    }
    histograms = {m: np.zeros((n_trials, k + 1), dtype=np.int64) for m in table.models}
    for model in table.models:
        pattern = os.path.join(output_dir, "trials", "trial_*", safe_model_dir(model),
                               "prediction_sets.csv")
        for path in sorted(glob.glob(pattern)):
            trial = int(os.path.basename(os.path.dirname(os.path.dirname(path))).split("_")[1])
            with open(path, "r", encoding="utf-8") as fh:
                fh.readline()
                for line in fh:
                    cells = line.rstrip("\n").split(",")
                    true_name, pred_name, members = cells[1], cells[2], cells[3]
                    matrix_counts[model]["confusion"][index[pred_name], index[true_name]] += 1
                    retained = [index[m] for m in members.split("|")] if members else []
                    histograms[model][trial, len(retained)] += 1
                    for a in retained:
                        for b in retained:
                            if a != b:
                                matrix_counts[model]["cooccurrence"][a, b] += 1
    return RunResult(table=table, matrix_counts=matrix_counts, histograms=histograms,
                     label_names=labels, epsilon=float(meta["epsilon"]))


def _heat_color(value: float) -> str:
    v = min(max(float(value), 0.0), 1.0)
    r = round(255 + (34 - 255) * v)
    g = round(255 + (102 - 255) * v)
    b = round(255 + (170 - 255) * v)
    return f"#{r:02x}{g:02x}{b:02x}"


def svg_heatmap(matrix, labels, title: str) -> str:
    """Self-contained SVG heatmap; cell text shows the normalized value."""
    matrix = np.asarray(matrix, dtype=np.float64)
    k = matrix.shape[0]
    cell = 46
    left = 12 + 7 * max(len(str(l)) for l in labels)
    top = 30 + 7 * max(len(str(l)) for l in labels)
    width = left + k * cell + 16
    height = top + k * cell + 16
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="10">',
        f'<text x="{width / 2:.1f}" y="14" text-anchor="middle" font-size="12">{title}</text>',
    ]
    for j, name in enumerate(labels):
        x = left + j * cell + cell / 2
        parts.append(f'<text x="{x:.1f}" y="{top - 6}" text-anchor="start" '
                     f'transform="rotate(-60 {x:.1f} {top - 6})">{name}</text>')
    for i, name in enumerate(labels):
        y = top + i * cell + cell / 2 + 3
        parts.append(f'<text x="{left - 6}" y="{y:.1f}" text-anchor="end">{name}</text>')
    for i in range(k):
        for j in range(k):
            x, y = left + j * cell, top + i * cell
            value = matrix[i, j]
            parts.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                         f'fill="{_heat_color(value)}" stroke="#cccccc"/>')
            if value >= 0.005:
                text_fill = "#ffffff" if value > 0.55 else "#222222"
                parts.append(f'<text x="{x + cell / 2}" y="{y + cell / 2 + 3}" '
                             f'text-anchor="middle" fill="{text_fill}">{value:.2f}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    step = (hi - lo) / (n - 1)
    return [lo + i * step for i in range(n)]


def svg_scatter(points, xlabel: str, ylabel: str, title: str) -> str:
    """Labeled scatter of (x, y, name) points with padded axes."""
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    pad_x = max((max(xs) - min(xs)) * 0.15, 0.05)
    pad_y = max((max(ys) - min(ys)) * 0.15, 0.02)
    x_lo, x_hi = min(xs) - pad_x, max(xs) + pad_x
    y_lo, y_hi = min(ys) - pad_y, max(ys) + pad_y
    width, height, left, bottom, top = 480, 360, 64, 48, 34
    plot_w, plot_h = width - left - 100, height - bottom - top

    def sx(x):
        return left + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(y):
        return top + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="10">',
        f'<text x="{width / 2}" y="16" text-anchor="middle" font-size="12">{title}</text>',
        f'<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="#444444"/>',
        f'<text x="{left + plot_w / 2}" y="{height - 10}" text-anchor="middle">{xlabel}</text>',
        f'<text x="16" y="{top + plot_h / 2}" text-anchor="middle" '
        f'transform="rotate(-90 16 {top + plot_h / 2})">{ylabel}</text>',
    ]
    for tick in _ticks(x_lo, x_hi):
        x = sx(tick)
        parts.append(f'<line x1="{x:.1f}" y1="{top + plot_h}" x2="{x:.1f}" '
                     f'y2="{top + plot_h + 4}" stroke="#444444"/>')
        parts.append(f'<text x="{x:.1f}" y="{top + plot_h + 16}" text-anchor="middle">{tick:.2f}</text>')
    for tick in _ticks(y_lo, y_hi):
        y = sy(tick)
        parts.append(f'<line x1="{left - 4}" y1="{y:.1f}" x2="{left}" y2="{y:.1f}" stroke="#444444"/>')
        parts.append(f'<text x="{left - 7}" y="{y + 3:.1f}" text-anchor="end">{tick:.2f}</text>')
    for x, y, name in points:
        parts.append(f'<circle cx="{sx(x):.1f}" cy="{sy(y):.1f}" r="4" fill="#2266aa"/>')
        parts.append(f'<text x="{sx(x) + 7:.1f}" y="{sy(y) + 3:.1f}">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
