"""Command-line entry points: synth, extract, run, report.

Exit codes: 0 success, 1 config error (bad flags/config files), 2 data error.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from .data import write_dataset, write_view_csv
from .errors import ConfigError, DataError
from .features import (
    ACCEL_FEATURE_NAMES,
    SKELETON_FEATURE_NAMES,
    extract_accel_windows,
    read_accel_csv,
    read_skeleton_csv,
    skeleton_features,
)
from .harness import load_config, run_experiment, with_output_dir
from .report import emit_reports, rebuild_run
from .synth import SynthConfig, gen_multiview


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _int_list(text: str) -> list:
    try:
        return [int(part) for part in text.split(",") if part]
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list:
    try:
        return [float(part) for part in text.split(",") if part]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> _Parser:
    parser = _Parser(prog="mvconformal",
                     description="Multi-view conformal prediction toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic multi-view dataset")
    p_synth.add_argument("--out", required=True, help="output directory for CSVs + manifest")
    p_synth.add_argument("--n", type=int, default=2000, help="number of examples")
    p_synth.add_argument("--classes", type=int, default=3)
    p_synth.add_argument("--dims", type=_int_list, default=[6, 6],
                         help="per-view dimensionality, e.g. 6,6")
    p_synth.add_argument("--separation", type=_float_list, default=[3.0, 3.0],
                         help="per-view class-mean spacing in noise-sd units")
    p_synth.add_argument("--noise-sd", type=float, default=1.0)
    p_synth.add_argument("--seed", type=int, default=0)

    p_extract = sub.add_parser("extract", help="raw signal CSV -> feature CSV")
    p_extract.add_argument("kind", choices=("accel", "skeleton"))
    p_extract.add_argument("--input", required=True, help="raw signal CSV")
    p_extract.add_argument("--label", required=True, help="class label for the extracted rows")
    p_extract.add_argument("--out", required=True, help="feature CSV (id,label,f1..fd)")
    p_extract.add_argument("--window", type=int, default=93,
                           help="accel window length in samples")
    p_extract.add_argument("--id-prefix", default=None,
                           help="row id prefix (default: input file stem)")
    p_extract.add_argument("--append", action="store_true",
                           help="append rows to an existing feature CSV")

    p_run = sub.add_parser("run", help="run the experiment protocol from a config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--output-dir", default=None, help="override the config output_dir")

    p_report = sub.add_parser("report", help="rebuild summaries and figures from a run directory")
    p_report.add_argument("--from", dest="from_dir", required=True)
    return parser


def _cmd_synth(args) -> int:
    cfg = SynthConfig(
        n_examples=args.n, k_classes=args.classes, n_views=len(args.dims),
        dims=tuple(args.dims), separation=tuple(args.separation),
        noise_sd=args.noise_sd, seed=args.seed,
    )
    manifest = write_dataset(gen_multiview(cfg), args.out)
    print(manifest)
    return 0


def _append_rows(path, ids, label, features, feature_names) -> None:
    exists = os.path.exists(path)
    if exists:
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().rstrip("\n").split(",")
        if len(header) != 2 + len(feature_names):
            raise DataError(f"{path}: existing file has {len(header)} columns, "
                            f"expected {2 + len(feature_names)}")
        with open(path, "a", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            for rid, row in zip(ids, features):
                writer.writerow([rid, label] + [repr(float(v)) for v in row])
    else:
        write_view_csv(path, ids, [label] * len(ids), features)


def _cmd_extract(args) -> int:
    stem = os.path.splitext(os.path.basename(args.input))[0]
    prefix = args.id_prefix if args.id_prefix is not None else stem
    if args.kind == "accel":
        feats = extract_accel_windows(read_accel_csv(args.input), args.window)
        if feats.shape[0] == 0:
            raise DataError(f"{args.input}: no full window of {args.window} samples")
        ids = [f"{prefix}_{i:05d}" for i in range(feats.shape[0])]
        names = ACCEL_FEATURE_NAMES
    else:
        feats = skeleton_features(read_skeleton_csv(args.input))[None, :]
        ids = [prefix]
        names = SKELETON_FEATURE_NAMES
    if args.append:
        _append_rows(args.out, ids, args.label, feats, names)
    else:
        write_view_csv(args.out, ids, [args.label] * len(ids), feats)
    print(f"{args.out}: wrote {len(ids)} row(s)")
    return 0


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.output_dir is not None:
        cfg = with_output_dir(cfg, args.output_dir)
    if cfg.output_dir is None:
        raise ConfigError("run needs an output_dir (config key or --output-dir)")
    run = run_experiment(cfg)
    emit_reports(run, cfg.output_dir)
    print(os.path.join(cfg.output_dir, "results.csv"))
    return 0


def _cmd_report(args) -> int:
    run = rebuild_run(args.from_dir)
    emit_reports(run, args.from_dir)
    print(os.path.join(args.from_dir, "summary.txt"))
    return 0


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        handler = {"synth": _cmd_synth, "extract": _cmd_extract,
                   "run": _cmd_run, "report": _cmd_report}[args.command]
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except np.linalg.LinAlgError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
