"""Experiment orchestration: repeated split/train/calibrate/evaluate trials
over all requested models, with deterministic seeding end to end.

Trial t splits with seed base_seed + t; every model inside a trial derives
its own seed from (trial seed, model name), so results do not depend on the
order trials or models run in, the thread count, or which kernel backend is
active.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np

from .data import MultiViewDataset, SplitSpec, load_multiview, split_dataset
from .errors import ConfigError, DataError
from .config import load_structured
from .forest import ForestParams
from .fusion import parse_model_name, train_model
from .metrics import (
    ALL_METRICS,
    CONFORMAL_MEASURES,
    EvaluatedExample,
    confusion_counts,
    conformal_report,
    cooccurrence_counts,
    welch_t_test,
)
from .seeding import child_seed, name_key
from .synth import SynthConfig, gen_multiview


@dataclass(frozen=True)
class ExperimentConfig:
    manifest: str | None = None
    synth: SynthConfig | None = None
    models: tuple = ()
    epsilon: float = 0.05
    n_trials: int = 15
    train_frac: float = 0.5
    calib_frac: float = 0.25
    test_frac: float = 0.25
    stratify: bool = False
    forest: ForestParams = ForestParams()
    folds: int = 5
    pvalue_mode: str = "inclusive"
    base_seed: int = 0
    n_jobs: int = 1
    output_dir: str | None = "results"

    def __post_init__(self):
        if (self.manifest is None) == (self.synth is None):
            raise ConfigError("exactly one of manifest or [synth] must be given")
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError("epsilon must be in (0,1)")
        if self.n_trials < 1:
            raise ConfigError("n_trials must be at least 1")
        object.__setattr__(self, "models", tuple(self.models))


def config_from_dict(doc: dict, base_dir: str = ".") -> ExperimentConfig:
    doc = dict(doc)
    kwargs = {}
    if "manifest" in doc:
        kwargs["manifest"] = os.path.join(base_dir, str(doc.pop("manifest")))
    base_seed = int(doc.pop("base_seed", 0))
    if "synth" in doc:
        synth = dict(doc.pop("synth"))
        synth.setdefault("seed", base_seed)
        try:
            kwargs["synth"] = SynthConfig(
                n_examples=int(synth.pop("n_examples")),
                k_classes=int(synth.pop("k_classes")),
                n_views=int(synth.pop("n_views")),
                dims=synth.pop("dims"),
                separation=synth.pop("separation"),
                noise_sd=float(synth.pop("noise_sd", 1.0)),
                seed=int(synth.pop("seed")),
            )
        except KeyError as exc:
            raise ConfigError(f"[synth] missing key {exc}") from exc
        if synth:
            raise ConfigError(f"[synth] has unknown keys {sorted(synth)}")
    split = dict(doc.pop("split", {}))
    for frac in ("train", "calib", "test"):
        if frac in split:
            kwargs[f"{frac}_frac"] = float(split.pop(frac))
    if split:
        raise ConfigError(f"[split] has unknown keys {sorted(split)}")
    forest = dict(doc.pop("forest", {}))
    try:
        kwargs["forest"] = ForestParams(
            n_trees=int(forest.pop("n_trees", 100)),
            max_depth=forest.pop("max_depth", None),
            min_samples_split=int(forest.pop("min_samples_split", 2)),
            mtry=forest.pop("mtry", None),
        )
    except TypeError as exc:
        raise ConfigError(f"bad [forest] settings: {exc}") from exc
    if forest:
        raise ConfigError(f"[forest] has unknown keys {sorted(forest)}")
    for key in ("models",):
        if key in doc:
            kwargs[key] = tuple(doc.pop(key))
    for key, cast in (("epsilon", float), ("n_trials", int), ("stratify", bool),
                      ("folds", int), ("pvalue_mode", str), ("n_jobs", int),
                      ("output_dir", str)):
        if key in doc:
            kwargs[key] = cast(doc.pop(key))
    if doc:
        raise ConfigError(f"unknown config keys {sorted(doc)}")
    if "output_dir" in kwargs:
        kwargs["output_dir"] = os.path.join(base_dir, kwargs["output_dir"])
    return ExperimentConfig(base_seed=base_seed, **kwargs)


def load_config(path) -> ExperimentConfig:
    return config_from_dict(load_structured(path), base_dir=os.path.dirname(os.path.abspath(path)))


@dataclass
class ResultsTable:
    """Long-format results: one row per (trial, model, metric)."""

    rows: list
    models: tuple
    n_trials: int
    metrics: tuple = ALL_METRICS

    def values(self, model: str, metric: str) -> np.ndarray:
        vals = [(t, v) for t, m, met, v in self.rows if m == model and met == metric]
        return np.array([v for _, v in sorted(vals)], dtype=np.float64)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("trial,model,metric,value\n")
            for trial, model, metric, value in self.rows:
                fh.write(f"{trial},{model},{metric},{repr(float(value))}\n")

    @classmethod
    def from_csv(cls, path) -> "ResultsTable":
        rows = []
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip()
            if header != "trial,model,metric,value":
                raise DataError(f"{path}: not a results table")
            for line in fh:
                trial, model, metric, value = line.rstrip("\n").split(",")
                rows.append((int(trial), model, metric, float(value)))
        models = tuple(dict.fromkeys(m for _, m, _, _ in rows))
        n_trials = len({t for t, _, _, _ in rows})
        return cls(rows=rows, models=models, n_trials=n_trials)


@dataclass
class RunResult:
    table: ResultsTable
    matrix_counts: dict = field(repr=False)  # model -> {"cooccurrence": kxk, "confusion": kxk}
    histograms: dict = field(repr=False)  # model -> (n_trials, k+1) set-size counts
    label_names: tuple = ()
    epsilon: float = 0.05


def default_models(ds: MultiViewDataset) -> tuple:
    return tuple(f"single:{name}" for name in ds.view_names) + ("mv-a", "mv-s", "mv-i")


def load_dataset(cfg: ExperimentConfig) -> MultiViewDataset:
    if cfg.manifest is not None:
        return load_multiview(cfg.manifest)
    return gen_multiview(cfg.synth)


def evaluate_model(model, test: MultiViewDataset, epsilon: float) -> list:
    views = test.view_features()
    sets = model.predict_sets(views, epsilon)
    labels = model.predict_labels(views, epsilon)
    return [
        EvaluatedExample(true_label=int(t), point_prediction=int(p), set=s)
        for t, p, s in zip(test.labels, labels, sets)
    ]


def run_trial(cfg: ExperimentConfig, ds: MultiViewDataset, models, trial: int,
              on_evaluated=None):
    """One split + all models; returns {model: (report, examples)}."""
    trial_seed = cfg.base_seed + trial
    spec = SplitSpec(cfg.train_frac, cfg.calib_frac, cfg.test_frac, seed=trial_seed)
    train, calib, test = split_dataset(ds, spec, stratify=cfg.stratify)
    out = {}
    for name in models:
        model = train_model(
            name, train, calib, cfg.forest, seed=child_seed(trial_seed, name_key(name)),
            folds=cfg.folds, pvalue_mode=cfg.pvalue_mode, n_jobs=cfg.n_jobs,
        )
        examples = evaluate_model(model, test, cfg.epsilon)
        report = conformal_report(examples, ds.k)
        out[name] = (report, examples)
        if on_evaluated is not None:
            on_evaluated(trial=trial, name=name, model=model, test=test, examples=examples)
    return out


def run_experiment(cfg: ExperimentConfig, on_evaluated=None) -> RunResult:
    """The full protocol: n_trials splits, every model trained, calibrated,
    and scored on all 14 metrics; per-trial dumps land under output_dir."""
    from . import report as report_mod

    ds = load_dataset(cfg)
    models = cfg.models or default_models(ds)
    for name in models:
        parse_model_name(name, ds.view_names)
    if len(set(models)) != len(models):
        raise ConfigError("duplicate model names")

    k = ds.k
    rows = []
    matrix_counts = {
        name: {"cooccurrence": np.zeros((k, k), dtype=np.int64),
               "confusion": np.zeros((k, k), dtype=np.int64)}
        for name in models
    }
    histograms = {name: np.zeros((cfg.n_trials, k + 1), dtype=np.int64) for name in models}

    for trial in range(cfg.n_trials):
        evaluated = run_trial(cfg, ds, models, trial, on_evaluated=on_evaluated)
        for name in models:
            report, examples = evaluated[name]
            for metric, value in report.as_dict().items():
                rows.append((trial, name, metric, value))
            matrix_counts[name]["cooccurrence"] += cooccurrence_counts(examples, k)
            matrix_counts[name]["confusion"] += confusion_counts(examples, k)
            sizes = [e.set.size for e in examples]
            histograms[name][trial] = np.bincount(sizes, minlength=k + 1)
            if cfg.output_dir is not None:
                report_mod.write_trial_dump(cfg.output_dir, trial, name, examples,
                                            ds.label_space.labels)

    table = ResultsTable(rows=rows, models=tuple(models), n_trials=cfg.n_trials)
    return RunResult(table=table, matrix_counts=matrix_counts, histograms=histograms,
                     label_names=ds.label_space.labels, epsilon=cfg.epsilon)


def summarize(table: ResultsTable) -> list:
    """Per (model, metric): mean and sample standard deviation across trials."""
    if not table.rows:
        raise DataError("empty results table")
    out = []
    for model in table.models:
        for metric in table.metrics:
            vals = table.values(model, metric)
            sd = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
            out.append((model, metric, float(vals.mean()), sd))
    return out


def hypothesis_tests(table: ResultsTable) -> list:
    """Welch t-tests of pooled multi-view vs pooled single-view trial values,
    one row per conformal measure -> (metric, t, p, direction)."""
    single = [m for m in table.models if m.startswith("single:")]
    multi = [m for m in table.models if m in ("mv-a", "mv-s", "mv-i")]
    if not single or not multi:
        raise ConfigError("hypothesis tests need at least one single-view and one multi-view model")
    if table.n_trials < 2:
        raise ConfigError("hypothesis tests need at least 2 trials")
    out = []
    for metric in CONFORMAL_MEASURES:
        pool_multi = np.concatenate([table.values(m, metric) for m in multi])
        pool_single = np.concatenate([table.values(m, metric) for m in single])
        t, p = welch_t_test(pool_multi, pool_single)
        direction = "multi<single" if pool_multi.mean() < pool_single.mean() else (
            "multi>single" if pool_multi.mean() > pool_single.mean() else "equal")
        out.append((metric, t, p, direction))
    return out


def with_output_dir(cfg: ExperimentConfig, output_dir) -> ExperimentConfig:
    return replace(cfg, output_dir=output_dir)
