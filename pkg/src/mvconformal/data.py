"""Multi-view dataset containers, CSV ingestion via a view manifest, and splitting.

CSV layout: UTF-8, comma separated, header row ``id,label,f1,...,fd``, one
example per row. A manifest lists the views as an array of inline tables,
each entry ``view = "<name>", path = "<csv>"`` (paths resolve relative to the
manifest file). Rows are aligned across views by id: the dataset keeps the
intersection of ids, sorted by id.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .config import load_structured
from .errors import ConfigError, DataError


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class LabelSpace:
    """Canonical (lexicographically sorted) class names and their indices."""

    labels: tuple
    index: dict = field(repr=False)

    @classmethod
    def from_labels(cls, labels) -> "LabelSpace":
        ordered = tuple(sorted(set(labels)))
        if not ordered:
            raise DataError("empty label set")
        return cls(labels=ordered, index={name: i for i, name in enumerate(ordered)})

    @property
    def k(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class ViewMatrix:
    """One view's dense feature matrix; rows are examples."""

    view_name: str
    features: np.ndarray

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2:
            raise DataError(f"view {self.view_name!r}: features must be 2-D")
        if feats.shape[1] < 1:
            raise DataError(f"view {self.view_name!r}: needs at least one feature column")
        if not np.all(np.isfinite(feats)):
            raise DataError(f"view {self.view_name!r}: non-finite feature values")
        object.__setattr__(self, "features", _frozen(feats))

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def n(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class MultiViewDataset:
    """Row-aligned views plus one integer label vector; the unit of training."""

    views: tuple
    labels: np.ndarray
    ids: tuple
    label_space: LabelSpace

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        n = len(self.ids)
        if labels.shape != (n,):
            raise DataError("labels length does not match ids")
        for vm in self.views:
            if vm.n != n:
                raise DataError(f"view {vm.view_name!r} has {vm.n} rows, expected {n}")
        if n and (labels.min() < 0 or labels.max() >= self.label_space.k):
            raise DataError("label index out of range")
        object.__setattr__(self, "views", tuple(self.views))
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "ids", tuple(self.ids))

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def k(self) -> int:
        return self.label_space.k

    @property
    def view_names(self) -> list:
        return [vm.view_name for vm in self.views]

    def view_features(self) -> list:
        return [vm.features for vm in self.views]

    def subset(self, indices) -> "MultiViewDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return MultiViewDataset(
            views=tuple(ViewMatrix(vm.view_name, vm.features[idx]) for vm in self.views),
            labels=self.labels[idx],
            ids=tuple(self.ids[i] for i in idx),
            label_space=self.label_space,
        )


@dataclass(frozen=True)
class SplitSpec:
    """Three-way split fractions plus the seed that fixes the permutation."""

    train_frac: float = 0.5
    calib_frac: float = 0.25
    test_frac: float = 0.25
    seed: int = 0

    def __post_init__(self):
        for name, frac in (("train", self.train_frac), ("calib", self.calib_frac), ("test", self.test_frac)):
            if not 0.0 < frac < 1.0:
                raise ConfigError(f"{name} fraction must be in (0,1), got {frac}")
        if abs(self.train_frac + self.calib_frac + self.test_frac - 1.0) > 1e-9:
            raise ConfigError("split fractions must sum to 1")


def _read_view_csv(path: str, view_name: str):
    """Read one view CSV -> (ids list, label-name dict, feature dict id -> row)."""
    if not os.path.exists(path):
        raise DataError(f"view {view_name!r}: file not found: {path}")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"view {view_name!r}: empty CSV {path}") from None
        if len(header) < 3 or header[0] != "id" or header[1] != "label":
            raise DataError(f"view {view_name!r}: header must start with id,label and have features")
        d = len(header) - 2
        labels, rows = {}, {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 2:
                raise DataError(f"view {view_name!r}: line {lineno} has {len(row)} cells, expected {d + 2}")
            rid = row[0]
            if rid in rows:
                raise DataError(f"view {view_name!r}: duplicate id {rid!r}")
            try:
                feats = [float(cell) for cell in row[2:]]
            except ValueError:
                raise DataError(f"view {view_name!r}: non-numeric feature cell at line {lineno}") from None
            if not all(math.isfinite(v) for v in feats):
                raise DataError(f"view {view_name!r}: non-finite feature at line {lineno}")
            labels[rid] = row[1]
            rows[rid] = feats
        if not rows:
            raise DataError(f"view {view_name!r}: no data rows in {path}")
        return labels, rows


def parse_manifest(manifest_path):
    """Return [(view_name, csv_path), ...] with paths resolved against the manifest."""
    doc = load_structured(manifest_path)
    entries = doc.get("views")
    if not isinstance(entries, list) or not entries:
        raise ConfigError(f"{manifest_path}: manifest needs a non-empty 'views' array")
    base = os.path.dirname(os.path.abspath(manifest_path))
    out = []
    for entry in entries:
        if not isinstance(entry, dict) or "view" not in entry or "path" not in entry:
            raise ConfigError(f"{manifest_path}: each views entry needs view = \"...\" and path = \"...\"")
        out.append((str(entry["view"]), os.path.join(base, str(entry["path"]))))
    names = [name for name, _ in out]
    if len(set(names)) != len(names):
        raise ConfigError(f"{manifest_path}: duplicate view names")
    return out


def load_multiview(manifest_path) -> MultiViewDataset:
    """Load and row-align all views listed in a manifest."""
    specs = parse_manifest(manifest_path)
    per_view = [(name, *_read_view_csv(path, name)) for name, path in specs]

    common = set(per_view[0][2])
    for _, _, rows in per_view[1:]:
        common &= set(rows)
    if not common:
        raise DataError("no ids shared by all views")
    ids = sorted(common)

    first_labels = per_view[0][1]
    for name, labels, _ in per_view[1:]:
        for rid in ids:
            if labels[rid] != first_labels[rid]:
                raise DataError(
                    f"id {rid!r}: label {labels[rid]!r} in view {name!r} "
                    f"conflicts with {first_labels[rid]!r}"
                )

    label_space = LabelSpace.from_labels(first_labels[rid] for rid in ids)
    y = np.array([label_space.index[first_labels[rid]] for rid in ids], dtype=np.int64)
    views = tuple(
        ViewMatrix(name, np.array([rows[rid] for rid in ids], dtype=np.float64))
        for name, _, rows in per_view
    )
    return MultiViewDataset(views=views, labels=y, ids=tuple(ids), label_space=label_space)


def split_dataset(ds: MultiViewDataset, spec: SplitSpec, stratify: bool = False):
    """Seeded three-way split -> (train, calib, test).

    Sizes are round(n * frac) for calib and test (ties round half to even),
    with the remainder assigned to train. Identical seeds give identical
    partitions. The default split is a plain permutation split; ``stratify``
    applies the same rule within each class.
    """
    n = ds.n
    if n < 3:
        raise DataError("need at least 3 examples to split")

    def allocate(indices, rng):
        m = len(indices)
        n_calib = round(m * spec.calib_frac)
        n_test = round(m * spec.test_frac)
        n_train = m - n_calib - n_test
        perm = indices[rng.permutation(m)]
        return perm[:n_train], perm[n_train:n_train + n_calib], perm[n_train + n_calib:]

    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    if stratify:
        train_parts, calib_parts, test_parts = [], [], []
        for c in range(ds.k):
            cls_idx = np.flatnonzero(ds.labels == c)
            if len(cls_idx) == 0:
                continue
            tr, ca, te = allocate(cls_idx, rng)
            train_parts.append(tr)
            calib_parts.append(ca)
            test_parts.append(te)
        train_idx = np.concatenate(train_parts)
        calib_idx = np.concatenate(calib_parts)
        test_idx = np.concatenate(test_parts)
    else:
        train_idx, calib_idx, test_idx = allocate(np.arange(n, dtype=np.int64), rng)

    if min(len(train_idx), len(calib_idx), len(test_idx)) == 0:
        raise DataError("split produced an empty part; adjust fractions or dataset size")
    return tuple(ds.subset(np.sort(part)) for part in (train_idx, calib_idx, test_idx))


def write_view_csv(path, ids, label_names, features) -> None:
    feats = np.asarray(features, dtype=np.float64)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "label"] + [f"f{j + 1}" for j in range(feats.shape[1])])
        for rid, lab, row in zip(ids, label_names, feats):
            writer.writerow([rid, lab] + [repr(float(v)) for v in row])


def write_manifest(path, entries) -> None:
    """Write a manifest for (view_name, csv_filename) entries."""
    lines = ["views = ["]
    for name, csv_path in entries:
        lines.append(f'  {{ view = "{name}", path = "{csv_path}" }},')
    lines.append("]")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_dataset(ds: MultiViewDataset, out_dir, manifest_name="manifest.toml") -> str:
    """Write one CSV per view plus a manifest; returns the manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    label_names = [ds.label_space.labels[i] for i in ds.labels]
    entries = []
    for vm in ds.views:
        fname = f"{vm.view_name}.csv"
        write_view_csv(os.path.join(out_dir, fname), ds.ids, label_names, vm.features)
        entries.append((vm.view_name, fname))
    manifest_path = os.path.join(out_dir, manifest_name)
    write_manifest(manifest_path, entries)
    return manifest_path
