"""Labeled feature matrices and the operations the protocol applies to them.

Holds the subjects-by-features matrix together with PD/HC labels, the
negative-class augmentation, stratified k-fold assignment, per-feature
standardization, and the CSV interchange format used by every command.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadEnum,
    ClassTooSmall,
    DimensionMismatch,
    EmptyInput,
    MalformedRow,
    MissingColumn,
    NoNegatives,
)

# Label encoding used throughout: PD is the positive class.
LABEL_HC = 0
LABEL_PD = 1
LABEL_NAMES = ("HC", "PD")

# Negative-class augmentation variants.
AUGMENT_SUBTRACT_MEAN = "subtract-mean"
AUGMENT_REFLECT = "reflect"

AUG_SUFFIX = "+aug"


def label_name(label: int) -> str:
    return LABEL_NAMES[int(label)]


def label_from_name(name: str) -> int:
    up = name.strip().upper()
    if up == "PD":
        return LABEL_PD
    if up == "HC":
        return LABEL_HC
    raise ValueError(f"unknown label {name!r}")


def format_value(x: float) -> str:
    """Decimal representation with 17 significant digits (round-trips float64)."""
    return format(float(x), ".17g")


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """An s-by-n feature matrix with one PD/HC label per row.

    Rows are subjects, columns are named features. Arrays are read-only after
    construction; all mutating operations return new datasets.
    """

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]
    subject_ids: tuple[str, ...]

    def __post_init__(self):
        feats = np.array(self.features, dtype=np.float64)
        labs = np.array(self.labels, dtype=np.int8)
        names = tuple(self.feature_names)
        ids = tuple(self.subject_ids)
        if feats.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if feats.shape[0] < 1:
            raise ValueError("dataset needs at least one row")
        if not np.all(np.isfinite(feats)):
            raise ValueError("features contain non-finite entries")
        if labs.shape != (feats.shape[0],):
            raise ValueError("labels length must equal row count")
        if not np.all((labs == LABEL_HC) | (labs == LABEL_PD)):
            raise ValueError("labels must be 0 (HC) or 1 (PD)")
        if len(names) != feats.shape[1]:
            raise ValueError("feature_names length must equal column count")
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")
        if len(ids) != feats.shape[0]:
            raise ValueError("subject_ids length must equal row count")
        feats.flags.writeable = False
        labs.flags.writeable = False
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labs)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "subject_ids", ids)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> tuple[int, int]:
        """(n_hc, n_pd)."""
        n_pd = int(np.count_nonzero(self.labels == LABEL_PD))
        return self.n_rows - n_pd, n_pd

    def feature_index(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise KeyError(name) from None

    def column(self, name: str) -> np.ndarray:
        return self.features[:, self.feature_index(name)]

    def take(self, rows) -> "LabeledDataset":
        """New dataset holding the given rows, in the given order."""
        rows = np.asarray(rows, dtype=np.intp)
        return LabeledDataset(
            features=self.features[rows],
            labels=self.labels[rows],
            feature_names=self.feature_names,
            subject_ids=tuple(self.subject_ids[i] for i in rows),
        )

    def drop_features(self, names) -> "LabeledDataset":
        """New dataset without the named columns (missing names are ignored)."""
        drop = set(names)
        keep = [i for i, n in enumerate(self.feature_names) if n not in drop]
        if len(keep) == self.n_features:
            return self
        return LabeledDataset(
            features=self.features[:, keep],
            labels=self.labels,
            feature_names=tuple(self.feature_names[i] for i in keep),
            subject_ids=self.subject_ids,
        )


# --- negative-class augmentation ---------------------------------------------


def augment_matrix(X: np.ndarray, y: np.ndarray, mode: str = AUGMENT_SUBTRACT_MEAN):
    """Array-level augmentation: returns (features, labels) with HC doubled.

    Appended rows are x - mu per original HC row x (mu = per-feature mean of
    the original HC rows), or 2*mu - x in "reflect" mode, following the
    original HC order after all original rows.
    """
    if mode not in (AUGMENT_SUBTRACT_MEAN, AUGMENT_REFLECT):
        raise ValueError(f"unknown augmentation mode {mode!r}")
    y = np.asarray(y)
    neg_rows = np.flatnonzero(y == LABEL_HC)
    if neg_rows.size == 0:
        raise NoNegatives("dataset has no HC rows to augment")
    neg = X[neg_rows]
    mu = neg.mean(axis=0)
    if mode == AUGMENT_SUBTRACT_MEAN:
        new_rows = neg - mu
    else:
        new_rows = (2.0 * mu) - neg
    return (
        np.vstack([X, new_rows]),
        np.concatenate([y, np.zeros(neg_rows.size, dtype=y.dtype)]),
        neg_rows,
    )


def augment_negatives(ds: LabeledDataset, mode: str = AUGMENT_SUBTRACT_MEAN) -> LabeledDataset:
    """Double the negative (HC) class by appending one derived row per HC row.

    The default derives each new row as x - mu, where mu is the per-feature
    mean over the original HC rows. The "reflect" variant uses 2*mu - x
    instead, for sensitivity analysis. Positive rows are untouched; appended
    rows keep the original HC order and get a "+aug" id suffix.
    """
    features, labels, neg_rows = augment_matrix(ds.features, ds.labels, mode)
    return LabeledDataset(
        features=features,
        labels=labels,
        feature_names=ds.feature_names,
        subject_ids=ds.subject_ids
        + tuple(ds.subject_ids[i] + AUG_SUFFIX for i in neg_rows),
    )


# --- stratified k-fold --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FoldAssignment:
    """Maps every dataset row to one of n_folds folds, stratified by class."""

    fold_index_per_row: np.ndarray
    n_folds: int
    seed: int

    def __post_init__(self):
        idx = np.array(self.fold_index_per_row, dtype=np.intp)
        idx.flags.writeable = False
        object.__setattr__(self, "fold_index_per_row", idx)

    def test_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_index_per_row == fold)

    def train_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_index_per_row != fold)


def stratified_kfold(ds: LabeledDataset, n_folds: int, seed: int) -> FoldAssignment:
    """Assign rows to folds so per-class counts differ by at most one.

    Deterministic given (row order, n_folds, seed): each class's rows are
    shuffled with the seeded generator and dealt round-robin, with the deal
    position carried over between classes so total fold sizes also differ by
    at most 1.
    """
    if n_folds < 2:
        raise ValueError("n_folds must be >= 2")
    if seed < 0:
        raise ValueError("seed must be non-negative")
    rng = np.random.default_rng(seed)
    fold = np.full(ds.n_rows, -1, dtype=np.intp)
    position = 0
    for cls in (LABEL_HC, LABEL_PD):
        rows = np.flatnonzero(ds.labels == cls)
        if rows.size < n_folds:
            raise ClassTooSmall(label_name(cls), int(rows.size), n_folds)
        perm = rng.permutation(rows)
        fold[perm] = (position + np.arange(perm.size)) % n_folds
        position += perm.size
    return FoldAssignment(fold_index_per_row=fold, n_folds=n_folds, seed=seed)


def write_folds_csv(ds: LabeledDataset, folds: FoldAssignment, path) -> None:
    """Export fold assignment as (subject_id, fold) CSV."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("subject_id,fold\n")
        for sid, f in zip(ds.subject_ids, folds.fold_index_per_row):
            fh.write(f"{sid},{int(f)}\n")


# --- standardization ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Standardizer:
    """Per-feature mean and population standard deviation of a training set."""

    mean: np.ndarray
    stddev: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=np.float64)
        std = np.array(self.stddev, dtype=np.float64)
        if mean.shape != std.shape or mean.ndim != 1:
            raise ValueError("mean and stddev must be 1-D vectors of equal length")
        if np.any(std < 0):
            raise ValueError("stddev entries must be >= 0")
        mean.flags.writeable = False
        std.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "stddev", std)


def fit_standardizer(ds: LabeledDataset) -> Standardizer:
    """Column means and population (divide-by-s) standard deviations."""
    return Standardizer(
        mean=ds.features.mean(axis=0),
        stddev=ds.features.std(axis=0, ddof=0),
    )


def _check_width(std: Standardizer, n: int) -> None:
    if std.mean.shape[0] != n:
        raise DimensionMismatch(std.mean.shape[0], n)


def standardize_matrix(std: Standardizer, X: np.ndarray) -> np.ndarray:
    """(x - mean) / stddev per column; zero-variance columns map to 0."""
    X = np.asarray(X, dtype=np.float64)
    _check_width(std, X.shape[-1])
    scale = np.where(std.stddev > 0, std.stddev, 1.0)
    out = (X - std.mean) / scale
    if np.any(std.stddev == 0):
        out = np.where(std.stddev > 0, out, 0.0)
    return out


def apply_standardizer(std: Standardizer, ds: LabeledDataset) -> LabeledDataset:
    return LabeledDataset(
        features=standardize_matrix(std, ds.features),
        labels=ds.labels,
        feature_names=ds.feature_names,
        subject_ids=ds.subject_ids,
    )


def invert_standardizer(std: Standardizer, ds: LabeledDataset) -> LabeledDataset:
    """Undo apply_standardizer; zero-variance columns recover their mean."""
    _check_width(std, ds.n_features)
    return LabeledDataset(
        features=ds.features * std.stddev + std.mean,
        labels=ds.labels,
        feature_names=ds.feature_names,
        subject_ids=ds.subject_ids,
    )


# --- CSV interchange ------------------------------------------------------------
#
# First column subject_id, second label (PD|HC), remaining columns features.
# Values carry 17 significant digits so a write/read round trip is bit-exact.
# Plain comma separation, no quoting: ids and names containing commas are
# rejected at write time.


def dataset_to_csv(ds: LabeledDataset) -> str:
    for name in ds.feature_names:
        if "," in name:
            raise ValueError(f"feature name {name!r} contains a comma; not representable")
    for sid in ds.subject_ids:
        if "," in sid:
            raise ValueError(f"subject id {sid!r} contains a comma; not representable")
    buf = io.StringIO()
    buf.write("subject_id,label," + ",".join(ds.feature_names) + "\n")
    for i in range(ds.n_rows):
        vals = ",".join(format_value(v) for v in ds.features[i])
        buf.write(f"{ds.subject_ids[i]},{label_name(ds.labels[i])},{vals}\n")
    return buf.getvalue()


def write_dataset_csv(ds: LabeledDataset, path) -> None:
    Path(path).write_text(dataset_to_csv(ds), encoding="utf-8")


def dataset_from_csv(text: str) -> LabeledDataset:
    lines = text.splitlines()
    if not lines:
        raise EmptyInput("empty dataset CSV")
    header = lines[0].split(",")
    if len(header) < 2 or header[0] != "subject_id":
        raise MissingColumn("subject_id")
    if header[1] != "label":
        raise MissingColumn("label")
    feature_names = tuple(header[2:])
    ids: list[str] = []
    labels: list[int] = []
    rows: list[list[float]] = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != len(header):
            raise MalformedRow(line_no, f"expected {len(header)} fields, got {len(fields)}")
        ids.append(fields[0])
        try:
            labels.append(label_from_name(fields[1]))
        except ValueError:
            raise BadEnum(line_no, fields[1], ("PD", "HC")) from None
        try:
            rows.append([float(v) for v in fields[2:]])
        except ValueError:
            raise MalformedRow(line_no, "non-numeric feature value") from None
    if not rows:
        raise EmptyInput("dataset CSV has no data rows")
    return LabeledDataset(
        features=np.array(rows, dtype=np.float64).reshape(len(rows), len(feature_names)),
        labels=np.array(labels, dtype=np.int8),
        feature_names=feature_names,
        subject_ids=tuple(ids),
    )


def read_dataset_csv(path) -> LabeledDataset:
    return dataset_from_csv(Path(path).read_text(encoding="utf-8"))
