"""Dataset ingestion, label encoding, splitting, and HDLSS profiling."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Dataset",
    "SplitPlan",
    "HdlssProfile",
    "DataError",
    "load_csv",
    "omega",
    "imbalance_ratio",
    "hdlss_profile",
    "random_half_splits",
    "kfold_indices",
]

VERY_HDLSS_CUTOFF = 0.015
NON_HDLSS_CUTOFF = 1.0


class DataError(ValueError):
    """Raised for unusable input data (missing files, bad cells, degenerate label sets)."""


@dataclass(frozen=True)
class Dataset:
    """A labeled feature matrix with dense integer class ids.

    Labels are re-encoded to ``[0, c)`` in order of first appearance;
    ``label_names[j]`` is the original label string of class ``j``.
    """

    name: str
    features: np.ndarray  # (n, m) float64
    labels: np.ndarray  # (n,) int64 in [0, c)
    label_names: tuple[str, ...]

    def __post_init__(self):
        if self.features.ndim != 2:
            raise DataError("features must be a 2-D matrix")
        if len(self.labels) != self.features.shape[0]:
            raise DataError("labels length must match feature rows")
        if not np.all(np.isfinite(self.features)):
            raise DataError(f"{self.name}: non-finite feature value")
        counts = np.bincount(self.labels, minlength=len(self.label_names))
        if len(counts) > len(self.label_names) or counts.min() < 1:
            raise DataError(f"{self.name}: every class id in [0, c) must appear at least once")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def m(self) -> int:
        return self.features.shape[1]

    @property
    def c(self) -> int:
        return len(self.label_names)

    @property
    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.c)

    def decoded_labels(self) -> list[str]:
        """Original label strings, row by row (inverse of the encoding)."""
        return [self.label_names[j] for j in self.labels]


@dataclass(frozen=True)
class SplitPlan:
    """One half/half partition of ``[0, n)``; train size is ``ceil(n/2)``."""

    train_indices: np.ndarray
    test_indices: np.ndarray
    seed: object  # int or tuple of ints

    def to_manifest(self) -> dict:
        seed = list(map(int, self.seed)) if isinstance(self.seed, (tuple, list)) else int(self.seed)
        return {
            "seed": seed,
            "train_indices": [int(i) for i in self.train_indices],
            "test_indices": [int(i) for i in self.test_indices],
        }


@dataclass(frozen=True)
class HdlssProfile:
    omega: float
    imbalance_ratio: float
    band: str  # very_hdlss | mid_hdlss | non_hdlss


def load_csv(path, label_column="label", name: str | None = None) -> Dataset:
    """Load a dataset from a headered CSV file.

    Parameters
    ----------
    path : str or Path
        UTF-8, comma-separated file with a header row.
    label_column : str or int
        Label column, by header name or by position.
    name : str, optional
        Dataset name; defaults to the file stem.
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"dataset file not found: {path}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = list(reader)

    if isinstance(label_column, int):
        label_idx = label_column if label_column >= 0 else len(header) + label_column
        if not 0 <= label_idx < len(header):
            raise DataError(f"{path}: label column index {label_column} out of range")
    else:
        try:
            label_idx = header.index(label_column)
        except ValueError:
            raise DataError(f"{path}: label column {label_column!r} not found") from None

    if not rows:
        raise DataError(f"{path}: no data rows")

    feature_cols = [i for i in range(len(header)) if i != label_idx]
    features = np.empty((len(rows), len(feature_cols)), dtype=np.float64)
    raw_labels = []
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"{path}: row {r + 2} has {len(row)} cells, expected {len(header)}")
        raw_labels.append(row[label_idx])
        for k, i in enumerate(feature_cols):
            try:
                value = float(row[i])
            except ValueError:
                raise DataError(
                    f"{path}: non-numeric feature cell {header[i]!r} in row {r + 2}"
                ) from None
            if not math.isfinite(value):
                raise DataError(f"{path}: non-finite feature {header[i]!r} in row {r + 2}")
            features[r, k] = value

    # Encode labels densely, in order of first appearance.
    label_to_id: dict[str, int] = {}
    labels = np.empty(len(raw_labels), dtype=np.int64)
    for r, lab in enumerate(raw_labels):
        if lab not in label_to_id:
            label_to_id[lab] = len(label_to_id)
        labels[r] = label_to_id[lab]
    if len(label_to_id) < 2:
        raise DataError(f"{path}: single-class dataset, unusable for classification")

    return Dataset(
        name=name if name is not None else _stem(path),
        features=features,
        labels=labels,
        label_names=tuple(label_to_id),
    )


def _stem(path) -> str:
    base = str(path).replace("\\", "/").rsplit("/", 1)[-1]
    return base.rsplit(".", 1)[0] if "." in base else base


def omega(d: Dataset) -> float:
    """HDLSS-ness: average instances per class divided by the feature count, n/(c*m)."""
    return d.n / (d.c * d.m)


def imbalance_ratio(d: Dataset) -> float:
    """Majority class count divided by minority class count."""
    if d.c < 2:
        raise DataError("imbalance ratio undefined for single-class data")
    counts = d.class_counts
    return counts.max() / counts.min()


def hdlss_profile(d: Dataset) -> HdlssProfile:
    om = omega(d)
    if om < VERY_HDLSS_CUTOFF:
        band = "very_hdlss"
    elif om < NON_HDLSS_CUTOFF:
        band = "mid_hdlss"
    else:
        band = "non_hdlss"
    return HdlssProfile(omega=om, imbalance_ratio=imbalance_ratio(d), band=band)


def random_half_splits(d: Dataset, repetitions: int, seed: int) -> list[SplitPlan]:
    """Generate stratified half/half train/test splits.

    Every class appears in both halves, so each class needs at least two
    members. Per-class counts in each half differ from ``n_j/2`` by at most 1,
    and the train half has exactly ``ceil(n/2)`` instances.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    counts = d.class_counts
    if counts.min() < 2:
        bad = d.label_names[int(np.argmin(counts))]
        raise DataError(f"{d.name}: class {bad!r} has a single instance, cannot stratify")

    by_class = [np.flatnonzero(d.labels == j) for j in range(d.c)]
    odd_classes = [j for j in range(d.c) if counts[j] % 2 == 1]
    # ceil(n/2) = sum of floor(n_j/2) + ceil(#odd/2): give the extra member to
    # the first half of the odd classes after shuffling them per repetition.
    n_extra = (len(odd_classes) + 1) // 2

    plans = []
    for rep in range(repetitions):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(rep,)))
        extra = set()
        if odd_classes:
            order = rng.permutation(len(odd_classes))
            extra = {odd_classes[i] for i in order[:n_extra]}
        train_parts, test_parts = [], []
        for j in range(d.c):
            members = rng.permutation(by_class[j])
            take = counts[j] // 2 + (1 if j in extra else 0)
            train_parts.append(members[:take])
            test_parts.append(members[take:])
        train = np.sort(np.concatenate(train_parts))
        test = np.sort(np.concatenate(test_parts))
        plans.append(SplitPlan(train_indices=train, test_indices=test, seed=seed))
    return plans


def kfold_indices(train, labels, k: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Stratified k-fold partition of ``train`` into (fit, validate) index pairs.

    Classes with fewer than ``k`` members are spread round-robin over folds
    (with a warning), so those folds simply lack that class.
    """
    train = np.asarray(train)
    labels = np.asarray(labels)
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > len(train):
        raise ValueError(f"k={k} exceeds training size {len(train)}")

    rng = np.random.default_rng(seed)
    train_labels = labels[train]
    folds: list[list[int]] = [[] for _ in range(k)]
    offset = 0
    for j in np.unique(train_labels):
        members = rng.permutation(train[train_labels == j])
        if len(members) < k:
            warnings.warn(
                f"class {j} has {len(members)} members < {k} folds; distributing round-robin",
                stacklevel=2,
            )
        for i, idx in enumerate(members):
            folds[(offset + i) % k].append(int(idx))
        offset += len(members)  # rotate start so small classes don't pile on fold 0

    pairs = []
    for f in range(k):
        validate = np.sort(np.array(folds[f], dtype=np.int64))
        fit = np.sort(np.concatenate([np.array(folds[g], dtype=np.int64) for g in range(k) if g != f]))
        pairs.append((fit, validate))
    return pairs
