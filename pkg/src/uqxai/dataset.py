"""Tabular datasets: CSV loading, min-max scaling, splitting and a toy generator."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np


class DatasetError(ValueError):
    """Raised for malformed or unusable input data."""


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]
    class_names: tuple[str, ...]
    name: str = ""

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=np.int64)
        if X.ndim != 2:
            raise DatasetError(f"features must be 2-D, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise DatasetError("labels must have one entry per row")
        if not np.all(np.isfinite(X)):
            r, c = np.argwhere(~np.isfinite(X))[0]
            raise DatasetError(f"non-finite value at row {r}, column {c}")
        if len(self.feature_names) != X.shape[1]:
            raise DatasetError("feature_names length does not match column count")
        if y.size and (y.min() < 0 or y.max() >= len(self.class_names)):
            raise DatasetError("label index outside [0, C)")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "class_names", tuple(self.class_names))

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return replace(self, features=self.features[idx], labels=self.labels[idx])

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)


@dataclass(frozen=True)
class NormParams:
    """Per-column ``(min, max)`` fitted on a training split."""

    minimum: np.ndarray
    maximum: np.ndarray

    @property
    def span(self) -> np.ndarray:
        return self.maximum - self.minimum

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        span = self.span
        const = span == 0
        out = (X - self.minimum) / np.where(const, 1.0, span)
        if np.any(const):
            out = np.where(const, 0.5, out)
        return out

    def inverse(self, Z) -> np.ndarray:
        Z = np.asarray(Z, dtype=float)
        span = self.span
        return np.where(span == 0, self.minimum, Z * span + self.minimum)

    def to_dict(self) -> dict:
        return {"min": self.minimum.tolist(), "max": self.maximum.tolist()}


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.7
    seed: int = 0
    stratified: bool = False

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise DatasetError("train_fraction must lie in (0, 1)")


def load_csv(path, label_column: str | int = -1, name: str | None = None) -> Dataset:
    """Read a headed, comma-separated table.

    ``label_column`` is a header name or a zero-based index (negative indices
    count from the right). Labels are re-encoded to ``0..C-1`` in order of
    first appearance.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"no such file: {path}")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetError(f"{path}: empty file")
    header, body = [h.strip() for h in rows[0]], rows[1:]
    if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
        if label_column not in header:
            raise DatasetError(f"{path}: label column {label_column!r} not in header")
        li = header.index(label_column)
    else:
        li = int(label_column)
        if not -len(header) <= li < len(header):
            raise DatasetError(f"{path}: label column index {li} out of range")
        li %= len(header)

    feat_cols = [j for j in range(len(header)) if j != li]
    X = np.empty((len(body), len(feat_cols)))
    raw_labels = []
    for r, row in enumerate(body):
        if len(row) != len(header):
            raise DatasetError(f"{path}: row {r + 1} has {len(row)} cells, expected {len(header)}")
        for out_j, j in enumerate(feat_cols):
            cell = row[j].strip()
            try:
                v = float(cell)
            except ValueError:
                v = math.nan
            if not math.isfinite(v):
                raise DatasetError(
                    f"{path}: non-numeric cell {cell!r} at row {r + 1}, column {header[j]!r}"
                )
            X[r, out_j] = v
        raw_labels.append(row[li].strip())

    classes: dict[str, int] = {}
    y = np.array([classes.setdefault(lab, len(classes)) for lab in raw_labels], dtype=np.int64)
    if len(classes) < 2:
        raise DatasetError(f"{path}: need at least 2 classes, found {len(classes)}")
    return Dataset(
        features=X,
        labels=y,
        feature_names=tuple(header[j] for j in feat_cols),
        class_names=tuple(classes),
        name=name if name is not None else path.stem,
    )


def fit_minmax(data: Dataset) -> NormParams:
    X = data.features
    return NormParams(X.min(axis=0), X.max(axis=0))


def normalize_minmax(data: Dataset, params: NormParams | None = None) -> tuple[Dataset, NormParams]:
    """Scale columns to [0, 1]; pass ``params`` to reuse training statistics."""
    if params is None:
        params = fit_minmax(data)
    return replace(data, features=params.transform(data.features)), params


def split(data: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Random train/test partition, reproducible for a fixed seed."""
    train_idx, test_idx = split_indices(data, spec)
    return data.subset(train_idx), data.subset(test_idx)


def split_indices(data: Dataset, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    """Sorted (train, test) row indices behind :func:`split`.

    Stratified mode rounds each class's train share to the nearest integer
    (so per-class counts differ from ``fraction * count`` by at most one) and
    keeps at least one row of each class on both sides.
    """
    n = data.n_rows
    rng = np.random.default_rng(spec.seed)
    if spec.stratified:
        counts = data.class_counts()
        if np.any((counts > 0) & (counts < 2)):
            bad = int(np.flatnonzero((counts > 0) & (counts < 2))[0])
            raise DatasetError(f"class {data.class_names[bad]!r} has fewer than 2 rows")
        train = []
        for c in range(data.n_classes):
            members = np.flatnonzero(data.labels == c)
            if members.size == 0:
                continue
            members = rng.permutation(members)
            n_tr = int(np.clip(np.floor(spec.train_fraction * members.size + 0.5), 1, members.size - 1))
            train.append(members[:n_tr])
        train_idx = np.sort(np.concatenate(train))
    else:
        n_tr = int(round(spec.train_fraction * n))
        n_tr = min(max(n_tr, 1), n - 1)
        train_idx = np.sort(rng.permutation(n)[:n_tr])
    mask = np.zeros(n, dtype=bool)
    mask[train_idx] = True
    return train_idx, np.flatnonzero(~mask)


def make_toy_moons(n_per_class: int = 200, noise: float = 0.1, seed: int = 0) -> Dataset:
    """Two interleaved half circles with isotropic Gaussian noise."""
    if n_per_class < 1:
        raise DatasetError("n_per_class must be >= 1")
    rng = np.random.default_rng(seed)
    t0 = np.linspace(0.0, math.pi, n_per_class)
    t1 = np.linspace(0.0, math.pi, n_per_class)
    upper = np.column_stack([np.cos(t0), np.sin(t0)])
    lower = np.column_stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)])
    X = np.vstack([upper, lower])
    if noise > 0:
        X = X + rng.normal(scale=noise, size=X.shape)
    y = np.repeat([0, 1], n_per_class)
    return Dataset(X, y, ("x1", "x2"), ("upper", "lower"), name="moons")


def write_csv(data: Dataset, path, label_header: str = "label") -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*data.feature_names, label_header])
        for row, lab in zip(data.features, data.labels):
            w.writerow([repr(float(v)) for v in row] + [data.class_names[lab]])
