"""Synthetic classification data, device partitioning (IID / Dirichlet), CSV ingestion."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .learning import Dataset
from .seeds import normalize_seed


class DataError(ValueError):
    """Bad external data (CSV parse failures, impossible partitions)."""


@dataclass
class PartitionPlan:
    """Per-device row indices into a parent dataset; disjoint, covering, non-empty."""

    assignments: list[np.ndarray]

    def __post_init__(self):
        self.assignments = [np.asarray(a, dtype=np.int64) for a in self.assignments]

    @property
    def devices(self) -> int:
        return len(self.assignments)


def make_synthetic(n: int, d: int, classes: int, separation: float, seed: int) -> Dataset:
    """Gaussian blobs with unit covariance, class c centred at separation * e_c.

    Class counts are as equal as possible; requires d >= classes when
    separation > 0 so every class gets its own axis.
    """
    if classes < 1:
        raise ValueError("classes must be positive")
    if n < classes:
        raise ValueError(f"need at least one row per class ({n} rows, {classes} classes)")
    if separation < 0:
        raise ValueError("separation must be >= 0")
    if separation > 0 and d < classes:
        raise ValueError(f"separation > 0 needs d >= classes, got d={d}, classes={classes}")
    rng = np.random.default_rng(normalize_seed(seed))
    counts = [n // classes + (1 if c < n % classes else 0) for c in range(classes)]
    features = rng.standard_normal((n, d))
    labels = np.zeros(n, dtype=np.int64)
    row = 0
    for c, count in enumerate(counts):
        if separation > 0:
            features[row:row + count, c] += separation
        labels[row:row + count] = c
        row += count
    return Dataset(features, labels, classes)


def partition_iid(data: Dataset, k: int, seed: int) -> PartitionPlan:
    """Seeded shuffle then contiguous split into k shards, sizes differing by <= 1."""
    if k < 1:
        raise ValueError("need at least one device")
    if k > data.n:
        raise DataError(f"cannot split {data.n} rows across {k} devices")
    rng = np.random.default_rng(normalize_seed(seed))
    order = rng.permutation(data.n)
    return PartitionPlan(list(np.array_split(order, k)))


def partition_dirichlet(data: Dataset, k: int, alpha: float, seed: int) -> PartitionPlan:
    """Per-class Dirichlet(alpha,...,alpha) draws proportion each class's rows
    across the k devices; empty shards are repaired by stealing one row from
    the largest shard."""
    if k < 2:
        raise ValueError("dirichlet partitioning needs k >= 2")
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    if k > data.n:
        raise DataError(f"cannot split {data.n} rows across {k} devices")
    counts = np.bincount(data.labels, minlength=data.classes)
    if counts.min() < 1:
        raise DataError("every class needs at least one row")
    rng = np.random.default_rng(normalize_seed(seed))
    shards: list[list[np.ndarray]] = [[] for _ in range(k)]
    for c in range(data.classes):
        rows = rng.permutation(np.flatnonzero(data.labels == c))
        proportions = rng.dirichlet(np.full(k, alpha))
        cuts = np.round(np.cumsum(proportions)[:-1] * rows.size).astype(np.int64)
        for device, chunk in enumerate(np.split(rows, cuts)):
            shards[device].append(chunk)
    assignments = [np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
                   for parts in shards]
    # Dirichlet with small alpha regularly empties shards; devices must hold >= 1 row.
    while True:
        sizes = np.array([a.size for a in assignments])
        if sizes.min() >= 1:
            break
        empty = int(np.argmin(sizes))
        largest = int(np.argmax(sizes))
        assignments[empty] = assignments[largest][-1:]
        assignments[largest] = assignments[largest][:-1]
    return PartitionPlan(assignments)


def load_csv(path: str, label_column: str, classes: int) -> Dataset:
    """Comma-delimited UTF-8 file with a header row; every non-label column is
    a numeric feature.  Row order is preserved; errors name the file line."""
    try:
        handle = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: no rows") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise DataError(f"{path}: label column {label_column!r} not in header {header}")
        label_idx = header.index(label_column)
        feature_idx = [i for i in range(len(header)) if i != label_idx]
        features: list[list[float]] = []
        labels: list[int] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
            try:
                features.append([float(row[i]) for i in feature_idx])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric feature cell") from None
            cell = row[label_idx].strip()
            try:
                label = int(cell)
            except ValueError:
                raise DataError(f"{path}:{lineno}: label {cell!r} is not an integer") from None
            if not 0 <= label < classes:
                raise DataError(
                    f"{path}:{lineno}: label {label} out of range [0, {classes})")
            labels.append(label)
    if not labels:
        raise DataError(f"{path}: no rows")
    return Dataset(np.asarray(features), np.asarray(labels), classes)
