"""Seeded stratified train/test splitting and target-stratified k-fold assignment.

The train/test split is stratified by landcover class: within each class the
test count is round(class_size * test_fraction) (round half to even) and
membership comes from a seeded permutation, so the realized per-class test
fraction never deviates from the request by more than 1/class_size.

Cross-validation folds are stratified against the target distribution: rows
are bucketed into quantile bins of y, shuffled within each bin, and dealt
round-robin across folds with a fold counter that persists across bins, which
bounds fold-size imbalance by one both per bin and globally.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .data import Dataset, TargetVector
from .errors import ClassTooSmallError, InvalidFractionError, InvalidKError


@dataclass(frozen=True)
class SplitIndices:
    train: np.ndarray
    test: np.ndarray
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "train", np.asarray(self.train, dtype=np.int64))
        object.__setattr__(self, "test", np.asarray(self.test, dtype=np.int64))

    @property
    def n_rows(self) -> int:
        return self.train.size + self.test.size

    def to_json(self) -> str:
        doc = {"seed": int(self.seed), "train": self.train.tolist(), "test": self.test.tolist()}
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SplitIndices":
        doc = json.loads(text)
        return cls(np.asarray(doc["train"]), np.asarray(doc["test"]), int(doc["seed"]))


@dataclass(frozen=True)
class FoldAssignment:
    fold_of_row: np.ndarray
    k: int
    n_bins: int
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "fold_of_row", np.asarray(self.fold_of_row, dtype=np.int64))

    @property
    def n_rows(self) -> int:
        return self.fold_of_row.size

    def fold_indices(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        """Return (train_idx, valid_idx) row positions for one fold."""
        mask = self.fold_of_row == fold
        return np.flatnonzero(~mask), np.flatnonzero(mask)

    def to_json(self) -> str:
        doc = {
            "seed": int(self.seed),
            "k": int(self.k),
            "n_bins": int(self.n_bins),
            "fold_of_row": self.fold_of_row.tolist(),
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "FoldAssignment":
        doc = json.loads(text)
        return cls(np.asarray(doc["fold_of_row"]), int(doc["k"]), int(doc["n_bins"]), int(doc["seed"]))


def stratified_split(ds: Dataset, test_fraction: float, seed: int) -> SplitIndices:
    """Split rows into train/test, stratified by landcover class.

    Deterministic for a fixed seed.  Every class must have at least 2 rows;
    each class contributes round(class_size * test_fraction) test rows,
    adjusted by one row when rounding would leave a class's test or train
    side empty.
    """
    if not (0.0 < test_fraction < 1.0):
        raise InvalidFractionError(f"test_fraction must be in (0, 1), got {test_fraction}")
    labels = np.asarray(ds.landcover)
    rng = np.random.default_rng(int(seed))
    train_parts = []
    test_parts = []
    for label in sorted(set(ds.landcover)):
        rows = np.flatnonzero(labels == label)
        size = int(rows.size)
        if size < 2:
            raise ClassTooSmallError(label, size)
        n_test = round(float(size * test_fraction))
        if n_test == 0:
            n_test = 1
        elif n_test == size:
            n_test = size - 1
        perm = rows[rng.permutation(size)]
        test_parts.append(perm[:n_test])
        train_parts.append(perm[n_test:])
    train = np.sort(np.concatenate(train_parts))
    test = np.sort(np.concatenate(test_parts))
    return SplitIndices(train, test, seed)


def stratified_kfold(y: TargetVector, k: int, n_bins: int = 10, seed: int = 0) -> FoldAssignment:
    """Assign each row to one of k folds, stratified by target quantile bins.

    Rows are bucketed into n_bins quantile bins of y, shuffled within each
    bin, and dealt round-robin across folds; the dealing counter continues
    across bins so fold sizes differ by at most one globally as well as
    within every bin.
    """
    if k < 2:
        raise InvalidKError(f"k must be >= 2, got {k}")
    if n_bins < 1:
        raise InvalidKError(f"n_bins must be >= 1, got {n_bins}")
    values = y.values
    n = values.size
    if n < k:
        raise InvalidKError(f"cannot make {k} folds from {n} rows")
    if n < k * n_bins:
        warnings.warn(
            f"{n} rows is small for {k} folds x {n_bins} stratification bins",
            stacklevel=2,
        )

    # Quantile bin edges; duplicate edges collapse when y has heavy ties.
    qs = np.quantile(values, np.linspace(0.0, 1.0, n_bins + 1)[1:-1]) if n_bins > 1 else np.empty(0)
    bins = np.searchsorted(qs, values, side="left")

    rng = np.random.default_rng(int(seed))
    fold_of_row = np.empty(n, dtype=np.int64)
    counter = 0
    for b in np.unique(bins):
        rows = np.flatnonzero(bins == b)
        rows = rows[rng.permutation(rows.size)]
        for r in rows:
            fold_of_row[r] = counter % k
            counter += 1
    return FoldAssignment(fold_of_row, k, n_bins, seed)
