"""Dataset container types, CSV ingestion, and the target transform.

Feature values are held as a dense float64 matrix with NaN marking missing
cells; every non-missing value must be finite.  Targets on the original
scale are strictly positive soil-nitrogen style measurements; the modelling
scale is ln(100 * y).
"""

from __future__ import annotations

import csv
import enum
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    AlreadyOriginalError,
    AlreadyTransformedError,
    CsvParseError,
    DimensionMismatchError,
    MissingColumnError,
    NonPositiveTargetError,
)

# Tokens treated as a missing feature cell in the fixed CSV dialect
# (comma separated, header row, "." decimal separator, UTF-8).
MISSING_TOKENS = ("", "NA", "NaN")

TARGET_SCALE_FACTOR = 100.0


class TargetScale(enum.Enum):
    ORIGINAL = "original"
    TRANSFORMED_LOG = "transformed_log"


@dataclass(frozen=True)
class FeatureTable:
    """Dense row-major feature matrix plus column names.

    Missing cells are NaN in ``values``; ``missing_mask`` derives from that.
    """

    values: np.ndarray
    names: tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DimensionMismatchError(f"feature matrix must be 2-D, got shape {values.shape}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", tuple(str(n) for n in self.names))
        if len(self.names) != values.shape[1]:
            raise DimensionMismatchError(
                f"{len(self.names)} feature names for {values.shape[1]} columns"
            )
        if len(set(self.names)) != len(self.names):
            raise DimensionMismatchError("feature names must be unique")
        finite_or_nan = np.isfinite(values) | np.isnan(values)
        if not finite_or_nan.all():
            raise DimensionMismatchError("non-missing feature values must be finite")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    @property
    def missing_mask(self) -> np.ndarray:
        return np.isnan(self.values)

    def column(self, name: str) -> np.ndarray:
        try:
            j = self.names.index(name)
        except ValueError:
            raise MissingColumnError(name) from None
        return self.values[:, j]

    def take_rows(self, idx) -> "FeatureTable":
        return FeatureTable(self.values[np.asarray(idx, dtype=np.intp)], self.names)

    def select(self, names) -> "FeatureTable":
        names = [str(n) for n in names]
        pos = {n: j for j, n in enumerate(self.names)}
        missing = [n for n in names if n not in pos]
        if missing:
            from .errors import MissingFeatureError

            raise MissingFeatureError(missing)
        cols = [pos[n] for n in names]
        return FeatureTable(self.values[:, cols], tuple(names))


@dataclass(frozen=True)
class TargetVector:
    """Target values with an explicit scale marker."""

    values: np.ndarray
    scale: TargetScale = TargetScale.ORIGINAL

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise DimensionMismatchError("target must be 1-D")
        object.__setattr__(self, "values", values)
        if not np.isfinite(values).all():
            raise DimensionMismatchError("target values must be finite")
        if self.scale is TargetScale.ORIGINAL and values.size and values.min() <= 0.0:
            row = int(np.argmax(values <= 0.0))
            raise NonPositiveTargetError(row)

    def __len__(self) -> int:
        return self.values.size

    def take(self, idx) -> "TargetVector":
        return TargetVector(self.values[np.asarray(idx, dtype=np.intp)], self.scale)


@dataclass(frozen=True)
class Dataset:
    """Feature table + target vector + per-row landcover labels."""

    features: FeatureTable
    target: TargetVector
    landcover: tuple[str, ...]
    ids: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "landcover", tuple(str(c) for c in self.landcover))
        n = self.features.n_rows
        if len(self.target) != n or len(self.landcover) != n:
            raise DimensionMismatchError(
                f"rows disagree: features={n}, target={len(self.target)}, "
                f"landcover={len(self.landcover)}"
            )
        if any(not c for c in self.landcover):
            raise DimensionMismatchError("landcover labels must be non-empty strings")
        if self.ids is not None:
            object.__setattr__(self, "ids", tuple(str(i) for i in self.ids))
            if len(self.ids) != n:
                raise DimensionMismatchError("ids length must match row count")
            if len(set(self.ids)) != len(self.ids):
                raise DimensionMismatchError("ids must be unique")

    @property
    def n_rows(self) -> int:
        return self.features.n_rows

    def classes(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.landcover)))

    def take_rows(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.intp)
        return Dataset(
            self.features.take_rows(idx),
            self.target.take(idx),
            tuple(self.landcover[i] for i in idx),
            tuple(self.ids[i] for i in idx) if self.ids is not None else None,
        )

    def filter_landcover(self, label: str) -> "Dataset":
        keep = [i for i, c in enumerate(self.landcover) if c == label]
        if not keep:
            raise DimensionMismatchError(f"no rows with landcover {label!r}")
        return self.take_rows(keep)

    def with_target(self, target: TargetVector) -> "Dataset":
        return replace(self, target=target)


def transform_target(y: TargetVector) -> TargetVector:
    """Map original-scale targets to the modelling scale ln(100 * y)."""
    if y.scale is not TargetScale.ORIGINAL:
        raise AlreadyTransformedError("target is already on the transformed scale")
    vals = y.values
    bad = vals <= 0.0
    if bad.any():
        raise NonPositiveTargetError(int(np.argmax(bad)))
    return TargetVector(np.log(TARGET_SCALE_FACTOR * vals), TargetScale.TRANSFORMED_LOG)


def inverse_transform_target(z: TargetVector) -> TargetVector:
    """Map transformed-scale targets back to original units, exp(z) / 100."""
    if z.scale is not TargetScale.TRANSFORMED_LOG:
        raise AlreadyOriginalError("target is already on the original scale")
    return TargetVector(np.exp(z.values) / TARGET_SCALE_FACTOR, TargetScale.ORIGINAL)


def inverse_transform_values(z: np.ndarray) -> np.ndarray:
    """Inverse transform for bare prediction arrays (transformed -> original)."""
    return np.exp(np.asarray(z, dtype=np.float64)) / TARGET_SCALE_FACTOR


def _parse_feature_cell(token: str, row: int, col: str) -> float:
    token = token.strip()
    if token in MISSING_TOKENS:
        return math.nan
    try:
        v = float(token)
    except ValueError:
        raise CsvParseError(row, col, token) from None
    if not math.isfinite(v):
        raise CsvParseError(row, col, token)
    return v


def load_csv(
    path,
    target_column: str,
    landcover_column: str,
    id_column: str | None = None,
) -> Dataset:
    """Load a dataset from the fixed CSV dialect.

    Feature columns are every column except the target, landcover, and
    optional id column, in header order.  Empty cells and the tokens "NA"
    and "NaN" become missing entries; target cells must parse as strictly
    positive reals.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DimensionMismatchError(f"{path}: empty file, header row required") from None
        header = [h.strip() for h in header]

        for required in (target_column, landcover_column):
            if required not in header:
                raise MissingColumnError(required)
        if id_column is not None and id_column not in header:
            raise MissingColumnError(id_column)

        special = {target_column, landcover_column}
        if id_column is not None:
            special.add(id_column)
        if len(special) < (2 if id_column is None else 3):
            raise DimensionMismatchError("target, landcover, and id columns must be distinct")

        feat_names = [h for h in header if h not in special]
        tgt_idx = header.index(target_column)
        lc_idx = header.index(landcover_column)
        id_idx = header.index(id_column) if id_column is not None else None
        feat_idx = [j for j, h in enumerate(header) if h not in special]

        rows: list[list[float]] = []
        targets: list[float] = []
        landcover: list[str] = []
        ids: list[str] = []
        for i, record in enumerate(reader):
            if len(record) != len(header):
                raise DimensionMismatchError(
                    f"row {i}: expected {len(header)} cells, got {len(record)}"
                )
            tok = record[tgt_idx].strip()
            try:
                tval = float(tok)
            except ValueError:
                raise CsvParseError(i, target_column, tok) from None
            if not math.isfinite(tval) or tval <= 0.0:
                raise NonPositiveTargetError(i)
            targets.append(tval)

            lc = record[lc_idx].strip()
            if not lc:
                raise CsvParseError(i, landcover_column, record[lc_idx])
            landcover.append(lc)
            if id_idx is not None:
                ids.append(record[id_idx].strip())
            rows.append([_parse_feature_cell(record[j], i, header[j]) for j in feat_idx])

    values = np.asarray(rows, dtype=np.float64) if rows else np.empty((0, len(feat_names)))
    return Dataset(
        FeatureTable(values, tuple(feat_names)),
        TargetVector(np.asarray(targets), TargetScale.ORIGINAL),
        tuple(landcover),
        tuple(ids) if id_column is not None else None,
    )


def load_feature_csv(path, required_names, id_column: str | None = None):
    """Load only the named feature columns from a CSV; extras are ignored.

    For scoring novel data: no target or landcover column is needed, and
    unused columns may hold anything.  Returns (FeatureTable, ids-or-None).
    """
    required_names = [str(n) for n in required_names]
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DimensionMismatchError(f"{path}: empty file, header row required") from None
        header = [h.strip() for h in header]
        missing = [n for n in required_names if n not in header]
        if missing:
            from .errors import MissingFeatureError

            raise MissingFeatureError(missing)
        if id_column is not None and id_column not in header:
            raise MissingColumnError(id_column)
        col_idx = [header.index(n) for n in required_names]
        id_idx = header.index(id_column) if id_column is not None else None

        rows: list[list[float]] = []
        ids: list[str] = []
        for i, record in enumerate(reader):
            if len(record) != len(header):
                raise DimensionMismatchError(
                    f"row {i}: expected {len(header)} cells, got {len(record)}"
                )
            rows.append([_parse_feature_cell(record[j], i, header[j]) for j in col_idx])
            if id_idx is not None:
                ids.append(record[id_idx].strip())

    values = np.asarray(rows, dtype=np.float64) if rows else np.empty((0, len(required_names)))
    ft = FeatureTable(values, tuple(required_names))
    return ft, (tuple(ids) if id_column is not None else None)


def write_csv(ds: Dataset, path, target_column: str = "nitrogen",
              landcover_column: str = "landcover", id_column: str = "id") -> None:
    """Write a dataset in the same dialect load_csv reads.

    Floats are rendered with repr so a write/load round trip is lossless.
    """
    include_id = ds.ids is not None
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        header = ([id_column] if include_id else []) + list(ds.features.names)
        header += [landcover_column, target_column]
        writer.writerow(header)
        vals = ds.features.values
        for i in range(ds.n_rows):
            row = [ds.ids[i]] if include_id else []
            row += ["" if math.isnan(v) else repr(float(v)) for v in vals[i]]
            row.append(ds.landcover[i])
            row.append(repr(float(ds.target.values[i])))
            writer.writerow(row)
    os.replace(tmp, path)
