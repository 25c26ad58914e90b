"""Small input-validation helpers shared by the estimators and trainers."""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatchError, EmptyDatasetError


def check_matrix(x) -> np.ndarray:
    """Coerce to a C-contiguous float64 2-D matrix; NaN cells mean missing."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionMismatchError(f"expected a 2-D matrix, got shape {x.shape}")
    if np.isinf(x).any():
        raise DimensionMismatchError("non-missing values must be finite")
    return x


def check_target(y, n_rows: int) -> np.ndarray:
    """Coerce to a finite float64 vector of the given length."""
    y = np.ascontiguousarray(y, dtype=np.float64)
    if y.ndim != 1:
        raise DimensionMismatchError(f"target must be 1-D, got shape {y.shape}")
    if y.size != n_rows:
        raise DimensionMismatchError(f"target has {y.size} rows, features have {n_rows}")
    if y.size == 0:
        raise EmptyDatasetError("empty target")
    if not np.isfinite(y).all():
        raise DimensionMismatchError("target values must be finite")
    return y
