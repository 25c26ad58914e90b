"""Quantile binning of feature tables for histogram-based tree training.

Each feature gets at most n_bins - 1 ascending edges taken from quantiles of
its non-missing values; a cell's code is the number of edges strictly below
its value, so code <= b exactly when value <= edges[b].  Missing cells get
the reserved code ``n_bins``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import FeatureTable
from .errors import InvalidParamsError


@dataclass(frozen=True)
class BinnedTable:
    """Bin codes plus the per-feature edges needed to map codes back to values."""

    codes: np.ndarray              # uint16, shape (n_rows, n_cols)
    bin_edges: tuple[np.ndarray, ...]
    n_bins: int

    @property
    def missing_code(self) -> int:
        return self.n_bins

    @property
    def n_rows(self) -> int:
        return self.codes.shape[0]

    @property
    def n_cols(self) -> int:
        return self.codes.shape[1]

    def edges_flat(self) -> tuple[np.ndarray, np.ndarray]:
        """Flatten ragged per-feature edges to (values, offsets) for kernels."""
        offsets = np.zeros(self.n_cols + 1, dtype=np.int64)
        for j, e in enumerate(self.bin_edges):
            offsets[j + 1] = offsets[j] + e.size
        flat = np.concatenate(self.bin_edges) if self.n_cols else np.empty(0)
        return flat.astype(np.float64), offsets


def bin_features(ft: FeatureTable, n_bins: int = 256) -> BinnedTable:
    """Quantile-bin every feature column; deterministic for fixed input."""
    if not (2 <= n_bins <= 256):
        raise InvalidParamsError(f"n_bins must be in 2..256, got {n_bins}")
    n, d = ft.values.shape
    codes = np.empty((n, d), dtype=np.uint16)
    edges_per_feature: list[np.ndarray] = []
    qs = np.linspace(0.0, 1.0, n_bins + 1)[1:-1]
    for j in range(d):
        col = ft.values[:, j]
        mask = ~np.isnan(col)
        present = col[mask]
        if present.size == 0:
            warnings.warn(
                f"feature {ft.names[j]!r} has no observed values and cannot be split",
                stacklevel=2,
            )
            edges = np.empty(0, dtype=np.float64)
        else:
            edges = np.unique(np.quantile(present, qs))
            # an edge with nothing above it can never separate two rows
            edges = edges[edges < present.max()]
        edges_per_feature.append(edges)
        codes[:, j] = n_bins
        if present.size:
            codes[mask, j] = np.searchsorted(edges, present, side="left").astype(np.uint16)
    return BinnedTable(codes, tuple(edges_per_feature), n_bins)
