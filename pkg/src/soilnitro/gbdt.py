"""Histogram-based second-order gradient boosting for squared-error regression.

Each round fits one depth-limited tree to the current gradients
g_i = pred_i - y_i with unit hessians; leaf values are -G / (H + lambda) and
split quality is the regularized second-order gain.  Missing values follow a
per-node default direction chosen by gain, ties going left; equal-gain splits
resolve to the lowest feature index, then the lowest bin.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from . import _kernels
from .binning import BinnedTable, bin_features
from .data import FeatureTable, TargetScale
from .ensemble import MODE_GBDT, Ensemble, RegressionTree, predict
from .errors import EmptyDatasetError, InvalidParamsError
from .validation import check_matrix, check_target


@dataclass(frozen=True)
class GbdtParams:
    n_trees: int = 200
    learning_rate: float = 0.1
    max_depth: int = 5
    min_child_weight: float = 1.0
    l2_lambda: float = 1.0
    subsample_rows: float = 1.0
    subsample_cols: float = 1.0
    n_bins: int = 256
    seed: int = 0

    def validate(self) -> None:
        if self.n_trees < 1:
            raise InvalidParamsError(f"n_trees must be >= 1, got {self.n_trees}")
        if not (0.0 < self.learning_rate) or not np.isfinite(self.learning_rate):
            raise InvalidParamsError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not (1 <= self.max_depth <= 24):
            raise InvalidParamsError(f"max_depth must be in 1..24, got {self.max_depth}")
        if self.min_child_weight < 0:
            raise InvalidParamsError("min_child_weight must be >= 0")
        if self.l2_lambda < 0:
            raise InvalidParamsError("l2_lambda must be >= 0")
        for name in ("subsample_rows", "subsample_cols"):
            v = getattr(self, name)
            if not (0.0 < v <= 1.0):
                raise InvalidParamsError(f"{name} must be in (0, 1], got {v}")
        if not (2 <= self.n_bins <= 256):
            raise InvalidParamsError(f"n_bins must be in 2..256, got {self.n_bins}")


def _trees_from_flat(flat) -> list[RegressionTree]:
    tree_off, feat, thr, dl, cl, cr, val, cov = flat
    trees = []
    for t in range(tree_off.size - 1):
        a, b = int(tree_off[t]), int(tree_off[t + 1])
        trees.append(RegressionTree(
            children_left=cl[a:b].copy(),
            children_right=cr[a:b].copy(),
            feature=feat[a:b].copy(),
            threshold=thr[a:b].copy(),
            default_left=dl[a:b].copy(),
            value=val[a:b].copy(),
            cover=cov[a:b].copy(),
        ))
    return trees


def train_gbdt(binned: BinnedTable, y: np.ndarray, params: GbdtParams,
               feature_names=None,
               target_scale: TargetScale = TargetScale.TRANSFORMED_LOG) -> Ensemble:
    """Boost params.n_trees histogram trees; deterministic for a fixed seed."""
    params.validate()
    y = check_target(y, binned.n_rows)
    if binned.n_rows == 0:
        raise EmptyDatasetError("cannot train on an empty dataset")
    if feature_names is None:
        feature_names = tuple(f"f{j}" for j in range(binned.n_cols))
    feature_names = tuple(feature_names)
    if len(feature_names) != binned.n_cols:
        raise InvalidParamsError("feature_names length must match binned columns")

    base = float(np.mean(y))
    edges_flat, edge_off = binned.edges_flat()
    n_edges = np.diff(edge_off)
    flat = _kernels.train_gbdt_kernel(
        binned.codes, n_edges, edges_flat, edge_off, binned.missing_code,
        y, base, params.n_trees, params.learning_rate, params.max_depth,
        params.min_child_weight, params.l2_lambda,
        params.subsample_rows, params.subsample_cols, params.seed,
    )
    return Ensemble(
        mode=MODE_GBDT,
        base_score=base,
        learning_rate=params.learning_rate,
        trees=tuple(_trees_from_flat(flat)),
        feature_names=feature_names,
        target_scale=target_scale,
        training_meta={"params": asdict(params), "seed": params.seed, "n_rows": binned.n_rows},
    )


def candidate_split_gains(binned: BinnedTable, g: np.ndarray,
                          l2_lambda: float = 0.0, min_child_weight: float = 0.0) -> np.ndarray:
    """Root-node gain of every candidate split, straight from the histogram scan.

    Shape (n_cols, max_edges, 2): last axis is [missing left, missing right],
    NaN where a candidate is invalid.  Exposed so the histogram arithmetic can
    be audited against direct per-row summation.
    """
    g = np.ascontiguousarray(g, dtype=np.float64)
    edges_flat, edge_off = binned.edges_flat()
    n_edges = np.diff(edge_off)
    return _kernels.enumerate_gain_table(
        binned.codes, n_edges, binned.missing_code, g, l2_lambda, min_child_weight
    )


class GBDTRegressor(BaseEstimator, RegressorMixin):
    """Scikit-learn style front end for the histogram GBDT trainer.

    fit accepts a FeatureTable or a plain 2-D array (NaN marks missing) and
    a target on the transformed scale; the fitted model is exposed as
    ``model_`` and composes with the rest of the toolkit (SHAP, persistence).
    """

    def __init__(self, n_trees=200, learning_rate=0.1, max_depth=5,
                 min_child_weight=1.0, l2_lambda=1.0, subsample_rows=1.0,
                 subsample_cols=1.0, n_bins=256, seed=0):
        self.n_trees = n_trees
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.min_child_weight = min_child_weight
        self.l2_lambda = l2_lambda
        self.subsample_rows = subsample_rows
        self.subsample_cols = subsample_cols
        self.n_bins = n_bins
        self.seed = seed

    def _params(self) -> GbdtParams:
        return GbdtParams(
            n_trees=self.n_trees, learning_rate=self.learning_rate,
            max_depth=self.max_depth, min_child_weight=self.min_child_weight,
            l2_lambda=self.l2_lambda, subsample_rows=self.subsample_rows,
            subsample_cols=self.subsample_cols, n_bins=self.n_bins, seed=self.seed,
        )

    def fit(self, X, y):
        if isinstance(X, FeatureTable):
            ft = X
        else:
            ft = FeatureTable(check_matrix(X), tuple(f"f{j}" for j in range(np.shape(X)[1])))
        binned = bin_features(ft, self._params().n_bins)
        self.model_ = train_gbdt(binned, np.asarray(y, dtype=np.float64),
                                 self._params(), feature_names=ft.names)
        self.n_features_in_ = ft.n_cols
        return self

    def predict(self, X):
        if not hasattr(self, "model_"):
            raise InvalidParamsError("estimator is not fitted; call fit first")
        return predict(self.model_, X)
