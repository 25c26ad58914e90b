"""Extremely randomized trees for regression.

Every tree sees the full sample (no bootstrap).  At each node a fixed number
of candidate features is drawn uniformly, one uniform-random cut point is
drawn inside each candidate's observed value range, and the best candidate
by variance reduction wins; leaves predict the node mean and the ensemble
predicts the mean over trees.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from . import _kernels
from .data import FeatureTable, TargetScale
from .ensemble import MODE_EXTRATREES, Ensemble, predict
from .errors import EmptyDatasetError, InvalidParamsError
from .gbdt import _trees_from_flat
from .validation import check_matrix, check_target


@dataclass(frozen=True)
class ExtraTreesParams:
    n_trees: int = 100
    max_depth: int = 0              # 0 means unlimited
    min_samples_leaf: int = 1
    n_candidate_features: int = 0   # 0 means all features
    seed: int = 0

    def validate(self) -> None:
        if self.n_trees < 1:
            raise InvalidParamsError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.max_depth < 0:
            raise InvalidParamsError("max_depth must be >= 0 (0 = unlimited)")
        if self.min_samples_leaf < 1:
            raise InvalidParamsError("min_samples_leaf must be >= 1")
        if self.n_candidate_features < 0:
            raise InvalidParamsError("n_candidate_features must be >= 0 (0 = all)")


def train_extratrees(x, y, params: ExtraTreesParams,
                     feature_names=None,
                     target_scale: TargetScale = TargetScale.TRANSFORMED_LOG) -> Ensemble:
    """Grow the forest on raw feature values; deterministic for a fixed seed."""
    params.validate()
    if isinstance(x, FeatureTable):
        feature_names = x.names if feature_names is None else tuple(feature_names)
        x = x.values
    x = check_matrix(x)
    y = check_target(y, x.shape[0])
    if x.shape[0] == 0 or x.shape[1] == 0:
        raise EmptyDatasetError("cannot train on an empty dataset")
    if feature_names is None:
        feature_names = tuple(f"f{j}" for j in range(x.shape[1]))
    feature_names = tuple(feature_names)
    if len(feature_names) != x.shape[1]:
        raise InvalidParamsError("feature_names length must match columns")
    k = params.n_candidate_features
    if k == 0 or k > x.shape[1]:
        k = x.shape[1]

    flat = _kernels.train_extratrees_kernel(
        x, y, params.n_trees, params.max_depth, params.min_samples_leaf,
        k, params.seed,
    )
    return Ensemble(
        mode=MODE_EXTRATREES,
        base_score=0.0,
        learning_rate=1.0,
        trees=tuple(_trees_from_flat(flat)),
        feature_names=feature_names,
        target_scale=target_scale,
        training_meta={"params": asdict(params), "seed": params.seed, "n_rows": int(x.shape[0])},
    )


class ExtraTreesRegressor(BaseEstimator, RegressorMixin):
    """Scikit-learn style front end for the extra-trees trainer."""

    def __init__(self, n_trees=100, max_depth=0, min_samples_leaf=1,
                 n_candidate_features=0, seed=0):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.n_candidate_features = n_candidate_features
        self.seed = seed

    def _params(self) -> ExtraTreesParams:
        return ExtraTreesParams(
            n_trees=self.n_trees, max_depth=self.max_depth,
            min_samples_leaf=self.min_samples_leaf,
            n_candidate_features=self.n_candidate_features, seed=self.seed,
        )

    def fit(self, X, y):
        if isinstance(X, FeatureTable):
            ft = X
        else:
            ft = FeatureTable(check_matrix(X), tuple(f"f{j}" for j in range(np.shape(X)[1])))
        self.model_ = train_extratrees(ft, np.asarray(y, dtype=np.float64), self._params())
        self.n_features_in_ = ft.n_cols
        return self

    def predict(self, X):
        if not hasattr(self, "model_"):
            raise InvalidParamsError("estimator is not fitted; call fit first")
        return predict(self.model_, X)
