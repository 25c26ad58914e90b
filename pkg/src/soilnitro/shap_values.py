"""Exact path-dependent TreeSHAP attributions, feature ranking, and top-k selection.

The background distribution is the training data as summarized by per-node
cover counts recorded at training time, so attribution needs nothing beyond
the model itself.  Attributions are additive across trees and satisfy local
accuracy: base_value + sum of per-feature values equals the model prediction.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from . import _shap_kernels
from .data import FeatureTable
from .ensemble import Ensemble, _resolve_matrix, pack_ensemble
from .errors import EmptyMatrixError, InvalidParamsError, MissingCoverCountsError


@dataclass(frozen=True)
class ShapMatrix:
    """Per-row, per-feature attributions plus the expected model output."""

    values: np.ndarray           # (n_rows, n_features), model-feature order
    base_value: float
    feature_names: tuple[str, ...]

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class FeatureRanking:
    """(name, mean |attribution|) pairs sorted by importance, descending."""

    entries: tuple[tuple[str, float], ...]

    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.entries)

    def to_csv_lines(self):
        yield "feature,importance"
        for name, imp in self.entries:
            yield f"{name},{float(imp)!r}"


def tree_shap(model: Ensemble, table) -> ShapMatrix:
    """Exact attributions for every row of the table against the model."""
    x = _resolve_matrix(model, table)
    xmiss = np.isnan(x)
    if not model.trees:
        return ShapMatrix(
            np.zeros((x.shape[0], len(model.feature_names))),
            float(model.base_score),
            model.feature_names,
        )
    tree_off, feat, thr, dl, cl, cr, val, cover = pack_ensemble(model)
    internal = cl != -1
    child_cover_sums = np.zeros(cover.size)
    child_cover_sums[internal] = cover[cl[internal]] + cover[cr[internal]]
    if np.any(internal & (child_cover_sums <= 0.0)):
        raise MissingCoverCountsError(
            "model lacks positive training cover counts; retrain or repair before attribution"
        )
    w = model.tree_weight
    val_exp = _shap_kernels.expected_values(cl, cr, cover, val * w)
    cdef = np.where(dl, cl, cr).astype(np.int32)
    base_value = float(model.base_score + val_exp[tree_off[:-1]].sum())
    phi = _shap_kernels.shap_kernel(
        x, xmiss, tree_off, feat, thr, cl, cr, cdef, val_exp, cover,
        model.max_depth_reached,
    )
    return ShapMatrix(phi, base_value, model.feature_names)


def rank_features(shap: ShapMatrix) -> FeatureRanking:
    """Rank by mean absolute attribution; ties break lexicographically."""
    if shap.values.size == 0:
        raise EmptyMatrixError("cannot rank features of an empty attribution matrix")
    imp = np.mean(np.abs(shap.values), axis=0)
    order = sorted(range(imp.size), key=lambda j: (-imp[j], shap.feature_names[j]))
    return FeatureRanking(tuple((shap.feature_names[j], float(imp[j])) for j in order))


def select_top_k(ranking: FeatureRanking, k: int) -> tuple[str, ...]:
    """First min(k, n) names of the ranking, order preserved."""
    if k < 1:
        raise InvalidParamsError(f"k must be >= 1, got {k}")
    names = ranking.names()
    if k > len(names):
        warnings.warn(
            f"requested top {k} of {len(names)} features; returning all",
            stacklevel=2,
        )
    return names[:k]


def selection_to_json(names) -> str:
    return json.dumps(list(names))


class TreeShapExplainer:
    """Convenience wrapper bundling attribution and ranking for one model."""

    def __init__(self, model: Ensemble):
        self.model = model

    def shap_values(self, table) -> np.ndarray:
        return tree_shap(self.model, table).values

    def explain(self, table) -> ShapMatrix:
        return tree_shap(self.model, table)
