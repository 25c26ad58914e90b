"""Neutral trained-ensemble representation shared by both trainers.

Trees are stored struct-of-arrays (children_left/right, feature, threshold,
default_left, value, cover) with tree-local indices and the root at 0, the
layout both the prediction kernels and the model file use.  The same
Ensemble type carries GBDT models (base_score + learning_rate * sum of
trees) and extra-trees models (base_score + mean of trees); the combination
rule is selected by the ``mode`` flag.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .data import FeatureTable, TargetScale
from .errors import CorruptModelError, DimensionMismatchError, MissingFeatureError

MODE_GBDT = "gbdt"
MODE_EXTRATREES = "extratrees"


@dataclass(frozen=True)
class RegressionTree:
    children_left: np.ndarray   # int32, -1 marks a leaf
    children_right: np.ndarray  # int32
    feature: np.ndarray         # int32, -1 at leaves
    threshold: np.ndarray       # float64
    default_left: np.ndarray    # bool, direction taken by missing values
    value: np.ndarray           # float64, meaningful at leaves
    cover: np.ndarray           # float64, training rows through each node

    @property
    def n_nodes(self) -> int:
        return self.children_left.size

    def is_leaf(self, i: int) -> bool:
        return self.children_left[i] == -1

    @property
    def max_depth_reached(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        out = 0
        for i in range(self.n_nodes):
            if self.children_left[i] != -1:
                depth[self.children_left[i]] = depth[i] + 1
                depth[self.children_right[i]] = depth[i] + 1
                out = max(out, depth[i] + 1)
        return out

    def validate(self, n_features: int) -> None:
        """Check structural invariants; raises CorruptModelError on violation."""
        n = self.n_nodes
        if n == 0:
            raise CorruptModelError("tree has no nodes")
        seen = np.zeros(n, dtype=np.int64)
        for i in range(n):
            left = int(self.children_left[i])
            right = int(self.children_right[i])
            if (left == -1) != (right == -1):
                raise CorruptModelError(f"node {i} has exactly one child")
            if left == -1:
                if not np.isfinite(self.value[i]):
                    raise CorruptModelError(f"leaf {i} has non-finite value")
                continue
            for child in (left, right):
                if not (0 <= child < n):
                    raise CorruptModelError(f"node {i} child index {child} out of range")
                if child <= i:
                    # children always follow parents in construction order
                    raise CorruptModelError(f"node {i} child index {child} not below parent")
                seen[child] += 1
            f = int(self.feature[i])
            if not (0 <= f < n_features):
                raise CorruptModelError(f"node {i} feature index {f} out of range")
            if not np.isfinite(self.threshold[i]):
                raise CorruptModelError(f"node {i} has non-finite threshold")
            if self.cover[i] <= 0.0:
                raise CorruptModelError(f"internal node {i} has non-positive cover")
        if seen[0] != 0:
            raise CorruptModelError("root is referenced as a child")
        bad = np.flatnonzero(seen[1:] != 1)
        if bad.size:
            raise CorruptModelError(
                f"node {int(bad[0]) + 1} referenced {int(seen[bad[0] + 1])} times; tree must be a proper binary tree"
            )


@dataclass(frozen=True)
class Ensemble:
    mode: str
    base_score: float
    learning_rate: float
    trees: tuple[RegressionTree, ...]
    feature_names: tuple[str, ...]
    target_scale: TargetScale = TargetScale.TRANSFORMED_LOG
    training_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in (MODE_GBDT, MODE_EXTRATREES):
            raise CorruptModelError(f"unknown ensemble mode {self.mode!r}")
        object.__setattr__(self, "trees", tuple(self.trees))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def tree_weight(self) -> float:
        """Weight applied to each tree's output under the combination rule."""
        if self.mode == MODE_GBDT:
            return self.learning_rate
        return 1.0 / len(self.trees) if self.trees else 0.0

    @property
    def max_depth_reached(self) -> int:
        return max((t.max_depth_reached for t in self.trees), default=0)

    def validate(self) -> None:
        if not np.isfinite(self.base_score):
            raise CorruptModelError("non-finite base_score")
        if not np.isfinite(self.learning_rate) or self.learning_rate <= 0:
            raise CorruptModelError("learning_rate must be positive and finite")
        if len(set(self.feature_names)) != len(self.feature_names):
            raise CorruptModelError("duplicate feature names")
        if any(not n for n in self.feature_names):
            raise CorruptModelError("empty feature name")
        for t in self.trees:
            t.validate(len(self.feature_names))


def pack_ensemble(model: Ensemble):
    """Concatenate trees into flat arrays with global child indices.

    The result is cached on the model (immutable after construction), so
    repeated predict/attribution calls skip the repacking work.
    """
    cached = getattr(model, "_packed_cache", None)
    if cached is not None:
        return cached
    n_trees = len(model.trees)
    tree_off = np.zeros(n_trees + 1, dtype=np.int64)
    for t, tree in enumerate(model.trees):
        tree_off[t + 1] = tree_off[t] + tree.n_nodes
    total = int(tree_off[-1])
    cl = np.empty(total, dtype=np.int32)
    cr = np.empty(total, dtype=np.int32)
    feat = np.empty(total, dtype=np.int32)
    thr = np.empty(total, dtype=np.float64)
    dl = np.empty(total, dtype=np.bool_)
    val = np.empty(total, dtype=np.float64)
    cov = np.empty(total, dtype=np.float64)
    for t, tree in enumerate(model.trees):
        a, b = int(tree_off[t]), int(tree_off[t + 1])
        leaf = tree.children_left == -1
        cl[a:b] = np.where(leaf, -1, tree.children_left + a).astype(np.int32)
        cr[a:b] = np.where(leaf, -1, tree.children_right + a).astype(np.int32)
        feat[a:b] = tree.feature
        thr[a:b] = tree.threshold
        dl[a:b] = tree.default_left
        val[a:b] = tree.value
        cov[a:b] = tree.cover
    packed = (tree_off, feat, thr, dl, cl, cr, val, cov)
    object.__setattr__(model, "_packed_cache", packed)
    return packed


def _resolve_matrix(model: Ensemble, table) -> np.ndarray:
    """Gather the model's feature columns, by name, from a table or matrix."""
    if isinstance(table, FeatureTable):
        pos = {n: j for j, n in enumerate(table.names)}
        missing = [n for n in model.feature_names if n not in pos]
        if missing:
            raise MissingFeatureError(missing)
        cols = [pos[n] for n in model.feature_names]
        return np.ascontiguousarray(table.values[:, cols])
    x = np.asarray(table, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionMismatchError("prediction input must be 2-D")
    if x.shape[1] != len(model.feature_names):
        raise DimensionMismatchError(
            f"model expects {len(model.feature_names)} columns, got {x.shape[1]}"
        )
    return np.ascontiguousarray(x)


def predict(model: Ensemble, table) -> np.ndarray:
    """Model output per row, on the model's training target scale."""
    x = _resolve_matrix(model, table)
    if not model.trees:
        return np.full(x.shape[0], model.base_score, dtype=np.float64)
    packed = pack_ensemble(model)
    tree_off, feat, thr, dl, cl, cr, val, _ = packed
    return _kernels.predict_kernel(x, tree_off, feat, thr, dl, cl, cr, val,
                                   float(model.base_score), float(model.learning_rate),
                                   model.mode == MODE_EXTRATREES)


def predict_per_tree(model: Ensemble, table) -> np.ndarray:
    """Raw unweighted per-tree outputs, shape (n_trees, n_rows)."""
    x = _resolve_matrix(model, table)
    tree_off, feat, thr, dl, cl, cr, val, _ = pack_ensemble(model)
    if not model.trees:
        return np.empty((0, x.shape[0]), dtype=np.float64)
    return _kernels.predict_per_tree_kernel(x, tree_off, feat, thr, dl, cl, cr, val)
