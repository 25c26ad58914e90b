"""Model file save/load with an exact prediction round trip.

The on-disk format is a JSON document; floats are emitted through Python's
shortest-round-trip repr, so deserialize(serialize(m)) reproduces every
threshold and leaf value bit for bit.  load() validates every structural
invariant and rejects broken files instead of repairing them.
"""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np

from .data import TargetScale
from .ensemble import MODE_EXTRATREES, MODE_GBDT, Ensemble, RegressionTree
from .errors import CorruptModelError, UnsupportedVersionError

FORMAT_VERSION = 1


def _fingerprint(model: Ensemble) -> dict:
    h = hashlib.sha256("\n".join(model.feature_names).encode("utf-8")).hexdigest()
    return {
        "n_rows": model.training_meta.get("n_rows"),
        "feature_names_sha256": h,
    }


def _tree_to_records(tree: RegressionTree) -> list[dict]:
    records = []
    for i in range(tree.n_nodes):
        leaf = tree.children_left[i] == -1
        records.append({
            "kind": "leaf" if leaf else "split",
            "feature": int(tree.feature[i]),
            "threshold": float(tree.threshold[i]),
            "default_left": bool(tree.default_left[i]),
            "left": int(tree.children_left[i]),
            "right": int(tree.children_right[i]),
            "value": float(tree.value[i]),
            "cover": float(tree.cover[i]),
        })
    return records


def _tree_from_records(records, tree_idx: int) -> RegressionTree:
    if not isinstance(records, list) or not records:
        raise CorruptModelError(f"tree {tree_idx} has no node records")
    n = len(records)
    cl = np.empty(n, np.int32)
    cr = np.empty(n, np.int32)
    feat = np.empty(n, np.int32)
    thr = np.empty(n, np.float64)
    dl = np.empty(n, np.bool_)
    val = np.empty(n, np.float64)
    cov = np.empty(n, np.float64)
    for i, rec in enumerate(records):
        try:
            kind = rec["kind"]
            cl[i] = int(rec["left"])
            cr[i] = int(rec["right"])
            feat[i] = int(rec["feature"])
            thr[i] = float(rec["threshold"])
            dl[i] = bool(rec["default_left"])
            val[i] = float(rec["value"])
            cov[i] = float(rec["cover"])
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptModelError(f"tree {tree_idx} node {i}: bad record ({exc})") from None
        if kind not in ("split", "leaf"):
            raise CorruptModelError(f"tree {tree_idx} node {i}: unknown kind {kind!r}")
        if (kind == "leaf") != (cl[i] == -1):
            raise CorruptModelError(f"tree {tree_idx} node {i}: kind disagrees with children")
    return RegressionTree(cl, cr, feat, thr, dl, val, cov)


def model_to_dict(model: Ensemble) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "mode": model.mode,
        "base_score": float(model.base_score),
        "learning_rate": float(model.learning_rate),
        "target_transform": {"scale_factor": 100, "log": "natural"},
        "target_scale": model.target_scale.value,
        "selected_features": list(model.feature_names),
        "trees": [{"nodes": _tree_to_records(t)} for t in model.trees],
        "training_meta": {**model.training_meta, "data_fingerprint": _fingerprint(model)},
    }


def save_model(model: Ensemble, path) -> None:
    """Validate and write the model as a deterministic JSON document.

    The file is written to a temp path and promoted atomically, so a crashed
    save never leaves a truncated model behind.
    """
    model.validate()
    doc = model_to_dict(model)
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
        fh.write("\n")
    os.replace(tmp, path)


def model_from_dict(doc: dict) -> Ensemble:
    if not isinstance(doc, dict):
        raise CorruptModelError("model document must be a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(version)
    try:
        mode = doc["mode"]
        base_score = float(doc["base_score"])
        learning_rate = float(doc["learning_rate"])
        names = doc["selected_features"]
        tree_docs = doc["trees"]
        scale = TargetScale(doc["target_scale"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptModelError(f"missing or malformed field: {exc}") from None
    if mode not in (MODE_GBDT, MODE_EXTRATREES):
        raise CorruptModelError(f"unknown mode {mode!r}")
    if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
        raise CorruptModelError("selected_features must be a list of strings")
    if not isinstance(tree_docs, list):
        raise CorruptModelError("trees must be a list")
    trees = []
    for t, td in enumerate(tree_docs):
        if not isinstance(td, dict) or "nodes" not in td:
            raise CorruptModelError(f"tree {t} lacks a nodes list")
        trees.append(_tree_from_records(td["nodes"], t))
    meta = doc.get("training_meta") or {}
    model = Ensemble(
        mode=mode,
        base_score=base_score,
        learning_rate=learning_rate,
        trees=tuple(trees),
        feature_names=tuple(names),
        target_scale=scale,
        training_meta=meta if isinstance(meta, dict) else {},
    )
    model.validate()
    return model


def load_model(path) -> Ensemble:
    """Read and fully validate a model file."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptModelError(f"invalid JSON: {exc}") from None
    return model_from_dict(doc)
