"""Regression error metrics, overall and per landcover class.

All reported errors are in original target units: evaluate() inverse-transforms
model outputs before computing anything.  MAPE requires strictly positive
targets and fails hard on zeros rather than fudging with an epsilon.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import TargetScale, TargetVector, inverse_transform_values
from .errors import (
    EmptyInputError,
    LengthMismatchError,
    ZeroTargetError,
    ZeroVarianceError,
)


def _check_pair(y, yhat):
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if y.shape != yhat.shape or y.ndim != 1:
        raise LengthMismatchError(f"shapes differ: {y.shape} vs {yhat.shape}")
    if y.size == 0:
        raise EmptyInputError("metrics need at least one value")
    if not (np.isfinite(y).all() and np.isfinite(yhat).all()):
        raise LengthMismatchError("metric inputs must be finite")
    return y, yhat


def rmse(y, yhat) -> float:
    y, yhat = _check_pair(y, yhat)
    return float(np.sqrt(np.mean((y - yhat) ** 2)))


def mae(y, yhat) -> float:
    y, yhat = _check_pair(y, yhat)
    return float(np.mean(np.abs(y - yhat)))


def mape(y, yhat) -> float:
    """Mean absolute percentage error, in percent."""
    y, yhat = _check_pair(y, yhat)
    zeros = y == 0.0
    if zeros.any():
        raise ZeroTargetError(int(np.argmax(zeros)))
    return float(100.0 * np.mean(np.abs(y - yhat) / np.abs(y)))


def r2(y, yhat) -> float:
    y, yhat = _check_pair(y, yhat)
    if y.size < 2:
        raise ZeroVarianceError("r2 needs at least two values")
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    if ss_tot == 0.0:
        raise ZeroVarianceError("r2 undefined for a constant target")
    ss_res = float(np.sum((y - yhat) ** 2))
    return 1.0 - ss_res / ss_tot


@dataclass(frozen=True)
class GroupMetrics:
    rmse: float
    mae: float
    mape_percent: float
    r2: float | None
    n: int

    def to_dict(self) -> dict:
        return {
            "rmse": self.rmse,
            "mae": self.mae,
            "mape_percent": self.mape_percent,
            "r2": self.r2,
            "n": self.n,
        }


@dataclass(frozen=True)
class EvalReport:
    """Errors in original units, overall and per landcover class."""

    overall: GroupMetrics
    per_class: dict[str, GroupMetrics]
    n_total: int

    def to_dict(self) -> dict:
        return {
            "scale": "original",
            "n_total": self.n_total,
            "overall": self.overall.to_dict(),
            "per_class": {c: m.to_dict() for c, m in sorted(self.per_class.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def table_row(self, method: str, features: str, parameters: str) -> dict:
        """One comparison-table row: method, per-class MAPE/MAE, provenance tags."""
        row = {"method": method, "mape_total": self.overall.mape_percent}
        for c in sorted(self.per_class):
            row[f"mape_{c}"] = self.per_class[c].mape_percent
        row["mae_total"] = self.overall.mae
        for c in sorted(self.per_class):
            row[f"mae_{c}"] = self.per_class[c].mae
        row["features"] = features
        row["parameters"] = parameters
        return row


def _group_metrics(y, yhat) -> GroupMetrics:
    n = y.size
    if n >= 2 and np.ptp(y) > 0.0:
        r2_val = r2(y, yhat)
    else:
        r2_val = None
    return GroupMetrics(rmse(y, yhat), mae(y, yhat), mape(y, yhat), r2_val, int(n))


def evaluate(y_true: TargetVector, y_pred_transformed, labels) -> EvalReport:
    """Score transformed-scale predictions against original-scale targets."""
    if y_true.scale is not TargetScale.ORIGINAL:
        raise LengthMismatchError("evaluate expects original-scale targets")
    yhat = inverse_transform_values(np.asarray(y_pred_transformed, dtype=np.float64))
    y = y_true.values
    labels = list(labels)
    if len(labels) != y.size or yhat.size != y.size:
        raise LengthMismatchError(
            f"lengths differ: target={y.size}, predictions={yhat.size}, labels={len(labels)}"
        )
    label_arr = np.asarray(labels)
    per_class = {}
    for c in sorted(set(labels)):
        mask = label_arr == c
        per_class[c] = _group_metrics(y[mask], yhat[mask])
    return EvalReport(_group_metrics(y, yhat), per_class, int(y.size))
