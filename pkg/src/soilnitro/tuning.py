"""Bayesian hyperparameter search with a tree-structured Parzen estimator.

After a seeded random warmup, each suggestion splits the trial history at the
gamma quantile of the score into good and bad sets, fits per-dimension kernel
densities (truncated Gaussians in sampling scale for continuous and integer
dimensions, count smoothing for categorical ones), draws candidates from the
good density, and keeps the candidate with the highest good/bad density
ratio.  Scores are mean RMSEs over a fixed target-stratified k-fold
assignment computed once and shared by every trial, so trials stay
comparable.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .binning import bin_features
from .data import Dataset
from .ensemble import predict
from .errors import EmptySpaceError, FoldMismatchError, InvalidParamsError
from .extra_trees import ExtraTreesParams, train_extratrees
from .gbdt import GbdtParams, train_gbdt
from .metrics import rmse
from .splitting import FoldAssignment, stratified_kfold


@dataclass(frozen=True)
class Continuous:
    name: str
    low: float
    high: float
    log_scale: bool = False

    def validate(self):
        if not (self.low < self.high):
            raise InvalidParamsError(f"{self.name}: low must be < high")
        if self.log_scale and self.low <= 0:
            raise InvalidParamsError(f"{self.name}: log-scale dimensions need low > 0")


@dataclass(frozen=True)
class Integer:
    name: str
    low: int
    high: int

    def validate(self):
        if not (self.low < self.high):
            raise InvalidParamsError(f"{self.name}: low must be < high")


@dataclass(frozen=True)
class Categorical:
    name: str
    choices: tuple

    def validate(self):
        if len(self.choices) < 2:
            raise InvalidParamsError(f"{self.name}: need at least two choices")


@dataclass(frozen=True)
class ParamSpace:
    dims: tuple

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(self.dims))
        names = [d.name for d in self.dims]
        if len(set(names)) != len(names):
            raise InvalidParamsError("dimension names must be unique")
        for d in self.dims:
            d.validate()

    def __len__(self):
        return len(self.dims)


def default_gbdt_space() -> ParamSpace:
    return ParamSpace((
        Continuous("learning_rate", 0.01, 0.3, log_scale=True),
        Integer("n_trees", 100, 1000),
        Integer("max_depth", 3, 10),
        Continuous("min_child_weight", 0.1, 10.0, log_scale=True),
        Continuous("l2_lambda", 0.1, 30.0, log_scale=True),
        Continuous("subsample_rows", 0.6, 1.0),
        Continuous("subsample_cols", 0.5, 1.0),
    ))


@dataclass(frozen=True)
class Trial:
    params: dict
    score: float
    fold_scores: tuple[float, ...]
    index: int
    seed: int


@dataclass(frozen=True)
class TunerConfig:
    n_trials: int = 50
    n_startup: int = 10
    gamma: float = 0.25
    n_candidates: int = 24
    k_folds: int = 5
    fold_bins: int = 10
    seed: int = 0

    def validate(self):
        if self.n_trials < 1:
            raise InvalidParamsError("n_trials must be >= 1")
        # n_startup == n_trials is allowed: it degenerates to pure random search
        if not (1 <= self.n_startup <= self.n_trials):
            raise InvalidParamsError("need 1 <= n_startup <= n_trials")
        if not (0.0 < self.gamma < 1.0):
            raise InvalidParamsError("gamma must be in (0, 1)")
        if self.n_candidates < 1:
            raise InvalidParamsError("n_candidates must be >= 1")
        if self.k_folds < 2:
            raise InvalidParamsError("k_folds must be >= 2")
        if self.fold_bins < 1:
            raise InvalidParamsError("fold_bins must be >= 1")


# --- kernel density helpers (sampling scale) ---

_SQRT2 = math.sqrt(2.0)


def _norm_cdf(t: float) -> float:
    return 0.5 * (1.0 + math.erf(t / _SQRT2))


def _to_scale(dim, v: float) -> float:
    if isinstance(dim, Continuous) and dim.log_scale:
        return math.log(v)
    return float(v)


def _scale_bounds(dim) -> tuple[float, float]:
    if isinstance(dim, Continuous):
        if dim.log_scale:
            return math.log(dim.low), math.log(dim.high)
        return float(dim.low), float(dim.high)
    # integer: widen by half a step so rounding covers the end points
    return dim.low - 0.49, dim.high + 0.49


def _bandwidth(obs: np.ndarray, lo: float, hi: float) -> float:
    spread = hi - lo
    bw = 1.06 * float(np.std(obs)) * obs.size ** -0.2
    bw = max(bw, spread / 100.0, 1e-12)
    return min(bw, spread)


def _kde_logpdf(v: float, obs: np.ndarray, bw: float, lo: float, hi: float) -> float:
    z = (v - obs) / bw
    dens = np.exp(-0.5 * z * z) / (bw * math.sqrt(2.0 * math.pi))
    norm = np.empty(obs.size)
    for i, c in enumerate(obs):
        norm[i] = _norm_cdf((hi - c) / bw) - _norm_cdf((lo - c) / bw)
    norm = np.maximum(norm, 1e-12)
    return math.log(max(float(np.mean(dens / norm)), 1e-300))


def _draw_from_kde(rng, obs: np.ndarray, bw: float, lo: float, hi: float) -> float:
    center = float(obs[rng.integers(obs.size)])
    for _ in range(100):
        v = rng.normal(center, bw)
        if lo <= v <= hi:
            return float(v)
    return float(min(max(center, lo), hi))


def _uniform_sample(rng, dim):
    if isinstance(dim, Continuous):
        if dim.log_scale:
            return float(math.exp(rng.uniform(math.log(dim.low), math.log(dim.high))))
        return float(rng.uniform(dim.low, dim.high))
    if isinstance(dim, Integer):
        return int(rng.integers(dim.low, dim.high + 1))
    return dim.choices[int(rng.integers(len(dim.choices)))]


def _finalize(dim, v_scaled: float):
    if isinstance(dim, Continuous):
        out = math.exp(v_scaled) if dim.log_scale else v_scaled
        return float(min(max(out, dim.low), dim.high))
    return int(min(max(round(v_scaled), dim.low), dim.high))


def suggest(history, space: ParamSpace, cfg: TunerConfig) -> dict:
    """Propose the next configuration; deterministic for fixed (history, seed)."""
    if len(space) == 0:
        raise EmptySpaceError("parameter space has no dimensions")
    rng = np.random.default_rng([int(cfg.seed), len(history)])
    if len(history) < max(cfg.n_startup, 2):
        return {d.name: _uniform_sample(rng, d) for d in space.dims}

    scores = np.asarray([t.score for t in history])
    order = np.argsort(scores, kind="stable")
    n_good = max(1, int(math.ceil(cfg.gamma * len(history))))
    n_good = min(n_good, len(history) - 1)
    good = [history[i] for i in order[:n_good]]
    bad = [history[i] for i in order[n_good:]]

    best_key = -math.inf
    best = None
    for _ in range(cfg.n_candidates):
        cand = {}
        key = 0.0
        for dim in space.dims:
            if isinstance(dim, Categorical):
                k = len(dim.choices)
                cg = np.array([sum(1 for t in good if t.params[dim.name] == c) for c in dim.choices], float)
                cb = np.array([sum(1 for t in bad if t.params[dim.name] == c) for c in dim.choices], float)
                pg = (cg + 1.0) / (cg.sum() + k)
                pb = (cb + 1.0) / (cb.sum() + k)
                pick = int(rng.choice(k, p=pg))
                cand[dim.name] = dim.choices[pick]
                key += math.log(pg[pick]) - math.log(pb[pick])
            else:
                lo, hi = _scale_bounds(dim)
                obs_g = np.array([_to_scale(dim, t.params[dim.name]) for t in good])
                obs_b = np.array([_to_scale(dim, t.params[dim.name]) for t in bad])
                bw_g = _bandwidth(obs_g, lo, hi)
                bw_b = _bandwidth(obs_b, lo, hi)
                v = _draw_from_kde(rng, obs_g, bw_g, lo, hi)
                value = _finalize(dim, v)
                cand[dim.name] = value
                v_eval = _to_scale(dim, value)
                key += _kde_logpdf(v_eval, obs_g, bw_g, lo, hi)
                key -= _kde_logpdf(v_eval, obs_b, bw_b, lo, hi)
        if key > best_key:
            best_key = key
            best = cand
    return best


def apply_params(base, params: dict):
    """Overlay a suggestion onto a GbdtParams/ExtraTreesParams instance."""
    known = {f.name for f in fields(base)}
    unknown = set(params) - known
    if unknown:
        raise InvalidParamsError(f"space names unknown to {type(base).__name__}: {sorted(unknown)}")
    return replace(base, **params)


class _FoldEvaluator:
    """Per-fold training/validation views with binned-table caching.

    Binning depends only on the training rows and n_bins, both constant
    across trials, so rebinning every trial would be pure waste.  Folds are
    independent trainings over read-only data; the compiled kernels release
    the GIL, so folds evaluate on a small thread pool.  Scores are collected
    in fold order, keeping results identical to a sequential run.
    """

    def __init__(self, ds: Dataset, folds: FoldAssignment):
        if folds.n_rows != ds.n_rows:
            raise FoldMismatchError(
                f"fold assignment covers {folds.n_rows} rows, dataset has {ds.n_rows}"
            )
        self.folds = []
        for f in range(folds.k):
            tr, va = folds.fold_indices(f)
            self.folds.append({
                "train_ft": ds.features.take_rows(tr),
                "train_y": ds.target.values[tr],
                "valid_ft": ds.features.take_rows(va),
                "valid_y": ds.target.values[va],
                "binned": {},
            })
        self._workers = max(1, min(len(self.folds), os.cpu_count() or 1))

    def _score_fold(self, fd, params) -> float:
        if isinstance(params, GbdtParams):
            model = train_gbdt(fd["binned"][params.n_bins], fd["train_y"], params,
                               feature_names=fd["train_ft"].names)
        elif isinstance(params, ExtraTreesParams):
            model = train_extratrees(fd["train_ft"], fd["train_y"], params)
        else:
            raise InvalidParamsError(
                f"no trainer for params of type {type(params).__name__}"
            )
        return rmse(fd["valid_y"], predict(model, fd["valid_ft"]))

    def evaluate(self, params, trial_index: int, trial_seed: int) -> Trial:
        if isinstance(params, GbdtParams):
            for fd in self.folds:
                if params.n_bins not in fd["binned"]:
                    fd["binned"][params.n_bins] = bin_features(fd["train_ft"], params.n_bins)
        if self._workers > 1:
            with ThreadPoolExecutor(max_workers=self._workers) as pool:
                fold_scores = list(pool.map(lambda fd: self._score_fold(fd, params),
                                            self.folds))
        else:
            fold_scores = [self._score_fold(fd, params) for fd in self.folds]
        return Trial(
            params=asdict(params),
            score=float(np.mean(fold_scores)),
            fold_scores=tuple(fold_scores),
            index=trial_index,
            seed=trial_seed,
        )


def cross_validate(ds: Dataset, params, folds: FoldAssignment,
                   trial_index: int = 0, trial_seed: int = 0) -> Trial:
    """Mean held-out RMSE (transformed scale) over the fold assignment."""
    return _FoldEvaluator(ds, folds).evaluate(params, trial_index, trial_seed)


def tune(ds: Dataset, space: ParamSpace, cfg: TunerConfig,
         base_params=None) -> tuple[dict, list[Trial]]:
    """Run cfg.n_trials suggest/evaluate rounds; returns (best params, history).

    The stratified fold assignment is computed once from cfg and reused by
    every trial.
    """
    cfg.validate()
    if len(space) == 0:
        raise EmptySpaceError("parameter space has no dimensions")
    if base_params is None:
        base_params = GbdtParams()
    folds = stratified_kfold(ds.target, cfg.k_folds, cfg.fold_bins, cfg.seed)
    evaluator = _FoldEvaluator(ds, folds)

    history: list[Trial] = []
    for i in range(cfg.n_trials):
        suggestion = suggest(history, space, cfg)
        params = apply_params(base_params, suggestion)
        trial_seed = (int(cfg.seed) * 1000003 + i) & 0x7FFFFFFF
        trial = evaluator.evaluate(params, i, trial_seed)
        # record only the tuned dimensions so the history mirrors the space
        history.append(replace(trial, params=dict(suggestion)))
    best = min(history, key=lambda t: (t.score, t.index))
    return dict(best.params), history
