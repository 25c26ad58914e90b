"""End-to-end batch pipeline: ingest, split, select, tune, train, evaluate.

Every stage reads and writes plain files under a working directory, so each
arrow of the workflow can be rerun and audited on its own.  All artifacts are
deterministic for fixed seeds (no timestamps, sorted JSON keys, repr floats)
and are written to a temp path then promoted atomically; a lock file guards
the workdir against concurrent runs.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import __version__
from .binning import bin_features
from .data import Dataset, load_csv, transform_target
from .ensemble import Ensemble, predict
from .errors import SchemaMismatchError, SoilNitroError
from .extra_trees import ExtraTreesParams, train_extratrees
from .gbdt import GbdtParams, train_gbdt
from .metrics import EvalReport, evaluate
from .persist import load_model, save_model
from .shap_values import FeatureRanking, rank_features, select_top_k, tree_shap
from .splitting import SplitIndices, stratified_split
from .tuning import (
    Categorical,
    Continuous,
    Integer,
    ParamSpace,
    Trial,
    TunerConfig,
    apply_params,
    default_gbdt_space,
    tune,
)

DEFAULT_COMPARE_SPACE = ParamSpace((
    Continuous("learning_rate", 0.02, 0.3, log_scale=True),
    Integer("n_trees", 100, 400),
    Integer("max_depth", 3, 8),
    Continuous("min_child_weight", 0.1, 10.0, log_scale=True),
    Continuous("l2_lambda", 0.1, 30.0, log_scale=True),
    Continuous("subsample_rows", 0.7, 1.0),
    Continuous("subsample_cols", 0.5, 1.0),
))

EXTRATREES_TUNE_SPACE = ParamSpace((
    Integer("n_trees", 60, 160),
    Integer("min_samples_leaf", 1, 8),
    Integer("n_candidate_features", 10, 50),
))


def space_to_jsonable(space: ParamSpace) -> list:
    out = []
    for d in space.dims:
        if isinstance(d, Continuous):
            out.append({"type": "continuous", "name": d.name, "low": d.low,
                        "high": d.high, "log_scale": d.log_scale})
        elif isinstance(d, Integer):
            out.append({"type": "integer", "name": d.name, "low": d.low, "high": d.high})
        elif isinstance(d, Categorical):
            out.append({"type": "categorical", "name": d.name, "choices": list(d.choices)})
        else:
            raise SoilNitroError(f"unknown dimension type {type(d).__name__}")
    return out


def space_from_jsonable(items) -> ParamSpace:
    dims = []
    for it in items:
        kind = it.get("type")
        if kind == "continuous":
            dims.append(Continuous(it["name"], float(it["low"]), float(it["high"]),
                                   bool(it.get("log_scale", False))))
        elif kind == "integer":
            dims.append(Integer(it["name"], int(it["low"]), int(it["high"])))
        elif kind == "categorical":
            dims.append(Categorical(it["name"], tuple(it["choices"])))
        else:
            raise SoilNitroError(f"unknown dimension type {kind!r} in space document")
    return ParamSpace(tuple(dims))


@dataclass(frozen=True)
class PipelineConfig:
    dataset: str = ""
    workdir: str = ""
    target_column: str = "nitrogen"
    landcover_column: str = "landcover"
    id_column: str | None = None
    test_fraction: float = 0.15
    k_folds: int = 5
    fold_bins: int = 10
    top_k_features: int = 50
    n_trials: int = 50
    n_startup: int = 10
    gamma: float = 0.25
    n_candidates: int = 24
    seed: int = 0
    landcover_filter: str | None = None
    compare_trials: int = 12
    compare_et_trials: int = 6
    space: ParamSpace = field(default_factory=default_gbdt_space)

    def tuner_config(self, n_trials: int | None = None) -> TunerConfig:
        return TunerConfig(
            n_trials=self.n_trials if n_trials is None else n_trials,
            n_startup=min(self.n_startup, self.n_trials if n_trials is None else n_trials),
            gamma=self.gamma,
            n_candidates=self.n_candidates,
            k_folds=self.k_folds,
            fold_bins=self.fold_bins,
            seed=self.seed,
        )

    def base_params(self) -> GbdtParams:
        return GbdtParams(seed=self.seed)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["space"] = space_to_jsonable(self.space)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        doc = dict(doc)
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise SoilNitroError(f"unknown config keys: {sorted(unknown)}")
        if "space" in doc and not isinstance(doc["space"], ParamSpace):
            doc["space"] = space_from_jsonable(doc["space"])
        return cls(**doc)

    def merged(self, overrides: dict) -> "PipelineConfig":
        overrides = {k: v for k, v in overrides.items() if v is not None}
        if "space" in overrides and not isinstance(overrides["space"], ParamSpace):
            overrides["space"] = space_from_jsonable(overrides["space"])
        return replace(self, **overrides)


# --- deterministic artifact io ---

def write_text_atomic(path, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@contextmanager
def workdir_lock(workdir):
    os.makedirs(workdir, exist_ok=True)
    lock_path = os.path.join(workdir, ".lock")
    try:
        fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise SoilNitroError(
            f"workdir {workdir} is locked by another run (remove {lock_path} if stale)"
        ) from None
    try:
        os.close(fd)
        yield
    finally:
        if os.path.exists(lock_path):
            os.remove(lock_path)


def trials_to_csv(history: list[Trial], fold_hash: str | None = None) -> str:
    """Trial history as CSV: index, params, per-fold scores, mean score."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if not history:
        writer.writerow(["index", "score"])
        return buf.getvalue()
    param_names = sorted(history[0].params)
    k = len(history[0].fold_scores)
    header = ["index"] + param_names + [f"fold_{i}_rmse" for i in range(k)] + ["mean_rmse", "seed"]
    if fold_hash is not None:
        header.append("fold_hash")
    writer.writerow(header)
    for t in history:
        row = [t.index]
        row += [repr(float(t.params[p])) if isinstance(t.params[p], float) else t.params[p]
                for p in param_names]
        row += [repr(float(s)) for s in t.fold_scores]
        row += [repr(float(t.score)), t.seed]
        if fold_hash is not None:
            row.append(fold_hash)
        writer.writerow(row)
    return buf.getvalue()


def report_table_csv(rows: list[dict]) -> str:
    """Rows shaped like the accuracy comparison table, one method per line."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = list(rows[0].keys())
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in row.values()])
    return buf.getvalue()


# --- pipeline stages ---

def load_dataset(cfg: PipelineConfig) -> Dataset:
    ds = load_csv(cfg.dataset, cfg.target_column, cfg.landcover_column, cfg.id_column)
    if cfg.landcover_filter:
        ds = ds.filter_landcover(cfg.landcover_filter)
    return ds


def select_features(ds_train: Dataset, cfg: PipelineConfig) -> tuple[FeatureRanking, tuple[str, ...]]:
    """Default-parameter GBDT fit, SHAP over the training split, top-k names."""
    binned = bin_features(ds_train.features, cfg.base_params().n_bins)
    model = train_gbdt(binned, ds_train.target.values, cfg.base_params(),
                       feature_names=ds_train.features.names)
    shap = tree_shap(model, ds_train.features)
    ranking = rank_features(shap)
    selected = select_top_k(ranking, cfg.top_k_features)
    return ranking, selected


def _artifact_paths(workdir) -> dict:
    names = {
        "split": "split.json",
        "ranking": "shap_ranking.csv",
        "selected": "selected_features.json",
        "trials": "trials.csv",
        "best_params": "best_params.json",
        "model": "model.json",
        "report": "report.json",
        "report_row": "report_row.csv",
        "manifest": "manifest.json",
    }
    return {k: os.path.join(workdir, v) for k, v in names.items()}


def run_pipeline(cfg: PipelineConfig, log=None) -> EvalReport:
    """Execute the full workflow and write all artifacts under cfg.workdir."""
    def say(msg):
        if log:
            log(msg)

    paths = _artifact_paths(cfg.workdir)
    with workdir_lock(cfg.workdir):
        say(f"loading {cfg.dataset}")
        ds = load_dataset(cfg)
        ds_t = ds.with_target(transform_target(ds.target))

        say("splitting by landcover")
        split = stratified_split(ds_t, cfg.test_fraction, cfg.seed)
        write_text_atomic(paths["split"], split.to_json() + "\n")
        train = ds_t.take_rows(split.train)
        test = ds_t.take_rows(split.test)

        say("ranking features with TreeSHAP")
        ranking, selected = select_features(train, cfg)
        write_text_atomic(paths["ranking"], "\n".join(ranking.to_csv_lines()) + "\n")
        write_text_atomic(paths["selected"], json.dumps(list(selected)) + "\n")

        train_sel = replace(train, features=train.features.select(selected))

        say(f"tuning ({cfg.n_trials} trials, {cfg.k_folds}-fold CV)")
        best_map, history = tune(train_sel, cfg.space, cfg.tuner_config(),
                                 base_params=cfg.base_params())
        write_text_atomic(paths["trials"], trials_to_csv(history))
        write_text_atomic(paths["best_params"],
                          json.dumps(best_map, sort_keys=True, default=float) + "\n")

        say("training final model")
        final_params = apply_params(cfg.base_params(), best_map)
        binned = bin_features(train_sel.features, final_params.n_bins)
        model = train_gbdt(binned, train_sel.target.values, final_params,
                           feature_names=train_sel.features.names)
        save_model(model, paths["model"])

        say("evaluating on the held-out split")
        preds = predict(model, test.features)
        report = evaluate(ds.target.take(split.test), preds, test.landcover)
        write_text_atomic(paths["report"], report.to_json() + "\n")
        features_tag = "selected" if len(selected) < ds.features.n_cols else "all"
        row = report.table_row("gbdt", features_tag, "optimized")
        write_text_atomic(paths["report_row"], report_table_csv([row]))

        _write_manifest(cfg, paths, command="run")
        say("done")
    return report


def _write_manifest(cfg: PipelineConfig, paths: dict, command: str,
                    extra_outputs: dict | None = None) -> None:
    outputs = {}
    for key, p in paths.items():
        if key != "manifest" and os.path.exists(p):
            outputs[os.path.basename(p)] = sha256_file(p)
    for name, p in (extra_outputs or {}).items():
        outputs[name] = sha256_file(p)
    manifest = {
        "command": command,
        "package_version": __version__,
        "config": cfg.to_dict(),
        "inputs": {os.path.basename(cfg.dataset): sha256_file(cfg.dataset)}
        if cfg.dataset and os.path.exists(cfg.dataset) else {},
        "seed": cfg.seed,
        "outputs": outputs,
    }
    write_text_atomic(paths["manifest"], json.dumps(manifest, sort_keys=True, indent=2) + "\n")


# --- model comparison grid (two trainers x three regimes) ---

def _fit_gbdt(ds: Dataset, params: GbdtParams) -> Ensemble:
    binned = bin_features(ds.features, params.n_bins)
    return train_gbdt(binned, ds.target.values, params, feature_names=ds.features.names)


def _fit_extratrees(ds: Dataset, params: ExtraTreesParams) -> Ensemble:
    return train_extratrees(ds.features, ds.target.values, params)


def run_compare(cfg: PipelineConfig, log=None) -> list[dict]:
    """Both trainers under all/default, selected/default, selected/optimized.

    Emits one comparison-table row per (trainer, regime) into compare.csv.
    The optimized regime tunes each trainer with a budget bounded by
    cfg.compare_trials / cfg.compare_et_trials so the grid stays batch-sized.
    """
    def say(msg):
        if log:
            log(msg)

    workdir = cfg.workdir
    paths = {"manifest": os.path.join(workdir, "manifest.json")}
    compare_path = os.path.join(workdir, "compare.csv")
    with workdir_lock(workdir):
        say(f"loading {cfg.dataset}")
        ds = load_dataset(cfg)
        ds_t = ds.with_target(transform_target(ds.target))
        split = stratified_split(ds_t, cfg.test_fraction, cfg.seed)
        train = ds_t.take_rows(split.train)
        test = ds_t.take_rows(split.test)
        y_test = ds.target.take(split.test)

        say("ranking features with TreeSHAP")
        _, selected = select_features(train, cfg)
        train_sel = replace(train, features=train.features.select(selected))

        et_default = ExtraTreesParams(n_trees=100, min_samples_leaf=2,
                                      n_candidate_features=0, seed=cfg.seed)

        def score(model: Ensemble) -> EvalReport:
            return evaluate(y_test, predict(model, test.features), test.landcover)

        rows = []

        say("regime all/default")
        rows.append(score(_fit_gbdt(train, cfg.base_params()))
                    .table_row("gbdt", "all", "default"))
        rows.append(score(_fit_extratrees(train, et_default))
                    .table_row("extratrees", "all", "default"))

        say("regime selected/default")
        rows.append(score(_fit_gbdt(train_sel, cfg.base_params()))
                    .table_row("gbdt", "selected", "default"))
        rows.append(score(_fit_extratrees(train_sel, et_default))
                    .table_row("extratrees", "selected", "default"))

        say(f"regime selected/optimized (gbdt: {cfg.compare_trials} trials)")
        gb_cfg = cfg.tuner_config(n_trials=cfg.compare_trials)
        best_gb, _ = tune(train_sel, DEFAULT_COMPARE_SPACE, gb_cfg,
                          base_params=cfg.base_params())
        rows.append(score(_fit_gbdt(train_sel, apply_params(cfg.base_params(), best_gb)))
                    .table_row("gbdt", "selected", "optimized"))

        say(f"regime selected/optimized (extratrees: {cfg.compare_et_trials} trials)")
        et_space_dims = []
        for d in EXTRATREES_TUNE_SPACE.dims:
            if d.name == "n_candidate_features":
                hi = min(d.high, len(selected))
                et_space_dims.append(Integer(d.name, min(d.low, hi - 1), hi))
            else:
                et_space_dims.append(d)
        et_cfg = cfg.tuner_config(n_trials=cfg.compare_et_trials)
        best_et, _ = tune(train_sel, ParamSpace(tuple(et_space_dims)), et_cfg,
                          base_params=et_default)
        rows.append(score(_fit_extratrees(train_sel, apply_params(et_default, best_et)))
                    .table_row("extratrees", "selected", "optimized"))

        write_text_atomic(compare_path, report_table_csv(rows))
        _write_manifest(cfg, paths, command="compare",
                        extra_outputs={"compare.csv": compare_path})
        say("done")
    return rows
