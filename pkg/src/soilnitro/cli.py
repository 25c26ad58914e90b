"""Batch command-line interface.

Every stage of the workflow is a subcommand that reads and writes plain
files, so the whole pipeline can run end to end (``run``) or one arrow at a
time (``split``, ``select``, ``tune``, ``train``, ``evaluate``).  All
commands are deterministic under fixed seeds and write a manifest with input
and output hashes.
"""

from __future__ import annotations

import functools
import json
import os
from dataclasses import replace

import click
import numpy as np

from . import __version__
from .binning import bin_features
from .data import (
    TargetScale,
    inverse_transform_values,
    load_csv,
    load_feature_csv,
    transform_target,
    write_csv,
)
from .ensemble import predict
from .errors import MissingFeatureError, SchemaMismatchError, SoilNitroError
from .gbdt import train_gbdt
from .metrics import evaluate
from .persist import load_model, save_model
from .pipeline import (
    PipelineConfig,
    _artifact_paths,
    _write_manifest,
    report_table_csv,
    run_compare,
    run_pipeline,
    select_features,
    sha256_file,
    space_from_jsonable,
    trials_to_csv,
    write_text_atomic,
)
from .shap_values import select_top_k
from .splitting import SplitIndices, stratified_split
from .synth import SynthSpec, generate, oracle_r2_ceiling
from .tuning import apply_params, tune


def _fail_on_error(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except SoilNitroError as exc:
            raise click.ClickException(f"{fn.__name__}: {exc}") from exc
    return wrapper


def _config_from(config_path, **flags) -> PipelineConfig:
    base = PipelineConfig()
    if config_path:
        with open(config_path, "r", encoding="utf-8") as fh:
            base = PipelineConfig.from_dict(json.load(fh))
    return base.merged(flags)


def _dataset_options(fn):
    fn = click.option("--target-column", default=None, help="target column name (default: nitrogen)")(fn)
    fn = click.option("--landcover-column", default=None, help="landcover column name (default: landcover)")(fn)
    fn = click.option("--id-column", default=None, help="optional row-id column name")(fn)
    fn = click.option("--landcover-filter", default=None,
                      help="restrict to one landcover class before anything else")(fn)
    return fn


@click.group()
@click.version_option(__version__)
def main():
    """Soil-nitrogen tabular regression pipeline."""


@main.command("synth")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--rows", default=21244, show_default=True)
@click.option("--informative", default=10, show_default=True)
@click.option("--noise", default=74, show_default=True)
@click.option("--noise-sd", default=None, type=float, help="response noise sd (default 0.30)")
@click.option("--missing-rate", default=0.0, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--class-mix", default=None,
              help='e.g. "cropland=0.656,grassland=0.344" (default: the 2:1 crop/grass mix)')
@_fail_on_error
def cmd_synth(out, rows, informative, noise, noise_sd, missing_rate, seed, class_mix):
    """Generate a seeded synthetic dataset and write it as CSV."""
    kwargs = dict(n_rows=rows, n_informative=informative, n_noise=noise,
                  missing_rate=missing_rate, seed=seed)
    if noise_sd is not None:
        kwargs["noise_sd"] = noise_sd
    if class_mix:
        mix = {}
        for part in class_mix.split(","):
            name, _, frac = part.partition("=")
            mix[name.strip()] = float(frac)
        kwargs["class_mix"] = mix
    spec = SynthSpec(**kwargs)
    ds = generate(spec)
    write_csv(ds, out)
    _write_file_manifest("synth", out, {})
    click.echo(f"wrote {ds.n_rows} rows x {ds.features.n_cols} features to {out}")
    click.echo(f"noise ceiling R2: {oracle_r2_ceiling(spec):.4f}")


@main.command("split")
@click.option("--dataset", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--workdir", required=True, type=click.Path(file_okay=False))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--test-fraction", default=None, type=float)
@click.option("--seed", default=None, type=int)
@_dataset_options
@_fail_on_error
def cmd_split(dataset, workdir, config_path, test_fraction, seed, **dsflags):
    """Write the landcover-stratified train/test split for a dataset."""
    cfg = _config_from(config_path, dataset=dataset, workdir=workdir,
                       test_fraction=test_fraction, seed=seed, **dsflags)
    from .pipeline import load_dataset, workdir_lock

    paths = _artifact_paths(cfg.workdir)
    with workdir_lock(cfg.workdir):
        ds = load_dataset(cfg)
        split = stratified_split(ds, cfg.test_fraction, cfg.seed)
        write_text_atomic(paths["split"], split.to_json() + "\n")
        _write_manifest(cfg, paths, command="split")
    click.echo(f"split: {split.train.size} train / {split.test.size} test -> {paths['split']}")


@main.command("select")
@click.option("--dataset", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--workdir", required=True, type=click.Path(file_okay=False))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--top-k", "top_k_features", default=None, type=int)
@click.option("--seed", default=None, type=int)
@_dataset_options
@_fail_on_error
def cmd_select(dataset, workdir, config_path, top_k_features, seed, **dsflags):
    """Rank features by mean |SHAP| on the training split and keep the top k.

    Needs split.json in the workdir (run ``split`` first).
    """
    cfg = _config_from(config_path, dataset=dataset, workdir=workdir,
                       top_k_features=top_k_features, seed=seed, **dsflags)
    from .pipeline import load_dataset, workdir_lock

    paths = _artifact_paths(cfg.workdir)
    with workdir_lock(cfg.workdir):
        ds = load_dataset(cfg)
        ds_t = ds.with_target(transform_target(ds.target))
        split = _read_split(paths["split"])
        train = ds_t.take_rows(split.train)
        ranking, selected = select_features(train, cfg)
        write_text_atomic(paths["ranking"], "\n".join(ranking.to_csv_lines()) + "\n")
        write_text_atomic(paths["selected"], json.dumps(list(selected)) + "\n")
        _write_manifest(cfg, paths, command="select")
    click.echo(f"selected {len(selected)} features -> {paths['selected']}")


def _read_split(path) -> SplitIndices:
    if not os.path.exists(path):
        raise SoilNitroError(f"missing {path}; run the split stage first")
    with open(path, "r", encoding="utf-8") as fh:
        return SplitIndices.from_json(fh.read())


def _read_selected(path) -> list[str]:
    if not os.path.exists(path):
        raise SoilNitroError(f"missing {path}; run the select stage first")
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


@main.command("tune")
@click.option("--dataset", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--workdir", required=True, type=click.Path(file_okay=False))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--n-trials", default=None, type=int)
@click.option("--n-startup", default=None, type=int)
@click.option("--gamma", default=None, type=float)
@click.option("--n-candidates", default=None, type=int)
@click.option("--k-folds", default=None, type=int)
@click.option("--seed", default=None, type=int)
@_dataset_options
@_fail_on_error
def cmd_tune(dataset, workdir, config_path, n_trials, n_startup, gamma,
             n_candidates, k_folds, seed, **dsflags):
    """TPE-tune GBDT hyperparameters with stratified k-fold CV.

    Needs split.json and selected_features.json in the workdir.
    """
    cfg = _config_from(config_path, dataset=dataset, workdir=workdir,
                       n_trials=n_trials, n_startup=n_startup, gamma=gamma,
                       n_candidates=n_candidates, k_folds=k_folds, seed=seed, **dsflags)
    from .pipeline import load_dataset, workdir_lock

    paths = _artifact_paths(cfg.workdir)
    with workdir_lock(cfg.workdir):
        ds = load_dataset(cfg)
        ds_t = ds.with_target(transform_target(ds.target))
        split = _read_split(paths["split"])
        selected = _read_selected(paths["selected"])
        train = ds_t.take_rows(split.train)
        train_sel = replace(train, features=train.features.select(selected))
        best_map, history = tune(train_sel, cfg.space, cfg.tuner_config(),
                                 base_params=cfg.base_params())
        write_text_atomic(paths["trials"], trials_to_csv(history))
        write_text_atomic(paths["best_params"],
                          json.dumps(best_map, sort_keys=True, default=float) + "\n")
        _write_manifest(cfg, paths, command="tune")
    best_score = min(t.score for t in history)
    click.echo(f"best CV RMSE {best_score!r} over {len(history)} trials -> {paths['best_params']}")


@main.command("train")
@click.option("--dataset", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--workdir", required=True, type=click.Path(file_okay=False))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", default=None, type=int)
@_dataset_options
@_fail_on_error
def cmd_train(dataset, workdir, config_path, seed, **dsflags):
    """Train the final GBDT on the training split with tuned parameters.

    Uses best_params.json when present, otherwise the defaults; needs
    split.json and selected_features.json.
    """
    cfg = _config_from(config_path, dataset=dataset, workdir=workdir, seed=seed, **dsflags)
    from .pipeline import load_dataset, workdir_lock

    paths = _artifact_paths(cfg.workdir)
    with workdir_lock(cfg.workdir):
        ds = load_dataset(cfg)
        ds_t = ds.with_target(transform_target(ds.target))
        split = _read_split(paths["split"])
        selected = _read_selected(paths["selected"])
        train = ds_t.take_rows(split.train)
        train_sel = replace(train, features=train.features.select(selected))
        params = cfg.base_params()
        if os.path.exists(paths["best_params"]):
            with open(paths["best_params"], "r", encoding="utf-8") as fh:
                params = apply_params(params, json.load(fh))
        binned = bin_features(train_sel.features, params.n_bins)
        model = train_gbdt(binned, train_sel.target.values, params,
                           feature_names=train_sel.features.names)
        save_model(model, paths["model"])
        _write_manifest(cfg, paths, command="train")
    click.echo(f"trained {model.n_trees} trees -> {paths['model']}")


@main.command("evaluate")
@click.option("--dataset", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--workdir", required=True, type=click.Path(file_okay=False))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--subset", default="test", type=click.Choice(["test", "train", "all"]),
              show_default=True)
@_dataset_options
@_fail_on_error
def cmd_evaluate(dataset, workdir, config_path, subset, **dsflags):
    """Score the trained model; errors are reported in original units."""
    cfg = _config_from(config_path, dataset=dataset, workdir=workdir, **dsflags)
    from .pipeline import load_dataset, workdir_lock

    paths = _artifact_paths(cfg.workdir)
    with workdir_lock(cfg.workdir):
        ds = load_dataset(cfg)
        model = load_model(paths["model"])
        if model.target_scale is not TargetScale.TRANSFORMED_LOG:
            raise SchemaMismatchError("model was not trained on the transformed target scale")
        rows = _subset_rows(ds.n_rows, paths["split"], subset)
        sub = ds.take_rows(rows)
        try:
            preds = predict(model, sub.features)
        except MissingFeatureError as exc:
            raise SchemaMismatchError(str(exc)) from None
        report = evaluate(sub.target, preds, sub.landcover)
        write_text_atomic(paths["report"], report.to_json() + "\n")
        features_tag = "selected" if len(model.feature_names) < ds.features.n_cols else "all"
        row = report.table_row(model.mode, features_tag, "optimized"
                               if model.training_meta.get("params") else "default")
        write_text_atomic(paths["report_row"], report_table_csv([row]))
        _write_manifest(cfg, paths, command="evaluate")
    o = report.overall
    click.echo(f"n={report.n_total} rmse={o.rmse:.4f} mae={o.mae:.4f} "
               f"mape={o.mape_percent:.2f}% r2={o.r2 if o.r2 is None else round(o.r2, 4)}")


def _subset_rows(n_rows: int, split_path: str, subset: str) -> np.ndarray:
    if subset == "all":
        return np.arange(n_rows)
    split = _read_split(split_path)
    if split.n_rows != n_rows:
        raise SchemaMismatchError(
            f"split file covers {split.n_rows} rows but the dataset has {n_rows}"
        )
    return split.train if subset == "train" else split.test


@main.command("predict")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--dataset", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--id-column", default=None)
@_fail_on_error
def cmd_predict(model_path, dataset, out, id_column):
    """Predict soil nitrogen (original units) for novel data.

    Only the model's feature columns are read; extra columns are ignored.
    """
    model = load_model(model_path)
    try:
        ft, ids = load_feature_csv(dataset, model.feature_names, id_column)
    except MissingFeatureError as exc:
        raise SchemaMismatchError(str(exc)) from None
    _warn_on_fingerprint(model, ft.n_rows)
    raw = predict(model, ft)
    values = inverse_transform_values(raw) if model.target_scale is TargetScale.TRANSFORMED_LOG else raw
    lines = ["id,prediction"]
    for i, v in enumerate(values):
        rid = ids[i] if ids is not None else str(i)
        lines.append(f"{rid},{float(v)!r}")
    write_text_atomic(out, "\n".join(lines) + "\n")
    _write_file_manifest("predict", out, {"model": model_path, "dataset": dataset})
    click.echo(f"wrote {values.size} predictions to {out}")


@main.command("export-scatter")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--dataset", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--split-file", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--subset", default="all", type=click.Choice(["all", "train", "test"]),
              show_default=True)
@_dataset_options
@_fail_on_error
def cmd_export_scatter(model_path, dataset, out, split_file, subset, target_column,
                       landcover_column, id_column, landcover_filter):
    """Emit (id, landcover, observed, predicted) rows for external plotting."""
    model = load_model(model_path)
    ds = load_csv(dataset, target_column or "nitrogen", landcover_column or "landcover",
                  id_column)
    if landcover_filter:
        ds = ds.filter_landcover(landcover_filter)
    if subset != "all":
        if split_file is None:
            raise SoilNitroError("--subset train/test needs --split-file")
        split = _read_split(split_file)
        if split.n_rows != ds.n_rows:
            raise SchemaMismatchError(
                f"split file covers {split.n_rows} rows but the dataset has {ds.n_rows}"
            )
        ds = ds.take_rows(split.train if subset == "train" else split.test)
    _warn_on_fingerprint(model, ds.n_rows)
    try:
        raw = predict(model, ds.features)
    except MissingFeatureError as exc:
        raise SchemaMismatchError(str(exc)) from None
    pred = inverse_transform_values(raw) if model.target_scale is TargetScale.TRANSFORMED_LOG else raw
    lines = ["id,landcover,observed,predicted"]
    for i in range(ds.n_rows):
        rid = ds.ids[i] if ds.ids is not None else str(i)
        lines.append(f"{rid},{ds.landcover[i]},{float(ds.target.values[i])!r},{float(pred[i])!r}")
    write_text_atomic(out, "\n".join(lines) + "\n")
    _write_file_manifest("export-scatter", out, {"model": model_path, "dataset": dataset})
    click.echo(f"wrote {ds.n_rows} scatter rows to {out}")


def _warn_on_fingerprint(model, n_rows: int) -> None:
    meta = model.training_meta or {}
    fp = meta.get("data_fingerprint") or {}
    trained_rows = fp.get("n_rows") or meta.get("n_rows")
    if trained_rows is not None and n_rows != trained_rows:
        click.echo(
            f"note: scoring {n_rows} rows; the model was trained on {trained_rows}",
            err=True,
        )


def _write_file_manifest(command: str, out_path: str, inputs: dict) -> None:
    manifest = {
        "command": command,
        "package_version": __version__,
        "inputs": {os.path.basename(p): sha256_file(p) for p in inputs.values()},
        "outputs": {os.path.basename(out_path): sha256_file(out_path)},
    }
    write_text_atomic(out_path + ".manifest.json",
                      json.dumps(manifest, sort_keys=True, indent=2) + "\n")


@main.command("run")
@click.option("--dataset", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--workdir", required=True, type=click.Path(file_okay=False))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--test-fraction", default=None, type=float)
@click.option("--k-folds", default=None, type=int)
@click.option("--top-k", "top_k_features", default=None, type=int)
@click.option("--n-trials", default=None, type=int)
@click.option("--n-startup", default=None, type=int)
@click.option("--seed", default=None, type=int)
@_dataset_options
@_fail_on_error
def cmd_run(dataset, workdir, config_path, test_fraction, k_folds, top_k_features,
            n_trials, n_startup, seed, **dsflags):
    """Run the whole pipeline: split, select, tune, train, evaluate."""
    cfg = _config_from(config_path, dataset=dataset, workdir=workdir,
                       test_fraction=test_fraction, k_folds=k_folds,
                       top_k_features=top_k_features, n_trials=n_trials,
                       n_startup=n_startup, seed=seed, **dsflags)
    report = run_pipeline(cfg, log=click.echo)
    o = report.overall
    click.echo(f"test n={report.n_total} rmse={o.rmse:.4f} mae={o.mae:.4f} "
               f"mape={o.mape_percent:.2f}% r2={o.r2 if o.r2 is None else round(o.r2, 4)}")


@main.command("compare")
@click.option("--dataset", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--workdir", required=True, type=click.Path(file_okay=False))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--compare-trials", default=None, type=int)
@click.option("--compare-et-trials", default=None, type=int)
@click.option("--top-k", "top_k_features", default=None, type=int)
@click.option("--seed", default=None, type=int)
@_dataset_options
@_fail_on_error
def cmd_compare(dataset, workdir, config_path, compare_trials, compare_et_trials,
                top_k_features, seed, **dsflags):
    """Both trainers under the three regimes; emits a comparison-table CSV."""
    cfg = _config_from(config_path, dataset=dataset, workdir=workdir,
                       compare_trials=compare_trials, compare_et_trials=compare_et_trials,
                       top_k_features=top_k_features, seed=seed, **dsflags)
    rows = run_compare(cfg, log=click.echo)
    for row in rows:
        click.echo(f"{row['method']:<12} {row['features']:<9} {row['parameters']:<10} "
                   f"mape_total={row['mape_total']:.3f} mae_total={row['mae_total']:.3f}")


if __name__ == "__main__":
    main()
