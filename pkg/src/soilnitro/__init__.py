"""soilnitro: tabular soil-nitrogen regression toolkit.

Pipeline pieces: log-scale target transform, landcover-stratified splitting,
histogram GBDT and extra-trees ensembles, exact path-dependent TreeSHAP
feature selection, TPE hyperparameter tuning over stratified k-fold CV, and
per-landcover RMSE/MAE/MAPE/R2 evaluation, plus a batch CLI wiring it all
together.
"""

__version__ = "0.1.0"

from .binning import BinnedTable, bin_features
from .data import (
    Dataset,
    FeatureTable,
    TargetScale,
    TargetVector,
    inverse_transform_target,
    load_csv,
    transform_target,
    write_csv,
)
from .ensemble import Ensemble, RegressionTree, predict, predict_per_tree
from .extra_trees import ExtraTreesParams, ExtraTreesRegressor, train_extratrees
from .gbdt import GbdtParams, GBDTRegressor, train_gbdt
from .metrics import EvalReport, evaluate, mae, mape, r2, rmse
from .persist import load_model, save_model
from .pipeline import PipelineConfig, run_compare, run_pipeline
from .shap_values import (
    FeatureRanking,
    ShapMatrix,
    TreeShapExplainer,
    rank_features,
    select_top_k,
    tree_shap,
)
from .splitting import FoldAssignment, SplitIndices, stratified_kfold, stratified_split
from .synth import SynthSpec, generate, latent_response, oracle_r2_ceiling
from .tuning import (
    Categorical,
    Continuous,
    Integer,
    ParamSpace,
    Trial,
    TunerConfig,
    cross_validate,
    default_gbdt_space,
    suggest,
    tune,
)

__all__ = [
    "BinnedTable", "bin_features",
    "Dataset", "FeatureTable", "TargetScale", "TargetVector",
    "inverse_transform_target", "load_csv", "transform_target", "write_csv",
    "Ensemble", "RegressionTree", "predict", "predict_per_tree",
    "ExtraTreesParams", "ExtraTreesRegressor", "train_extratrees",
    "GbdtParams", "GBDTRegressor", "train_gbdt",
    "EvalReport", "evaluate", "mae", "mape", "r2", "rmse",
    "load_model", "save_model",
    "PipelineConfig", "run_compare", "run_pipeline",
    "FeatureRanking", "ShapMatrix", "TreeShapExplainer",
    "rank_features", "select_top_k", "tree_shap",
    "FoldAssignment", "SplitIndices", "stratified_kfold", "stratified_split",
    "SynthSpec", "generate", "latent_response", "oracle_r2_ceiling",
    "Categorical", "Continuous", "Integer", "ParamSpace", "Trial", "TunerConfig",
    "cross_validate", "default_gbdt_space", "suggest", "tune",
]
