"""Counterfactual survival mean embeddings under right-censoring."""

__version__ = "0.1.0"

from .dataset import CsvSchema, RightCensoredSample, load_csv, split_arms, standardize_covariates
from .embedding import (
    DecompositionCurves,
    EmbeddingCurve,
    RidgeSolveConfig,
    counterfactual_embedding,
    decompose,
    depth_evaluate,
    dual_form_check,
    fit_conditional_coefficients,
    observational_embedding,
    rkhs_norm,
)
from .estimators import CounterfactualMeanEmbedding, SurvivalEmbeddingDecomposition
from .kernels import GaussianKernel, gram, median_heuristic, time_grid
from .survival import (
    StepFunction,
    WeightedArm,
    build_weighted_arm,
    evaluate_left,
    kaplan_meier,
    reverse_kaplan_meier,
)
from .validation import make_survival_target

__all__ = [
    "CounterfactualMeanEmbedding",
    "CsvSchema",
    "DecompositionCurves",
    "EmbeddingCurve",
    "GaussianKernel",
    "RidgeSolveConfig",
    "RightCensoredSample",
    "StepFunction",
    "SurvivalEmbeddingDecomposition",
    "WeightedArm",
    "build_weighted_arm",
    "counterfactual_embedding",
    "decompose",
    "depth_evaluate",
    "dual_form_check",
    "evaluate_left",
    "fit_conditional_coefficients",
    "gram",
    "kaplan_meier",
    "load_csv",
    "make_survival_target",
    "median_heuristic",
    "observational_embedding",
    "reverse_kaplan_meier",
    "rkhs_norm",
    "split_arms",
    "standardize_covariates",
    "time_grid",
]
