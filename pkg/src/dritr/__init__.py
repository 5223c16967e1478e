"""Distributionally robust individualized treatment rules.

Learn treatment policies from a source experiment that remain good for a
target population whose conditional outcome laws may differ within a
Wasserstein (or KL) ball around the source ones.
"""
from .cmr import CmrConfig, FittedCmr, FunctionCmr, fit_cmr, predict_cmr, predict_matrix
from .data import OutcomeSpace, Schema, SourceDataset, TargetCovariates, load_source, load_target
from .errors import (
    ConfigError,
    DimensionError,
    DomainError,
    DritrError,
    OverlapError,
    ParseError,
    SchemaError,
    UnsupportedDepthError,
)
from .policy import Leaf, Split, exact_tree_search, first_best, naive_policy
from .robust import AmbiguitySpec, empirical_robust_welfare, robust_score, score_matrix

__version__ = "0.1.0"

__all__ = [
    "AmbiguitySpec",
    "CmrConfig",
    "ConfigError",
    "DimensionError",
    "DomainError",
    "DritrError",
    "FittedCmr",
    "FunctionCmr",
    "Leaf",
    "OutcomeSpace",
    "OverlapError",
    "ParseError",
    "Schema",
    "SchemaError",
    "SourceDataset",
    "Split",
    "TargetCovariates",
    "UnsupportedDepthError",
    "empirical_robust_welfare",
    "exact_tree_search",
    "fit_cmr",
    "first_best",
    "load_source",
    "load_target",
    "naive_policy",
    "predict_cmr",
    "predict_matrix",
    "robust_score",
    "score_matrix",
]
