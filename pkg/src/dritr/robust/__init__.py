from .diagnostics import BoundCheck, ambiguity_bounds, ambiguity_bounds_model, bounds_report
from .kl import DualSolveResult, covariate_shift_worst_case, kl_dual_objective, kl_worst_case_mean
from .oracles import PrimalResult, default_grid, primal_lp_worst_case, wasserstein1_1d, wasserstein1_lp
from .scores import (
    GAUSSIAN_KL,
    KL_CONDITIONAL,
    WASSERSTEIN1,
    AmbiguitySpec,
    RobustScoreMatrix,
    best_case_score,
    empirical_robust_welfare,
    gaussian_kl_worst_case,
    hurwicz_score,
    kl_score_matrix,
    robust_score,
    robust_scores_array,
    score_matrix,
)
from .simplex import LPResult, solve_lp
from .transport import DiscreteConditional, transport_cost, worst_case_transport

__all__ = [
    "AmbiguitySpec",
    "BoundCheck",
    "DiscreteConditional",
    "DualSolveResult",
    "GAUSSIAN_KL",
    "KL_CONDITIONAL",
    "LPResult",
    "PrimalResult",
    "RobustScoreMatrix",
    "WASSERSTEIN1",
    "ambiguity_bounds",
    "ambiguity_bounds_model",
    "best_case_score",
    "bounds_report",
    "covariate_shift_worst_case",
    "default_grid",
    "empirical_robust_welfare",
    "gaussian_kl_worst_case",
    "hurwicz_score",
    "kl_dual_objective",
    "kl_score_matrix",
    "kl_worst_case_mean",
    "primal_lp_worst_case",
    "robust_score",
    "robust_scores_array",
    "score_matrix",
    "solve_lp",
    "transport_cost",
    "wasserstein1_1d",
    "wasserstein1_lp",
    "worst_case_transport",
]
