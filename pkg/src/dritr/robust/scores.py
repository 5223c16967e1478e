"""Closed-form worst-case scores and the empirical robust welfare."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..cmr import CmrModel, predict_matrix
from ..data import OutcomeSpace, TargetCovariates
from ..errors import ConfigError, DimensionError, DomainError

WASSERSTEIN1 = "Wasserstein1"
KL_CONDITIONAL = "KLConditional"
GAUSSIAN_KL = "GaussianKL"

_KIND_ALIASES = {
    "w1": WASSERSTEIN1,
    "wasserstein1": WASSERSTEIN1,
    "kl": KL_CONDITIONAL,
    "klconditional": KL_CONDITIONAL,
    "gauss-kl": GAUSSIAN_KL,
    "gaussiankl": GAUSSIAN_KL,
}


def canonical_kind(kind: str) -> str:
    try:
        return _KIND_ALIASES[kind.lower()]
    except KeyError:
        raise ConfigError(f"unknown ambiguity kind {kind!r}; use w1, kl or gauss-kl") from None


@dataclass(frozen=True)
class AmbiguitySpec:
    """Radius ``delta`` is in outcome units for Wasserstein1 and nats for the KL kinds."""

    kind: str = WASSERSTEIN1
    delta: float = 0.0
    rho: float | None = None
    hurwicz_alpha: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", canonical_kind(self.kind))
        if not (self.delta >= 0 and math.isfinite(self.delta)):
            raise DomainError(f"delta must be a finite number >= 0, got {self.delta}")
        if self.rho is not None and not (self.rho >= 0 and math.isfinite(self.rho)):
            raise DomainError(f"rho must be a finite number >= 0, got {self.rho}")
        if self.hurwicz_alpha is not None and not 0.0 <= self.hurwicz_alpha <= 1.0:
            raise DomainError(f"hurwicz_alpha must lie in [0, 1], got {self.hurwicz_alpha}")


@dataclass(frozen=True, eq=False)
class RobustScoreMatrix:
    scores: np.ndarray  # (n_t, d)
    delta: float
    outcome_space: OutcomeSpace
    kind: str = WASSERSTEIN1

    @property
    def n(self) -> int:
        return int(self.scores.shape[0])

    @property
    def d(self) -> int:
        return int(self.scores.shape[1])


def robust_score(m_hat: float, delta: float, ys: OutcomeSpace) -> float:
    """Worst-case conditional mean over a W1 ball: max{m_hat - delta, inf Y}."""
    if delta < 0:
        raise DomainError(f"delta must be >= 0, got {delta}")
    return max(m_hat - delta, ys.lower)


def best_case_score(m_hat: float, delta: float, ys: OutcomeSpace) -> float:
    return min(m_hat + delta, ys.upper)


def hurwicz_score(m_hat: float, delta: float, alpha: float, ys: OutcomeSpace) -> float:
    """alpha * worst case + (1 - alpha) * best case."""
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
    lo = robust_score(m_hat, delta, ys)
    if alpha == 1.0:
        return lo
    hi = best_case_score(m_hat, delta, ys)
    if alpha == 0.0:
        return hi
    return alpha * lo + (1.0 - alpha) * hi


def gaussian_kl_worst_case(m: float, sigma: float, delta: float) -> float:
    """Worst-case mean of N(m, sigma^2) over a KL ball of radius delta."""
    if sigma < 0 or delta < 0:
        raise DomainError("sigma and delta must be >= 0")
    return m - math.sqrt(2.0 * delta) * sigma


def robust_scores_array(m: np.ndarray, delta: float, ys: OutcomeSpace) -> np.ndarray:
    """Elementwise ``robust_score`` over an array of predictions."""
    if delta < 0:
        raise DomainError(f"delta must be >= 0, got {delta}")
    return np.maximum(np.asarray(m, dtype=float) - delta, ys.lower)


def hurwicz_scores_array(m: np.ndarray, delta: float, alpha: float, ys: OutcomeSpace) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    lo = robust_scores_array(m, delta, ys)
    hi = np.minimum(m + delta, ys.upper)
    if alpha == 1.0:
        return lo
    if alpha == 0.0:
        return hi
    return alpha * lo + (1.0 - alpha) * hi


def score_matrix(
    model: CmrModel, tc: TargetCovariates, spec: AmbiguitySpec, ys: OutcomeSpace
) -> RobustScoreMatrix:
    """Robust score matrix Gamma[j, a] for the Wasserstein-1 ambiguity set.

    With ``spec.hurwicz_alpha`` set, entries mix worst and best case instead.
    """
    if spec.kind != WASSERSTEIN1:
        raise ConfigError(f"score_matrix needs a Wasserstein1 spec, got {spec.kind}")
    m = predict_matrix(model, tc)
    if spec.hurwicz_alpha is None:
        s = robust_scores_array(m, spec.delta, ys)
    else:
        s = hurwicz_scores_array(m, spec.delta, spec.hurwicz_alpha, ys)
    return RobustScoreMatrix(s, spec.delta, ys, WASSERSTEIN1)


def empirical_robust_welfare(g, gamma: RobustScoreMatrix | np.ndarray, tc: TargetCovariates) -> float:
    """(1/n_t) * sum_j Gamma[j, g(X_j)] for a policy with ``predict_many``."""
    s = gamma.scores if isinstance(gamma, RobustScoreMatrix) else np.asarray(gamma, dtype=float)
    if s.shape[0] != tc.n:
        raise DimensionError(f"score matrix has {s.shape[0]} rows, target has {tc.n}")
    acts = np.asarray(g.predict_many(tc.covariates), dtype=int)
    if acts.min() < 1 or acts.max() > s.shape[1]:
        raise DimensionError("policy assigns an action outside the score matrix columns")
    return float(np.mean(s[np.arange(tc.n), acts - 1]))


def arm_residuals(model: CmrModel, source) -> list[np.ndarray]:
    """In-sample residuals y_i - m_hat(x_i, a_i), grouped by arm."""
    m = model.predict_rows(source.covariates)
    r = source.outcomes - m[np.arange(source.n), source.treatments - 1]
    return [r[source.treatments == a] for a in range(1, source.d + 1)]


def kl_score_matrix(
    model: CmrModel, tc: TargetCovariates, spec: AmbiguitySpec, ys: OutcomeSpace, source
) -> RobustScoreMatrix:
    """Score matrix for the KL kinds under a location model Y(a) = m(x, a) + e_a.

    KL balls are translation invariant, so the worst case at x is m_hat(x, a)
    plus the worst-case mean of the pooled residuals of arm a. GaussianKL
    uses the closed form with the residual standard deviation instead.
    """
    from .kl import kl_worst_case_mean

    if spec.kind == WASSERSTEIN1:
        return score_matrix(model, tc, spec, ys)
    m = predict_matrix(model, tc)
    offsets = np.empty(m.shape[1])
    for a, r in enumerate(arm_residuals(model, source)):
        if spec.kind == KL_CONDITIONAL:
            offsets[a] = kl_worst_case_mean(r, None, spec.delta).value
        else:
            offsets[a] = gaussian_kl_worst_case(float(r.mean()), float(r.std()), spec.delta)
    s = np.maximum(m + offsets[None, :], ys.lower)
    return RobustScoreMatrix(s, spec.delta, ys, spec.kind)
