"""Necessary conditions for membership in the Wasserstein ambiguity set.

Every population in the ball satisfies four inequalities on its conditional
mean function. A failed inequality proves the candidate lies outside the
ball; passing all four proves nothing.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from itertools import combinations

import numpy as np

from ..cmr import CmrModel, predict_matrix
from ..data import SourceDataset, TargetCovariates
from ..errors import DimensionError, DomainError

ITEMS = ("C1.i", "C1.ii", "C1.iii", "C1.iv")


@dataclass(frozen=True)
class BoundCheck:
    item: str
    bound: float
    observed: float
    slack: float
    violation: float
    passed: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


def _check(item: str, bounds: np.ndarray, observed: np.ndarray) -> BoundCheck:
    """Keep the entry with the least slack."""
    bounds = np.broadcast_to(np.asarray(bounds, dtype=float), np.shape(observed))
    observed = np.asarray(observed, dtype=float)
    if observed.size == 0:
        b = float(bounds.flat[0]) if bounds.size else 0.0
        return BoundCheck(item, b, 0.0, b, 0.0, True)
    slack = bounds - observed
    k = int(np.argmin(slack))
    b, o, s = float(bounds.flat[k]), float(observed.flat[k]), float(slack.flat[k])
    viol = max(0.0, -s)
    return BoundCheck(item, b, o, s, viol, viol <= 1e-9 * max(1.0, abs(b)))


def ambiguity_bounds(
    source_m,
    candidate_m,
    delta: float,
    target_weights=None,
    source_means=None,
) -> list[BoundCheck]:
    """Check a candidate population's conditional means against the four bounds.

    ``source_m`` and ``candidate_m`` hold m_S and m_U at the same target
    covariate points (rows) for every action (columns). ``target_weights``
    is the target covariate law on those points (uniform by default).
    ``source_means`` are E_S[Y_a] under the source covariate law; when
    omitted the two covariate laws are taken to coincide.
    """
    ms = np.atleast_2d(np.asarray(source_m, dtype=float))
    mu = np.atleast_2d(np.asarray(candidate_m, dtype=float))
    if ms.shape != mu.shape:
        raise DimensionError(f"shapes differ: {ms.shape} vs {mu.shape}")
    if delta < 0:
        raise DomainError(f"delta must be >= 0, got {delta}")
    n, d = ms.shape
    w = np.full(n, 1.0 / n) if target_weights is None else np.asarray(target_weights, dtype=float)
    if w.shape != (n,):
        raise DimensionError("target_weights must have one entry per row")
    w = w / w.sum()
    tau_ms = w @ ms
    sig_ms = tau_ms if source_means is None else np.asarray(source_means, dtype=float)
    if sig_ms.shape != (d,):
        raise DimensionError("source_means must have one entry per action")
    e_u = w @ mu

    pairs = list(combinations(range(d), 2))
    obs_i = np.abs(mu - ms).ravel()
    obs_ii = np.array([np.abs((mu[:, i] - mu[:, j]) - (ms[:, i] - ms[:, j])) for i, j in pairs]).ravel()
    obs_iii = np.abs(e_u - sig_ms)
    bnd_iii = delta + np.abs(tau_ms - sig_ms)
    obs_iv = np.array([abs((e_u[i] - e_u[j]) - (sig_ms[i] - sig_ms[j])) for i, j in pairs])
    bnd_iv = np.array([delta + abs((tau_ms[i] - tau_ms[j]) - (sig_ms[i] - sig_ms[j])) for i, j in pairs])
    return [
        _check("C1.i", np.array(delta), obs_i),
        _check("C1.ii", np.array(delta), obs_ii),
        _check("C1.iii", bnd_iii, obs_iii),
        _check("C1.iv", bnd_iv, obs_iv),
    ]


def ambiguity_bounds_model(
    model: CmrModel,
    tc: TargetCovariates,
    candidate_m,
    delta: float,
    source: SourceDataset | None = None,
) -> list[BoundCheck]:
    """Same checks with m_S taken from a fitted model at the target points.

    Source marginal means use the model averaged over the source covariates
    when ``source`` is given.
    """
    ms = predict_matrix(model, tc)
    means = None
    if source is not None:
        means = predict_matrix(model, TargetCovariates(source.covariates)).mean(axis=0)
    return ambiguity_bounds(ms, candidate_m, delta, source_means=means)


def bounds_report(checks: list[BoundCheck]) -> list[dict]:
    return [c.to_dict() for c in checks]
