"""Worst-case means over Kullback-Leibler balls via the one-dimensional dual.

For a discrete law with atoms y_i and weights w_i the worst case of the mean
over {Q : KL(Q || P) <= delta} equals

    sup_{lam > 0}  -lam * delta - lam * log sum_i w_i exp(-y_i / lam),

a concave problem in lam. The supremum may sit at either end of the
search interval: as lam -> 0 the objective tends to min_i y_i, and for
delta = 0 it increases towards the mean as lam -> inf.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ..errors import DomainError

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
LAMBDA_MIN = 1e-8
MAX_ITER = 200


@dataclass(frozen=True)
class DualSolveResult:
    lambda_star: float  # math.inf when the supremum is the lam -> inf limit
    value: float
    iterations: int
    converged: bool
    boundary: str = "interior"  # "interior" | "zero" | "upper" | "infinity"


def _check_weights(values, weights) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(values, dtype=float).ravel()
    if weights is None:
        w = np.full(y.shape, 1.0 / y.size) if y.size else np.empty(0)
    else:
        w = np.asarray(weights, dtype=float).ravel()
    if y.size == 0:
        raise DomainError("need at least one atom")
    if w.shape != y.shape:
        raise DomainError("values and weights differ in length")
    if not np.all(np.isfinite(y)):
        raise DomainError("atoms must be finite")
    if np.any(w < 0) or not abs(w.sum() - 1.0) <= 1e-9:
        raise DomainError("weights must be non-negative and sum to 1")
    keep = w > 0
    return y[keep], w[keep] / w[keep].sum()


def kl_dual_objective(lam, values, weights, delta: float):
    """-lam*delta - lam*log E[exp(-Y/lam)], vectorised over ``lam``.

    Values are centred at their mean. For moderate exponents the log-moment
    is computed as log1p(E[expm1(z)]), which keeps full precision when lam is
    large and the log-moment is tiny; otherwise logsumexp avoids overflow.
    """
    lam = np.asarray(lam, dtype=float)
    y = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    mean = float(np.dot(w, y))
    lv = lam.reshape(-1, 1)
    z = -(y[None, :] - mean) / lv
    big = z.max(axis=1) > 50.0
    logm = np.empty(z.shape[0])
    if np.any(~big):
        logm[~big] = np.log1p(np.expm1(z[~big]) @ w)
    if np.any(big):
        logm[big] = logsumexp(z[big] + np.log(w)[None, :], axis=1)
    out = mean - lam.ravel() * delta - lam.ravel() * logm
    return out.reshape(lam.shape) if lam.ndim else float(out[0])


def golden_section_max(f, lo: float, hi: float, tol: float = 1e-12, max_iter: int = MAX_ITER):
    """Maximise a unimodal ``f`` on [lo, hi]. Returns (argmax, max, iterations, converged)."""
    a, b = lo, hi
    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    it = 0
    while it < max_iter and (b - a) > tol * max(1.0, abs(a) + abs(b)):
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - INV_PHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_PHI * (b - a)
            f2 = f(x2)
        it += 1
    converged = (b - a) <= tol * max(1.0, abs(a) + abs(b))
    return (x1, f1, it, converged) if f1 >= f2 else (x2, f2, it, converged)


def lambda_bounds(values, delta: float) -> tuple[float, float]:
    y = np.asarray(values, dtype=float)
    spread = float(y.max() - y.min())
    hi = 10.0 * spread / max(delta, 1e-8)
    lo = min(LAMBDA_MIN, hi * 1e-10)
    return lo, hi


def kl_worst_case_mean(values, weights=None, delta: float = 0.0) -> DualSolveResult:
    """inf of E_Q[Y] over KL(Q || P) <= delta for the discrete law P.

    Golden-section search runs on log(lam) over the interval returned by
    ``lambda_bounds``; the interior optimum is then compared against both
    ends (including the lam -> 0 limit, the smallest atom) and the larger
    value is returned.
    """
    if not delta >= 0:
        raise DomainError(f"delta must be >= 0, got {delta}")
    y, w = _check_weights(values, weights)
    y_min = float(y.min())
    mean = float(np.dot(w, y))
    if float(y.max()) == y_min:
        return DualSolveResult(0.0, y_min, 0, True, "zero")
    if delta == 0:
        return DualSolveResult(math.inf, mean, 0, True, "infinity")

    lo, hi = lambda_bounds(y, delta)

    def h(u: float) -> float:
        return kl_dual_objective(math.exp(u), y, w, delta)

    u_star, v_star, it, ok = golden_section_max(h, math.log(lo), math.log(hi))
    best = DualSolveResult(math.exp(u_star), float(v_star), it, ok, "interior")
    v_hi = h(math.log(hi))
    if v_hi > best.value:
        best = DualSolveResult(hi, float(v_hi), it, ok, "upper")
    if y_min >= best.value:
        best = DualSolveResult(0.0, y_min, it, ok, "zero")
    return best


def covariate_shift_worst_case(cell_values, base_weights=None, rho: float = 0.0) -> DualSolveResult:
    """inf of sum_j q_j * phi_j over reweightings q with KL(q || base) <= rho."""
    if not rho >= 0:
        raise DomainError(f"rho must be >= 0, got {rho}")
    return kl_worst_case_mean(cell_values, base_weights, rho)


def kl_primal_two_point(p: float, delta: float, lo: float = 0.0, hi: float = 1.0) -> float:
    """Worst-case mean of a two-point law {lo w.p. 1-p, hi w.p. p} by bisection.

    Independent reference for ``kl_worst_case_mean``: the minimising law puts
    mass q <= p on ``hi`` with KL(q || p) = delta (or q = 0 when feasible).
    """

    def kl(q: float) -> float:
        t1 = 0.0 if q == 0 else q * math.log(q / p)
        t0 = 0.0 if q == 1 else (1 - q) * math.log((1 - q) / (1 - p))
        return t1 + t0

    if kl(0.0) <= delta:
        return lo
    a, b = 0.0, p  # kl decreasing on [0, p]; kl(a) > delta >= kl(b)
    for _ in range(200):
        mid = 0.5 * (a + b)
        if kl(mid) > delta:
            a = mid
        else:
            b = mid
    return lo + b * (hi - lo)
