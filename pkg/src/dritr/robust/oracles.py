"""Linear-programming references for the closed forms on discrete supports."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import OutcomeSpace
from ..errors import DomainError
from .simplex import solve_lp
from .transport import DiscreteConditional, _col


@dataclass(frozen=True)
class PrimalResult:
    value: float
    coupling: np.ndarray  # (n_atoms, n_grid)
    grid: np.ndarray  # (n_grid, d)
    cost: float
    status: str


def default_grid(cond: DiscreteConditional, action: int, delta: float, ys: OutcomeSpace) -> np.ndarray:
    """Source atoms plus copies with the ``action`` coordinate lowered by delta, delta/2 and to inf Y."""
    c = _col(action, cond.d)
    pts = [cond.atoms]
    for step in (delta, delta / 2.0):
        p = cond.atoms.copy()
        p[:, c] = np.maximum(p[:, c] - step, ys.lower)
        pts.append(p)
    if np.isfinite(ys.lower):
        p = cond.atoms.copy()
        p[:, c] = ys.lower
        pts.append(p)
    grid = np.unique(np.vstack(pts), axis=0)
    return grid


def primal_lp_worst_case(
    cond: DiscreteConditional,
    action: int,
    delta: float,
    grid: np.ndarray | None = None,
    ys: OutcomeSpace | None = None,
) -> PrimalResult:
    """min E_Q[Y(action)] over couplings of the source law with a law on ``grid``
    whose expected l1 transport cost is at most delta.

    Grid points outside the outcome space are discarded.
    """
    if delta < 0:
        raise DomainError(f"delta must be >= 0, got {delta}")
    ys = ys or OutcomeSpace()
    c = _col(action, cond.d)
    g = default_grid(cond, action, delta, ys) if grid is None else np.atleast_2d(np.asarray(grid, dtype=float))
    inside = np.all((g >= ys.lower) & (g <= ys.upper), axis=1)
    g = g[inside]
    if g.shape[0] == 0:
        raise DomainError("no grid point lies inside the outcome space")
    n_s, n_g = cond.atoms.shape[0], g.shape[0]
    cost = np.abs(cond.atoms[:, None, :] - g[None, :, :]).sum(axis=2)  # (n_s, n_g)
    obj = np.tile(g[:, c], n_s)
    a_eq = np.zeros((n_s, n_s * n_g))
    for i in range(n_s):
        a_eq[i, i * n_g:(i + 1) * n_g] = 1.0
    res = solve_lp(obj, A_ub=cost.ravel()[None, :], b_ub=[delta], A_eq=a_eq, b_eq=cond.weights)
    if res.status != "optimal":
        return PrimalResult(float("nan"), np.empty((n_s, n_g)), g, float("nan"), res.status)
    pi = res.x.reshape(n_s, n_g)
    return PrimalResult(res.fun, pi, g, float((pi * cost).sum()), res.status)


def _as_law(values, weights):
    v = np.asarray(values, dtype=float).ravel()
    w = np.full(v.size, 1.0 / v.size) if weights is None else np.asarray(weights, dtype=float).ravel()
    if v.size == 0 or v.size != w.size:
        raise DomainError("values and weights must be non-empty and of equal length")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9 or not np.all(np.isfinite(v)):
        raise DomainError("weights must be non-negative, sum to 1, and atoms finite")
    return v, w / w.sum()


def wasserstein1_1d(u_values, v_values, u_weights=None, v_weights=None) -> float:
    """W1 distance between two discrete laws on the line via a merged quantile sweep."""
    u, uw = _as_law(u_values, u_weights)
    v, vw = _as_law(v_values, v_weights)
    ou, ov = np.argsort(u, kind="stable"), np.argsort(v, kind="stable")
    u, uw, v, vw = u[ou], uw[ou], v[ov], vw[ov]
    cu, cv = np.cumsum(uw), np.cumsum(vw)
    cu[-1] = cv[-1] = 1.0
    brk = np.union1d(cu, cv)
    lengths = np.diff(np.concatenate([[0.0], brk]))
    mids = brk - lengths / 2.0
    qu = u[np.minimum(np.searchsorted(cu, mids, side="left"), u.size - 1)]
    qv = v[np.minimum(np.searchsorted(cv, mids, side="left"), v.size - 1)]
    return float(np.sum(lengths * np.abs(qu - qv)))


def wasserstein1_lp(u_values, v_values, u_weights=None, v_weights=None) -> float:
    """W1 distance solved as a transport LP; quadratic in the number of atoms."""
    u, uw = _as_law(u_values, u_weights)
    v, vw = _as_law(v_values, v_weights)
    nu, nv = u.size, v.size
    cost = np.abs(u[:, None] - v[None, :]).ravel()
    a_eq = np.zeros((nu + nv, nu * nv))
    for i in range(nu):
        a_eq[i, i * nv:(i + 1) * nv] = 1.0
    for j in range(nv):
        a_eq[nu + j, j::nv] = 1.0
    res = solve_lp(cost, A_eq=a_eq, b_eq=np.concatenate([uw, vw]))
    if res.status != "optimal":
        raise DomainError(f"transport LP failed: {res.status}")
    return res.fun
