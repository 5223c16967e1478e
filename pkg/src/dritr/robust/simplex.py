"""Dense two-phase simplex with Bland's rule.

Small and slow on purpose: it exists as an independent reference for the
closed-form worst cases on discrete supports with a few dozen atoms.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-12


@dataclass(frozen=True)
class LPResult:
    x: np.ndarray | None
    fun: float
    status: str  # "optimal" | "infeasible" | "unbounded" | "iteration_limit"
    iterations: int


def _pivot(T: np.ndarray, basis: list[int], r: int, c: int) -> None:
    T[r] /= T[r, c]
    col = T[:, c].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])
    basis[r] = c


def _run(T: np.ndarray, basis: list[int], n_allowed: int, max_iter: int) -> tuple[str, int]:
    """Minimise the objective in the last row of T over columns < n_allowed."""
    it = 0
    while it < max_iter:
        red = T[-1, :n_allowed]
        entering = np.flatnonzero(red < -PIVOT_TOL)
        if entering.size == 0:
            return "optimal", it
        c = int(entering[0])
        col = T[:-1, c]
        pos = col > PIVOT_TOL
        if not pos.any():
            return "unbounded", it
        ratios = np.full(col.shape, np.inf)
        ratios[pos] = T[:-1, -1][pos] / col[pos]
        rmin = ratios.min()
        ties = np.flatnonzero(ratios <= rmin + PIVOT_TOL * max(1.0, abs(rmin)))
        r = int(min(ties, key=lambda i: basis[i]))
        _pivot(T, basis, r, c)
        it += 1
    return "iteration_limit", it


def solve_lp(
    c,
    A_ub=None,
    b_ub=None,
    A_eq=None,
    b_eq=None,
    max_iter: int = 50_000,
) -> LPResult:
    """min c'x subject to A_ub x <= b_ub, A_eq x = b_eq, x >= 0."""
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).ravel()
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq

    # Standard form with slacks on inequality rows, then flip rows with b < 0.
    A = np.zeros((m, n + m_ub))
    A[:m_ub, :n] = A_ub
    A[:m_ub, n:] = np.eye(m_ub)
    A[m_ub:, :n] = A_eq
    b = np.concatenate([b_ub, b_eq])
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0
    n_std = n + m_ub

    # Phase one: artificial variable on every row.
    T = np.zeros((m + 1, n_std + m + 1))
    T[:m, :n_std] = A
    T[:m, n_std:n_std + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :n_std] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(n_std, n_std + m))
    status, it1 = _run(T, basis, n_std + m, max_iter)
    if status != "optimal":
        return LPResult(None, float("nan"), status, it1)
    if -T[-1, -1] > 1e-9 * max(1.0, float(b.sum())):
        return LPResult(None, float("nan"), "infeasible", it1)

    # Drive remaining artificials out of the basis; drop redundant rows.
    keep = []
    for r in range(m):
        if basis[r] >= n_std:
            nz = np.flatnonzero(np.abs(T[r, :n_std]) > 1e-9)
            if nz.size:
                _pivot(T, basis, r, int(nz[0]))
                keep.append(r)
        else:
            keep.append(r)
    rows = keep + [m]
    T = np.hstack([T[rows][:, :n_std], T[rows][:, -1:]])
    basis = [basis[r] for r in keep]

    # Phase two.
    T[-1, :] = 0.0
    T[-1, :n] = c
    for r, j in enumerate(basis):
        if T[-1, j] != 0.0:
            T[-1] -= T[-1, j] * T[r]
    status, it2 = _run(T, basis, n_std, max_iter)
    if status != "optimal":
        return LPResult(None, float("nan"), status, it1 + it2)
    x = np.zeros(n_std)
    for r, j in enumerate(basis):
        x[j] = T[r, -1]
    x = x[:n]
    return LPResult(x, float(c @ x), "optimal", it1 + it2)
