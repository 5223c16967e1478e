"""Explicit worst-case transports of a discrete joint law of potential outcomes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import OutcomeSpace
from ..errors import DimensionError, DomainError


@dataclass(frozen=True, eq=False)
class DiscreteConditional:
    """Finite-support law of the outcome vector (Y(1), ..., Y(d)) at one covariate cell."""

    atoms: np.ndarray  # (n_atoms, d)
    weights: np.ndarray  # (n_atoms,)

    def __post_init__(self):
        atoms = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        w = np.asarray(self.weights, dtype=float).ravel()
        if atoms.shape[0] != w.size:
            raise DimensionError(f"{atoms.shape[0]} atoms but {w.size} weights")
        if w.size == 0:
            raise DomainError("need at least one atom")
        if not np.all(np.isfinite(atoms)):
            raise DomainError("atoms must be finite")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise DomainError("weights must be non-negative and sum to 1")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", w)

    @property
    def d(self) -> int:
        return int(self.atoms.shape[1])

    def mean(self, action: int) -> float:
        return float(np.dot(self.weights, self.atoms[:, _col(action, self.d)]))


def _col(action: int, d: int) -> int:
    if not 1 <= action <= d:
        raise DimensionError(f"action {action} outside 1..{d}")
    return action - 1


def worst_case_transport(
    cond: DiscreteConditional,
    action: int,
    delta: float,
    ys: OutcomeSpace,
    m_s: float | None = None,
) -> DiscreteConditional:
    """Transport attaining the W1 worst case of the mean of Y(action).

    Only the ``action`` coordinate moves. Unbounded below, every atom shifts
    down by delta. With a finite floor L, atoms contract towards L by the
    factor 1 - delta / (m_s - L) while m_s - delta > L, and collapse onto L
    otherwise.
    """
    if delta < 0:
        raise DomainError(f"delta must be >= 0, got {delta}")
    c = _col(action, cond.d)
    y = cond.atoms[:, c]
    if np.any(y < ys.lower) or np.any(y > ys.upper):
        raise DomainError("atoms fall outside the outcome space")
    if m_s is None:
        m_s = cond.mean(action)
    lo = ys.lower
    if m_s < lo:
        raise DomainError(f"source mean {m_s} lies below the outcome floor {lo}")

    out = cond.atoms.copy()
    if delta == 0:
        return DiscreteConditional(out, cond.weights)
    if not np.isfinite(lo):
        out[:, c] = y - delta
    elif m_s - delta > lo:
        out[:, c] = y - delta * (y - lo) / (m_s - lo)
    else:
        out[:, c] = lo
    return DiscreteConditional(out, cond.weights)


def transport_cost(src: DiscreteConditional, dst: DiscreteConditional) -> float:
    """Expected l1 displacement of the atom-by-atom coupling of two transports."""
    if src.atoms.shape != dst.atoms.shape:
        raise DimensionError("transport changes the atom layout")
    return float(np.dot(src.weights, np.abs(src.atoms - dst.atoms).sum(axis=1)))
