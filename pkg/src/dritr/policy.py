"""Depth-limited tree policies and exact welfare-maximising search.

Trees use 1-based feature indices and 1-based actions. A split sends
x[feature] <= threshold to the left child. Thresholds are canonical:
midpoints between adjacent sorted unique values of the target sample.

Tie-breaking among trees with equal objective: smaller depth first, then
the lexicographically smallest preorder token sequence, where a leaf is
the token (0, action) and a split is (1, feature, threshold). Actions tie
to the lowest index.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .cmr import CmrModel, predict_matrix
from .data import TargetCovariates
from .errors import ConfigError, DimensionError, ParseError, UnsupportedDepthError
from .robust.kl import golden_section_max, kl_dual_objective
from .robust.scores import RobustScoreMatrix

MAX_DEPTH = 2


@dataclass(frozen=True)
class Leaf:
    action: int

    @property
    def depth(self) -> int:
        return 0


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    left: "TreePolicy"
    right: "TreePolicy"

    @property
    def depth(self) -> int:
        return 1 + max(self.left.depth, self.right.depth)


TreePolicy = Union[Leaf, Split]


def _midpoint(a: float, b: float) -> float:
    m = a + (b - a) / 2.0
    return m if a <= m < b else a


def tree_key(g: TreePolicy) -> tuple:
    if isinstance(g, Leaf):
        return ((0, g.action, 0.0),)
    return ((1, g.feature, g.threshold),) + tree_key(g.left) + tree_key(g.right)


def sort_key(g: TreePolicy) -> tuple:
    return (g.depth, tree_key(g))


def n_features_used(g: TreePolicy) -> int:
    if isinstance(g, Leaf):
        return 0
    return max(g.feature, n_features_used(g.left), n_features_used(g.right))


def max_action(g: TreePolicy) -> int:
    if isinstance(g, Leaf):
        return g.action
    return max(max_action(g.left), max_action(g.right))


def predict(g: TreePolicy, x) -> int:
    x = np.asarray(x, dtype=float).ravel()
    if n_features_used(g) > x.size:
        raise DimensionError(f"policy splits on feature {n_features_used(g)} but x has {x.size} entries")
    while isinstance(g, Split):
        g = g.left if x[g.feature - 1] <= g.threshold else g.right
    return g.action


def predict_many(g: TreePolicy, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if n_features_used(g) > X.shape[1]:
        raise DimensionError(f"policy splits on feature {n_features_used(g)} but X has {X.shape[1]} columns")
    out = np.empty(X.shape[0], dtype=np.int64)

    def fill(node: TreePolicy, rows: np.ndarray) -> None:
        if isinstance(node, Leaf):
            out[rows] = node.action
            return
        go_left = X[rows, node.feature - 1] <= node.threshold
        fill(node.left, rows[go_left])
        fill(node.right, rows[~go_left])

    fill(g, np.arange(X.shape[0]))
    return out


class PolicyAdapter:
    """Gives a bare tree the ``predict_many`` method used by welfare evaluators."""

    def __init__(self, tree: TreePolicy):
        self.tree = tree

    def predict_many(self, X) -> np.ndarray:
        return predict_many(self.tree, X)


def as_policy(g):
    return PolicyAdapter(g) if isinstance(g, (Leaf, Split)) else g


# serialization --------------------------------------------------------------

def to_dict(g: TreePolicy) -> dict:
    if isinstance(g, Leaf):
        return {"action": g.action}
    return {"feature": g.feature, "threshold": g.threshold, "left": to_dict(g.left), "right": to_dict(g.right)}


def from_dict(d: dict) -> TreePolicy:
    try:
        if "action" in d:
            return Leaf(int(d["action"]))
        return Split(int(d["feature"]), float(d["threshold"]), from_dict(d["left"]), from_dict(d["right"]))
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"malformed tree node: {d!r}") from e


def to_json(g: TreePolicy) -> str:
    return json.dumps(to_dict(g), sort_keys=True)


def from_json(s: str) -> TreePolicy:
    try:
        return from_dict(json.loads(s))
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid policy JSON: {e}") from e


def to_text(g: TreePolicy, names: Sequence[str] | None = None, indent: int = 0) -> str:
    """Nested text form, e.g.::

        if x1 <= 0.5:  # age
          action 1
        else:
          action 2
    """
    pad = "  " * indent
    if isinstance(g, Leaf):
        return f"{pad}action {g.action}\n"
    note = f"  # {names[g.feature - 1]}" if names and g.feature <= len(names) else ""
    return (
        f"{pad}if x{g.feature} <= {g.threshold!r}:{note}\n"
        + to_text(g.left, names, indent + 1)
        + f"{pad}else:\n"
        + to_text(g.right, names, indent + 1)
    )


_IF = re.compile(r"^if x(\d+) <= (\S+):(?:\s*#.*)?$")
_LEAF = re.compile(r"^action (\d+)$")


def from_text(text: str) -> TreePolicy:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    pos = 0

    def parse(level: int) -> TreePolicy:
        nonlocal pos
        if pos >= len(lines):
            raise ParseError("unexpected end of policy text")
        ln = lines[pos]
        body = ln.strip()
        if len(ln) - len(ln.lstrip(" ")) != 2 * level:
            raise ParseError(f"bad indentation on line {pos + 1}: {ln!r}")
        pos += 1
        m = _LEAF.match(body)
        if m:
            return Leaf(int(m.group(1)))
        m = _IF.match(body)
        if not m:
            raise ParseError(f"cannot parse line {pos}: {ln!r}")
        left = parse(level + 1)
        if pos >= len(lines) or lines[pos] != "  " * level + "else:":
            raise ParseError(f"expected 'else:' at line {pos + 1}")
        pos += 1
        right = parse(level + 1)
        return Split(int(m.group(1)), float(m.group(2)), left, right)

    tree = parse(0)
    if pos != len(lines):
        raise ParseError(f"trailing content at line {pos + 1}")
    return tree


# search ---------------------------------------------------------------------

@dataclass(frozen=True)
class SearchResult:
    policy: TreePolicy
    value: float  # mean score of the policy over the target sample


def _scores(gamma) -> np.ndarray:
    s = gamma.scores if isinstance(gamma, RobustScoreMatrix) else np.asarray(gamma, dtype=float)
    if s.ndim != 2 or s.shape[0] < 1 or s.shape[1] < 1:
        raise DimensionError("score matrix must be n_t x d with n_t >= 1")
    return s


def _covariates(tc) -> np.ndarray:
    X = tc.covariates if isinstance(tc, TargetCovariates) else np.asarray(tc, dtype=float)
    return X[:, None] if X.ndim == 1 else X


def policy_value(g, gamma, X) -> float:
    """Mean of Gamma[j, g(X_j)], summed directly."""
    s = _scores(gamma)
    acts = predict_many(g, _covariates(X)) if isinstance(g, (Leaf, Split)) else g.predict_many(_covariates(X))
    return float(np.mean(s[np.arange(s.shape[0]), acts - 1]))


def _allowed_features(k: int, mask: Iterable[int] | None) -> list[int]:
    excluded = set(mask or ())
    bad = [f for f in excluded if not 1 <= f <= k]
    if bad:
        raise DimensionError(f"masked features {bad} outside 1..{k}")
    return [f for f in range(1, k + 1) if f not in excluded]


class _Searcher:
    """Prefix-sum search for the best tree of depth <= 1 on a row subset."""

    def __init__(self, S: np.ndarray, X: np.ndarray, feats: list[int]):
        self.S, self.X, self.feats = S, X, feats
        # sums taken in different orders differ by rounding; gains below this
        # are ties, and ties go to the smaller sort_key
        self.tol = 1e-12 * max(1.0, float(np.abs(S).sum()))
        self.orders = {f: np.argsort(X[:, f - 1], kind="stable") for f in feats}
        self.uniq = {f: np.unique(X[:, f - 1]) for f in feats}

    def threshold_after(self, f: int, v: float) -> float:
        u = self.uniq[f]
        i = int(np.searchsorted(u, v))
        return _midpoint(float(u[i]), float(u[i + 1]))

    def best_stump(self, mask: np.ndarray) -> tuple[float, TreePolicy]:
        S = self.S
        sub = S[mask]
        if sub.shape[0] == 0:
            return 0.0, Leaf(1)
        col = sub.sum(axis=0)
        a = int(np.argmax(col))
        best_v, best_t = float(col[a]), Leaf(a + 1)
        for f in self.feats:
            idx = self.orders[f][mask[self.orders[f]]]
            vals = self.X[idx, f - 1]
            cut = np.flatnonzero(vals[:-1] < vals[1:])
            if cut.size == 0:
                continue
            G = S[idx]
            left = np.cumsum(G, axis=0)[cut]
            right = np.cumsum(G[::-1], axis=0)[::-1][cut + 1]
            la, ra = np.argmax(left, axis=1), np.argmax(right, axis=1)
            tot = left[np.arange(cut.size), la] + right[np.arange(cut.size), ra]
            tot[la == ra] = -np.inf  # same action on both sides is just a leaf
            p = int(np.argmax(tot))
            if tot[p] > best_v + self.tol:
                best_v = float(tot[p])
                thr = self.threshold_after(f, float(vals[cut[p]]))
                best_t = Split(f, thr, Leaf(int(la[p]) + 1), Leaf(int(ra[p]) + 1))
        return best_v, best_t

    def best_depth2(self) -> tuple[float, TreePolicy]:
        n = self.S.shape[0]
        full = np.ones(n, dtype=bool)
        best_v, best_t = self.best_stump(full)
        best_k = sort_key(best_t)
        for f in self.feats:
            x = self.X[:, f - 1]
            u = self.uniq[f]
            for i in range(u.size - 1):
                thr = _midpoint(float(u[i]), float(u[i + 1]))
                lmask = x <= thr
                lv, lt = self.best_stump(lmask)
                rv, rt = self.best_stump(~lmask)
                v = lv + rv
                if v < best_v - self.tol or (isinstance(lt, Leaf) and lt == rt):
                    continue
                cand = Split(f, thr, lt, rt)
                k = sort_key(cand)
                if v > best_v + self.tol:
                    best_v, best_t, best_k = v, cand, k
                elif k < best_k:
                    best_v, best_t, best_k = max(v, best_v), cand, k
        return best_v, best_t


def exact_tree_search(
    gamma, tc, depth: int, feature_mask: Iterable[int] | None = None
) -> SearchResult:
    """Tree of depth <= ``depth`` maximising sum_j Gamma[j, g(X_j)] exactly."""
    if depth not in (0, 1, 2):
        if isinstance(depth, int) and depth > MAX_DEPTH:
            raise UnsupportedDepthError(f"exact search supports depth <= {MAX_DEPTH}, got {depth}")
        raise ConfigError(f"depth must be 0, 1 or 2, got {depth}")
    S = _scores(gamma)
    X = _covariates(tc)
    if X.shape[0] != S.shape[0]:
        raise DimensionError(f"score matrix has {S.shape[0]} rows, covariates have {X.shape[0]}")
    feats = _allowed_features(X.shape[1], feature_mask)
    if depth == 0 or not feats:
        col = S.sum(axis=0)
        tree: TreePolicy = Leaf(int(np.argmax(col)) + 1)
    elif depth == 1:
        _, tree = _Searcher(S, X, feats).best_stump(np.ones(S.shape[0], dtype=bool))
    else:
        _, tree = _Searcher(S, X, feats).best_depth2()
    return SearchResult(tree, policy_value(tree, S, X))


def candidate_search(gamma, tc, candidates: Sequence) -> tuple[int, SearchResult]:
    """Best policy from an explicit finite class; ties go to the earliest candidate."""
    if not candidates:
        raise ConfigError("candidate policy class is empty")
    S, X = _scores(gamma), _covariates(tc)
    vals = [policy_value(g, S, X) for g in candidates]
    i = int(np.argmax(vals))
    return i, SearchResult(candidates[i], vals[i])


# enumeration oracle ---------------------------------------------------------

def canonical_thresholds(X: np.ndarray, f: int) -> list[float]:
    u = np.unique(X[:, f - 1])
    return [_midpoint(float(u[i]), float(u[i + 1])) for i in range(u.size - 1)]


def enumerate_trees(X, d: int, depth: int, feature_mask: Iterable[int] | None = None) -> list[TreePolicy]:
    """Every canonical tree of depth <= ``depth`` (leaf pairs may repeat)."""
    X = _covariates(X)
    feats = _allowed_features(X.shape[1], feature_mask)
    thr = {f: canonical_thresholds(X, f) for f in feats}
    level = [Leaf(a) for a in range(1, d + 1)]
    for _ in range(depth):
        nxt = [Leaf(a) for a in range(1, d + 1)]
        for f in feats:
            for t in thr[f]:
                nxt.extend(Split(f, t, lt, rt) for lt in level for rt in level)
        level = nxt
    return level


def brute_force_search(gamma, tc, depth: int, feature_mask: Iterable[int] | None = None) -> SearchResult:
    """Reference search by exhaustive evaluation.

    Depth <= 1 evaluates every tree directly. For depth 2 each root split
    is paired with every left and every right subtree of depth <= 1; the
    objective is additive over the two halves, so maximising each half
    separately is the same as scanning all pairs.
    """
    S, X = _scores(gamma), _covariates(tc)
    n, d = S.shape
    rows = np.arange(n)
    if depth <= 1:
        trees = enumerate_trees(X, d, depth, feature_mask)
        vals = [S[rows, predict_many(t, X) - 1].sum() for t in trees]
        top = max(vals)
        cands = [t for t, v in zip(trees, vals) if v == top]
        tree = min(cands, key=sort_key)
        return SearchResult(tree, policy_value(tree, S, X))
    subs = enumerate_trees(X, d, 1, feature_mask)
    sub_scores = np.array([S[rows, predict_many(t, X) - 1] for t in subs])  # (n_sub, n)
    # halves are summed separately, so prune with a rounding tolerance and
    # settle the survivors on full-row sums below
    tol = 1e-9 * max(1.0, float(np.abs(S).sum()))
    cands: list[TreePolicy] = list(subs)
    top = float(sub_scores.sum(axis=1).max())
    feats = _allowed_features(X.shape[1], feature_mask)
    for f in feats:
        for thr in canonical_thresholds(X, f):
            lm = X[:, f - 1] <= thr
            lv = sub_scores[:, lm].sum(axis=1)
            rv = sub_scores[:, ~lm].sum(axis=1)
            v = lv.max() + rv.max()
            if v < top - tol:
                continue
            top = max(top, v)
            cands.extend(Split(f, thr, subs[i], subs[j])
                         for i in np.flatnonzero(lv >= lv.max() - tol)
                         for j in np.flatnonzero(rv >= rv.max() - tol))
    vals = [S[rows, predict_many(t, X) - 1].sum() for t in cands]
    best = max(vals)
    tree = min((t for t, v in zip(cands, vals) if v == best), key=sort_key)
    return SearchResult(tree, policy_value(tree, S, X))


# baselines ------------------------------------------------------------------

def naive_policy(model: CmrModel, tc: TargetCovariates, depth: int, feature_mask=None) -> SearchResult:
    """Exact search on the plug-in (delta = 0) score matrix."""
    return exact_tree_search(predict_matrix(model, tc), tc, depth, feature_mask)


def first_best(model: CmrModel, x) -> int:
    x = np.asarray(x, dtype=float).reshape(1, -1)
    m = predict_matrix(model, TargetCovariates(x))
    return int(np.argmax(m[0])) + 1


class FirstBestPolicy:
    """g(x) in argmax_a m(x, a), lowest action on ties."""

    def __init__(self, model: CmrModel):
        self.model = model

    def predict_many(self, X) -> np.ndarray:
        m = predict_matrix(self.model, TargetCovariates(_covariates(X)))
        return np.argmax(m, axis=1).astype(np.int64) + 1


# covariate-shift robust search ---------------------------------------------

@dataclass(frozen=True)
class ShiftSearchResult:
    policy: TreePolicy
    value: float  # worst-case welfare over KL(q || empirical) <= rho
    lambda_star: float


def covariate_shift_tree_search(
    gamma, tc, depth: int, rho: float, feature_mask=None, grid_size: int = 48
) -> ShiftSearchResult:
    """max_g min_{KL(q||u) <= rho} sum_j q_j Gamma[j, g(X_j)].

    By duality the objective is max_{lam > 0} -lam*rho - lam*log mean_j
    exp(-Gamma[j, g(X_j)] / lam). For fixed lam the inner maximisation over
    g is additive in j, so it is an exact tree search on the transformed
    scores -exp(-(Gamma - c) / lam). The outer problem in lam is scanned on
    a log grid and refined by golden section around the best grid point.
    """
    from .robust.kl import kl_worst_case_mean

    S, X = _scores(gamma), _covariates(tc)
    if rho < 0:
        raise ConfigError(f"rho must be >= 0, got {rho}")
    base = exact_tree_search(S, X, depth, feature_mask)
    if rho == 0:
        return ShiftSearchResult(base.policy, base.value, math.inf)
    c = float(S.min())
    spread = float(S.max() - c)
    if spread == 0:
        return ShiftSearchResult(base.policy, base.value, 0.0)
    n = S.shape[0]
    w = np.full(n, 1.0 / n)
    rows = np.arange(n)
    cache: dict[float, tuple[float, TreePolicy]] = {}

    def inner(u: float) -> float:
        if u not in cache:
            lam = math.exp(u)
            t = exact_tree_search(-np.exp(-(S - c) / lam), X, depth, feature_mask).policy
            phi = S[rows, predict_many(t, X) - 1]
            cache[u] = (float(kl_dual_objective(lam, phi, w, rho)), t)
        return cache[u][0]

    lo, hi = math.log(spread * 1e-4), math.log(10.0 * spread / rho)
    us = np.linspace(lo, hi, grid_size)
    vals = [inner(float(u)) for u in us]
    i = int(np.argmax(vals))
    a, b = float(us[max(i - 1, 0)]), float(us[min(i + 1, grid_size - 1)])
    golden_section_max(inner, a, b, tol=1e-6, max_iter=60)

    best_v, best_t = -math.inf, base.policy
    for t in [base.policy] + [cache[u][1] for u in sorted(cache)]:
        phi = S[rows, predict_many(t, X) - 1]
        v = kl_worst_case_mean(phi, w, rho).value
        if v > best_v or (v == best_v and sort_key(t) < sort_key(best_t)):
            best_v, best_t = v, t
    lam = kl_worst_case_mean(S[rows, predict_many(best_t, X) - 1], w, rho).lambda_star
    return ShiftSearchResult(best_t, best_v, lam)
