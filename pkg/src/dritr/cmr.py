"""Conditional mean response estimation, one regressor per treatment arm.

Two estimators are provided: bagged CART regression trees and k-nearest
neighbours. Both are piecewise averages of observed outcomes, so every
prediction stays inside the observed outcome range.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numba
import numpy as np

from .data import SourceDataset, TargetCovariates
from .errors import ConfigError, DimensionError, SchemaError

FORMAT_NAME = "dritr.cmr"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class CmrConfig:
    kind: str = "forest"  # "forest" | "knn"
    n_trees: int = 100
    min_leaf: int = 5
    bagging: bool = True
    max_depth: int | None = None
    k: int | None = None  # knn neighbours; None -> ceil(n_a ** (2/3))
    holdout: float = 0.2

    def __post_init__(self):
        if self.kind not in ("forest", "knn"):
            raise ConfigError(f"estimator.kind must be 'forest' or 'knn', got {self.kind!r}")
        if self.min_leaf < 1 or self.n_trees < 1:
            raise ConfigError("estimator.min_leaf and estimator.n_trees must be >= 1")
        if self.k is not None and self.k < 1:
            raise ConfigError("estimator.k must be >= 1")
        if not 0.0 <= self.holdout < 1.0:
            raise ConfigError("estimator.holdout must lie in [0, 1)")

    @classmethod
    def from_dict(cls, d: dict) -> "CmrConfig":
        allowed = set(cls.__dataclass_fields__)
        unknown = set(d) - allowed
        if unknown:
            raise ConfigError(f"unknown estimator keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


# --------------------------------------------------------------------------
# regression tree


@dataclass
class RegressionTree:
    """Flat-array binary tree; ``feature[i] == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, x: np.ndarray) -> np.ndarray:
        return _descend(
            self.feature, self.threshold, self.left, self.right, self.value,
            np.ascontiguousarray(x, dtype=float),
        )

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    def to_nodes(self) -> list[dict]:
        nodes = []
        for i in range(self.n_nodes):
            if self.feature[i] < 0:
                nodes.append({"id": i, "value": float(self.value[i])})
            else:
                nodes.append(
                    {
                        "id": i,
                        "feature": int(self.feature[i]),
                        "threshold": float(self.threshold[i]),
                        "left": int(self.left[i]),
                        "right": int(self.right[i]),
                    }
                )
        return nodes

    @classmethod
    def from_nodes(cls, nodes: list[dict]) -> "RegressionTree":
        n = len(nodes)
        feat = np.full(n, -1, dtype=np.intp)
        thr = np.zeros(n)
        left = np.full(n, -1, dtype=np.intp)
        right = np.full(n, -1, dtype=np.intp)
        val = np.zeros(n)
        for nd in nodes:
            i = nd["id"]
            if "value" in nd:
                val[i] = nd["value"]
            else:
                feat[i] = nd["feature"]
                thr[i] = nd["threshold"]
                left[i] = nd["left"]
                right[i] = nd["right"]
        return cls(feat, thr, left, right, val)


@numba.njit(cache=True)
def _descend(feature, threshold, left, right, value, x):
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        node = 0
        while feature[node] >= 0:
            if x[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


@numba.njit(cache=True)
def _midpoint(a, b):
    t = a + (b - a) / 2.0
    return a if t >= b else t


@numba.njit(cache=True)
def _best_split(x, y, idx, min_leaf):
    """Best SSE-reducing split of rows ``idx``.

    Ties (gains within a relative 1e-12) go to the lowest feature index, then
    the lowest threshold. Returns (feature, threshold) or (-1, 0.0).
    """
    m = idx.shape[0]
    k = x.shape[1]
    total = 0.0
    sq = 0.0
    for i in range(m):
        total += y[idx[i]]
        sq += y[idx[i]] * y[idx[i]]
    base = total * total / m
    tol = 1e-12 * max(1.0, abs(base), sq)
    gains = np.full((k, m), -np.inf)
    xs_all = np.empty((k, m))
    for j in range(k):
        xj = np.empty(m)
        for i in range(m):
            xj[i] = x[idx[i], j]
        order = np.argsort(xj, kind="mergesort")
        cs = 0.0
        for i in range(m):
            xs_all[j, i] = xj[order[i]]
        for i in range(m - 1):
            cs += y[idx[order[i]]]
            nl = i + 1
            nr = m - nl
            if nl < min_leaf or nr < min_leaf:
                continue
            if not xs_all[j, i] < xs_all[j, i + 1]:
                continue
            sr = total - cs
            gains[j, i] = cs * cs / nl + sr * sr / nr - base
    gmax = -np.inf
    for j in range(k):
        for i in range(m - 1):
            if gains[j, i] > gmax:
                gmax = gains[j, i]
    if not gmax > tol:
        return -1, 0.0
    for j in range(k):
        for i in range(m - 1):
            if gains[j, i] >= gmax - tol:
                return j, _midpoint(xs_all[j, i], xs_all[j, i + 1])
    return -1, 0.0


@numba.njit(cache=True)
def _grow(x, y, min_leaf, max_depth):
    n = x.shape[0]
    cap = 2 * n + 1
    feat = np.full(cap, -1, dtype=np.int64)
    thr = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    val = np.zeros(cap)
    # explicit stack of (node, start, stop, depth) over a permutation buffer
    perm = np.arange(n)
    st_node = np.empty(cap, dtype=np.int64)
    st_lo = np.empty(cap, dtype=np.int64)
    st_hi = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)
    top = 0
    st_node[0], st_lo[0], st_hi[0], st_depth[0] = 0, 0, n, 0
    top = 1
    n_nodes = 1
    while top > 0:
        top -= 1
        node, lo, hi, depth = st_node[top], st_lo[top], st_hi[top], st_depth[top]
        idx = perm[lo:hi].copy()
        m = hi - lo
        s = 0.0
        for i in range(m):
            s += y[idx[i]]
        val[node] = s / m
        if m < 2 * min_leaf or (max_depth >= 0 and depth >= max_depth):
            continue
        j, t = _best_split(x, y, idx, min_leaf)
        if j < 0:
            continue
        # stable partition: left rows keep their relative order
        nl = 0
        for i in range(m):
            if x[idx[i], j] <= t:
                perm[lo + nl] = idx[i]
                nl += 1
        p = lo + nl
        for i in range(m):
            if not x[idx[i], j] <= t:
                perm[p] = idx[i]
                p += 1
        feat[node] = j
        thr[node] = t
        li = n_nodes
        ri = n_nodes + 1
        n_nodes += 2
        left[node] = li
        right[node] = ri
        # right pushed first so the left subtree is expanded first
        st_node[top], st_lo[top], st_hi[top], st_depth[top] = ri, lo + nl, hi, depth + 1
        top += 1
        st_node[top], st_lo[top], st_hi[top], st_depth[top] = li, lo, lo + nl, depth + 1
        top += 1
    return feat[:n_nodes], thr[:n_nodes], left[:n_nodes], right[:n_nodes], val[:n_nodes]


def fit_tree(x: np.ndarray, y: np.ndarray, min_leaf: int, max_depth: int | None = None) -> RegressionTree:
    feat, thr, left, right, val = _grow(
        np.ascontiguousarray(x, dtype=float),
        np.ascontiguousarray(y, dtype=float),
        int(min_leaf),
        -1 if max_depth is None else int(max_depth),
    )
    return RegressionTree(feat.astype(np.intp), thr, left.astype(np.intp), right.astype(np.intp), val)


# --------------------------------------------------------------------------
# per-arm predictors


class _Forest:
    kind = "forest"

    def __init__(self, trees: list[RegressionTree]):
        self.trees = trees

    def predict(self, x: np.ndarray) -> np.ndarray:
        acc = np.zeros(x.shape[0])
        for t in self.trees:
            acc += t.predict(x)
        return acc / len(self.trees)

    def to_dict(self) -> dict:
        return {"trees": [{"nodes": t.to_nodes()} for t in self.trees]}

    @classmethod
    def from_dict(cls, d: dict) -> "_Forest":
        return cls([RegressionTree.from_nodes(t["nodes"]) for t in d["trees"]])


class _Knn:
    kind = "knn"

    def __init__(self, x: np.ndarray, y: np.ndarray, k: int):
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.k = min(int(k), self.x.shape[0])

    def predict(self, x: np.ndarray, chunk: int = 2048) -> np.ndarray:
        out = np.empty(x.shape[0])
        for s in range(0, x.shape[0], chunk):
            q = x[s : s + chunk]
            d2 = ((q[:, None, :] - self.x[None, :, :]) ** 2).sum(axis=2)
            # stable sort: equidistant neighbours resolved by training row order
            nn = np.argsort(d2, axis=1, kind="stable")[:, : self.k]
            out[s : s + chunk] = self.y[nn].mean(axis=1)
        return out

    def to_dict(self) -> dict:
        return {"k": self.k, "x": self.x.tolist(), "y": self.y.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "_Knn":
        return cls(np.array(d["x"], dtype=float).reshape(len(d["y"]), -1), np.array(d["y"]), d["k"])


def _fit_arm(x, y, cfg: CmrConfig, seed_seq: np.random.SeedSequence):
    if cfg.kind == "knn":
        k = cfg.k if cfg.k is not None else math.ceil(x.shape[0] ** (2.0 / 3.0))
        return _Knn(x, y, k)
    if not cfg.bagging:
        return _Forest([fit_tree(x, y, cfg.min_leaf, cfg.max_depth)])
    trees = []
    for child in seed_seq.spawn(cfg.n_trees):
        rng = np.random.default_rng(child)
        idx = rng.integers(0, x.shape[0], size=x.shape[0])
        trees.append(fit_tree(x[idx], y[idx], cfg.min_leaf, cfg.max_depth))
    return _Forest(trees)


# --------------------------------------------------------------------------
# models


class CmrModel:
    """Fitted m_hat(x, a) with an explicit almost-sure bound ``bound``.

    Subclasses implement ``_predict(x) -> (n, d)``.
    """

    d: int
    k: int
    bound: float

    def _predict(self, x: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def predict_rows(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != self.k:
            raise DimensionError(f"covariate dimension {x.shape[1]} != model dimension {self.k}")
        return self._predict(x)


@dataclass(eq=False)
class FittedCmr(CmrModel):
    arms: list  # one predictor per action, index a-1
    config: CmrConfig
    bound: float
    outcome_range: tuple[float, float]
    action_labels: tuple[str, ...]
    covariate_names: tuple[str, ...]
    seed: int
    holdout_mse: float | None = None
    holdout_mse_by_arm: list = field(default_factory=list)

    @property
    def d(self) -> int:
        return len(self.arms)

    @property
    def k(self) -> int:
        return len(self.covariate_names)

    @property
    def estimator_kind(self) -> str:
        return self.config.kind

    def _predict(self, x: np.ndarray) -> np.ndarray:
        lo, hi = self.outcome_range
        out = np.column_stack([arm.predict(x) for arm in self.arms])
        # averaging can leave the range by one ulp; the bound contract is hard
        return np.clip(out, lo, hi)

    def summary(self) -> dict:
        return {
            "estimator_kind": self.config.kind,
            "bound_M": self.bound,
            "outcome_range": list(self.outcome_range),
            "holdout_mse": self.holdout_mse,
            "holdout_mse_by_arm": self.holdout_mse_by_arm,
            "hyperparameters": self.config.to_dict(),
            "seed": self.seed,
        }

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "estimator_kind": self.config.kind,
            "hyperparameters": self.config.to_dict(),
            "seed": self.seed,
            "bound": self.bound,
            "outcome_range": list(self.outcome_range),
            "action_labels": list(self.action_labels),
            "covariate_names": list(self.covariate_names),
            "holdout_mse": self.holdout_mse,
            "holdout_mse_by_arm": self.holdout_mse_by_arm,
            "arms": [{"action": a + 1, **arm.to_dict()} for a, arm in enumerate(self.arms)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FittedCmr":
        if d.get("format") != FORMAT_NAME:
            raise SchemaError(f"not a {FORMAT_NAME} document")
        if d.get("version") != FORMAT_VERSION:
            raise SchemaError(f"unsupported {FORMAT_NAME} version {d.get('version')}")
        cfg = CmrConfig.from_dict(d["hyperparameters"])
        loader = _Forest if cfg.kind == "forest" else _Knn
        arms = [loader.from_dict(a) for a in sorted(d["arms"], key=lambda a: a["action"])]
        return cls(
            arms=arms,
            config=cfg,
            bound=float(d["bound"]),
            outcome_range=tuple(d["outcome_range"]),
            action_labels=tuple(d["action_labels"]),
            covariate_names=tuple(d["covariate_names"]),
            seed=int(d["seed"]),
            holdout_mse=d.get("holdout_mse"),
            holdout_mse_by_arm=list(d.get("holdout_mse_by_arm", [])),
        )


class FunctionCmr(CmrModel):
    """Wraps a known CMR function ``fn(x) -> (n, d)``; used to inject ground truth."""

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], d: int, k: int, bound: float):
        self.fn = fn
        self.d = d
        self.k = k
        self.bound = float(bound)

    def _predict(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(x), dtype=float).reshape(x.shape[0], self.d)


def _arm_rows(ds: SourceDataset) -> list[np.ndarray]:
    return [np.nonzero(ds.treatments == a)[0] for a in range(1, ds.d + 1)]


def fit_cmr(ds: SourceDataset, cfg: CmrConfig | None = None, seed: int = 0) -> FittedCmr:
    """Fit one regressor per arm and estimate held-out MSE on an 80/20 split.

    The split is stratified by arm; the returned model is refit on all rows.
    """
    cfg = cfg or CmrConfig()
    rows = _arm_rows(ds)
    for a, r in enumerate(rows, start=1):
        if r.size < cfg.min_leaf:
            raise ConfigError(
                f"arm {ds.action_labels[a - 1]!r} has {r.size} rows, fewer than "
                f"estimator.min_leaf={cfg.min_leaf}"
            )
    fit_seq, split_seq, holdout_seq = np.random.SeedSequence(seed).spawn(3)
    arm_seqs = fit_seq.spawn(ds.d)
    x, y = ds.covariates, ds.outcomes

    # held-out estimate: fit on the 80% part of each arm, score on the rest
    split_rng = np.random.default_rng(split_seq)
    holdout_seqs = holdout_seq.spawn(ds.d)
    sq_err, by_arm = [], []
    for a, r in enumerate(rows):
        perm = split_rng.permutation(r)
        n_test = int(math.floor(cfg.holdout * r.size))
        test, train = perm[:n_test], perm[n_test:]
        if n_test == 0 or train.size < cfg.min_leaf:
            by_arm.append(None)
            continue
        pred = _fit_arm(x[train], y[train], cfg, holdout_seqs[a]).predict(x[test])
        e = (pred - y[test]) ** 2
        sq_err.append(e)
        by_arm.append(float(e.mean()))
    holdout = float(np.concatenate(sq_err).mean()) if sq_err else None

    arms = [_fit_arm(x[r], y[r], cfg, arm_seqs[a]) for a, r in enumerate(rows)]
    return FittedCmr(
        arms=arms,
        config=cfg,
        bound=float(np.max(np.abs(y))),
        outcome_range=(float(y.min()), float(y.max())),
        action_labels=ds.action_labels,
        covariate_names=ds.covariate_names,
        seed=int(seed),
        holdout_mse=holdout,
        holdout_mse_by_arm=by_arm,
    )


def predict_cmr(model: CmrModel, x, a: int) -> float:
    """m_hat(x, a) for one covariate vector and a 1-based action index."""
    if not 1 <= a <= model.d:
        raise DimensionError(f"action {a} outside 1..{model.d}")
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionError("predict_cmr takes a single covariate vector")
    return float(model.predict_rows(x)[0, a - 1])


def predict_matrix(model: CmrModel, tc: TargetCovariates) -> np.ndarray:
    """(n_t, d) matrix of m_hat(X_j, a)."""
    if tc.k != model.k:
        raise DimensionError(f"target has {tc.k} covariates, model expects {model.k}")
    return model.predict_rows(tc.covariates)
