"""Synthetic source/target populations with known ground truth, and the
Monte Carlo experiments built on them.

Target conditionals are built from the source ones by moving each potential
outcome coordinate down by a budget s_a(x) with the worst-case transport
maps, so a target with sum_a s_a(x) <= delta lies in the Wasserstein ball of
radius delta by construction, and m_T(x, a) = max(m_S(x, a) - s_a(x), inf Y).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import norm, qmc

from .cmr import CmrConfig, FunctionCmr, fit_cmr
from .data import OutcomeSpace, SourceDataset, TargetCovariates
from .errors import ConfigError, DomainError
from .policy import (
    Leaf,
    Split,
    TreePolicy,
    candidate_search,
    enumerate_trees,
    exact_tree_search,
    from_dict,
    predict_many,
    to_text,
)
from .robust.scores import AmbiguitySpec, score_matrix

RQMC_POINTS = 2**17
RQMC_SCRAMBLES = 8


# laws -------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseLaw:
    """Outcome noise around the location m: point mass, uniform(+-scale) or
    Gaussian(sd=scale); draws are clipped to the outcome space."""

    kind: str = "point"
    scale: float = 0.0

    def __post_init__(self):
        if self.kind not in ("point", "uniform", "gaussian"):
            raise ConfigError(f"unknown noise kind {self.kind!r}")
        if not self.scale >= 0:
            raise ConfigError("noise scale must be >= 0")

    def sample(self, m: np.ndarray, ys: OutcomeSpace, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "point" or self.scale == 0:
            e = np.zeros_like(m)
        elif self.kind == "uniform":
            e = rng.uniform(-self.scale, self.scale, size=m.shape)
        else:
            e = rng.normal(0.0, self.scale, size=m.shape)
        return np.clip(m + e, ys.lower, ys.upper)

    def mean(self, m: np.ndarray, ys: OutcomeSpace) -> np.ndarray:
        """Mean of the clipped draw, i.e. the true conditional mean."""
        m = np.asarray(m, dtype=float)
        lo, hi = ys.lower, ys.upper
        if self.kind == "point" or self.scale == 0:
            return np.clip(m, lo, hi)
        h = self.scale
        out = np.zeros_like(m)
        if self.kind == "uniform":
            a, b = m - h, m + h
            ca, cb = np.clip(a, lo, hi), np.clip(b, lo, hi)
            out += (cb**2 - ca**2) / (4.0 * h)
            if math.isfinite(lo):
                out += lo * np.clip((lo - a) / (2.0 * h), 0.0, 1.0)
            if math.isfinite(hi):
                out += hi * np.clip((b - hi) / (2.0 * h), 0.0, 1.0)
            return out
        al = (lo - m) / h
        be = (hi - m) / h
        out += m * (norm.cdf(be) - norm.cdf(al)) + h * (norm.pdf(al) - norm.pdf(be))
        if math.isfinite(lo):
            out += lo * norm.cdf(al)
        if math.isfinite(hi):
            out += hi * norm.sf(be)
        return out


@dataclass(frozen=True, eq=False)
class CellLaw:
    """Discrete covariate cells with source and target probabilities."""

    values: np.ndarray  # (M, k)
    source_probs: np.ndarray
    target_probs: np.ndarray

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        ps = np.asarray(self.source_probs, dtype=float)
        pt = np.asarray(self.target_probs, dtype=float)
        if ps.shape != (v.shape[0],) or pt.shape != (v.shape[0],):
            raise ConfigError("cell probabilities must have one entry per cell")
        for p in (ps, pt):
            if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
                raise ConfigError("cell probabilities must be non-negative and sum to 1")
        if np.any((pt > 0) & (ps == 0)):
            raise DomainError("target puts mass on a cell the source never visits")
        if np.unique(v, axis=0).shape[0] != v.shape[0]:
            raise ConfigError("cell covariate values must be distinct")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "source_probs", ps / ps.sum())
        object.__setattr__(self, "target_probs", pt / pt.sum())

    @property
    def k(self) -> int:
        return int(self.values.shape[1])

    def sample(self, n: int, target: bool, rng: np.random.Generator) -> np.ndarray:
        p = self.target_probs if target else self.source_probs
        return self.values[rng.choice(self.values.shape[0], size=n, p=p)]

    def index(self, X: np.ndarray) -> np.ndarray:
        eq = np.all(np.asarray(X, dtype=float)[:, None, :] == self.values[None, :, :], axis=2)
        if not np.all(eq.any(axis=1)):
            raise DomainError("covariate row does not match any scenario cell")
        return np.argmax(eq, axis=1)


@dataclass(frozen=True, eq=False)
class BoxLaw:
    """Uniform covariates on boxes; the target box must sit inside the source box."""

    source_low: np.ndarray
    source_high: np.ndarray
    target_low: np.ndarray
    target_high: np.ndarray

    def __post_init__(self):
        arrs = [np.asarray(a, dtype=float).ravel() for a in
                (self.source_low, self.source_high, self.target_low, self.target_high)]
        if len({a.size for a in arrs}) != 1:
            raise ConfigError("box bounds differ in dimension")
        sl, sh, tl, th = arrs
        if np.any(sl >= sh) or np.any(tl >= th):
            raise ConfigError("box bounds need low < high")
        if np.any(tl < sl) or np.any(th > sh):
            raise DomainError("target box must lie inside the source box")
        for name, a in zip(("source_low", "source_high", "target_low", "target_high"), arrs):
            object.__setattr__(self, name, a)

    @property
    def k(self) -> int:
        return int(self.source_low.size)

    def density_ratio(self) -> float:
        """d tau_X / d sigma_X on the target box."""
        return float(np.prod(self.source_high - self.source_low) / np.prod(self.target_high - self.target_low))

    def sample(self, n: int, target: bool, rng: np.random.Generator) -> np.ndarray:
        lo, hi = (self.target_low, self.target_high) if target else (self.source_low, self.source_high)
        return lo + (hi - lo) * rng.uniform(size=(n, self.k))


# scenario ---------------------------------------------------------------------

def _zero_shift(d: int):
    return lambda X: np.zeros((np.asarray(X).shape[0], d))


@dataclass(eq=False)
class SyntheticScenario:
    name: str
    law: CellLaw | BoxLaw
    location: Callable[[np.ndarray], np.ndarray]  # X -> (n, d) noise location
    d: int
    noise: NoiseLaw
    ys: OutcomeSpace
    shift: Callable[[np.ndarray], np.ndarray] | None = None  # X -> (n, d), >= 0
    candidates: dict[str, TreePolicy] | None = None
    feature_mask: tuple[int, ...] = ()
    rect_mean: Callable | None = None  # (lo, hi, action, delta) -> mean robust score
    optimal: Callable | None = None  # (delta, depth) -> TreePolicy
    action_labels: tuple[str, ...] = ()
    covariate_names: tuple[str, ...] = ()
    config: dict = field(default_factory=dict)
    _rqmc: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.shift is None:
            self.shift = _zero_shift(self.d)
        if not self.action_labels:
            self.action_labels = tuple(str(a) for a in range(1, self.d + 1))
        if not self.covariate_names:
            self.covariate_names = tuple(f"x{i}" for i in range(1, self.k + 1))

    @property
    def k(self) -> int:
        return self.law.k

    @property
    def is_discrete(self) -> bool:
        return isinstance(self.law, CellLaw)

    def true_cmr(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self.noise.mean(self.location(X), self.ys)

    def shifts(self, X) -> np.ndarray:
        s = np.asarray(self.shift(np.atleast_2d(np.asarray(X, dtype=float))), dtype=float)
        if np.any(s < 0):
            raise DomainError("target shifts must be non-negative")
        return s

    def true_target_cmr(self, X) -> np.ndarray:
        return np.maximum(self.true_cmr(X) - self.shifts(X), self.ys.lower)

    def true_scores(self, X, delta: float) -> np.ndarray:
        return np.maximum(self.true_cmr(X) - delta, self.ys.lower)

    @property
    def delta_true(self) -> float:
        """Largest per-point transport budget sum_a s_a(x) (on the cells or the RQMC set)."""
        X = self.law.values if self.is_discrete else self._rqmc_points()[0][:4096]
        return float(self.shifts(X).sum(axis=1).max())

    def _rqmc_points(self) -> list[np.ndarray]:
        if "pts" not in self._rqmc:
            law = self.law
            seqs = np.random.SeedSequence([0x5EED, self.k]).spawn(RQMC_SCRAMBLES)
            pts = []
            for s in seqs:
                u = qmc.Sobol(self.k, scramble=True, seed=np.random.default_rng(s)).random(RQMC_POINTS)
                pts.append(law.target_low + (law.target_high - law.target_low) * u)
            self._rqmc["pts"] = pts
        return self._rqmc["pts"]


# sampling ---------------------------------------------------------------------

def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def sample_source(s: SyntheticScenario, n_s: int, seed) -> SourceDataset:
    """Uniformly randomised trial: arms are a random permutation of a balanced
    allocation, so each unit is assigned uniformly and every arm is observed."""
    if n_s < s.d:
        raise DomainError(f"need n_s >= d = {s.d}, got {n_s}")
    rng = _rng(seed)
    X = s.law.sample(n_s, False, rng)
    A = rng.permutation(np.arange(n_s) % s.d) + 1
    m = s.location(X)[np.arange(n_s), A - 1]
    Y = s.noise.sample(m, s.ys, rng)
    return SourceDataset(Y, A, X, s.action_labels, s.covariate_names)


def sample_target_covariates(s: SyntheticScenario, n_t: int, seed) -> TargetCovariates:
    if n_t < 1:
        raise DomainError("n_t must be >= 1")
    return TargetCovariates(s.law.sample(n_t, True, _rng(seed)), s.covariate_names)


def transport_outcomes(y: np.ndarray, m: np.ndarray, shift: np.ndarray, ys: OutcomeSpace) -> np.ndarray:
    """Apply the worst-case map with budget ``shift`` to source draws ``y`` of mean ``m``."""
    if not math.isfinite(ys.lower):
        return y - shift
    lo = ys.lower
    inner = m - shift > lo
    with np.errstate(divide="ignore", invalid="ignore"):
        moved = y - shift * (y - lo) / (m - lo)
    return np.where(inner, moved, lo)


def sample_target_outcomes(s: SyntheticScenario, X, actions, seed) -> np.ndarray:
    """Draw Y_T(a) for the given rows by transporting fresh source draws."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    a = np.asarray(actions, dtype=int) - 1
    rows = np.arange(X.shape[0])
    loc = s.location(X)[rows, a]
    y = s.noise.sample(loc, s.ys, _rng(seed))
    m = s.true_cmr(X)[rows, a]
    return transport_outcomes(y, m, s.shifts(X)[rows, a], s.ys)


# true welfare -----------------------------------------------------------------

@dataclass(frozen=True)
class WelfareValue:
    value: float
    se: float
    method: str  # "exact" | "analytic" | "rqmc"


def _actions(g, X) -> np.ndarray:
    if isinstance(g, (Leaf, Split)):
        return predict_many(g, X)
    return np.asarray(g.predict_many(X), dtype=np.int64)


def _leaf_boxes(g: TreePolicy, lo: np.ndarray, hi: np.ndarray):
    if isinstance(g, Leaf):
        yield lo, hi, g.action
        return
    f = g.feature - 1
    t = min(max(g.threshold, lo[f]), hi[f])
    hl, lh = hi.copy(), lo.copy()
    hl[f], lh[f] = t, t
    yield from _leaf_boxes(g.left, lo, hl)
    yield from _leaf_boxes(g.right, lh, hi)


def _welfare(s: SyntheticScenario, g, fn: Callable[[np.ndarray], np.ndarray]) -> WelfareValue:
    if s.is_discrete:
        X = s.law.values
        vals = fn(X)[np.arange(X.shape[0]), _actions(g, X) - 1]
        return WelfareValue(float(np.dot(s.law.target_probs, vals)), 0.0, "exact")
    est = []
    for X in s._rqmc_points():
        est.append(float(np.mean(fn(X)[np.arange(X.shape[0]), _actions(g, X) - 1])))
    est = np.array(est)
    return WelfareValue(float(est.mean()), float(est.std(ddof=1) / math.sqrt(est.size)), "rqmc")


def true_robust_welfare(s: SyntheticScenario, g, delta: float, method: str = "auto") -> WelfareValue:
    """E_tau[max{m_S(X, g(X)) - delta, inf Y}] with the true m_S and tau_X.

    Exact on cells; analytic on boxes when the scenario supplies rectangle
    means and ``g`` is a tree; otherwise randomised quasi-Monte Carlo with
    8 scrambles of 2^17 Sobol points and the standard error across scrambles.
    """
    if delta < 0:
        raise DomainError("delta must be >= 0")
    analytic = (not s.is_discrete and s.rect_mean is not None
                and isinstance(g, (Leaf, Split)) and method != "rqmc")
    if analytic:
        lo, hi = s.law.target_low, s.law.target_high
        vol = float(np.prod(hi - lo))
        v = 0.0
        for blo, bhi, a in _leaf_boxes(g, lo.copy(), hi.copy()):
            w = float(np.prod(bhi - blo)) / vol
            if w > 0:
                v += w * s.rect_mean(blo, bhi, a, delta)
        return WelfareValue(v, 0.0, "analytic")
    return _welfare(s, g, lambda X: s.true_scores(X, delta))


def true_target_welfare(s: SyntheticScenario, g) -> WelfareValue:
    """E_tau[m_T(X, g(X))], the welfare the target population actually realises."""
    if not s.is_discrete and s.rect_mean is not None and isinstance(g, (Leaf, Split)):
        probe = s._rqmc_points()[0][:4096]
        if not np.any(s.shifts(probe)):
            return true_robust_welfare(s, g, 0.0)
    return _welfare(s, g, s.true_target_cmr)


def true_optimal_policy(s: SyntheticScenario, delta: float, depth: int, feature_mask=()) -> tuple[TreePolicy, float]:
    """Best policy in the class under the true robust welfare."""
    mask = tuple(sorted(set(s.feature_mask) | set(feature_mask or ())))
    if s.candidates:
        names = list(s.candidates)
        vals = [true_robust_welfare(s, s.candidates[n], delta).value for n in names]
        i = int(np.argmax(vals))
        return s.candidates[names[i]], vals[i]
    if s.is_discrete:
        X = s.law.values
        S = s.true_scores(X, delta) * s.law.target_probs[:, None]
        g = exact_tree_search(S, X, depth, mask).policy
    elif s.optimal is not None:
        g = s.optimal(delta, depth)
    else:
        X = s._rqmc_points()[0][: 2**13]
        g = exact_tree_search(s.true_scores(X, delta), X, depth, mask).policy
    return g, true_robust_welfare(s, g, delta).value


# experiments ------------------------------------------------------------------

@dataclass(frozen=True)
class RegretRow:
    n_s: int
    n_t: int
    rep: int
    seed: int
    r_dro: float
    naive_target_welfare: float
    dr_target_welfare: float
    cmr: str  # "oracle" | "fitted"

    def to_dict(self) -> dict:
        return asdict(self)


REGRET_COLUMNS = ("n_s", "n_t", "rep", "seed", "cmr", "r_dro", "naive_target_welfare", "dr_target_welfare")


def search_policy(s: SyntheticScenario, gamma, tc, depth: int, feature_mask=()) -> TreePolicy:
    mask = tuple(sorted(set(s.feature_mask) | set(feature_mask or ())))
    if s.candidates:
        return candidate_search(gamma, tc, list(s.candidates.values()))[1].policy
    return exact_tree_search(gamma, tc, depth, mask).policy


def oracle_model(s: SyntheticScenario) -> FunctionCmr:
    bound = s.config.get("bound", 1e6)
    return FunctionCmr(s.true_cmr, s.d, s.k, bound)


def regret_experiment(
    s: SyntheticScenario,
    sizes: Sequence[tuple[int, int]],
    reps: int,
    delta: float,
    depth: int,
    master_seed: int = 0,
    oracle: bool = False,
    cmr_config: CmrConfig | None = None,
    feature_mask=(),
) -> list[RegretRow]:
    """R_DRO of the fitted DR-ITR for each (n_s, n_t) and replication.

    Replication r at size index i draws all randomness from
    SeedSequence([master_seed, i, r]). With ``oracle`` the true m_S replaces
    the fitted CMR, so only the target sample is random.
    """
    if reps < 1:
        raise ConfigError("reps must be >= 1")
    cfg = cmr_config or CmrConfig()
    spec = AmbiguitySpec("w1", delta)
    naive_spec = AmbiguitySpec("w1", 0.0)
    g_star, v_star = true_optimal_policy(s, delta, depth, feature_mask)
    rows = []
    for i, (n_s, n_t) in enumerate(sizes):
        for r in range(reps):
            seq = np.random.SeedSequence([master_seed, i, r])
            src_seq, tgt_seq, fit_seq = seq.spawn(3)
            tc = sample_target_covariates(s, n_t, tgt_seq)
            if oracle:
                model = oracle_model(s)
            else:
                ds = sample_source(s, n_s, src_seq)
                model = fit_cmr(ds, cfg, int(fit_seq.generate_state(1)[0]))
            g_dr = search_policy(s, score_matrix(model, tc, spec, s.ys), tc, depth, feature_mask)
            g_nv = search_policy(s, score_matrix(model, tc, naive_spec, s.ys), tc, depth, feature_mask)
            reg = v_star - true_robust_welfare(s, g_dr, delta).value
            rows.append(RegretRow(
                n_s=int(n_s), n_t=int(n_t), rep=r, seed=int(seq.generate_state(1)[0]),
                r_dro=float(reg),
                naive_target_welfare=true_target_welfare(s, g_nv).value,
                dr_target_welfare=true_target_welfare(s, g_dr).value,
                cmr="oracle" if oracle else "fitted",
            ))
    return rows


def median_by_size(rows: Sequence[RegretRow]) -> list[tuple[int, int, float]]:
    out = []
    for key in sorted({(r.n_s, r.n_t) for r in rows}):
        vals = [r.r_dro for r in rows if (r.n_s, r.n_t) == key]
        out.append((key[0], key[1], float(np.median(vals))))
    return out


@dataclass
class EquivalenceReport:
    delta: float
    assumption_2i: bool  # first-best assignment available in the class
    assumption_2ii: bool  # min m_S - delta >= inf Y on the target support
    naive_argmax: list[str]
    robust_argmax: list[str]
    inclusion_holds: bool
    counterexample: str | None

    def to_dict(self) -> dict:
        return asdict(self)


def _argmax_set(vals: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    top = vals.max()
    return np.flatnonzero(vals >= top - tol * max(1.0, abs(top)))


def argmax_inclusion(naive_scores, robust_scores, X, trees: Sequence[TreePolicy], weights=None):
    """Whether every naive-argmax assignment is also a robust-argmax assignment.

    Policies are compared through their assignment vectors on the rows of X.
    Returns (holds, naive assignment set, robust assignment set).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[0]
    w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
    acts = np.array([predict_many(t, X) for t in trees])
    rows = np.arange(n)
    nv = np.array([np.dot(w, np.asarray(naive_scores)[rows, a - 1]) for a in acts])
    rv = np.array([np.dot(w, np.asarray(robust_scores)[rows, a - 1]) for a in acts])
    keep = w > 0
    nset = {tuple(acts[i][keep]) for i in _argmax_set(nv)}
    rset = {tuple(acts[i][keep]) for i in _argmax_set(rv)}
    return nset <= rset, nset, rset


def equivalence_check(s: SyntheticScenario, delta: float, depth: int) -> EquivalenceReport:
    """Compare naive and robust argmax sets over the scenario's policy class (cells only)."""
    if not s.is_discrete:
        raise ConfigError("equivalence_check needs a discrete-cell scenario")
    X = s.law.values
    if s.candidates:
        names = list(s.candidates)
        trees = [s.candidates[n] for n in names]
    else:
        trees = enumerate_trees(X, s.d, depth, s.feature_mask)
        names = [to_text(t).strip().replace("\n", " / ") for t in trees]
    w = s.law.target_probs
    m = s.true_cmr(X)
    rob = s.true_scores(X, delta)
    holds, nset, rset = argmax_inclusion(m, rob, X, trees, w)
    keep = w > 0
    acts = [tuple(predict_many(t, X)[keep]) for t in trees]
    fb = tuple((np.argmax(m, axis=1) + 1)[keep])
    first = lambda sset: sorted({names[i] for i, a in enumerate(acts) if a in sset})  # noqa: E731
    bad = [names[i] for i, a in enumerate(acts) if a in nset and a not in rset]
    return EquivalenceReport(
        delta=delta,
        assumption_2i=fb in set(acts),
        assumption_2ii=bool(np.min(m[keep]) - delta >= s.ys.lower),
        naive_argmax=first(nset),
        robust_argmax=first(rset),
        inclusion_holds=holds,
        counterexample=bad[0] if bad else None,
    )


@dataclass(frozen=True)
class GuaranteeRow:
    scenario: str
    delta: float
    delta_true: float
    reported: float
    reported_se: float
    realized: float
    realized_se: float
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def dro_guarantee_check(
    s: SyntheticScenario,
    delta: float,
    n_s: int,
    n_t: int,
    seed: int,
    depth: int = 1,
    n_mc: int = 200_000,
    cmr_config: CmrConfig | None = None,
) -> GuaranteeRow:
    """Fit, learn the DR-ITR, then draw a fresh target population and compare.

    Passes when realised welfare >= reported robust welfare - 3 combined
    standard errors (target-sample error of the report, Monte Carlo error of
    the realisation).
    """
    src, tgt, fit, mc = np.random.SeedSequence([seed, 0xD20]).spawn(4)
    ds = sample_source(s, n_s, src)
    tc = sample_target_covariates(s, n_t, tgt)
    model = fit_cmr(ds, cmr_config or CmrConfig(), int(fit.generate_state(1)[0]))
    gamma = score_matrix(model, tc, AmbiguitySpec("w1", delta), s.ys)
    g = search_policy(s, gamma, tc, depth)
    phi = gamma.scores[np.arange(tc.n), predict_many(g, tc.covariates) - 1]
    rep, rep_se = float(phi.mean()), float(phi.std(ddof=1) / math.sqrt(tc.n)) if tc.n > 1 else 0.0
    x_seq, y_seq = mc.spawn(2)
    X = s.law.sample(n_mc, True, _rng(x_seq))
    y = sample_target_outcomes(s, X, predict_many(g, X), y_seq)
    real, real_se = float(y.mean()), float(y.std(ddof=1) / math.sqrt(n_mc))
    ok = real >= rep - 3.0 * math.hypot(rep_se, real_se)
    return GuaranteeRow(s.name, delta, s.delta_true, rep, rep_se, real, real_se, bool(ok))


# scenario factories -----------------------------------------------------------

def cell_scenario(
    name: str,
    values,
    source_probs,
    target_probs,
    m,
    noise: NoiseLaw,
    ys: OutcomeSpace,
    shift=None,
    candidates: dict[str, TreePolicy] | None = None,
    action_labels=(),
    covariate_names=(),
    config: dict | None = None,
) -> SyntheticScenario:
    law = CellLaw(values, source_probs, target_probs)
    table = np.asarray(m, dtype=float)
    if table.ndim != 2 or table.shape[0] != law.values.shape[0]:
        raise ConfigError("cell CMR table must be cells x actions")
    d = table.shape[1]
    sh = np.zeros_like(table) if shift is None else np.asarray(shift, dtype=float)
    if sh.shape != table.shape or np.any(sh < 0):
        raise ConfigError("cell shift table must match the CMR table and be >= 0")
    loc = lambda X: table[law.index(X)]  # noqa: E731
    sft = lambda X: sh[law.index(X)]  # noqa: E731
    cfg = dict(config or {})
    cfg.setdefault("bound", float(np.max(np.abs(table)) + 10 * noise.scale + 1.0))
    return SyntheticScenario(name, law, loc, d, noise, ys, sft, candidates,
                             action_labels=tuple(action_labels), covariate_names=tuple(covariate_names),
                             config=cfg)


def example1_scenario(q: float) -> SyntheticScenario:
    """Two cells (x=0 for m, x=1 for f), point-mass outcomes, Y = [0, inf).

    Actions are ordered (a=1, a=0); the policy class is {g1, g2} with
    g1 treating cell m only and g2 treating cell f only.
    """
    if not 0.5 < q < 1.0:
        raise DomainError(f"q must lie in (0.5, 1), got {q}")
    g1 = Split(1, 0.5, Leaf(1), Leaf(2))
    g2 = Split(1, 0.5, Leaf(2), Leaf(1))
    return cell_scenario(
        "example1", [[0.0], [1.0]], [0.5, 0.5], [q, 1.0 - q],
        [[0.5, 0.4], [1.5, 1.4]], NoiseLaw("point"), OutcomeSpace(0.0),
        candidates={"g1": g1, "g2": g2}, action_labels=("1", "0"), covariate_names=("x",),
        config={"preset": "example1", "q": q},
    )


def two_state_scenario(noise_scale: float = 0.2) -> SyntheticScenario:
    """Three covariate states, two arms (treat, control), Y = [0, inf).

    A depth-1 tree cannot give every state its best arm. The plug-in rule
    protects the large low-outcome state 0; as delta grows its scores hit
    the floor and the robust rule switches to protecting state 2. The target
    population loses state 0's outcomes entirely (budget 0.9), so the
    robust switch pays off there.
    """
    return cell_scenario(
        "two_state", [[0.0], [1.0], [2.0]], [1 / 3, 1 / 3, 1 / 3], [0.5, 0.3, 0.2],
        [[0.5, 0.4], [1.0, 3.0], [3.0, 2.9]], NoiseLaw("uniform", noise_scale), OutcomeSpace(0.0),
        shift=[[0.5, 0.4], [0.0, 0.0], [0.0, 0.0]],
        action_labels=("treat", "control"), covariate_names=("state",),
        config={"preset": "two_state", "noise_scale": noise_scale},
    )


def rate_scenario(A: float = 4.0, B: float = 1.0, gamma: float = 1.0, noise_scale: float = 2.0,
                  mu: float = 1.0) -> SyntheticScenario:
    """X ~ U[0,1]^2, Y real, two arms with m(x, 1) - m(x, 2) = Delta(x) where

        Delta(x) = A * sign(x1 - 1/2) * |x1 - 1/2|^gamma + B * sqrt(2) * cos(2 pi x2).

    Policies may not split on x2 (masked), so the x2 term acts as noise in
    the empirical objective and the estimated threshold on x1 wanders.
    """

    def delta_fn(X):
        u = X[:, 0] - 0.5
        return A * np.sign(u) * np.abs(u) ** gamma + B * math.sqrt(2.0) * np.cos(2 * math.pi * X[:, 1])

    def loc(X):
        D = delta_fn(X)
        return np.column_stack([mu + D / 2, mu - D / 2])

    def prim1(t):  # antiderivative of sign(u)|u|^gamma at u = t - 1/2
        return np.abs(t - 0.5) ** (gamma + 1) / (gamma + 1)

    def rect_mean(lo, hi, a, delta):
        m1 = (prim1(hi[0]) - prim1(lo[0])) / (hi[0] - lo[0])
        m2 = (math.sin(2 * math.pi * hi[1]) - math.sin(2 * math.pi * lo[1])) / (2 * math.pi * (hi[1] - lo[1]))
        mean_d = A * m1 + B * math.sqrt(2.0) * m2
        return mu + (mean_d / 2 if a == 1 else -mean_d / 2) - delta

    def optimal(delta, depth):
        if depth == 0:
            return Leaf(1)
        return Split(1, 0.5, Leaf(2), Leaf(1))

    law = BoxLaw([0, 0], [1, 1], [0, 0], [1, 1])
    bound = mu + A / 2 * 0.5**gamma + B * math.sqrt(2) / 2 + noise_scale
    return SyntheticScenario(
        "rate", law, loc, 2, NoiseLaw("uniform", noise_scale), OutcomeSpace(),
        feature_mask=(2,), rect_mean=rect_mean, optimal=optimal,
        config={"preset": "rate", "A": A, "B": B, "gamma": gamma, "noise_scale": noise_scale,
                "mu": mu, "bound": bound},
    )


def random_cell_scenario(seed: int, delta: float, d: int | None = None) -> SyntheticScenario:
    """Random discrete scenario whose target lies in the delta-ball by construction.

    Each cell gets a transport budget delta * U(0.5, 0.9) split over actions
    by Dirichlet weights; outcomes live on [0, inf).
    """
    rng = np.random.default_rng([seed, 0xCE11])
    M = int(rng.integers(3, 7))
    d = d or int(rng.integers(2, 4))
    grid = np.array([(i, j) for i in range(4) for j in range(4)], dtype=float)
    values = grid[rng.choice(len(grid), size=M, replace=False)]
    tp = rng.dirichlet(np.full(M, 2.0))
    m = rng.uniform(0.2, 2.5, size=(M, d))
    budget = delta * rng.uniform(0.5, 0.9, size=M)
    shift = budget[:, None] * rng.dirichlet(np.ones(d), size=M)
    return cell_scenario(
        f"random_cells_{seed}", values, np.full(M, 1.0 / M), tp, m,
        NoiseLaw("uniform", 0.2), OutcomeSpace(0.0), shift=shift,
        config={"preset": "random_cells", "seed": seed, "delta": delta, "d": d},
    )


def scenario_from_config(cfg: dict) -> SyntheticScenario:
    """Build a scenario from a preset name plus parameters, or an explicit cell table."""
    cfg = dict(cfg)
    preset = cfg.pop("preset", None)
    try:
        if preset == "example1":
            return example1_scenario(float(cfg.get("q", 0.75)))
        if preset == "two_state":
            return two_state_scenario(**cfg)
        if preset == "rate":
            return rate_scenario(**cfg)
        if preset == "random_cells":
            return random_cell_scenario(int(cfg["seed"]), float(cfg["delta"]), cfg.get("d"))
        if preset in (None, "cells"):
            noise = NoiseLaw(**cfg.get("noise", {}))
            ys = OutcomeSpace.from_dict(cfg["outcome_space"]) if "outcome_space" in cfg else OutcomeSpace()
            cands = cfg.get("candidates")
            if cands is not None:
                cands = {k: from_dict(v) for k, v in cands.items()}
            return cell_scenario(
                cfg.get("name", "cells"), cfg["values"], cfg["source_probs"], cfg["target_probs"],
                cfg["m"], noise, ys, cfg.get("shift"), cands,
                cfg.get("action_labels", ()), cfg.get("covariate_names", ()),
                config={"preset": "cells", **cfg},
            )
    except (KeyError, TypeError) as e:
        raise ConfigError(f"bad scenario config: {e}") from e
    raise ConfigError(f"unknown scenario preset {preset!r}")
