"""Command-line front end: ``dritr {learn,sweep,simulate,diagnose}``.

Every run needs a seed (config file or ``--seed``); flags override the
config file. Reports are JSON with sorted keys and no timestamps, so two
runs with the same configuration produce identical bytes.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from contextlib import contextmanager
from importlib import resources
from pathlib import Path
from typing import Iterator, Sequence

import jsonschema
import numpy as np

from . import __version__
from .cmr import CmrModel, FittedCmr, fit_cmr, predict_matrix
from .config import RunConfig, build_config, load_json, load_preset, parse_grid, resolve_mask
from .data import (
    OutcomeSpace,
    SourceDataset,
    TargetCovariates,
    covariate_containment,
    load_source,
    load_target,
    overlap_report,
    write_source,
    write_target,
)
from .errors import ConfigError, DritrError, SchemaError
from .plotting import gnuplot_script, sweep_figure
from .policy import (
    Leaf,
    TreePolicy,
    candidate_search,
    covariate_shift_tree_search,
    exact_tree_search,
    predict_many,
    to_dict,
    to_text,
)
from .robust import (
    WASSERSTEIN1,
    AmbiguitySpec,
    ambiguity_bounds,
    bounds_report,
    kl_score_matrix,
    kl_worst_case_mean,
    score_matrix,
)
from .sim import (
    REGRET_COLUMNS,
    SyntheticScenario,
    equivalence_check,
    median_by_size,
    regret_experiment,
    sample_source,
    sample_target_covariates,
    scenario_from_config,
    search_policy,
    true_robust_welfare,
    true_target_welfare,
)


# output helpers ---------------------------------------------------------------

def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    return v


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(columns: Sequence[str], rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r[c]) for c in columns])
    return buf.getvalue()


def _cell(v) -> str:
    v = _jsonable(v)
    return repr(v) if isinstance(v, float) else str(v)


def _png_atomic(path: Path, rows, series, title) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        sweep_figure(rows, tmp, series, title)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_sweep(out: Path, columns: Sequence[str], rows: Sequence[dict], series, title: str) -> None:
    """sweep.csv, a gnuplot script for it and a rendered sweep.png."""
    write_atomic(out / "sweep.csv", _csv_text(columns, rows))
    write_atomic(out / "sweep.gp", gnuplot_script("sweep.csv", list(columns), series, title))
    _png_atomic(out / "sweep.png", rows, series, title)


def report_schema() -> dict:
    text = resources.files("dritr.schemas").joinpath("report.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def write_report(out: Path, report: dict) -> dict:
    body = json.loads(dumps(report))
    try:
        jsonschema.validate(body, report_schema())
    except jsonschema.ValidationError as e:  # a bug, not a user error
        raise SchemaError(f"report does not match the shipped schema: {e.message}") from None
    write_atomic(out / "report.json", dumps(body))
    return body


@contextmanager
def context(key: str) -> Iterator[None]:
    """Prefix any package error raised inside with the config key it concerns."""
    try:
        yield
    except DritrError as e:
        msg = str(e)
        if msg.startswith(key + ":"):
            raise
        raise type(e)(f"{key}: {msg}") from None


def delta_tag(delta: float) -> str:
    return repr(float(delta))


def compact(g: TreePolicy) -> str:
    if isinstance(g, Leaf):
        return str(g.action)
    return f"x{g.feature}<={g.threshold!r}?({compact(g.left)}):({compact(g.right)})"


def _header(command: str, cfg: RunConfig) -> dict:
    return {
        "command": command,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "versions": {"dritr": __version__, "numpy": np.__version__},
    }


# data -------------------------------------------------------------------------

def _seeds(seed: int, n: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence([seed, 0xC11]).spawn(n)


def load_inputs(cfg: RunConfig) -> tuple[SourceDataset, TargetCovariates, str, SyntheticScenario | None]:
    """Source and target from files, or sampled from the configured scenario."""
    if cfg.source is not None:
        with context("source"):
            ds = load_source(cfg.path(cfg.source), cfg.schema)
        if cfg.target is None:
            tc, origin = TargetCovariates(ds.covariates, ds.covariate_names), "source covariates"
        else:
            with context("target"):
                tc = load_target(cfg.path(cfg.target), ds.covariate_names)
            origin = "file"
        return ds, tc, origin, None
    if cfg.scenario is None:
        raise ConfigError("source: no source file and no scenario given")
    with context("scenario"):
        s = scenario_from_config(cfg.scenario)
    n_s = int(cfg.simulate.get("n_s", 2000))
    n_t = int(cfg.simulate.get("n_t", 2000))
    src, tgt = _seeds(cfg.seed, 2)
    with context("scenario"):
        ds = sample_source(s, n_s, src)
        tc = sample_target_covariates(s, n_t, tgt)
    return ds, tc, "scenario", s


def _outcome_space(cfg: RunConfig, ds: SourceDataset, s: SyntheticScenario | None) -> OutcomeSpace:
    if cfg.outcome_space is not None:
        ys = cfg.outcome_space
    elif s is not None:
        ys = s.ys
    else:
        ys = OutcomeSpace.infer(ds.outcomes)
    with context("outcome_space"):
        ys.check(ds.outcomes)
    return ys


def _fit(cfg: RunConfig, ds: SourceDataset) -> FittedCmr:
    with context("estimator"):
        return fit_cmr(ds, cfg.estimator, cfg.seed)


# learning ---------------------------------------------------------------------

def _scores(model: CmrModel, tc, ds, cfg: RunConfig, delta: float, ys: OutcomeSpace) -> np.ndarray:
    with context("ambiguity"):
        spec = AmbiguitySpec(cfg.kind, delta, cfg.rho, cfg.hurwicz_alpha)
        if spec.kind == WASSERSTEIN1:
            return score_matrix(model, tc, spec, ys).scores
        return kl_score_matrix(model, tc, spec, ys, ds).scores


def _search(S: np.ndarray, tc, cfg: RunConfig, mask) -> tuple[TreePolicy, float]:
    X = tc.covariates
    rows = np.arange(X.shape[0])
    rho = cfg.rho or 0.0
    with context("policy"):
        if cfg.candidates:
            cands = list(cfg.candidates.values())
            if rho > 0:
                vals = [kl_worst_case_mean(S[rows, predict_many(g, X) - 1], None, rho).value for g in cands]
                i = int(np.argmax(vals))
                return cands[i], float(vals[i])
            _, res = candidate_search(S, X, cands)
            return res.policy, res.value
        if rho > 0:
            r = covariate_shift_tree_search(S, X, cfg.depth, rho, mask)
            return r.policy, r.value
        res = exact_tree_search(S, X, cfg.depth, mask)
        return res.policy, res.value


def _value(g: TreePolicy, S: np.ndarray, X: np.ndarray, rho: float) -> float:
    phi = S[np.arange(X.shape[0]), predict_many(g, X) - 1]
    if rho > 0:
        return float(kl_worst_case_mean(phi, None, rho).value)
    return float(phi.mean())


def _candidate_name(cfg: RunConfig, g: TreePolicy) -> str | None:
    if not cfg.candidates:
        return None
    for name, c in cfg.candidates.items():
        if c == g:
            return name
    return None


def learn_sweep(cfg: RunConfig) -> tuple[dict, list[dict], dict[float, TreePolicy]]:
    ds, tc, origin, s = load_inputs(cfg)
    ys = _outcome_space(cfg, ds, s)
    if tc.k != ds.k:
        raise SchemaError(f"target: has {tc.k} covariates, source has {ds.k}")
    with context("policy.mask"):
        mask = resolve_mask(cfg.mask, ds.covariate_names)
    model = _fit(cfg, ds)
    rho = cfg.rho or 0.0

    m = predict_matrix(model, tc)
    g_naive, _ = _search(m, tc, RunConfig(seed=cfg.seed, depth=cfg.depth, candidates=cfg.candidates), mask)
    rows, policies = [], {}
    for delta in cfg.delta_grid:
        S = _scores(model, tc, ds, cfg, delta, ys)
        g, v = _search(S, tc, cfg, mask)
        policies[delta] = g
        rows.append({
            "delta": delta,
            "robust_welfare": v,
            "naive_robust_welfare": _value(g_naive, S, tc.covariates, rho),
            "plugin_welfare": _value(g, m, tc.covariates, 0.0),
            "policy": compact(g),
            "candidate": _candidate_name(cfg, g),
            "switched_from_naive": g != g_naive,
        })
    ov = overlap_report(ds)
    info = {
        "data": {
            "origin": origin,
            "n_s": ds.n,
            "n_t": tc.n,
            "d": ds.d,
            "k": ds.k,
            "action_labels": list(ds.action_labels),
            "covariate_names": list(ds.covariate_names),
            "outcome_space": ys.to_dict(),
        },
        "cmr": model.summary(),
        "naive": {
            "policy": to_dict(g_naive),
            "policy_text": to_text(g_naive, ds.covariate_names),
            "candidate": _candidate_name(cfg, g_naive),
            "plugin_welfare": _value(g_naive, m, tc.covariates, 0.0),
        },
        "diagnostics": {
            "overlap": ov.to_dict(),
            "containment": covariate_containment(ds, tc),
        },
        "model": model,
        "names": ds.covariate_names,
    }
    return info, rows, policies


SWEEP_COLUMNS = ("delta", "robust_welfare", "naive_robust_welfare", "plugin_welfare", "policy")
SWEEP_SERIES = (("robust_welfare", "robust welfare of the robust rule"),
                ("naive_robust_welfare", "robust welfare of the plug-in rule"))


def cmd_learn(cfg: RunConfig, out: Path, command: str = "learn") -> dict:
    info, rows, policies = learn_sweep(cfg)
    model, names = info.pop("model"), info.pop("names")
    report = _header(command, cfg)
    report.update(info)
    report["sweep"] = rows
    for row in rows:
        row["policy_text"] = to_text(policies[row["delta"]], names)
    out.mkdir(parents=True, exist_ok=True)
    if command == "learn":
        for delta, g in policies.items():
            write_atomic(out / f"policy_{delta_tag(delta)}.json", dumps(to_dict(g)))
        write_atomic(out / "cmr.json", dumps(model.to_dict()))
    write_sweep(out, SWEEP_COLUMNS, rows, SWEEP_SERIES, f"{command}: welfare against delta")
    return write_report(out, report)


# simulation -------------------------------------------------------------------

def _candidate_table(s: SyntheticScenario, grid) -> list[dict]:
    out = []
    for delta in grid:
        vals = {n: true_robust_welfare(s, g, delta).value for n, g in s.candidates.items()}
        best = max(vals, key=lambda n: vals[n])  # first maximiser in class order
        for n, v in vals.items():
            out.append({"delta": delta, "candidate": n, "robust_welfare": v, "selected": n == best})
    return out


def _learned_sweep(s: SyntheticScenario, cfg: RunConfig, mask) -> list[dict]:
    n_s = int(cfg.simulate.get("n_s", 2000))
    n_t = int(cfg.simulate.get("n_t", 2000))
    src, tgt = _seeds(cfg.seed, 2)
    ds = sample_source(s, n_s, src)
    tc = sample_target_covariates(s, n_t, tgt)
    model = _fit(cfg, ds)
    g_nv = search_policy(s, predict_matrix(model, tc), tc, cfg.depth, mask)
    naive_t = true_target_welfare(s, g_nv)
    rows = []
    for delta in cfg.delta_grid:
        with context("ambiguity"):
            gamma = score_matrix(model, tc, AmbiguitySpec("w1", delta, None, cfg.hurwicz_alpha), s.ys)
        g = search_policy(s, gamma, tc, cfg.depth, mask)
        t = true_target_welfare(s, g)
        rows.append({
            "delta": delta,
            "dr_target_welfare": t.value,
            "dr_target_se": t.se,
            "naive_target_welfare": naive_t.value,
            "dr_robust_welfare": true_robust_welfare(s, g, delta).value,
            "naive_robust_welfare": true_robust_welfare(s, g_nv, delta).value,
            "dr_policy": compact(g),
            "naive_policy": compact(g_nv),
        })
    return rows


def _rate_check(s: SyntheticScenario, cfg: RunConfig, mask) -> tuple[dict, list]:
    sim = cfg.simulate
    delta = float(sim.get("delta", cfg.delta_grid[-1]))
    reps = int(sim.get("reps", 20))
    lo, hi = (float(v) for v in sim.get("band", (1.4, 2.9)))
    orc_sizes = [tuple(int(v) for v in z) for z in sim.get("oracle_sizes", [[250, 250], [1000, 1000], [4000, 4000]])]
    fit_sizes = [tuple(int(v) for v in z) for z in sim.get("fitted_sizes", [[250, 250], [4000, 4000]])]
    orc = regret_experiment(s, orc_sizes, reps, delta, cfg.depth, cfg.seed, True, cfg.estimator, mask)
    fit = regret_experiment(s, fit_sizes, reps, delta, cfg.depth, cfg.seed, False, cfg.estimator, mask)
    om = [v for _, _, v in median_by_size(orc)]
    fm = [v for _, _, v in median_by_size(fit)]
    ratios = [a / b if b > 0 else math.inf for a, b in zip(om, om[1:])]
    geo = (om[0] / om[-1]) ** (1.0 / (len(om) - 1)) if om[-1] > 0 and len(om) > 1 else math.inf
    limit = float(sim.get("fitted_max_ratio", 0.5))
    frac = fm[-1] / fm[0] if fm[0] > 0 else math.inf
    summary = {
        "delta": delta,
        "reps": reps,
        "band": [lo, hi],
        "oracle": {
            "sizes": [list(z) for z in orc_sizes],
            "median_r_dro": om,
            "ratios": ratios,
            "ratios_in_band": [lo <= r <= hi for r in ratios],
            "geometric_factor": geo,
            "pass": all(lo <= r <= hi for r in ratios),
        },
        "fitted": {
            "sizes": [list(z) for z in fit_sizes],
            "median_r_dro": fm,
            "last_over_first": frac,
            "max_ratio": limit,
            "pass": frac <= limit,
        },
    }
    rows = sorted(orc + fit, key=lambda r: (r.cmr != "oracle", r.n_s, r.n_t, r.rep))
    return summary, rows


def cmd_simulate(cfg: RunConfig, out: Path, rate: bool = False) -> dict:
    if cfg.scenario is None:
        raise ConfigError("scenario: simulate needs a scenario block or a preset")
    with context("scenario"):
        s = scenario_from_config(cfg.scenario)
    with context("policy.mask"):
        mask = resolve_mask(cfg.mask, s.covariate_names)
    out.mkdir(parents=True, exist_ok=True)
    report = _header("simulate", cfg)
    report["scenario"] = {
        "name": s.name,
        "d": s.d,
        "k": s.k,
        "delta_true": s.delta_true,
        "outcome_space": s.ys.to_dict(),
        "action_labels": list(s.action_labels),
        "covariate_names": list(s.covariate_names),
    }
    if rate or cfg.simulate.get("rate_check"):
        summary, rows = _rate_check(s, cfg, mask)
        write_atomic(out / "regret.csv", _csv_text(REGRET_COLUMNS, [r.to_dict() for r in rows]))
        report["rate_check"] = summary
        return write_report(out, report)

    if s.candidates:
        table = _candidate_table(s, cfg.delta_grid)
        write_atomic(out / "welfare.csv", _csv_text(("delta", "candidate", "robust_welfare", "selected"), table))
        report["candidates"] = table
        rows = []
        for delta in cfg.delta_grid:
            sel = [r for r in table if r["delta"] == delta]
            row = {"delta": delta, "selected": next(r["candidate"] for r in sel if r["selected"])}
            row.update({f"welfare_{r['candidate']}": r["robust_welfare"] for r in sel})
            rows.append(row)
        cols = ("delta", *(f"welfare_{n}" for n in s.candidates), "selected")
        series = [(f"welfare_{n}", f"robust welfare of {n}") for n in s.candidates]
        write_sweep(out, cols, rows, series, f"{s.name}: robust welfare of candidate policies")
    elif "n_s" in cfg.simulate or "n_t" in cfg.simulate:
        rows = _learned_sweep(s, cfg, mask)
        cols = ("delta", "dr_target_welfare", "dr_target_se", "naive_target_welfare",
                "dr_robust_welfare", "naive_robust_welfare", "dr_policy", "naive_policy")
        series = (("dr_target_welfare", "target welfare, robust rule"),
                  ("naive_target_welfare", "target welfare, plug-in rule"),
                  ("dr_robust_welfare", "robust welfare, robust rule"))
        write_sweep(out, cols, rows, series, f"{s.name}: welfare against delta")
        report["sweep"] = rows
        sel = cfg.simulate.get("selected_delta")
        if sel is not None:
            hit = [r for r in rows if abs(r["delta"] - float(sel)) < 1e-12]
            if not hit:
                raise ConfigError(f"simulate.selected_delta: {sel} is not on the delta grid")
            r = hit[0]
            report["selected"] = {
                "delta": r["delta"],
                "dr_target_welfare": r["dr_target_welfare"],
                "naive_target_welfare": r["naive_target_welfare"],
                "dr_at_least_naive": r["dr_target_welfare"] >= r["naive_target_welfare"],
            }

    if s.is_discrete:
        d_eq = float(cfg.simulate.get("delta", cfg.delta_grid[-1]))
        with context("simulate.delta"):
            report["equivalence"] = equivalence_check(s, d_eq, cfg.depth).to_dict()

    if cfg.simulate.get("export"):
        n_s = int(cfg.simulate.get("n_s", 2000))
        n_t = int(cfg.simulate.get("n_t", 2000))
        src, tgt = np.random.SeedSequence([cfg.seed, 0xE4]).spawn(2)
        write_source(sample_source(s, n_s, src), out / "source.csv")
        write_target(sample_target_covariates(s, n_t, tgt), out / "target.csv")
    return write_report(out, report)


# diagnostics ------------------------------------------------------------------

def _read_candidate(path: Path, tc: TargetCovariates, labels: Sequence[str]) -> np.ndarray:
    """Candidate CMR: a saved model (JSON) or a CSV with one column per action label."""
    if path.suffix == ".json":
        d = load_json(path)
        if d.get("format") != "dritr.cmr":
            raise SchemaError(f"{path}: not a saved CMR model (format key missing)")
        try:
            model = FittedCmr.from_dict(d)
        except (KeyError, TypeError, ValueError) as e:
            raise SchemaError(f"{path}: malformed model file ({e})") from None
        return predict_matrix(model, tc)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except FileNotFoundError:
        raise SchemaError(f"no such file: {path}") from None
    if not rows:
        raise SchemaError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    missing = [a for a in labels if a not in header]
    if missing:
        raise SchemaError(f"{path}: missing action columns {missing}")
    if len(body) != tc.n:
        raise SchemaError(f"{path}: {len(body)} rows, target has {tc.n}")
    idx = [header.index(a) for a in labels]
    try:
        return np.array([[float(r[i]) for i in idx] for r in body])
    except (ValueError, IndexError) as e:
        raise SchemaError(f"{path}: malformed row ({e})") from None


def cmd_diagnose(cfg: RunConfig, out: Path, candidate: str | None = None) -> dict:
    ds, tc, origin, s = load_inputs(cfg)
    report = _header("diagnose", cfg)
    report["data"] = {"origin": origin, "n_s": ds.n, "n_t": tc.n, "d": ds.d, "k": ds.k}
    report["diagnostics"] = {
        "overlap": overlap_report(ds).to_dict(),
        "containment": covariate_containment(ds, tc),
    }
    if candidate is not None:
        delta = cfg.delta_grid[-1]
        cand = _read_candidate(Path(candidate), tc, ds.action_labels)
        model = _fit(cfg, ds)
        ms = predict_matrix(model, tc)
        means = predict_matrix(model, TargetCovariates(ds.covariates)).mean(axis=0)
        with context("candidate"):
            checks = ambiguity_bounds(ms, cand, delta, source_means=means)
        report["diagnostics"]["ambiguity_bounds"] = {"delta": delta, "items": bounds_report(checks)}
        report["cmr"] = model.summary()
    return write_report(out, report)


# entry point ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dritr", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"dritr {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("learn", "fit the CMR and learn robust policies over the delta grid"),
                        ("sweep", "delta-against-welfare table only"),
                        ("simulate", "synthetic scenarios: welfare tables, regret, equivalence"),
                        ("diagnose", "overlap, covariate containment and ambiguity-set bounds")):
        c = sub.add_parser(name, help=help_)
        c.add_argument("--config", help="JSON run configuration")
        c.add_argument("--delta", type=float, help="single ambiguity level")
        c.add_argument("--delta-grid", help="comma-separated, strictly increasing delta values")
        c.add_argument("--rho", type=float, help="covariate-shift KL radius")
        c.add_argument("--kind", choices=("w1", "kl", "gauss-kl"))
        c.add_argument("--depth", type=int, choices=(0, 1, 2))
        c.add_argument("--mask", help="comma-separated covariates the policy may not split on")
        c.add_argument("--seed", type=int)
        c.add_argument("--out", help="output directory (default: out)")
        c.add_argument("--preset", help="built-in configuration: example1, two_state, rate_check")
        c.add_argument("--q", type=float, help="share of cell m in the example1 target population")
        if name == "simulate":
            c.add_argument("--rate-check", action="store_true", help="run the regret-decay experiment")
        if name == "diagnose":
            c.add_argument("--candidate", help="candidate CMR (saved model JSON or CSV by action)")
    return p


def _resolve(args) -> RunConfig:
    if args.config:
        file_cfg = load_json(args.config)
        base = str(Path(args.config).resolve().parent)
    elif args.preset or getattr(args, "rate_check", False):
        file_cfg = load_preset(args.preset or "rate_check")
        base = os.getcwd()
    else:
        file_cfg, base = {}, os.getcwd()
    if args.q is not None:
        scen = dict(file_cfg.get("scenario") or {})
        if scen.get("preset") != "example1":
            raise ConfigError("--q: only applies to the example1 scenario")
        scen["q"] = args.q
        file_cfg = {**file_cfg, "scenario": scen}
    overrides = {
        "seed": args.seed,
        "out": args.out,
        "kind": args.kind,
        "delta": args.delta,
        "delta_grid": parse_grid(args.delta_grid) if args.delta_grid is not None else None,
        "rho": args.rho,
        "depth": args.depth,
        "mask": args.mask,
    }
    return build_config(file_cfg, overrides, base)


def run(args) -> dict:
    cfg = _resolve(args)
    out = Path(cfg.out)
    if args.command == "learn":
        return cmd_learn(cfg, out)
    if args.command == "sweep":
        return cmd_learn(cfg, out, command="sweep")
    if args.command == "simulate":
        return cmd_simulate(cfg, out, rate=args.rate_check)
    return cmd_diagnose(cfg, out, args.candidate)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        run(args)
    except DritrError as e:
        print(f"dritr: error: {e}", file=sys.stderr)
        return e.exit_code
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
