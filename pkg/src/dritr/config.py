"""Run configuration: one JSON file plus command-line overrides (flags win)."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from .cmr import CmrConfig
from .data import OutcomeSpace, Schema
from .errors import ConfigError, DritrError, ParseError
from .policy import TreePolicy, from_dict, to_dict
from .robust.scores import canonical_kind

PRESETS = ("example1", "two_state", "rate_check")


def load_json(path: str | Path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: invalid JSON ({e})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def load_preset(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    text = resources.files("dritr.presets").joinpath(f"{name}.json").read_text(encoding="utf-8")
    return json.loads(text)


def parse_grid(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"--delta-grid: cannot parse {text!r}") from None


def check_grid(grid) -> tuple[float, ...]:
    g = tuple(float(v) for v in grid)
    if not g:
        raise ConfigError("ambiguity.delta_grid: grid is empty")
    if any(not math.isfinite(v) or v < 0 for v in g):
        raise ConfigError("ambiguity.delta_grid: values must be finite and >= 0")
    if any(b <= a for a, b in zip(g, g[1:])):
        raise ConfigError("ambiguity.delta_grid: values must be strictly increasing")
    return g


@dataclass
class RunConfig:
    seed: int
    out: str = "out"
    source: str | None = None
    target: str | None = None
    schema: Schema = field(default_factory=Schema)
    outcome_space: OutcomeSpace | None = None
    kind: str = "Wasserstein1"
    delta_grid: tuple[float, ...] = (0.0,)
    rho: float | None = None
    hurwicz_alpha: float | None = None
    estimator: CmrConfig = field(default_factory=CmrConfig)
    depth: int = 1
    mask: tuple[str, ...] = ()
    candidates: dict[str, TreePolicy] | None = None
    scenario: dict | None = None
    simulate: dict = field(default_factory=dict)
    candidate_cmr: str | None = None
    base_dir: str = "."

    def path(self, p: str | None) -> Path | None:
        if p is None:
            return None
        q = Path(p)
        return q if q.is_absolute() else Path(self.base_dir) / q

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "source": self.source,
            "target": self.target,
            "schema": self.schema.to_dict(),
            "outcome_space": None if self.outcome_space is None else self.outcome_space.to_dict(),
            "ambiguity": {
                "kind": self.kind,
                "delta_grid": list(self.delta_grid),
                "rho": self.rho,
                "hurwicz_alpha": self.hurwicz_alpha,
            },
            "estimator": self.estimator.to_dict(),
            "policy": {
                "depth": self.depth,
                "mask": list(self.mask),
                "candidates": None if self.candidates is None
                else {k: to_dict(v) for k, v in self.candidates.items()},
            },
            "scenario": self.scenario,
            "simulate": self.simulate,
            "candidate_cmr": self.candidate_cmr,
        }


def _get(d: dict, key: str, kind, default=None):
    if key not in d or d[key] is None:
        return default
    try:
        return kind(d[key])
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected {kind.__name__}, got {d[key]!r}") from None


def build_config(file_cfg: dict, overrides: dict[str, Any], base_dir: str | Path = ".") -> RunConfig:
    """Merge a parsed config file with flag overrides (None means 'not given')."""
    cfg = dict(file_cfg)
    amb = dict(cfg.get("ambiguity") or {})
    pol = dict(cfg.get("policy") or {})
    ov = {k: v for k, v in overrides.items() if v is not None}

    seed = ov.get("seed", cfg.get("seed"))
    if seed is None:
        raise ConfigError("seed: required (set it in the config file or pass --seed)")
    try:
        seed = int(seed)
    except (TypeError, ValueError):
        raise ConfigError(f"seed: expected an integer, got {seed!r}") from None
    if seed < 0:
        raise ConfigError("seed: must be >= 0")

    try:
        schema = Schema.from_dict(cfg.get("schema") or {})
    except DritrError as e:
        raise type(e)(f"schema: {e}") from None
    ys = None
    if cfg.get("outcome_space") is not None:
        try:
            ys = OutcomeSpace.from_dict(cfg["outcome_space"])
        except DritrError as e:
            raise type(e)(f"outcome_space: {e}") from None

    kind = canonical_kind(ov.get("kind", amb.get("kind", "w1")))
    if "delta_grid" in ov:
        grid = ov["delta_grid"]
    elif "delta" in ov:
        grid = [ov["delta"]]
    elif amb.get("delta_grid") is not None:
        grid = amb["delta_grid"]
    elif amb.get("delta") is not None:
        grid = [amb["delta"]]
    else:
        grid = [0.0]
    grid = check_grid(grid)
    rho = ov.get("rho", _get(amb, "rho", float))
    if rho is not None and not (math.isfinite(rho) and rho >= 0):
        raise ConfigError("ambiguity.rho: must be finite and >= 0")
    alpha = _get(amb, "hurwicz_alpha", float)
    if alpha is not None and not 0 <= alpha <= 1:
        raise ConfigError("ambiguity.hurwicz_alpha: must lie in [0, 1]")

    try:
        est = CmrConfig.from_dict(cfg.get("estimator") or {})
    except DritrError as e:
        raise type(e)(f"estimator: {e}") from None

    depth = ov.get("depth", _get(pol, "depth", int, 1))
    mask = ov.get("mask", pol.get("mask") or ())
    if isinstance(mask, str):
        mask = [m.strip() for m in mask.split(",") if m.strip()]
    cands = pol.get("candidates")
    if cands is not None:
        if not isinstance(cands, dict) or not cands:
            raise ConfigError("policy.candidates: expected a non-empty object of name -> tree")
        try:
            cands = {str(k): from_dict(v) for k, v in cands.items()}
        except DritrError as e:
            raise ConfigError(f"policy.candidates: {e}") from None

    return RunConfig(
        seed=seed,
        out=str(ov.get("out", cfg.get("out", "out"))),
        source=cfg.get("source"),
        target=cfg.get("target"),
        schema=schema,
        outcome_space=ys,
        kind=kind,
        delta_grid=grid,
        rho=rho,
        hurwicz_alpha=alpha,
        estimator=est,
        depth=int(depth),
        mask=tuple(str(m) for m in mask),
        candidates=cands,
        scenario=cfg.get("scenario"),
        simulate=dict(cfg.get("simulate") or {}),
        candidate_cmr=cfg.get("candidate_cmr"),
        base_dir=str(base_dir),
    )


def resolve_mask(mask, names: tuple[str, ...]) -> tuple[int, ...]:
    """Covariate names or 1-based indices -> 1-based indices."""
    out = []
    for m in mask:
        if m in names:
            out.append(names.index(m) + 1)
        elif str(m).isdigit() and 1 <= int(m) <= len(names):
            out.append(int(m))
        else:
            raise ConfigError(f"policy.mask: unknown covariate {m!r}; known: {', '.join(names)}")
    return tuple(sorted(set(out)))
