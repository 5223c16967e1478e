"""Ingestion and validation of source experiments and target covariates.

Source files hold one row per experimental unit (outcome, treatment label,
covariates); target files hold covariates only. Both are comma-separated
with a mandatory header row.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import OverlapError, ParseError, SchemaError


@dataclass(frozen=True)
class Schema:
    """Column names used to read a source or target file.

    ``covariates=None`` means "every column except outcome and treatment, in
    file order". ``actions`` optionally pins the expected treatment labels and
    their index order; otherwise labels are indexed by first appearance.
    """

    outcome: str = "y"
    treatment: str = "a"
    covariates: tuple[str, ...] | None = None
    actions: tuple[str, ...] | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "Schema":
        unknown = set(d) - {"outcome", "treatment", "covariates", "actions"}
        if unknown:
            raise SchemaError(f"unknown schema keys: {sorted(unknown)}")
        cov = d.get("covariates")
        act = d.get("actions")
        return cls(
            outcome=d.get("outcome", "y"),
            treatment=d.get("treatment", "a"),
            covariates=tuple(cov) if cov is not None else None,
            actions=tuple(str(a) for a in act) if act is not None else None,
        )

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "treatment": self.treatment,
            "covariates": list(self.covariates) if self.covariates is not None else None,
            "actions": list(self.actions) if self.actions is not None else None,
        }


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SourceDataset:
    outcomes: np.ndarray
    treatments: np.ndarray  # action indices in 1..d
    covariates: np.ndarray  # (n_s, k)
    action_labels: tuple[str, ...]
    covariate_names: tuple[str, ...]

    def __post_init__(self):
        y = np.asarray(self.outcomes, dtype=float)
        a = np.asarray(self.treatments, dtype=int)
        x = np.asarray(self.covariates, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        n = y.shape[0]
        if n < 1 or a.shape != (n,) or x.shape[0] != n:
            raise SchemaError(
                f"column groups disagree in length: outcomes {y.shape}, "
                f"treatments {a.shape}, covariates {x.shape}"
            )
        if len(self.covariate_names) != x.shape[1]:
            raise SchemaError("covariate_names does not match covariate columns")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
            raise ParseError("non-finite values in source dataset")
        d = len(self.action_labels)
        if a.min() < 1 or a.max() > d:
            raise SchemaError(f"treatment indices must lie in 1..{d}")
        missing = [self.action_labels[i] for i in range(d) if not np.any(a == i + 1)]
        if missing:
            raise OverlapError(f"arms with zero observations: {missing}")
        if d < 2:
            raise OverlapError(
                f"only one treatment arm observed ({self.action_labels[0]!r}); need at least two"
            )
        object.__setattr__(self, "outcomes", _frozen(y))
        object.__setattr__(self, "treatments", _frozen(a))
        object.__setattr__(self, "covariates", _frozen(x))

    @property
    def n(self) -> int:
        return int(self.outcomes.shape[0])

    @property
    def d(self) -> int:
        return len(self.action_labels)

    @property
    def k(self) -> int:
        return int(self.covariates.shape[1])

    @property
    def label_map(self) -> dict[str, int]:
        """Original treatment label -> internal action index (1-based)."""
        return {lab: i + 1 for i, lab in enumerate(self.action_labels)}


@dataclass(frozen=True, eq=False)
class TargetCovariates:
    covariates: np.ndarray
    covariate_names: tuple[str, ...] = ()

    def __post_init__(self):
        x = np.asarray(self.covariates, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] < 1:
            raise ParseError("target covariates need at least one row")
        if not np.all(np.isfinite(x)):
            raise ParseError("non-finite values in target covariates")
        names = tuple(self.covariate_names) or tuple(f"x{i + 1}" for i in range(x.shape[1]))
        if len(names) != x.shape[1]:
            raise SchemaError("covariate_names does not match covariate columns")
        object.__setattr__(self, "covariates", _frozen(x))
        object.__setattr__(self, "covariate_names", names)

    @property
    def n(self) -> int:
        return int(self.covariates.shape[0])

    @property
    def k(self) -> int:
        return int(self.covariates.shape[1])


@dataclass(frozen=True)
class OutcomeSpace:
    lower: float = -math.inf
    upper: float = math.inf

    def __post_init__(self):
        lo, hi = float(self.lower), float(self.upper)
        if math.isnan(lo) or math.isnan(hi) or not lo < hi:
            raise SchemaError(f"outcome space needs lower < upper, got [{lo}, {hi}]")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def infer(cls, outcomes: Sequence[float]) -> "OutcomeSpace":
        """[0, inf) when every outcome is non-negative, else the real line."""
        y = np.asarray(outcomes, dtype=float)
        return cls(0.0, math.inf) if np.all(y >= 0) else cls(-math.inf, math.inf)

    def contains(self, values) -> bool:
        v = np.asarray(values, dtype=float)
        return bool(np.all((v >= self.lower) & (v <= self.upper)))

    def check(self, values, what: str = "outcomes") -> None:
        if not self.contains(values):
            raise SchemaError(f"{what} fall outside the outcome space [{self.lower}, {self.upper}]")

    def to_dict(self) -> dict:
        return {"lower": _ext(self.lower), "upper": _ext(self.upper)}

    @classmethod
    def from_dict(cls, d: dict) -> "OutcomeSpace":
        return cls(_unext(d.get("lower", "-inf")), _unext(d.get("upper", "inf")))


def _ext(v: float):
    # JSON has no infinities
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _unext(v) -> float:
    if v is None:
        raise SchemaError("outcome-space bound may not be null")
    return float(v)


def _read_rows(path: str | Path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    if not path.is_file():
        raise SchemaError(f"no such file: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, header row required") from None
        header = [h.strip() for h in header]
        rows = [r for r in reader if any(c.strip() for c in r)]
    if len(set(header)) != len(header):
        raise SchemaError(f"{path}: duplicate column names in header")
    for i, r in enumerate(rows):
        if len(r) != len(header):
            raise ParseError(f"{path}: row {i + 1} has {len(r)} cells, header has {len(header)}")
    return header, rows


def _column_index(header: list[str], name: str, path) -> int:
    try:
        return header.index(name)
    except ValueError:
        raise SchemaError(f"{path}: missing column {name!r}") from None


def _parse_float(cell: str, row: int, col: str, path) -> float:
    try:
        v = float(cell.strip())
    except ValueError:
        raise ParseError(f"{path}: row {row}, column {col!r}: not a number: {cell!r}") from None
    if not math.isfinite(v):
        raise ParseError(f"{path}: row {row}, column {col!r}: non-finite value {cell!r}")
    return v


def _parse_matrix(rows, idx: list[int], names: Sequence[str], path) -> np.ndarray:
    out = np.empty((len(rows), len(idx)))
    for i, r in enumerate(rows):
        for j, c in enumerate(idx):
            out[i, j] = _parse_float(r[c], i + 1, names[j], path)
    return out


def load_source(path: str | Path, schema: Schema | None = None) -> SourceDataset:
    """Read and validate a source experiment file.

    Row numbers in error messages count data rows from 1 (the header is not
    counted).
    """
    schema = schema or Schema()
    header, rows = _read_rows(path)
    iy = _column_index(header, schema.outcome, path)
    ia = _column_index(header, schema.treatment, path)
    if schema.covariates is None:
        cov_names = tuple(h for h in header if h not in (schema.outcome, schema.treatment))
    else:
        cov_names = schema.covariates
    if not cov_names:
        raise SchemaError(f"{path}: no covariate columns")
    ix = [_column_index(header, c, path) for c in cov_names]
    if not rows:
        raise ParseError(f"{path}: no data rows")

    y = np.array([_parse_float(r[iy], i + 1, schema.outcome, path) for i, r in enumerate(rows)])
    x = _parse_matrix(rows, ix, cov_names, path)

    raw = [r[ia].strip() for r in rows]
    for i, lab in enumerate(raw):
        if lab == "":
            raise ParseError(f"{path}: row {i + 1}: empty treatment label")
    if schema.actions is not None:
        labels = tuple(schema.actions)
        unknown = sorted(set(raw) - set(labels))
        if unknown:
            raise SchemaError(f"{path}: treatment labels not declared in schema: {unknown}")
    else:
        labels = tuple(dict.fromkeys(raw))
    index = {lab: i + 1 for i, lab in enumerate(labels)}
    a = np.array([index[lab] for lab in raw], dtype=int)
    return SourceDataset(y, a, x, labels, tuple(cov_names))


def load_target(
    path: str | Path, covariates: Sequence[str] | None = None
) -> TargetCovariates:
    """Read target covariates, ordered as ``covariates`` (all columns if None)."""
    header, rows = _read_rows(path)
    names = tuple(covariates) if covariates is not None else tuple(header)
    idx = [_column_index(header, c, path) for c in names]
    if not rows:
        raise ParseError(f"{path}: no data rows (need n_t >= 1)")
    return TargetCovariates(_parse_matrix(rows, idx, names, path), names)


def _fmt(v: float) -> str:
    return repr(float(v))


def write_source(ds: SourceDataset, path: str | Path, schema: Schema | None = None) -> None:
    """Write a dataset so that ``load_source`` reproduces it bit-for-bit."""
    schema = schema or Schema()
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([schema.outcome, schema.treatment, *ds.covariate_names])
        for yi, ai, xi in zip(ds.outcomes, ds.treatments, ds.covariates):
            w.writerow([_fmt(yi), ds.action_labels[ai - 1], *(_fmt(v) for v in xi)])


def write_target(tc: TargetCovariates, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(tc.covariate_names)
        for xi in tc.covariates:
            w.writerow([_fmt(v) for v in xi])


@dataclass
class OverlapReport:
    counts: dict[int, int]
    proportions: dict[int, float]
    labels: dict[int, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "arms": [
                {
                    "action": a,
                    "label": self.labels.get(a, str(a)),
                    "count": self.counts[a],
                    "proportion": self.proportions[a],
                }
                for a in sorted(self.counts)
            ]
        }


def overlap_report(ds: SourceDataset) -> OverlapReport:
    counts = {a: int(np.sum(ds.treatments == a)) for a in range(1, ds.d + 1)}
    props = {a: c / ds.n for a, c in counts.items()}
    labels = {a: ds.action_labels[a - 1] for a in counts}
    return OverlapReport(counts, props, labels)


def covariate_containment(ds: SourceDataset, tc: TargetCovariates) -> list[dict]:
    """Per-covariate range check of target rows against the source range.

    Diagnostic only: support containment of the target covariate law in the
    source law cannot be tested from finite samples.
    """
    if tc.k != ds.k:
        raise SchemaError(f"target has {tc.k} covariates, source has {ds.k}")
    out = []
    for j, name in enumerate(ds.covariate_names):
        s = ds.covariates[:, j]
        t = tc.covariates[:, j]
        lo, hi = float(s.min()), float(s.max())
        inside = float(np.mean((t >= lo) & (t <= hi)))
        out.append(
            {
                "covariate": name,
                "source_min": lo,
                "source_max": hi,
                "target_min": float(t.min()),
                "target_max": float(t.max()),
                "fraction_inside": inside,
                "contained": inside == 1.0,
            }
        )
    return out
