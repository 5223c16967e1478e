import csv
import json

import jsonschema
import numpy as np
import pytest

from dritr.cli import main, report_schema
from dritr.sim import REGRET_COLUMNS

G1 = {"feature": 1, "threshold": 0.5, "left": {"action": 1}, "right": {"action": 2}}
G2 = {"feature": 1, "threshold": 0.5, "left": {"action": 2}, "right": {"action": 1}}


def _report(out):
    body = json.loads((out / "report.json").read_text())
    jsonschema.validate(body, report_schema())
    return body


def _csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def example1_files(tmp_path):
    """The two-cell example as data: point-mass outcomes, target with three m rows per f row."""
    src = tmp_path / "source.csv"
    rows = ["y,a,x"]
    for _ in range(5):
        rows += ["0.5,1,0", "0.4,0,0", "1.5,1,1", "1.4,0,1"]
    src.write_text("\n".join(rows) + "\n")
    (tmp_path / "target.csv").write_text("x\n0\n0\n0\n1\n")
    cfg = {
        "seed": 0,
        "source": "source.csv",
        "target": "target.csv",
        "schema": {"actions": ["1", "0"]},
        "outcome_space": {"lower": 0},
        "estimator": {"bagging": False, "min_leaf": 1},
        "ambiguity": {"delta_grid": [0.0, 1.0]},
        "policy": {"depth": 1, "candidates": {"g1": G1, "g2": G2}},
    }
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    return path


def test_learn_example1_switches_policy(example1_files, tmp_path):
    out = tmp_path / "out"
    assert main(["learn", "--config", str(example1_files), "--out", str(out)]) == 0
    rep = _report(out)
    assert [r["candidate"] for r in rep["sweep"]] == ["g1", "g2"]
    assert rep["sweep"][0]["robust_welfare"] == pytest.approx(0.725, abs=1e-12)
    assert rep["sweep"][1]["robust_welfare"] == pytest.approx(0.125, abs=1e-12)
    assert rep["sweep"][1]["naive_robust_welfare"] == pytest.approx(0.100, abs=1e-12)
    assert json.loads((out / "policy_1.0.json").read_text()) == G2
    assert json.loads((out / "policy_0.0.json").read_text()) == G1
    for name in ("sweep.csv", "sweep.gp", "sweep.png", "cmr.json"):
        assert (out / name).exists()
    assert (out / "sweep.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_sweep_threshold_near_analytic_crossover(tmp_path):
    # robust welfare of g1 and g2 is piecewise linear in delta; with q = 0.75 they
    # cross where q (0.5 - delta) = (1 - q) 0.1
    q = 0.75
    crossover = 0.5 - (1 - q) * 0.1 / q
    out = tmp_path / "o"
    assert main(["simulate", "--preset", "example1", "--q", str(q), "--out", str(out)]) == 0
    rows = _csv(out / "sweep.csv")
    grid = [float(r["delta"]) for r in rows]
    first_g2 = next(float(r["delta"]) for r in rows if r["selected"] == "g2")
    step = grid[1] - grid[0]
    assert abs(first_g2 - crossover) <= step + 1e-12


def test_simulate_example1_pair(tmp_path):
    out = tmp_path / "o"
    assert main(["simulate", "--preset", "example1", "--q", "0.75", "--out", str(out)]) == 0
    rep = _report(out)
    at1 = {r["candidate"]: r["robust_welfare"] for r in rep["candidates"] if r["delta"] == 1.0}
    assert at1["g1"] == pytest.approx(0.1, abs=1e-12) and at1["g2"] == pytest.approx(0.125, abs=1e-12)
    assert rep["equivalence"]["counterexample"] == "g1"
    welfare = _csv(out / "welfare.csv")
    assert list(welfare[0]) == ["delta", "candidate", "robust_welfare", "selected"]


def test_simulate_export_then_learn(tmp_path):
    cfg = json.loads(json.dumps({
        "seed": 5,
        "scenario": {"preset": "example1", "q": 0.75},
        "ambiguity": {"delta_grid": [0.0, 1.0]},
        "simulate": {"export": True, "n_s": 200, "n_t": 400},
    }))
    (tmp_path / "sim.json").write_text(json.dumps(cfg))
    sim_out = tmp_path / "sim"
    assert main(["simulate", "--config", str(tmp_path / "sim.json"), "--out", str(sim_out)]) == 0
    learn = {
        "seed": 0, "source": "sim/source.csv", "target": "sim/target.csv",
        "schema": {"actions": ["1", "0"]}, "outcome_space": {"lower": 0},
        "estimator": {"bagging": False, "min_leaf": 1},
        "ambiguity": {"delta_grid": [0.0, 1.0]},
        "policy": {"candidates": {"g1": G1, "g2": G2}},
    }
    (tmp_path / "learn.json").write_text(json.dumps(learn))
    assert main(["learn", "--config", str(tmp_path / "learn.json"), "--out", str(tmp_path / "l")]) == 0
    assert [r["candidate"] for r in _report(tmp_path / "l")["sweep"]] == ["g1", "g2"]


def test_delta_zero_matches_plain_learn(example1_files, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["learn", "--config", str(example1_files), "--delta", "0", "--out", str(a)]) == 0
    assert main(["learn", "--config", str(example1_files), "--delta", "0", "--kind", "kl", "--out", str(b)]) == 0
    assert (a / "policy_0.0.json").read_text() == (b / "policy_0.0.json").read_text()
    assert json.loads((a / "policy_0.0.json").read_text()) == _report(a)["naive"]["policy"]


def test_constant_cmr_sweep_shape(tmp_path):
    rows = ["y,a,x"] + [f"1.0,{a},{x}" for x in range(6) for a in (0, 1)]
    (tmp_path / "s.csv").write_text("\n".join(rows) + "\n")
    (tmp_path / "c.json").write_text(json.dumps({
        "seed": 0, "source": "s.csv", "outcome_space": {"lower": 0},
        "estimator": {"bagging": False, "min_leaf": 1},
    }))
    out = tmp_path / "o"
    assert main(["sweep", "--config", str(tmp_path / "c.json"), "--delta-grid", "0,0.25,0.5,1,1.5,2",
                 "--out", str(out)]) == 0
    vals = [float(r["robust_welfare"]) for r in _csv(out / "sweep.csv")]
    assert vals == pytest.approx([1.0, 0.75, 0.5, 0.0, 0.0, 0.0], abs=1e-12)
    assert not (out / "policy_0.0.json").exists()
    assert _report(out)["command"] == "sweep"


def test_sweep_columns_non_increasing(tmp_path):
    out = tmp_path / "o"
    assert main(["sweep", "--preset", "two_state", "--delta-grid", "0,0.3,0.6,0.9,1.5", "--out", str(out)]) == 0
    rows = _csv(out / "sweep.csv")
    for col in ("robust_welfare", "naive_robust_welfare"):
        v = [float(r[col]) for r in rows]
        assert all(b <= a + 1e-12 for a, b in zip(v, v[1:]))


@pytest.mark.parametrize("cmd", [["learn", "--preset", "two_state", "--delta-grid", "0,0.9"],
                                 ["sweep", "--preset", "two_state", "--delta-grid", "0,0.9"],
                                 ["simulate", "--preset", "example1"],
                                 ["simulate", "--preset", "two_state"]])
def test_reports_are_byte_identical(tmp_path, cmd):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(cmd + ["--out", str(a)]) == 0
    assert main(cmd + ["--out", str(b)]) == 0
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert (a / "sweep.csv").read_bytes() == (b / "sweep.csv").read_bytes()


def test_rate_check_writes_regret_table(tmp_path):
    cfg = {
        "seed": 0,
        "scenario": {"preset": "rate"},
        "estimator": {"n_trees": 5},
        "simulate": {"rate_check": True, "delta": 0.5, "reps": 2,
                     "oracle_sizes": [[60, 60], [120, 120]], "fitted_sizes": [[60, 60], [120, 120]]},
    }
    (tmp_path / "r.json").write_text(json.dumps(cfg))
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["simulate", "--config", str(tmp_path / "r.json"), "--out", str(out)]) == 0
    with open(a / "regret.csv", newline="") as fh:
        header = next(csv.reader(fh))
    assert tuple(header) == REGRET_COLUMNS
    assert len(_csv(a / "regret.csv")) == 8
    assert (a / "regret.csv").read_bytes() == (b / "regret.csv").read_bytes()
    rep = _report(a)
    assert set(rep["rate_check"]) >= {"oracle", "fitted"}


def test_diagnose(example1_files, tmp_path):
    base = tmp_path / "d0"
    assert main(["diagnose", "--config", str(example1_files), "--out", str(base)]) == 0
    rep = _report(base)
    assert set(rep["diagnostics"]) == {"overlap", "containment"}

    learn = tmp_path / "l"
    assert main(["learn", "--config", str(example1_files), "--out", str(learn)]) == 0
    same = tmp_path / "d1"
    assert main(["diagnose", "--config", str(example1_files), "--delta", "0.2",
                 "--candidate", str(learn / "cmr.json"), "--out", str(same)]) == 0
    items = _report(same)["diagnostics"]["ambiguity_bounds"]["items"]
    assert [i["item"] for i in items] == ["C1.i", "C1.ii", "C1.iii", "C1.iv"]
    assert all(i["pass"] for i in items)

    # candidate equal to the source means except one cell moved by 2 delta
    m = np.array([[0.5, 0.4]] * 3 + [[1.5, 1.4]])
    m[3, 0] -= 0.4
    lines = ["1,0"] + [f"{float(r[0])!r},{float(r[1])!r}" for r in m]
    (tmp_path / "cand.csv").write_text("\n".join(lines) + "\n")
    moved = tmp_path / "d2"
    assert main(["diagnose", "--config", str(example1_files), "--delta", "0.2",
                 "--candidate", str(tmp_path / "cand.csv"), "--out", str(moved)]) == 0
    flags = {i["item"]: i["pass"] for i in _report(moved)["diagnostics"]["ambiguity_bounds"]["items"]}
    assert flags["C1.i"] is False

    (tmp_path / "bad.csv").write_text("1,0\n0.5\n")
    assert main(["diagnose", "--config", str(example1_files),
                 "--candidate", str(tmp_path / "bad.csv"), "--out", str(tmp_path / "d3")]) == 3
    (tmp_path / "bad.json").write_text("{}")
    assert main(["diagnose", "--config", str(example1_files),
                 "--candidate", str(tmp_path / "bad.json"), "--out", str(tmp_path / "d4")]) == 3


def test_kl_rho_and_mask_flags(tmp_path):
    out = tmp_path / "o"
    assert main(["learn", "--preset", "two_state", "--kind", "gauss-kl", "--delta-grid", "0,0.05",
                 "--rho", "0.1", "--out", str(out)]) == 0
    rep = _report(out)
    assert rep["config"]["ambiguity"]["kind"] == "GaussianKL"
    assert rep["config"]["ambiguity"]["rho"] == 0.1
    out2 = tmp_path / "m"
    assert main(["learn", "--preset", "two_state", "--mask", "state", "--out", str(out2)]) == 0
    assert all(r["policy"] in ("1", "2") for r in _report(out2)["sweep"])


def _write(tmp_path, name, text):
    (tmp_path / name).write_text(text)
    return str(tmp_path / name)


def test_exit_codes(tmp_path, capsys):
    out = str(tmp_path / "o")
    assert main(["learn", "--out", out]) == 2  # no seed
    assert "seed" in capsys.readouterr().err
    assert main(["learn", "--preset", "two_state", "--delta-grid", "1,0", "--out", out]) == 2
    assert main(["learn", "--preset", "two_state", "--delta-grid", "", "--out", out]) == 2
    assert main(["learn", "--preset", "nope", "--out", out]) == 2
    assert main(["learn", "--preset", "two_state", "--q", "0.7", "--out", out]) == 2
    assert main(["learn", "--depth", "3", "--seed", "0"]) == 2  # argparse choices
    assert main(["learn", "--config", _write(tmp_path, "d.json", '{"seed":0,"scenario":{"preset":"two_state"},'
                 '"simulate":{"n_s":60,"n_t":20},"policy":{"depth":3}}'), "--out", out]) == 8

    _write(tmp_path, "bad.csv", "y,a,x\n1,0,zz\n2,1,1\n")
    assert main(["learn", "--config", _write(tmp_path, "p.json", '{"seed":0,"source":"bad.csv"}'), "--out", out]) == 4
    assert "source:" in capsys.readouterr().err
    _write(tmp_path, "one.csv", "y,a,x\n1,0,1\n2,0,1\n")
    assert main(["learn", "--config", _write(tmp_path, "o.json", '{"seed":0,"source":"one.csv"}'), "--out", out]) == 5
    _write(tmp_path, "nocol.csv", "y,b,x\n1,0,1\n")
    assert main(["learn", "--config", _write(tmp_path, "c.json", '{"seed":0,"source":"nocol.csv"}'), "--out", out]) == 3
    _write(tmp_path, "neg.csv", "y,a,x\n-1,0,1\n2,1,1\n")
    assert main(["learn", "--config", _write(tmp_path, "n.json", '{"seed":0,"source":"neg.csv",'
                 '"outcome_space":{"lower":0}}'), "--out", out]) == 3
    assert main(["learn", "--config", _write(tmp_path, "j.json", "{oops"), "--out", out]) == 4
