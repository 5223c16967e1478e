import numpy as np
import pytest

from dritr.cmr import CmrConfig, FittedCmr, FunctionCmr, fit_cmr, fit_tree, predict_cmr, predict_matrix
from dritr.data import SourceDataset, TargetCovariates
from dritr.errors import ConfigError, DimensionError, SchemaError


def _cells(n_per=40, seed=0):
    rng = np.random.default_rng(seed)
    x = np.repeat([0.0, 1.0, 2.0], 2 * n_per)
    a = np.tile([1, 2], 3 * n_per)
    means = {(0.0, 1): 1.0, (0.0, 2): 2.0, (1.0, 1): 3.0, (1.0, 2): 0.5, (2.0, 1): -1.0, (2.0, 2): 4.0}
    y = np.array([means[(xi, ai)] for xi, ai in zip(x, a)]) + rng.uniform(-0.3, 0.3, size=x.size)
    return SourceDataset(y, a, x[:, None], ("1", "2"), ("x",)), means


def test_unbagged_forest_recovers_cell_means():
    ds, _ = _cells()
    model = fit_cmr(ds, CmrConfig(bagging=False, min_leaf=1), seed=0)
    m = predict_matrix(model, TargetCovariates([[0.0], [1.0], [2.0]]))
    for c in range(3):
        for a in (1, 2):
            rows = (ds.covariates[:, 0] == c) & (ds.treatments == a)
            assert m[c, a - 1] == pytest.approx(ds.outcomes[rows].mean(), abs=1e-12)


def test_forest_is_deterministic_and_seed_sensitive():
    ds, _ = _cells()
    cfg = CmrConfig(n_trees=20)
    x = np.linspace(-0.5, 2.5, 13)[:, None]
    a = fit_cmr(ds, cfg, seed=5).predict_rows(x)
    b = fit_cmr(ds, cfg, seed=5).predict_rows(x)
    c = fit_cmr(ds, cfg, seed=6).predict_rows(x)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_predictions_within_outcome_range():
    ds, _ = _cells()
    for cfg in (CmrConfig(n_trees=10), CmrConfig(kind="knn")):
        model = fit_cmr(ds, cfg, seed=1)
        p = model.predict_rows(np.linspace(-5, 5, 50)[:, None])
        assert p.min() >= ds.outcomes.min() and p.max() <= ds.outcomes.max()
        assert np.all(np.abs(p) <= model.bound)


def test_knn_default_and_explicit_k():
    ds, means = _cells()
    model = fit_cmr(ds, CmrConfig(kind="knn", k=5), seed=0)
    m = model.predict_rows([[1.0]])
    assert m[0, 0] == pytest.approx(means[(1.0, 1)], abs=0.3)


def test_holdout_mse_reported():
    ds, _ = _cells()
    model = fit_cmr(ds, CmrConfig(n_trees=10), seed=0)
    s = model.summary()
    assert s["holdout_mse"] is not None and 0 < s["holdout_mse"] < 0.2
    assert len(s["holdout_mse_by_arm"]) == 2
    assert s["bound_M"] == pytest.approx(np.abs(ds.outcomes).max())


def test_serialization_round_trip():
    ds, _ = _cells()
    x = np.linspace(-1, 3, 17)[:, None]
    for cfg in (CmrConfig(n_trees=5), CmrConfig(kind="knn", k=3)):
        model = fit_cmr(ds, cfg, seed=2)
        back = FittedCmr.from_dict(model.to_dict())
        assert np.array_equal(back.predict_rows(x), model.predict_rows(x))
    with pytest.raises(SchemaError):
        FittedCmr.from_dict({"format": "other"})


def test_tree_ties_pick_lowest_feature():
    x = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [1.0, 1.0]])
    tree = fit_tree(x, np.array([0.0, 0.0, 1.0, 1.0]), min_leaf=1)
    assert tree.to_nodes()[0]["feature"] == 0  # node arrays are 0-based
    assert tree.to_nodes()[0]["threshold"] == 0.5


def test_errors():
    ds, _ = _cells(n_per=2)
    with pytest.raises(ConfigError):
        fit_cmr(ds, CmrConfig(min_leaf=50))
    with pytest.raises(ConfigError):
        CmrConfig(kind="boosting")
    with pytest.raises(ConfigError):
        CmrConfig.from_dict({"trees": 3})
    model = fit_cmr(ds, CmrConfig(n_trees=2, min_leaf=1))
    with pytest.raises(DimensionError):
        model.predict_rows([[1.0, 2.0]])
    with pytest.raises(DimensionError):
        predict_cmr(model, [1.0], 3)


def test_function_cmr():
    f = FunctionCmr(lambda x: np.column_stack([x[:, 0], -x[:, 0]]), d=2, k=1, bound=10.0)
    assert predict_cmr(f, [2.0], 2) == -2.0
