import math
import warnings

import numpy as np
import pytest

from amp_gdf.errors import DimensionMismatch, ParseError, RankWarning
from amp_gdf.pipeline import (
    EnsembleSource,
    FixedSource,
    PlantedSource,
    SyntheticConfig,
    gen_gaussian_ensemble,
    gen_correlated_table,
    gen_planted,
    parse_grid,
    prepare_real_data,
    read_dataset_csv,
    sweep,
    write_dataset_csv,
)


def test_gaussian_ensemble():
    cfg = SyntheticConfig(N=200, M=100, seed=5)
    inst = gen_gaussian_ensemble(cfg)
    assert abs(np.mean(np.sum(inst.A**2, axis=0)) - 1.0) < 0.1
    again = gen_gaussian_ensemble(cfg)
    assert np.array_equal(inst.A, again.A) and np.array_equal(inst.y, again.y)
    big = gen_gaussian_ensemble(SyntheticConfig(N=1, M=10_000, sigma_y2=2.0, seed=1))
    assert abs(np.var(big.y) / 2.0 - 1.0) < 0.05
    with pytest.raises(ValueError):
        SyntheticConfig(N=0, M=1)


def test_planted():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(2000, 5))
    x0 = rng.normal(size=5)
    np.testing.assert_array_equal(gen_planted(A, x0, 0.0, 1), A @ x0)
    noise = gen_planted(A, np.zeros(5), 0.7, 2)
    assert abs(noise.mean()) < 0.05
    assert np.mean(noise**2) == pytest.approx(0.49, rel=0.1)
    with pytest.raises(DimensionMismatch):
        gen_planted(A, np.zeros(4), 1.0, 0)


def test_parse_grid():
    g = parse_grid("0.1:0.05:2")
    assert len(g) == 39 and g[0] == 0.1 and g[-1] == 2.0
    assert parse_grid("1, 2.5") == [1.0, 2.5]
    with pytest.raises(ValueError):
        parse_grid("1:0:2")


def test_csv_round_trip_and_missing_rows(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,y,b\n1,2,3\n4,,6\n7,8,nan\n0.5,1,2\n", encoding="utf-8")
    X, y, names = read_dataset_csv(p)
    assert names == ["a", "b"]
    np.testing.assert_array_equal(y, [2.0, 1.0])
    np.testing.assert_array_equal(X, [[1.0, 3.0], [0.5, 2.0]])
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n", encoding="utf-8")
    with pytest.raises(ParseError):
        read_dataset_csv(bad)
    with pytest.raises(ParseError):
        read_dataset_csv(tmp_path / "missing.csv")


def test_prepare_real_data(tmp_path):
    X, y = gen_correlated_table(3)
    assert X.shape == (302, 70)
    C = np.corrcoef(X, rowvar=False)
    np.fill_diagonal(C, 0)
    assert np.max(np.abs(C)) <= 0.685
    path = tmp_path / "data.csv"
    write_dataset_csv(path, X, y)
    prep = prepare_real_data(path, 7)
    Z = prep.standardized
    assert np.max(np.abs(Z.mean(axis=0))) <= 1e-10
    assert np.max(np.abs(Z.var(axis=0) - 1)) <= 1e-10
    np.testing.assert_allclose(np.sum(prep.inst.A**2, axis=0), 1.0)
    assert prep.support.size == 7 and np.count_nonzero(prep.x0) == 7
    empty = prepare_real_data((X, y), 0)
    assert empty.sigma_hat2 == pytest.approx(1.0)
    full = prepare_real_data((X, y), 70)
    np.testing.assert_allclose(full.x0, full.x_ols)
    r = full.inst.y - full.inst.A @ full.x_ols
    assert full.sigma_hat2 == pytest.approx(r @ r / 302)


def test_rank_warning():
    rng = np.random.default_rng(0)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        prepare_real_data((rng.normal(size=(10, 20)), rng.normal(size=10)), 3)
    assert any(issubclass(w.category, RankWarning) for w in caught)


def test_sweep_huge_lambda_is_empty_model():
    src = EnsembleSource(SyntheticConfig(N=40, M=20))
    res = sweep(src, "scad", [1.5, 100.0], [3.7], n_train=3, n_test=50, seed=1)
    row = res.row(100.0)
    assert row.l0 == 0 and row.df1 == 0 and row.df2 == 0
    assert row.pre_est2 == pytest.approx(row.epsilon_train)
    assert row.status == "ok"


def test_sweep_determinism_and_completeness():
    src = EnsembleSource(SyntheticConfig(N=40, M=20))
    grid = [0.05, 1.0, 1.5, 2.0]
    a = sweep(src, "mcp", grid, [3.7], n_train=3, n_test=20, seed=9)
    b = sweep(src, "mcp", grid, [3.7], n_train=3, n_test=20, seed=9, threads=2)
    assert [r.lam for r in a.rows] == grid
    assert [r.__dict__ for r in a.rows] == [r.__dict__ for r in b.rows]
    for choice in a.selected_by.values():
        assert choice["lambda"] in grid


def test_l1_aic_and_first_estimator_agree():
    src = EnsembleSource(SyntheticConfig(N=100, M=50))
    res = sweep(src, "l1", parse_grid("0.5:0.25:2.5"), n_train=5, n_test=0, seed=3)
    assert res.selected_by["aic"] == res.selected_by["pred_est_1"]
    assert "true_pred" not in res.selected_by


def test_fixed_and_planted_sources():
    rng = np.random.default_rng(2)
    inst = gen_gaussian_ensemble(SyntheticConfig(N=30, M=20, seed=4))
    res = sweep(FixedSource(inst), "l1", [0.5, 1.0], n_train=7, n_test=10)
    assert all(math.isnan(r.pre_mc) for r in res.rows)
    x0 = np.zeros(30)
    x0[:3] = 2.0
    src = PlantedSource(inst.A, x0, 0.5)
    res = sweep(src, "l1", [0.5, 1.0], n_train=2, n_test=100, seed=rng.integers(10))
    assert all(r.pre_mc > 0 for r in res.rows)
