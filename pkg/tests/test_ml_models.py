from __future__ import annotations

import itertools

import numpy as np
import pytest
from scipy import stats

from monet.ml import (BayesRegNet, ConditionalForest, CvPlan, ModelKind, QuantileForest, RadialSvm,
                      exact_permutation_pvalue, linear_statistic_pvalue, train_model)
from monet.ml.models import _quadratic_statistic, _scores, rbf_kernel, median_heuristic_sigma


def _sin_data(n, seed):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-2, 2, size=(n, 2))
    return X, np.sin(X[:, 0]) + X[:, 1] ** 2 + rng.normal(0, 0.1, n)


SMALL_GRIDS = {
    "QRF": [{"mtry": 2, "min_node_size": 5, "n_trees": 150}],
    "BRNN": [{"neurons": 4}],
    "SVMRadial": [{"C": 16.0, "width": 1.0}, {"C": 64.0, "width": 0.5}],
    "CForest": [{"mtry": 2, "n_trees": 100}],
}


@pytest.mark.parametrize("kind", list(SMALL_GRIDS))
def test_each_kind_fits_synthetic_surface(kind):
    X, y = _sin_data(500, 0)
    tm = train_model(kind, X, y, SMALL_GRIDS[kind], CvPlan(folds=3, repeats=1, seed=1))
    assert tm.report.test.r2 > 0.9
    assert len(tm.report.fold_rmse) == 3
    assert tm.predict(X[:7]).shape == (7,)


@pytest.mark.parametrize("kind", list(ModelKind))
def test_constant_response(kind):
    X = np.random.default_rng(1).normal(size=(40, 2))
    y = np.full(40, 3.25)
    grid = [dict(SMALL_GRIDS[kind.value][0])]
    tm = train_model(kind, X, y, grid, CvPlan(folds=2, repeats=1))
    assert tm.report.test.mae == 0
    assert np.all(tm.predict(X) == 3.25)
    assert tm.report.notes


def test_split_determinism():
    plan = CvPlan(folds=5, repeats=3, seed=42)
    assert np.array_equal(plan.split(100)[0], CvPlan(folds=5, repeats=3, seed=42).split(100)[0])
    assert np.array_equal(plan.fold_ids(80, 2), plan.fold_ids(80, 2))
    tr, te = plan.split(100)
    assert len(te) == 20 and not set(tr) & set(te)
    X, y = _sin_data(60, 3)
    a = train_model("SVMRadial", X, y, SMALL_GRIDS["SVMRadial"], plan)
    b = train_model("SVMRadial", X, y, SMALL_GRIDS["SVMRadial"], plan)
    assert np.array_equal(a.oof, b.oof) and a.params == b.params


def test_qrf_median_within_training_span():
    X, y = _sin_data(200, 4)
    qrf = QuantileForest(n_trees=100, seed=0).fit(X, y)
    Xn = np.random.default_rng(5).uniform(-3, 3, size=(50, 2))
    p = qrf.predict(Xn)
    assert np.all((p >= y.min()) & (p <= y.max()))
    w = qrf.weights(Xn)
    assert np.allclose(w.sum(axis=1), 1)


def test_qrf_interval_coverage():
    cover = []
    for seed in range(50):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(300, 2))
        y = X[:, 0] + rng.normal(size=300)
        qrf = QuantileForest(n_trees=100, min_node_size=10, seed=seed).fit(X[:200], y[:200])
        q = qrf.predict_quantiles(X[200:], [0.05, 0.95])
        cover.append(np.mean((y[200:] >= q[:, 0]) & (y[200:] <= q[:, 1])))
    assert 0.85 <= np.mean(cover) <= 0.95


def test_brnn_objective_monotone():
    X, y = _sin_data(150, 6)
    net = BayesRegNet(neurons=3, epochs=200, seed=1).fit(X, y)
    assert net.trace_
    for before, after in net.trace_:
        assert after <= before
    assert np.corrcoef(net.predict(X), y)[0, 1] > 0.9


def test_svm_zero_column_and_kernel():
    X, y = _sin_data(120, 7)
    a = RadialSvm(C=4.0).fit(X, y).predict(X)
    Xz = np.column_stack([X, np.zeros(len(X))])
    b = RadialSvm(C=4.0).fit(Xz, y).predict(Xz)
    assert np.max(np.abs(a - b)) < 1e-8
    Z = np.random.default_rng(8).normal(size=(60, 3))
    K = rbf_kernel(Z, Z, median_heuristic_sigma(Z))
    assert np.allclose(K, K.T)
    assert np.linalg.eigvalsh(K).min() > -1e-10


def test_cforest_statistic_matches_permutation_moments():
    # conditional mean and covariance of T = G' y over all permutations of y,
    # computed by brute-force enumeration, reproduce the closed-form statistic
    rng = np.random.default_rng(9)
    x, y = rng.normal(size=7), rng.normal(size=7)
    G = _scores(x)
    Ts = np.array([G.T @ np.array(p) for p in itertools.permutations(y)])
    mu, S = Ts.mean(axis=0), np.cov(Ts.T, bias=True)
    t = G.T @ y - mu
    brute = t @ np.linalg.pinv(S) @ t
    stat, df = _quadratic_statistic(G, y[:, None])
    assert stat[0] == pytest.approx(brute, rel=1e-8)
    assert df == 2


def test_cforest_pvalues_invariant_to_monotone_transform():
    rng = np.random.default_rng(10)
    for _ in range(5):
        x, y = rng.uniform(0.5, 3, 8), rng.normal(size=8)
        p = exact_permutation_pvalue(x, y)
        for f in (np.log, np.exp, lambda v: v ** 3 - 10):
            assert exact_permutation_pvalue(f(x), y) == p
            assert linear_statistic_pvalue(f(x), y) == pytest.approx(linear_statistic_pvalue(x, y), rel=1e-12)
    x = rng.normal(size=200)
    assert linear_statistic_pvalue(x, x ** 2 + 0.1 * rng.normal(size=200)) < 1e-6


def test_cforest_stops_on_noise():
    rng = np.random.default_rng(11)
    X, y = rng.normal(size=(100, 2)), rng.normal(size=100)
    forest = ConditionalForest(n_trees=30, seed=0).fit(X, y)
    assert np.std(forest.predict(X)) < 0.5 * np.std(y)
