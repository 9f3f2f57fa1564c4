from __future__ import annotations

import numpy as np
import pytest

from monet.errors import CollinearMembers
from monet.evalkit import point_metrics
from monet.ml import (CvPlan, CvReport, ensemble_gate, ensemble_report, stack_members,
                      stack_predictions, train_model)


def _report(name, rmse, mae):
    pm = point_metrics([1.0, 2.0], [1.0, 2.0])
    pm = type(pm)(mae, rmse, None, None)
    return CvReport(name, pm, pm, np.zeros(1), np.zeros(1))


def test_perfect_member_takes_all_weight():
    rng = np.random.default_rng(0)
    y = rng.normal(size=2000)
    fit = stack_predictions(np.column_stack([y, rng.normal(size=2000)]), y, ["m1", "m2"])
    assert abs(fit.weights[0] - 1) < 0.02 and abs(fit.weights[1]) < 0.02
    assert fit.residual_deviance <= fit.null_deviance


def test_convex_truth_recovered():
    rng = np.random.default_rng(1)
    m1, m2 = rng.normal(size=(2, 3000))
    y = 0.4 * m1 + 0.6 * m2 + rng.normal(0, 0.1, 3000)
    fit = stack_predictions(np.column_stack([m1, m2]), y)
    assert np.allclose(fit.weights, [0.4, 0.6], atol=0.05)
    A = np.column_stack([np.ones(3000), m1, m2])
    ne = np.linalg.solve(A.T @ A, A.T @ y)
    assert np.allclose(fit.coef, ne, atol=1e-8)
    tab = fit.coefficient_table()
    assert [r["term"] for r in tab] == ["(Intercept)", "m1", "m2"]
    assert fit.df_residual == 2997 and fit.df_null == 2999


def test_collinear_members_rejected():
    rng = np.random.default_rng(2)
    a = rng.normal(size=100)
    with pytest.raises(CollinearMembers):
        stack_predictions(np.column_stack([a, a * (1 + 1e-12)]), a)
    with pytest.raises(CollinearMembers):
        stack_predictions(np.column_stack([a, np.ones(100)]), a)


def test_stack_members_uses_pooled_oof():
    rng = np.random.default_rng(3)
    X = rng.uniform(-2, 2, size=(120, 2))
    y = np.sin(X[:, 0]) + X[:, 1] + rng.normal(0, 0.1, 120)
    plan = CvPlan(folds=3, repeats=2, seed=4)
    a = train_model("SVMRadial", X, y, [{"C": 4.0, "width": 1.0}], plan)
    b = train_model("QRF", X, y, [{"mtry": 2, "min_node_size": 5, "n_trees": 50}], plan)
    fit = stack_members([a, b], X, y)
    P = np.column_stack([a.oof.ravel(), b.oof.ravel()])
    yy = np.tile(y[a.train_idx], 2)
    A = np.column_stack([np.ones(len(yy)), P])
    assert np.allclose(fit.coef, np.linalg.lstsq(A, yy, rcond=None)[0], atol=1e-8)
    assert fit.df_residual == len(yy) - 3
    rep = ensemble_report(fit, X, y)
    assert len(rep.fold_rmse) == 6 and rep.notes
    c = train_model("SVMRadial", X, y, [{"C": 4.0, "width": 1.0}], CvPlan(folds=3, repeats=2, seed=5))
    with pytest.raises(ValueError):
        stack_members([a, c], X, y)


def test_gate():
    members = [_report("BRNN", 0.2, 0.15), _report("QRF", 0.1, 0.08)]
    assert ensemble_gate(_report("E", 0.09, 0.07), members).label == "Adopt"
    assert ensemble_gate(_report("E", 0.1, 0.08), members).label == "RejectInFavorOf(QRF)"
    assert ensemble_gate(_report("E", 0.09, 0.09), members).label == "RejectInFavorOf(QRF)"
    tie = [_report("BRNN", 0.1, 0.07), _report("QRF", 0.1, 0.08)]
    assert ensemble_gate(_report("E", 0.2, 0.2), tie).member == "BRNN"
