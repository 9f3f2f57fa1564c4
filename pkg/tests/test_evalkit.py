from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats
from scipy.special import logsumexp

from monet.errors import EmptyInput, SingularDesign
from monet.evalkit import gvif, point_metrics, psis_loo, psis_smooth


def _gaussian_post(X, y, S, rng, prior_var=100.0, sigma=1.0):
    A = X.T @ X / sigma**2 + np.eye(X.shape[1]) / prior_var
    cov = np.linalg.inv(A)
    mean = cov @ X.T @ y / sigma**2
    return rng.multivariate_normal(mean, cov, size=S), mean, cov


def test_psis_loo_matches_exact_refit():
    rng = np.random.default_rng(0)
    n = 30
    X = np.column_stack([np.ones(n), rng.normal(size=n)])
    y = X @ [0.5, 1.0] + rng.normal(size=n)
    B, _, _ = _gaussian_post(X, y, 2000, rng)
    ll = stats.norm.logpdf(y[None, :], B @ X.T, 1.0)
    rep = psis_loo(ll)
    exact = 0.0
    for i in range(n):
        keep = np.arange(n) != i
        _, m, C = _gaussian_post(X[keep], y[keep], 1, rng)
        s2 = 1.0 + X[i] @ C @ X[i]
        exact += stats.norm.logpdf(y[i], X[i] @ m, math.sqrt(s2))
    assert abs(rep.elpd_loo - exact) <= 0.3
    assert rep.looic == -2 * rep.elpd_loo
    assert len(rep.pareto_k) == n
    assert rep.p_loo == pytest.approx(np.sum(rep.pointwise_lpd - rep.pointwise_elpd))


def test_constant_likelihood_column():
    ll = np.random.default_rng(1).normal(size=(1000, 5))
    ll[:, 2] = -1.5
    rep = psis_loo(ll)
    assert rep.pointwise_elpd[2] == -1.5 and rep.pareto_k[2] == 0
    assert rep.notes


def test_smoothing_never_raises_max_weight():
    rng = np.random.default_rng(2)
    for _ in range(20):
        lr = rng.standard_t(2, size=4000)
        lw, k = psis_smooth(lr)
        assert np.max(lw) <= np.max(lr) + 1e-12
        assert np.isfinite(k)


def test_psis_input_checks():
    with pytest.raises(ValueError):
        psis_loo(np.zeros((100, 3)))
    bad = np.zeros((500, 3))
    bad[0, 0] = np.nan
    with pytest.raises(ValueError):
        psis_loo(bad)


def test_point_metrics():
    y = np.array([4.94, 6.0, 7.5, 9.94])
    pm = point_metrics(y, y)
    assert pm.mae == pm.rmse == 0
    pm = point_metrics(y, np.full(4, y.mean()))
    assert pm.rmse >= pm.mae
    assert pm.mae_pct_min == pytest.approx(pm.mae / 4.94 * 100)
    # published percentage strings from (metric, minimum) pairs
    assert round(0.12 / 4.94 * 100, 2) == 2.43
    assert round(0.23 / 23.05 * 100, 1) == 1.0
    assert point_metrics(y, y + 1, family="gamma").r2 is None
    with pytest.raises(EmptyInput):
        point_metrics([], [])


def test_gvif_orthogonal():
    X = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float)
    rep = gvif(X, [[0], [1]])
    assert np.allclose(rep.gvif, 1, atol=1e-6)


def test_gvif_matches_determinant_bruteforce():
    rng = np.random.default_rng(3)
    Z = rng.normal(size=(200, 4))
    X = Z @ rng.normal(size=(4, 4))
    groups = {"a": [0], "b": [1, 2, 3]}
    rep = gvif(X, groups)
    R = np.corrcoef(X, rowvar=False)
    det = np.linalg.det
    g_a = det(R[:1, :1]) * det(R[1:, 1:]) / det(R)
    assert rep.gvif[0] == pytest.approx(g_a, rel=1e-8)
    assert rep.gvif_corrected[1] == pytest.approx(rep.gvif[1] ** (1 / 6), rel=1e-8)
    # single-column GVIF is the classical VIF
    rss = np.linalg.lstsq(np.column_stack([np.ones(200), X[:, 1:]]), X[:, 0], rcond=None)[1][0]
    vif = np.sum((X[:, 0] - X[:, 0].mean()) ** 2) / rss
    assert rep.gvif[0] == pytest.approx(vif, rel=1e-8)
    assert np.all(rep.gvif >= 1 - 1e-9)
    scaled = X * [3.0, -0.1, 7.0, 1e3] + [5, 1, -2, 0]
    assert np.allclose(gvif(scaled, groups).gvif, rep.gvif, rtol=1e-8)


def test_gvif_duplicate_column():
    x = np.random.default_rng(4).normal(size=(50, 2))
    X = np.column_stack([x, x[:, 0]])
    with pytest.raises(SingularDesign):
        gvif(X, [[0, 2], [1]])
