from __future__ import annotations

import numpy as np

from monet.diagnostics import diagnose, ess_bulk, rhat
from monet.sampler import PosteriorDraws


def _draws(x):
    x = np.asarray(x, dtype=float)
    c, n = x.shape[:2]
    return PosteriorDraws(x.reshape(c * n, -1), c)


def test_iid_chains():
    x = np.random.default_rng(0).standard_normal((4, 1000, 2))
    diag = diagnose(_draws(x))
    assert np.all(np.abs(diag.rhat - 1) < 0.01)
    assert np.all(diag.ess_bulk <= 4000) and np.all(diag.ess_tail <= 4000)
    assert np.all(diag.ess_bulk > 2000)
    assert diag.healthy


def test_separated_chains_flagged():
    rng = np.random.default_rng(1)
    x = np.stack([rng.normal(0, 1, 1000), rng.normal(5, 1, 1000)])[:, :, None]
    diag = diagnose(_draws(x))
    assert diag.rhat[0] > 1.1
    assert not diag.healthy and diag.flags()


def test_constant_chain_degenerate():
    x = np.ones((4, 500, 1))
    diag = diagnose(_draws(x))
    assert diag.degenerate[0] and not diag.healthy
    assert "zero-variance" in diag.flags()[0]


def test_rhat_not_below_one():
    # the (n-1)/n factor lets ideal chains dip just under 1; at the default
    # 1000 draws per chain the dip stays within 1e-3
    rng = np.random.default_rng(2)
    vals = [rhat(rng.standard_normal((4, 1000))) for _ in range(100)]
    assert min(vals) >= 1 - 1e-3


def test_autocorrelated_ess_smaller():
    rng = np.random.default_rng(3)
    e = rng.standard_normal((4, 2000))
    ar = np.zeros_like(e)
    for t in range(1, e.shape[1]):
        ar[:, t] = 0.9 * ar[:, t - 1] + e[:, t]
    # AR(1) with phi 0.9: ESS ~ N (1 - phi) / (1 + phi)
    assert 0.5 * 8000 / 19 < ess_bulk(ar) < 2 * 8000 / 19
