from __future__ import annotations

import numpy as np
import pytest

from monet.emd import emd_trend, local_extrema, zero_crossings


def test_pure_sine_is_one_imf():
    n = 512
    t = np.arange(n)
    x = np.sin(2 * np.pi * 8 * t / n)
    res = emd_trend(x)
    assert res.n_imfs == 1
    assert np.corrcoef(res.imfs[0], x)[0, 1] > 0.99
    assert np.max(np.abs(res.residue)) < 0.05


def test_monotone_ramp_has_no_imfs():
    x = np.linspace(0, 3, 64) ** 2
    res = emd_trend(x)
    assert res.n_imfs == 0
    assert np.array_equal(res.residue, x)


@pytest.mark.parametrize("seed", range(5))
def test_reconstruction_white_noise(seed):
    x = np.random.default_rng(seed).standard_normal(256)
    res = emd_trend(x)
    assert np.max(np.abs(res.reconstruct() - x)) < 1e-8
    for imf in res.imfs:
        mx, mn = local_extrema(imf)
        assert abs(len(mx) + len(mn) - zero_crossings(imf)) <= 2
    mx, mn = local_extrema(res.residue)
    assert res.n_imfs == 10 or len(mx) + len(mn) < 3 or np.ptp(res.residue) < 1e-3 * np.ptp(x) \
        or np.mean(np.abs(res.residue)) < 5e-3 * np.mean(np.abs(x))


def test_trend_plus_cycle():
    t = np.linspace(0, 1, 256)
    trend = 2 + 3 * t
    x = trend + 0.3 * np.sin(2 * np.pi * 12 * t)
    res = emd_trend(x)
    assert np.max(np.abs(res.residue - trend)[20:-20]) < 0.1


def test_short_series_rejected():
    with pytest.raises(ValueError):
        emd_trend(np.arange(5.0))
