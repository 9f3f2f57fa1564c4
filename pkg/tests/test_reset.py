from __future__ import annotations

import numpy as np
import pytest
from statsmodels.regression.linear_model import OLS
from statsmodels.stats.diagnostic import linear_reset
from statsmodels.tools import add_constant

from monet.errors import RankDeficiency
from monet.regress import reset_bayes_bootstrap
from monet.regress.reset import reset_unweighted


@pytest.mark.parametrize("variant,power", [("squares", 2), ("cubes", [3]), ("both", 3)])
def test_unit_weights_match_classical_reset(variant, power):
    rng = np.random.default_rng(0)
    x = rng.normal(size=120)
    y = 1 + x + 0.2 * x**2 + rng.normal(size=120)
    res = OLS(y, add_constant(x)).fit()
    ref = linear_reset(res, power=power, test_type="fitted", use_f=True).pvalue
    assert reset_unweighted(y, x, variant) == pytest.approx(float(ref), rel=1e-8)


def test_report_ranges_and_detection():
    rng = np.random.default_rng(1)
    x = rng.normal(size=200)
    null = reset_bayes_bootstrap(1 + x + rng.normal(size=200), x, "all", 400, seed=1)
    for v in ("squares", "cubes", "both"):
        assert 0 <= null.get(v) <= 1
        assert null.get(v) > 0.05
    quad = reset_bayes_bootstrap(1 + x + 0.5 * x**2 + rng.normal(size=200), x, "all", 400, seed=1)
    assert quad.mean_p_squares < 0.01 and quad.mean_p_both < 0.01
    assert quad.rejection_rate("squares") > 0.95


def test_single_variant_only_fills_its_field():
    rng = np.random.default_rng(2)
    x = rng.normal(size=50)
    r = reset_bayes_bootstrap(x + rng.normal(size=50), x, "cubes", 200, seed=0)
    assert np.isnan(r.mean_p_squares) and not np.isnan(r.mean_p_cubes)


def test_affine_invariance_in_x():
    rng = np.random.default_rng(3)
    x = rng.uniform(1, 5, 150)
    y = np.log(x) + rng.normal(0, 0.1, 150)
    a = reset_bayes_bootstrap(y, x, "all", 500, seed=9)
    b = reset_bayes_bootstrap(y, 3.0 * x - 7.0, "all", 500, seed=9)
    for v in ("squares", "cubes", "both"):
        assert abs(a.get(v) - b.get(v)) < 0.02


def test_determinism_and_validation():
    rng = np.random.default_rng(4)
    x = rng.normal(size=40)
    y = x + rng.normal(size=40)
    np.testing.assert_equal(reset_bayes_bootstrap(y, x, seed=3, replicates=200).as_dict(),
                            reset_bayes_bootstrap(y, x, seed=3, replicates=200).as_dict())
    with pytest.raises(ValueError):
        reset_bayes_bootstrap(y[:10], x[:10])
    with pytest.raises(ValueError):
        reset_bayes_bootstrap(y, x, replicates=100)
    with pytest.raises(RankDeficiency):
        reset_bayes_bootstrap(np.ones(40), x, replicates=200)
    with pytest.raises(RankDeficiency):
        reset_bayes_bootstrap(y, np.tile([0.0, 1.0], 20), replicates=200)
