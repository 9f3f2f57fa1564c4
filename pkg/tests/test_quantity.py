from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from monet.errors import DomainError
from monet.quantity import (QuantityInputs, ScenarioDelta, classify_scenario, log_predict_m1,
                            partial_lambda_gold, partial_lambda_p, predict_m1,
                            total_differential)

pos = st.floats(min_value=1e-3, max_value=1e6, allow_nan=False)
delta = st.floats(min_value=-100, max_value=100, allow_nan=False)


def test_level_examples():
    assert predict_m1(QuantityInputs(100, 4)) == 25
    assert predict_m1(QuantityInputs(3.3, 3.3)) == pytest.approx(1.0)
    assert predict_m1(QuantityInputs(7.65, 7.65, beta=2)) == pytest.approx(2.0)


def test_differential_examples():
    q = QuantityInputs(100, 4)
    assert total_differential(q, ScenarioDelta(2, 0)) == pytest.approx(0.5)
    assert total_differential(q, ScenarioDelta(0, 0.1)) == pytest.approx(-0.625)
    assert total_differential(q, ScenarioDelta(0, 0)) == 0


def test_differential_matches_finite_difference_oracle():
    q = QuantityInputs(100, 4)
    h = 1e-6
    fd = (predict_m1(QuantityInputs(100, 4 + h)) - predict_m1(QuantityInputs(100, 4 - h))) / (2 * h)
    assert total_differential(q, ScenarioDelta(0, 0.1)) == pytest.approx(0.1 * fd, rel=1e-6)


def test_case_labels():
    q = QuantityInputs(100, 4)
    assert classify_scenario(q, ScenarioDelta(-1, 0)).label == "Negative"
    assert classify_scenario(q, ScenarioDelta(1, -1)).label == "Positive"
    assert classify_scenario(q, ScenarioDelta(1, 1)).label == "Conditional(Negative)"
    assert classify_scenario(q, ScenarioDelta(-1, 1)).label == "Negative"
    assert classify_scenario(q, ScenarioDelta(0, 0)).label == "Zero"
    # both falling: prices effect dominates when gold barely moves
    assert classify_scenario(q, ScenarioDelta(-1, -0.01)).label == "Conditional(Negative)"
    assert classify_scenario(q, ScenarioDelta(-0.01, -1)).label == "Conditional(Positive)"


@pytest.mark.parametrize("bad", [(0, 1, 1), (1, -2, 1), (1, 1, 0), (math.nan, 1, 1), (math.inf, 1, 1)])
def test_domain_errors(bad):
    with pytest.raises(DomainError):
        QuantityInputs(*bad)


@settings(max_examples=300, deadline=None)
@given(pos, pos, pos, delta, delta)
def test_properties(lp, lg, beta, dp, dg):
    q = QuantityInputs(lp, lg, beta)
    assert partial_lambda_p(q) > 0
    assert partial_lambda_gold(q) < 0
    assert math.exp(log_predict_m1(q)) == pytest.approx(predict_m1(q), rel=1e-12)
    d = ScenarioDelta(dp, dg)
    td = total_differential(q, d)
    assert classify_scenario(q, d).sign == (td > 0) - (td < 0)
