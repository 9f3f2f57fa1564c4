"""Quantity-of-prices money model.

Circulating money is the ratio of the sum of commodity prices (nominal GDP)
to the price of gold, scaled by an inverse-velocity coefficient::

    Q_m = lambda_p / lambda_gold * beta
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

__all__ = [
    "QuantityInputs",
    "ScenarioDelta",
    "ScenarioVerdict",
    "predict_m1",
    "log_predict_m1",
    "partial_lambda_p",
    "partial_lambda_gold",
    "total_differential",
    "classify_scenario",
]


@dataclass(frozen=True)
class QuantityInputs:
    lambda_p: float
    lambda_gold: float
    beta: float = 1.0

    def __post_init__(self):
        for name in ("lambda_p", "lambda_gold", "beta"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be a positive finite number, got {v!r}")


@dataclass(frozen=True)
class ScenarioDelta:
    d_lambda_p: float = 0.0
    d_lambda_gold: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.d_lambda_p) and math.isfinite(self.d_lambda_gold)):
            raise DomainError("scenario deltas must be finite")


_SIGN_LABEL = {1: "Positive", -1: "Negative", 0: "Zero"}


@dataclass(frozen=True)
class ScenarioVerdict:
    """Outcome of a comparative-statics scenario.

    ``case`` is the scenario number (1-8, or 0 for the no-change case) and
    ``sign`` the sign of the change in circulating money. Conditional
    scenarios (both drivers moving in the same direction) carry the sign
    resolved from the total differential.
    """

    case: int
    sign: int
    conditional: bool = False

    @property
    def label(self) -> str:
        base = _SIGN_LABEL[self.sign]
        return f"Conditional({base})" if self.conditional else base

    def __str__(self):
        return self.label


def predict_m1(inputs: QuantityInputs) -> float:
    return inputs.lambda_p / inputs.lambda_gold * inputs.beta


def log_predict_m1(inputs: QuantityInputs) -> float:
    """Log-elasticity form: ln Q_m = ln lambda_p - ln lambda_gold + ln beta."""
    return math.log(inputs.lambda_p) - math.log(inputs.lambda_gold) + math.log(inputs.beta)


def partial_lambda_p(inputs: QuantityInputs) -> float:
    return inputs.beta / inputs.lambda_gold


def partial_lambda_gold(inputs: QuantityInputs) -> float:
    # exact derivative of the ratio; keeps the lambda_p factor
    return -inputs.beta * inputs.lambda_p / inputs.lambda_gold**2


def total_differential(inputs: QuantityInputs, delta: ScenarioDelta) -> float:
    return (partial_lambda_p(inputs) * delta.d_lambda_p
            + partial_lambda_gold(inputs) * delta.d_lambda_gold)


def _sign(v: float) -> int:
    return (v > 0) - (v < 0)


# (sign d_lambda_p, sign d_lambda_gold) -> (case number, fixed sign or None)
_CASES = {
    (-1, 0): (1, -1),
    (0, 1): (2, -1),
    (-1, -1): (3, None),
    (1, 1): (4, None),
    (1, 0): (5, 1),
    (0, -1): (6, 1),
    (1, -1): (7, 1),
    (-1, 1): (8, -1),
    (0, 0): (0, 0),
}


def classify_scenario(inputs: QuantityInputs, delta: ScenarioDelta) -> ScenarioVerdict:
    """Map the direction of price and gold changes to the sign of the money change.

    Cases where prices and gold move together are ambiguous a priori and are
    resolved by evaluating the total differential at ``inputs``.
    """
    key = (_sign(delta.d_lambda_p), _sign(delta.d_lambda_gold))
    case, sign = _CASES[key]
    if sign is None:
        return ScenarioVerdict(case, _sign(total_differential(inputs, delta)), conditional=True)
    return ScenarioVerdict(case, sign)
