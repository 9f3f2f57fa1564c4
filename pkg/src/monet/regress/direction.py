"""Which of two variables explains the other better, judged by ELPD-LOO."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..sampler import ChainConfig
from .glm import BglmFit, ObjectivePriors, fit_bayes_lm, seed_for

X_EXPLAINS_Y = "x_explains_y"
Y_EXPLAINS_X = "y_explains_x"
UNDECIDABLE = "Undecidable"

CAVEAT = ("ELPD compared across models with different response variables; "
          "both responses are on the log scale but the comparison is heuristic")


@dataclass(frozen=True)
class DirectionVerdict:
    """Outcome of fitting ``y = f(x)`` and ``x = f(y)``.

    ``y`` is the first variable passed to :func:`compare_directions`.
    ``x_explains_y`` means the model ``y = f(x)`` has the higher ELPD-LOO
    by more than the margin.
    """
    y_name: str
    x_name: str
    orientation: str
    elpd_x_to_y: float
    elpd_y_to_x: float
    se_diff: float
    log_fit_ratio: float
    margin: float = 2.0
    note: str = CAVEAT
    fits: tuple = field(default=(), repr=False, compare=False)

    @property
    def elpd_diff(self) -> float:
        return self.elpd_x_to_y - self.elpd_y_to_x

    @property
    def preferred(self) -> str:
        if self.orientation == X_EXPLAINS_Y:
            return f"{self.y_name} = f({self.x_name})"
        if self.orientation == Y_EXPLAINS_X:
            return f"{self.x_name} = f({self.y_name})"
        return UNDECIDABLE

    def mirrored(self) -> "DirectionVerdict":
        flip = {X_EXPLAINS_Y: Y_EXPLAINS_X, Y_EXPLAINS_X: X_EXPLAINS_Y}
        return DirectionVerdict(self.x_name, self.y_name, flip.get(self.orientation, UNDECIDABLE),
                                self.elpd_y_to_x, self.elpd_x_to_y, self.se_diff,
                                -self.log_fit_ratio, self.margin, self.note, self.fits[::-1])

    def as_dict(self) -> dict:
        return {"y": self.y_name, "x": self.x_name, "orientation": self.orientation,
                "preferred": self.preferred, "elpd_x_to_y": self.elpd_x_to_y,
                "elpd_y_to_x": self.elpd_y_to_x, "elpd_diff": self.elpd_diff,
                "se_diff": self.se_diff, "log_fit_ratio": self.log_fit_ratio,
                "note": self.note}


def decide(elpd_i_xy: np.ndarray, elpd_i_yx: np.ndarray, margin: float = 2.0):
    """Return (orientation, diff, se) from pointwise ELPD vectors."""
    d = np.asarray(elpd_i_xy) - np.asarray(elpd_i_yx)
    n = len(d)
    diff = float(d.sum())
    se = float(math.sqrt(n * d.var(ddof=1))) if n > 1 else 0.0
    if abs(diff) <= margin * se:
        return UNDECIDABLE, diff, se
    return (X_EXPLAINS_Y if diff > 0 else Y_EXPLAINS_X), diff, se


def compare_directions(y, x, priors: Optional[tuple] = None,
                       config: ChainConfig = ChainConfig(), y_name: str = "y",
                       x_name: str = "x", margin: float = 2.0) -> DirectionVerdict:
    """Fit ``y ~ x`` and ``x ~ y`` and compare their ELPD-LOO.

    Each orientation draws its seed from the master seed and its own
    (response, predictor) label pair, so swapping the inputs swaps the fits
    exactly and yields the mirrored verdict.  ``priors`` may be a pair
    ``(priors_y_on_x, priors_x_on_y)``.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    p_yx, p_xy = priors if priors is not None else (None, None)
    cfg_a = config.with_seed(seed_for(config.seed, "direction", y_name, x_name))
    cfg_b = config.with_seed(seed_for(config.seed, "direction", x_name, y_name))
    fit_a: BglmFit = fit_bayes_lm(y, x, p_yx, cfg_a, response=y_name, predictor=x_name)
    fit_b: BglmFit = fit_bayes_lm(x, y, p_xy, cfg_b, response=x_name, predictor=y_name)
    loo_a, loo_b = fit_a.loo, fit_b.loo
    orientation, _, se = decide(loo_a.pointwise_elpd, loo_b.pointwise_elpd, margin)
    ratio = float(np.mean(loo_a.pointwise_lpd - loo_b.pointwise_lpd))
    return DirectionVerdict(y_name, x_name, orientation, loo_a.elpd_loo, loo_b.elpd_loo,
                            se, ratio, margin, CAVEAT, (fit_a, fit_b))
