"""Hold-out split, repeated k-fold grid search and refit."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..errors import DegenerateTarget, GridExhausted
from ..evalkit import PointMetrics, point_metrics
from ..regress.glm import seed_for
from .models import ModelKind, _as_2d, default_grid, make_model

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CvPlan:
    folds: int = 10
    repeats: int = 100
    test_fraction: float = 0.20
    seed: int = 0

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")

    def split(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """(train indices, test indices), both sorted."""
        rng = np.random.default_rng(seed_for("holdout", self.seed, n))
        perm = rng.permutation(n)
        n_test = max(1, int(round(self.test_fraction * n)))
        return np.sort(perm[n_test:]), np.sort(perm[:n_test])

    def fold_ids(self, n: int, repeat: int) -> np.ndarray:
        """Fold label (0..folds-1) of each of ``n`` training rows in ``repeat``."""
        rng = np.random.default_rng(seed_for("folds", self.seed, n, repeat))
        ids = np.arange(n) % self.folds
        return ids[rng.permutation(n)]

    def as_dict(self) -> dict:
        return {"folds": self.folds, "repeats": self.repeats,
                "test_fraction": self.test_fraction, "seed": self.seed}


@dataclass
class CvReport:
    kind: str
    train: PointMetrics
    test: PointMetrics
    fold_rmse: np.ndarray = field(repr=False)  # (repeats * folds,)
    fold_mae: np.ndarray = field(repr=False)
    grid_scores: list = field(default_factory=list)  # (params, mean CV RMSE)
    plan: Optional[CvPlan] = None
    notes: tuple = ()

    def as_dict(self) -> dict:
        return {"kind": self.kind, "train": self.train.as_dict(), "test": self.test.as_dict(),
                "cv_rmse_mean": float(np.mean(self.fold_rmse)),
                "cv_rmse_sd": float(np.std(self.fold_rmse, ddof=1)) if len(self.fold_rmse) > 1 else 0.0,
                "cv_mae_mean": float(np.mean(self.fold_mae)),
                "folds_evaluated": int(len(self.fold_rmse)),
                "grid": [{"params": p, "cv_rmse": s} for p, s in self.grid_scores],
                "notes": list(self.notes)}


@dataclass
class TrainedModel:
    kind: ModelKind
    model: object = field(repr=False)
    params: dict = field(default_factory=dict)
    train_idx: np.ndarray = field(default=None, repr=False)
    test_idx: np.ndarray = field(default=None, repr=False)
    # out-of-fold predictions of the chosen grid point, (repeats, n_train)
    oof: np.ndarray = field(default=None, repr=False)
    report: Optional[CvReport] = None

    def predict(self, X) -> np.ndarray:
        X = _as_2d(X)
        out = np.asarray(self.model.predict(X), dtype=float)
        assert len(out) == len(X)
        return out


def _rmse(e):
    return math.sqrt(float(np.mean(e * e)))


def train_model(kind, X, y, grid: Optional[Sequence[dict]] = None, plan: CvPlan = CvPlan(),
                on_constant: str = "predict") -> TrainedModel:
    """Select hyperparameters by repeated k-fold CV on the training partition
    and refit there.

    A constant response gives constant predictors when ``on_constant`` is
    ``"predict"`` and raises :class:`DegenerateTarget` when it is ``"raise"``.
    """
    kind = ModelKind.parse(kind)
    X = _as_2d(X)
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n < 30:
        raise ValueError("train_model needs at least 30 rows")
    if len(X) != n:
        raise ValueError("X and y differ in length")
    notes = []
    if np.ptp(y) == 0:
        if on_constant == "raise":
            raise DegenerateTarget("response has zero variance")
        notes.append("constant response: every model predicts the constant")
    grid = list(grid) if grid is not None else default_grid(kind, X.shape[1])
    if not grid:
        raise GridExhausted("empty hyperparameter grid")

    train_idx, test_idx = plan.split(n)
    Xtr, ytr = X[train_idx], y[train_idx]
    m = len(ytr)
    folds = [plan.fold_ids(m, r) for r in range(plan.repeats)]

    scores = []
    best = None
    for gi, params in enumerate(grid):
        oof = np.empty((plan.repeats, m))
        rmse, mae = [], []
        try:
            for r, ids in enumerate(folds):
                for f in range(plan.folds):
                    hold = ids == f
                    model = make_model(kind, params, seed_for(plan.seed, kind.value, gi, r, f))
                    model.fit(Xtr[~hold], ytr[~hold])
                    pred = np.asarray(model.predict(Xtr[hold]), dtype=float)
                    if not np.all(np.isfinite(pred)):
                        raise FloatingPointError("non-finite predictions")
                    oof[r, hold] = pred
                    e = ytr[hold] - pred
                    rmse.append(_rmse(e))
                    mae.append(float(np.mean(np.abs(e))))
        except (FloatingPointError, ValueError, np.linalg.LinAlgError) as exc:
            logger.warning("%s grid point %s failed: %s", kind.value, params, exc)
            scores.append((dict(params), float("nan")))
            continue
        score = float(np.mean(rmse))
        scores.append((dict(params), score))
        if best is None or score < best[0]:
            best = (score, gi, oof, np.array(rmse), np.array(mae))
    if best is None:
        raise GridExhausted(f"every {kind.value} grid point failed")

    _, gi, oof, fold_rmse, fold_mae = best
    params = dict(grid[gi])
    model = make_model(kind, params, seed_for(plan.seed, kind.value, "final"))
    model.fit(Xtr, ytr)
    train_pred = np.asarray(model.predict(Xtr), dtype=float)
    test_pred = np.asarray(model.predict(X[test_idx]), dtype=float)
    report = CvReport(kind.value, point_metrics(ytr, train_pred), point_metrics(y[test_idx], test_pred),
                      fold_rmse, fold_mae, scores, plan, tuple(notes))
    return TrainedModel(kind, model, params, train_idx, test_idx, oof, report)
