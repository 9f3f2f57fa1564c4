"""Stacking ensembles over out-of-fold member predictions, and the adoption gate."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from ..errors import CollinearMembers
from ..evalkit import point_metrics
from .training import CvReport, TrainedModel, _rmse

MAX_CONDITION = 1e8


@dataclass
class EnsembleFit:
    names: tuple
    coef: np.ndarray  # intercept first, then one weight per member
    se: np.ndarray
    t: np.ndarray
    p: np.ndarray
    null_deviance: float
    residual_deviance: float
    dispersion: float
    df_null: int
    df_residual: int
    members: tuple = field(default=(), repr=False)

    @property
    def intercept(self) -> float:
        return float(self.coef[0])

    @property
    def weights(self) -> np.ndarray:
        return self.coef[1:]

    def combine(self, member_predictions) -> np.ndarray:
        P = np.column_stack(member_predictions)
        return self.coef[0] + P @ self.coef[1:]

    def predict(self, X) -> np.ndarray:
        return self.combine([m.predict(X) for m in self.members])

    def coefficient_table(self) -> list[dict]:
        rows = []
        for name, c, s, t, p in zip(("(Intercept)",) + tuple(self.names), self.coef, self.se,
                                    self.t, self.p):
            rows.append({"term": name, "estimate": float(c), "std_error": float(s),
                         "t_value": float(t), "p_value": float(p)})
        return rows

    def as_dict(self) -> dict:
        return {"coefficients": self.coefficient_table(),
                "null_deviance": self.null_deviance, "df_null": self.df_null,
                "residual_deviance": self.residual_deviance, "df_residual": self.df_residual,
                "dispersion": self.dispersion}


def stack_predictions(P, y, names: Sequence[str] = ()) -> EnsembleFit:
    """Gaussian-identity GLM (ordinary least squares) of ``y`` on the columns of ``P``."""
    P = np.asarray(P, dtype=float)
    y = np.asarray(y, dtype=float)
    if P.ndim != 2 or P.shape[1] < 2:
        raise ValueError("stacking needs at least two member prediction columns")
    N, k = P.shape
    names = tuple(names) or tuple(f"m{j + 1}" for j in range(k))
    sd = P.std(axis=0)
    if np.any(sd == 0):
        raise CollinearMembers("a member makes constant predictions")
    Z = (P - P.mean(axis=0)) / sd
    if np.linalg.cond(Z) > MAX_CONDITION:
        raise CollinearMembers("member predictions are nearly collinear")
    A = np.column_stack([np.ones(N), P])
    Q, R = np.linalg.qr(A)
    coef = np.linalg.solve(R, Q.T @ y)
    resid = y - A @ coef
    rss = float(resid @ resid)
    tss = float(np.sum((y - y.mean()) ** 2))
    df_res = N - k - 1
    disp = rss / df_res if df_res > 0 else float("nan")
    Rinv = np.linalg.inv(R)
    se = np.sqrt(disp * np.sum(Rinv * Rinv, axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = coef / se
    p = 2 * stats.t.sf(np.abs(t), df_res) if df_res > 0 else np.full(k + 1, np.nan)
    return EnsembleFit(names, coef, se, t, p, tss, min(rss, tss), disp, N - 1, df_res)


def _check_compatible(members: Sequence[TrainedModel]):
    first = members[0]
    for m in members[1:]:
        if m.report is not None and first.report is not None and m.report.plan != first.report.plan:
            raise ValueError("members were trained under different CV plans")
        if not np.array_equal(m.train_idx, first.train_idx):
            raise ValueError("members were trained on different partitions")


def stack_members(members: Sequence[TrainedModel], X, y) -> EnsembleFit:
    """Stack members on their out-of-fold predictions pooled over every CV repeat."""
    if len(members) < 2:
        raise ValueError("stacking needs at least two members")
    _check_compatible(members)
    y = np.asarray(y, dtype=float)
    ytr = y[members[0].train_idx]
    P = np.column_stack([m.oof.ravel() for m in members])
    yy = np.tile(ytr, members[0].oof.shape[0])
    fit = stack_predictions(P, yy, [m.kind.value for m in members])
    fit.members = tuple(members)
    return fit


def ensemble_report(fit: EnsembleFit, X, y) -> CvReport:
    """Train/test metrics of the stacked model on the members' partitions."""
    members = fit.members
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    X = X[:, None] if X.ndim == 1 else X
    tr, te = members[0].train_idx, members[0].test_idx
    train = point_metrics(y[tr], fit.predict(X[tr]))
    test = point_metrics(y[te], fit.predict(X[te]))
    plan = members[0].report.plan
    oof = fit.coef[0] + np.tensordot(fit.weights, np.stack([m.oof for m in members]), axes=1)
    ytr = y[tr]
    rmse, mae = [], []
    for r in range(oof.shape[0]):
        ids = plan.fold_ids(len(ytr), r)
        for f in range(plan.folds):
            e = ytr[ids == f] - oof[r, ids == f]
            rmse.append(_rmse(e))
            mae.append(float(np.mean(np.abs(e))))
    name = "Ensemble(" + "+".join(fit.names) + ")"
    note = "fold metrics reuse stacking weights estimated on the same pooled predictions"
    return CvReport(name, train, test, np.array(rmse), np.array(mae), [], plan, (note,))


@dataclass(frozen=True)
class GateDecision:
    adopt: bool
    member: str | None = None

    @property
    def label(self) -> str:
        return "Adopt" if self.adopt else f"RejectInFavorOf({self.member})"

    def __str__(self):
        return self.label


def ensemble_gate(ensemble: CvReport, members: Sequence[CvReport]) -> GateDecision:
    """Adopt only if the ensemble's test RMSE and MAE strictly beat every member."""
    if not members:
        raise ValueError("no member reports")
    if all(ensemble.test.rmse < m.test.rmse and ensemble.test.mae < m.test.mae for m in members):
        return GateDecision(True)
    best = min(members, key=lambda m: (m.test.rmse, m.test.mae))
    return GateDecision(False, best.kind)
