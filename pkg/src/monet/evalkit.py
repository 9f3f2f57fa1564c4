"""Model-quality metrics: PSIS-LOO, point-error metrics and generalised VIFs."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import EmptyInput, SingularDesign

__all__ = ["LooReport", "PointMetrics", "GvifReport", "psis_smooth", "gpd_fit",
           "psis_loo", "point_metrics", "gvif", "bayes_r2", "K_THRESHOLD"]

K_THRESHOLD = 0.7
MIN_DRAWS = 400


# ---------------------------------------------------------------------------
# Pareto-smoothed importance sampling

def gpd_fit(x: np.ndarray) -> tuple[float, float]:
    """Generalised Pareto (k, sigma) for ascending exceedances ``x``.

    Empirical-Bayes estimate over a profile grid with a weak prior pulling k
    towards 0.5.
    """
    n = len(x)
    prior_bs, prior_k = 3.0, 10.0
    m = 30 + int(math.sqrt(n))
    b = 1.0 - np.sqrt(m / (np.arange(1, m + 1) - 0.5))
    b /= prior_bs * x[int(n / 4 + 0.5) - 1]
    b += 1.0 / x[-1]
    k = np.mean(np.log1p(-b[:, None] * x), axis=1)
    len_scale = n * (np.log(-b / k) - k - 1.0)
    w = 1.0 / np.exp(len_scale - len_scale[:, None]).sum(axis=1)
    keep = w >= 10 * np.finfo(float).eps
    b, w = b[keep], w[keep] / w[keep].sum()
    b_post = float(np.sum(b * w))
    k_post = float(np.mean(np.log1p(-b_post * x)))
    sigma = -k_post / b_post
    k_post = (n * k_post + prior_k * 0.5) / (n + prior_k)
    return k_post, sigma


def _gpd_quantile(p: np.ndarray, k: float, sigma: float) -> np.ndarray:
    if abs(k) < 1e-12:
        return -sigma * np.log1p(-p)
    return sigma * np.expm1(-k * np.log1p(-p)) / k


def psis_smooth(log_ratios: np.ndarray) -> tuple[np.ndarray, float]:
    """Smooth one observation's log importance ratios.

    Returns unnormalised smoothed log weights (shifted so the largest raw
    ratio is 0) and the Pareto shape estimate ``k``. The upper tail of
    ``min(0.2 S, 3 sqrt(S))`` ratios is replaced by expected order
    statistics of the fitted generalised Pareto, truncated at the raw maximum.
    """
    lw = np.asarray(log_ratios, dtype=float)
    lw = lw - lw.max()
    s = len(lw)
    m = int(math.ceil(min(0.2 * s, 3 * math.sqrt(s))))
    order = np.argsort(lw, kind="stable")
    cutoff = max(lw[order[-m - 1]], math.log(np.finfo(float).tiny))
    tail = order[-m:]
    tail = tail[lw[tail] > cutoff]
    if len(tail) <= 4 or np.ptp(lw[tail]) == 0:
        return lw, 0.0 if np.ptp(lw) == 0 else float("inf")
    exp_cut = math.exp(cutoff)
    k, sigma = gpd_fit(np.exp(lw[tail]) - exp_cut)
    out = lw.copy()
    if np.isfinite(k):
        probs = (np.arange(len(tail)) + 0.5) / len(tail)
        out[tail] = np.log(_gpd_quantile(probs, k, sigma) + exp_cut)
    return np.minimum(out, 0.0), float(k)


@dataclass(frozen=True)
class LooReport:
    elpd_loo: float
    se_elpd: float
    p_loo: float
    looic: float
    pareto_k: np.ndarray
    mc_se: float
    pointwise_elpd: np.ndarray = field(repr=False)
    pointwise_lpd: np.ndarray = field(repr=False)
    notes: tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return len(self.pareto_k)

    @property
    def flagged(self) -> np.ndarray:
        return np.flatnonzero(self.pareto_k >= K_THRESHOLD)

    @property
    def lpd(self) -> float:
        return float(self.pointwise_lpd.sum())

    def as_dict(self) -> dict:
        return {"elpd_loo": self.elpd_loo, "se_elpd": self.se_elpd, "p_loo": self.p_loo,
                "looic": self.looic, "mc_se": self.mc_se,
                "pareto_k": [float(k) for k in self.pareto_k],
                "max_pareto_k": float(np.max(self.pareto_k)),
                "n_flagged": int(len(self.flagged))}


def psis_loo(pointwise_loglik: np.ndarray) -> LooReport:
    """Leave-one-out expected log predictive density from a (draws, n) log-likelihood matrix."""
    ll = np.asarray(pointwise_loglik, dtype=float)
    if ll.ndim != 2:
        raise ValueError("pointwise log-likelihood must be a (draws, n) matrix")
    if not np.all(np.isfinite(ll)):
        raise ValueError("pointwise log-likelihood contains non-finite values")
    s, n = ll.shape
    if s < MIN_DRAWS:
        raise ValueError(f"need at least {MIN_DRAWS} draws, got {s}")
    elpd = np.empty(n)
    ks = np.empty(n)
    var_elpd = np.empty(n)
    lpd = logsumexp(ll, axis=0) - math.log(s)
    notes = []
    for i in range(n):
        col = ll[:, i]
        if np.ptp(col) == 0:
            elpd[i], ks[i], var_elpd[i] = col[0], 0.0, 0.0
            notes.append(f"observation {i}: constant likelihood, exact lpd used (k=0)")
            continue
        lw, ks[i] = psis_smooth(-col)
        lw = lw - logsumexp(lw)
        elpd[i] = logsumexp(lw + col)
        w = np.exp(lw)
        dens = np.exp(col - col.max())
        epd = math.exp(elpd[i] - col.max())
        var_epd = float(np.sum(w * w * (dens - epd) ** 2))
        var_elpd[i] = var_epd / (epd * epd)
    elpd_loo = float(elpd.sum())
    return LooReport(
        elpd_loo=elpd_loo,
        se_elpd=float(math.sqrt(n * np.var(elpd, ddof=1))) if n > 1 else 0.0,
        p_loo=float(np.sum(lpd - elpd)),
        looic=-2.0 * elpd_loo,
        pareto_k=ks,
        mc_se=float(math.sqrt(var_elpd.sum())),
        pointwise_elpd=elpd,
        pointwise_lpd=lpd,
        notes=tuple(notes),
    )


# ---------------------------------------------------------------------------
# point metrics

@dataclass(frozen=True)
class PointMetrics:
    mae: float
    rmse: float
    mae_pct_min: float | None
    rmse_pct_min: float | None
    r2: float | None = None
    response_min: float | None = None

    def as_dict(self) -> dict:
        return {"mae": self.mae, "rmse": self.rmse, "mae_pct_min": self.mae_pct_min,
                "rmse_pct_min": self.rmse_pct_min, "r2": self.r2, "response_min": self.response_min}


R2_FAMILIES = ("gaussian", "binomial")


def point_metrics(y, yhat, family: str | None = "gaussian") -> PointMetrics:
    """MAE and RMSE, also as a percentage of the smallest observed response.

    ``r2`` (squared correlation of observed and predicted) is filled only for
    Gaussian or binomial families; pass ``family=None`` to skip it.
    """
    y = np.asarray(y, dtype=float).ravel()
    yhat = np.asarray(yhat, dtype=float).ravel()
    if len(y) == 0:
        raise EmptyInput("point_metrics needs at least one observation")
    if len(y) != len(yhat):
        raise ValueError("y and yhat differ in length")
    err = y - yhat
    mae = float(np.mean(np.abs(err)))
    rmse = float(math.sqrt(np.mean(err * err)))
    rmse = max(rmse, mae)  # guards the last-ulp rounding when all |err| are equal
    ymin = float(y.min())
    pct = (lambda v: v / ymin * 100.0) if ymin > 0 else (lambda v: None)
    r2 = None
    if family is not None and family.lower() in R2_FAMILIES and len(y) > 1:
        if np.ptp(y) > 0 and np.ptp(yhat) > 0:
            r2 = float(np.corrcoef(y, yhat)[0, 1] ** 2)
        elif np.all(err == 0):
            r2 = 1.0
    return PointMetrics(mae, rmse, pct(mae), pct(rmse), r2, ymin)


def bayes_r2(mu_draws: np.ndarray, sigma_draws: np.ndarray) -> np.ndarray:
    """Per-draw Bayesian R^2 for a Gaussian model: var(fit) / (var(fit) + sigma^2)."""
    var_fit = np.var(mu_draws, axis=1, ddof=1)
    return var_fit / (var_fit + np.asarray(sigma_draws) ** 2)


# ---------------------------------------------------------------------------
# GVIF

@dataclass(frozen=True)
class GvifReport:
    terms: tuple[str, ...]
    gvif: np.ndarray
    df: np.ndarray

    @property
    def gvif_corrected(self) -> np.ndarray:
        return self.gvif ** (1.0 / (2.0 * self.df))

    def as_dict(self) -> dict:
        return {t: {"gvif": float(g), "df": int(d), "gvif_corrected": float(c)}
                for t, g, d, c in zip(self.terms, self.gvif, self.df, self.gvif_corrected)}


def gvif(design: np.ndarray, term_groups: Mapping[str, Sequence[int]] | Sequence[Sequence[int]]) -> GvifReport:
    """Generalised variance-inflation factor per column group.

    ``design`` must not contain the intercept column. For group ``g``,
    ``GVIF = det(R_gg) det(R_rest) / det(R)`` with ``R`` the column
    correlation matrix.
    """
    X = np.asarray(design, dtype=float)
    if isinstance(term_groups, Mapping):
        names = tuple(term_groups)
        groups = [list(term_groups[k]) for k in names]
    else:
        groups = [list(g) for g in term_groups]
        names = tuple(f"group{i}" for i in range(len(groups)))
    cols = sorted(c for g in groups for c in g)
    if cols != list(range(X.shape[1])):
        raise ValueError("term groups must partition the design columns")
    sd = X.std(axis=0)
    if np.any(sd == 0):
        raise SingularDesign("design has a constant column (intercept must be excluded)")
    R = np.corrcoef(X, rowvar=False)
    R = np.atleast_2d(R)
    sign, logdet = np.linalg.slogdet(R)
    if sign <= 0 or logdet < math.log(1e-12):
        raise SingularDesign("design columns are (nearly) collinear")
    out = []
    for g in groups:
        rest = [c for c in range(X.shape[1]) if c not in g]
        _, ld_g = np.linalg.slogdet(R[np.ix_(g, g)])
        ld_r = np.linalg.slogdet(R[np.ix_(rest, rest)])[1] if rest else 0.0
        out.append(math.exp(ld_g + ld_r - logdet))
    return GvifReport(names, np.array(out), np.array([len(g) for g in groups]))
