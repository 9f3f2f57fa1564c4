"""RESET functional-form tests averaged over Bayesian-bootstrap weights."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..errors import RankDeficiency

VARIANTS = {"squares": (2,), "cubes": (3,), "both": (2, 3)}


@dataclass(frozen=True)
class ResetReport:
    mean_p_squares: float
    mean_p_cubes: float
    mean_p_both: float
    replicates: int
    # share of bootstrap replicates whose test rejects at the 5% level
    reject_squares: float = float("nan")
    reject_cubes: float = float("nan")
    reject_both: float = float("nan")

    def __post_init__(self):
        for v in (self.mean_p_squares, self.mean_p_cubes, self.mean_p_both):
            if not (np.isnan(v) or 0.0 <= v <= 1.0):
                raise ValueError("mean p-values must lie in [0, 1]")

    def get(self, variant: str) -> float:
        return {"squares": self.mean_p_squares, "cubes": self.mean_p_cubes,
                "both": self.mean_p_both}[variant]

    def rejection_rate(self, variant: str) -> float:
        return {"squares": self.reject_squares, "cubes": self.reject_cubes,
                "both": self.reject_both}[variant]

    def as_dict(self) -> dict:
        return {"squares": self.mean_p_squares, "cubes": self.mean_p_cubes,
                "both": self.mean_p_both, "replicates": self.replicates,
                "reject_squares": self.reject_squares, "reject_cubes": self.reject_cubes,
                "reject_both": self.reject_both}


def _base_design(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return np.column_stack([np.ones(len(x)), x])


def _standardise(A: np.ndarray) -> np.ndarray:
    # column scaling for conditioning; the intercept column is left alone
    out = A.copy()
    sd = out[:, 1:].std(axis=0)
    sd[sd == 0] = 1.0
    out[:, 1:] = (out[:, 1:] - out[:, 1:].mean(axis=0)) / sd
    return out


def _batched_solve(M: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.linalg.solve(M, b[..., None])[..., 0]


def _reset_pvalues(y: np.ndarray, X0: np.ndarray, W: np.ndarray, powers) -> np.ndarray:
    """Weighted RESET p-values for a batch of weight vectors ``W`` (R, n).

    The added terms are raw powers of the weighted fitted values.  They are
    rescaled and residualised against the base design for conditioning, which
    leaves both the span and the coefficients on the added terms unchanged.
    The test is a Wald F-test using the WLS sandwich covariance
    (A'WA)^-1 A'W^2A (A'WA)^-1 sigma^2, which is the exact covariance of the
    weighted estimator for fixed weights and homoskedastic errors.  With unit
    weights it reduces to the classical RESET F-test.
    """
    n, k0 = X0.shape
    R = len(W)
    q = len(powers)
    G0 = np.einsum("rn,ni,nj->rij", W, X0, X0)
    b0 = _batched_solve(G0, np.einsum("rn,ni,n->ri", W, X0, y))
    yhat = b0 @ X0.T
    scale = np.sqrt(np.mean(yhat ** 2, axis=1, keepdims=True))
    u = yhat / scale
    P = np.stack([u ** p for p in powers], axis=-1)  # (R, n, q)
    B = _batched_solve(G0[:, None].repeat(q, 1),
                       np.einsum("rn,ni,rnj->rji", W, X0, P))  # (R, q, k0)
    P = P - np.einsum("ni,rji->rnj", X0, B)
    P = P / np.sqrt(np.mean(P ** 2, axis=1, keepdims=True))
    A = np.concatenate([np.broadcast_to(X0, (R, n, k0)), P], axis=-1)
    G = np.einsum("rn,rni,rnj->rij", W, A, A)
    Ginv = np.linalg.inv(G)
    beta = np.einsum("rij,rj->ri", Ginv, np.einsum("rn,rni,n->ri", W, A, y))
    resid = y[None, :] - np.einsum("rni,ri->rn", A, beta)
    df2 = n - k0 - q
    sigma2 = np.einsum("rn,rn->r", W, resid * resid) / df2
    meat = np.einsum("rn,rni,rnj->rij", W * W, A, A)
    cov = Ginv @ meat @ Ginv * sigma2[:, None, None]
    g = beta[:, k0:]
    cg = cov[:, k0:, k0:]
    f = np.einsum("ri,ri->r", g, _batched_solve(cg, g)) / q
    return stats.f.sf(np.maximum(f, 0.0), q, df2)


def reset_bayes_bootstrap(y, x, variant: str = "both", replicates: int = 1000,
                          seed: int = 0, batch: int = 250) -> ResetReport:
    """Mean RESET p-value over Dirichlet(1, ..., 1) observation weightings.

    ``variant`` chooses which report field is computed from the bootstrap;
    pass ``"all"`` to compute every variant from the same weights.
    """
    y = np.asarray(y, dtype=float)
    X0 = _standardise(_base_design(x))
    n = len(y)
    if n < 20:
        raise ValueError("RESET needs at least 20 observations")
    if replicates < 200:
        raise ValueError("replicates must be >= 200")
    if len(X0) != n:
        raise ValueError("y and x lengths differ")
    if variant != "all" and variant not in VARIANTS:
        raise ValueError(f"unknown RESET variant {variant!r}")
    wanted = list(VARIANTS) if variant == "all" else [variant]

    # rank check on the unweighted augmented design
    coef = np.linalg.lstsq(X0, y, rcond=None)[0]
    yhat = X0 @ coef
    if yhat.std() == 0:
        raise RankDeficiency("fitted values are constant; RESET terms are undefined")
    z = (yhat - yhat.mean()) / yhat.std()
    aug = np.column_stack([X0, z ** 2, z ** 3])
    if np.linalg.matrix_rank(X0) < X0.shape[1] or np.linalg.matrix_rank(aug) < aug.shape[1]:
        raise RankDeficiency("augmented RESET design is singular")

    rng = np.random.default_rng(seed)
    sums = {v: 0.0 for v in wanted}
    rejects = {v: 0 for v in wanted}
    done = 0
    while done < replicates:
        m = min(batch, replicates - done)
        W = rng.dirichlet(np.ones(n), size=m) * n
        for v in wanted:
            p = _reset_pvalues(y, X0, W, VARIANTS[v])
            sums[v] += float(p.sum())
            rejects[v] += int((p < 0.05).sum())
        done += m
    nan = float("nan")
    means = {v: min(1.0, max(0.0, sums[v] / replicates)) if v in sums else nan for v in VARIANTS}
    rates = {v: rejects[v] / replicates if v in rejects else nan for v in VARIANTS}
    return ResetReport(means["squares"], means["cubes"], means["both"], replicates,
                       rates["squares"], rates["cubes"], rates["both"])


def reset_unweighted(y, x, variant: str = "both") -> float:
    """Classical RESET p-value (unit weights), used as a reference."""
    y = np.asarray(y, dtype=float)
    X0 = _standardise(_base_design(x))
    return float(_reset_pvalues(y, X0, np.ones((1, len(y))), VARIANTS[variant])[0])
