"""Bayesian generalised linear models (Gaussian/Gamma, identity/log links) fitted by HMC."""
from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Optional

import numpy as np
from scipy import special

from ..diagnostics import ChainDiagnostics, diagnose
from ..errors import SupportError
from ..evalkit import LooReport, psis_loo
from ..sampler import ChainConfig, PosteriorDraws, TargetDensity, check_gradient, sample_hmc
from .terms import Design, GlmSpec, Term, build_design

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2 * math.pi)
GAMMA_LOG_SHAPE_SD = 5.0


# ---------------------------------------------------------------------------
# frequentist pre-fit

def _link_inv(eta, link):
    return eta if link == "identity" else np.exp(eta)


def _dmu_deta(eta, mu, link):
    return np.ones_like(eta) if link == "identity" else mu


@dataclass(frozen=True)
class IrlsFit:
    coef: np.ndarray  # intercept first
    fitted: np.ndarray
    eta: np.ndarray
    dispersion: float  # Gaussian: sigma; Gamma: shape
    iterations: int
    converged: bool


def irls(y, X, family: str = "gaussian", link: str = "identity", max_iter: int = 100,
         tol: float = 1e-10) -> IrlsFit:
    """Maximum-likelihood GLM coefficients by iteratively reweighted least squares.

    ``X`` excludes the intercept, which is prepended.
    """
    y = np.asarray(y, dtype=float)
    n = len(y)
    A = np.column_stack([np.ones(n), np.asarray(X, dtype=float).reshape(n, -1)])
    if family == "gamma" and np.any(y <= 0):
        raise SupportError("Gamma family requires a strictly positive response")
    mu = np.where(y > 0, y, y.mean()) if link == "log" else y.copy()
    eta = np.log(mu) if link == "log" else mu
    dev_old = np.inf
    coef = np.zeros(A.shape[1])
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        d = _dmu_deta(eta, mu, link)
        var = np.ones(n) if family == "gaussian" else mu ** 2
        w = d * d / var
        z = eta + (y - mu) / d
        sw = np.sqrt(w)
        coef = np.linalg.lstsq(A * sw[:, None], z * sw, rcond=None)[0]
        eta = A @ coef
        mu = _link_inv(eta, link)
        if family == "gamma" and np.any(mu <= 0):
            mu = np.maximum(mu, 1e-10)
        if family == "gaussian":
            dev = float(np.sum((y - mu) ** 2))
        else:
            dev = float(2 * np.sum(-np.log(y / mu) + (y - mu) / mu))
        if abs(dev - dev_old) <= tol * (abs(dev) + 0.1):
            converged = True
            break
        dev_old = dev
    p = A.shape[1]
    resid_df = max(n - p, 1)
    if family == "gaussian":
        disp = math.sqrt(np.sum((y - mu) ** 2) / resid_df)
    else:
        phi = np.sum(((y - mu) / mu) ** 2) / resid_df
        disp = 1.0 / max(phi, 1e-12)
    return IrlsFit(coef, mu, eta, disp, it, converged)


# ---------------------------------------------------------------------------
# priors

@dataclass(frozen=True)
class ObjectivePriors:
    """Data-derived priors.

    The intercept prior (on the centred-predictor scale) is centred at the
    frequentist estimate; slope priors are zero-centred normals whose scales
    spread the frequentist R^2 evenly across regressors.
    """

    intercept_location: float
    intercept_scale: float
    coef_scales: np.ndarray
    r2_location: float
    dispersion_scale: float

    def __post_init__(self):
        if not 0 < self.r2_location < 1:
            raise ValueError("r2_location must lie in (0, 1)")
        if self.intercept_scale <= 0 or np.any(np.asarray(self.coef_scales) <= 0):
            raise ValueError("prior scales must be positive")

    @classmethod
    def from_data(cls, y, X, family: str = "gaussian", link: str = "identity",
                  pre_fit: Optional[IrlsFit] = None) -> "ObjectivePriors":
        y = np.asarray(y, dtype=float)
        X = np.asarray(X, dtype=float).reshape(len(y), -1)
        fit = pre_fit or irls(y, X, family, link)
        if np.ptp(y) > 0 and np.ptp(fit.fitted) > 0:
            r2 = float(np.corrcoef(y, fit.fitted)[0, 1] ** 2)
        else:
            r2 = 0.5
        r2 = min(max(r2, 0.01), 0.99)
        gy = y if link == "identity" else np.log(np.where(y > 0, y, np.nan))
        sd_link = float(np.nanstd(gy, ddof=1)) if np.all(np.isfinite(gy)) else float(np.std(fit.eta) / math.sqrt(r2))
        p = X.shape[1]
        sd_x = X.std(axis=0, ddof=1) if p else np.zeros(0)
        sd_x = np.where(sd_x > 0, sd_x, 1.0)
        scales = sd_link * math.sqrt(r2 / max(p, 1)) / sd_x
        sd_y = float(np.std(y, ddof=1)) or 1.0
        icpt = float(fit.coef[0] + X.mean(axis=0) @ fit.coef[1:]) if p else float(fit.coef[0])
        disp = sd_y if family == "gaussian" else GAMMA_LOG_SHAPE_SD
        return cls(icpt, 10.0 * sd_y, np.maximum(scales, 1e-12), r2, disp)

    def widened(self, factor: float) -> "ObjectivePriors":
        return replace(self, intercept_scale=self.intercept_scale * factor,
                       coef_scales=np.asarray(self.coef_scales) * factor)

    def as_dict(self) -> dict:
        return {"intercept_location": self.intercept_location, "intercept_scale": self.intercept_scale,
                "coef_scales": [float(s) for s in self.coef_scales], "r2_location": self.r2_location,
                "dispersion_scale": self.dispersion_scale}


# ---------------------------------------------------------------------------
# posterior

class GlmPosterior:
    """Log posterior in QR coordinates: eta = a + Q* theta, beta = R*^-1 theta.

    Unconstrained vector: [centred intercept, theta..., log dispersion].
    """

    def __init__(self, y, X, family, link, priors: ObjectivePriors):
        self.y = np.asarray(y, dtype=float)
        n = len(self.y)
        X = np.asarray(X, dtype=float).reshape(n, -1)
        self.family, self.link, self.priors = family, link, priors
        self.n, self.p = n, X.shape[1]
        self.xbar = X.mean(axis=0)
        if self.p:
            q, r = np.linalg.qr(X - self.xbar)
            c = math.sqrt(n - 1)
            # fix signs so the diagonal of R is positive
            sgn = np.sign(np.diag(r))
            sgn[sgn == 0] = 1
            q, r = q * sgn, r * sgn[:, None]
            self.Q, self.R = q * c, r / c
            self.R_inv = np.linalg.inv(self.R)
        else:
            self.Q = np.zeros((n, 0))
            self.R = self.R_inv = np.zeros((0, 0))
        self.coef_scales = np.asarray(priors.coef_scales, dtype=float)
        if family == "gamma":
            self.log_y = np.log(self.y)
        self.dim = self.p + 2

    # mapping between coordinates
    def to_unconstrained(self, coef, dispersion) -> np.ndarray:
        beta = np.asarray(coef[1:], dtype=float)
        a = coef[0] + self.xbar @ beta
        theta = self.R @ beta
        return np.concatenate([[a], theta, [math.log(dispersion)]])

    def to_natural(self, u: np.ndarray) -> np.ndarray:
        """Rows [a, theta, log d] -> rows [intercept, beta, dispersion]."""
        u = np.atleast_2d(u)
        theta = u[:, 1:1 + self.p]
        beta = theta @ self.R_inv.T
        icpt = u[:, 0] - beta @ self.xbar
        return np.column_stack([icpt, beta, np.exp(u[:, -1])])

    def _loglik_terms(self, eta, log_d):
        """Pointwise log-likelihood and d/d(eta), d/d(log dispersion); eta may be 2-D."""
        mu = _link_inv(eta, self.link)
        y = self.y
        if self.family == "gaussian":
            sigma = np.exp(log_d)
            r = y - mu
            z2 = (r / sigma) ** 2
            ll = -0.5 * LOG_2PI - log_d - 0.5 * z2
            dmu = r / sigma ** 2
            dld = -1.0 + z2
        else:
            if np.any(mu <= 0):
                return None
            phi = np.exp(log_d)
            ratio = y / mu
            log_mu = eta if self.link == "log" else np.log(mu)
            ll = (phi * log_d - special.gammaln(phi) + (phi - 1) * self.log_y
                  - phi * log_mu - phi * ratio)
            dmu = phi * (y - mu) / mu ** 2
            dld = phi * (log_d + 1.0 - special.digamma(phi) + self.log_y - log_mu - ratio)
        deta = dmu * _dmu_deta(eta, mu, self.link)
        return ll, deta, dld

    def value_and_grad(self, u):
        a, theta, log_d = u[0], u[1:1 + self.p], u[-1]
        eta = a + self.Q @ theta
        terms = self._loglik_terms(eta, log_d)
        if terms is None:
            return -math.inf, np.zeros_like(u)
        ll, deta, dld = terms
        pr = self.priors
        beta = self.R_inv @ theta
        z_b = beta / self.coef_scales
        lp = float(ll.sum()) - 0.5 * float(z_b @ z_b) - 0.5 * ((a - pr.intercept_location) / pr.intercept_scale) ** 2
        g = np.empty_like(u)
        g[0] = deta.sum() - (a - pr.intercept_location) / pr.intercept_scale ** 2
        g[1:1 + self.p] = self.Q.T @ deta - self.R_inv.T @ (z_b / self.coef_scales)
        g_ld = float(np.sum(dld))
        if self.family == "gaussian":
            rate = 1.0 / pr.dispersion_scale
            sigma = math.exp(log_d)
            lp += -rate * sigma + log_d
            g_ld += -rate * sigma + 1.0
        else:
            lp += -0.5 * (log_d / pr.dispersion_scale) ** 2
            g_ld += -log_d / pr.dispersion_scale ** 2
        g[-1] = g_ld
        return lp, g

    def log_density(self, u):
        return self.value_and_grad(u)[0]

    def gradient(self, u):
        return self.value_and_grad(u)[1]

    def pointwise_loglik(self, u_draws: np.ndarray) -> np.ndarray:
        eta = self.linear_predictor(u_draws)
        out = np.empty_like(eta)
        for s in range(0, len(eta), 500):
            block = eta[s:s + 500]
            terms = self._loglik_terms(block, u_draws[s:s + 500, -1:])
            out[s:s + 500] = terms[0]
        return out

    def linear_predictor(self, u_draws):
        return u_draws[:, :1] + u_draws[:, 1:1 + self.p] @ self.Q.T

    def target(self, init, names) -> TargetDensity:
        return TargetDensity(self.dim, self.log_density, self.gradient, initial=init,
                             names=names, value_and_grad=self.value_and_grad)


# ---------------------------------------------------------------------------
# fitting

@dataclass
class BglmFit:
    spec: GlmSpec
    design: Design
    y: np.ndarray
    draws: PosteriorDraws  # natural parameters: intercept, coefficients, dispersion
    unconstrained: np.ndarray = field(repr=False)
    pointwise_loglik: np.ndarray = field(repr=False)
    priors: ObjectivePriors = None
    pre_fit: IrlsFit = None
    gradient_error: float = 0.0

    @property
    def coef_names(self) -> list[str]:
        return ["(Intercept)"] + list(self.design.columns)

    @property
    def dispersion_name(self) -> str:
        return "sigma" if self.spec.family == "gaussian" else "shape"

    @cached_property
    def coef_draws(self) -> np.ndarray:
        return self.draws.draws[:, :-1]

    @cached_property
    def coef_mean(self) -> dict[str, float]:
        m = self.coef_draws.mean(axis=0)
        return dict(zip(self.coef_names, map(float, m)))

    @cached_property
    def coef_sd(self) -> dict[str, float]:
        s = self.coef_draws.std(axis=0, ddof=1)
        return dict(zip(self.coef_names, map(float, s)))

    @cached_property
    def mu_draws(self) -> np.ndarray:
        eta = self.coef_draws[:, :1] + self.coef_draws[:, 1:] @ self.design.X.T
        return _link_inv(eta, self.spec.link)

    @cached_property
    def fitted(self) -> np.ndarray:
        """Posterior mean of the conditional mean at each observation."""
        return self.mu_draws.mean(axis=0)

    @cached_property
    def diagnostics(self) -> ChainDiagnostics:
        return diagnose(self.draws)

    @cached_property
    def loo(self) -> LooReport:
        return psis_loo(self.pointwise_loglik)

    def predict(self, data) -> np.ndarray:
        X = self.design.transform(data)
        eta = self.coef_draws[:, :1] + self.coef_draws[:, 1:] @ X.T
        return _link_inv(eta, self.spec.link).mean(axis=0)

    def summary(self) -> list[dict]:
        rows = []
        for j, name in enumerate(self.coef_names + [self.dispersion_name]):
            col = self.draws.draws[:, j]
            lo, hi = np.quantile(col, [0.025, 0.975])
            rows.append({"term": name, "mean": float(col.mean()), "sd": float(col.std(ddof=1)),
                         "q2.5": float(lo), "q97.5": float(hi),
                         "rhat": float(self.diagnostics.rhat[j]),
                         "ess_bulk": float(self.diagnostics.ess_bulk[j])})
        return rows


def _weibull_fitter(x):
    from ..distfit import fit_family
    return fit_family(x, "Weibull", "MGE").params


def seed_for(*parts) -> int:
    """Stable 63-bit seed from arbitrary labels."""
    h = hashlib.sha256("|".join(map(str, parts)).encode()).digest()
    return int.from_bytes(h[:8], "little") >> 1


def fit_bglm(data, spec: GlmSpec, priors: Optional[ObjectivePriors] = None,
             config: ChainConfig = ChainConfig(), check_gradients: bool = True) -> BglmFit:
    """Fit ``spec`` to ``data`` (a CountryDataset or mapping of arrays) by HMC."""
    from .terms import _column

    y = _column(data, spec.response)
    if spec.family == "gamma" and np.any(y <= 0):
        raise SupportError("Gamma family requires a strictly positive response")
    if spec.link == "log" and np.any(y <= 0):
        raise SupportError("log link requires a positive response")
    design = build_design(data, spec.terms, fit_weibull=_weibull_fitter)
    spec = replace(spec, terms=design.terms)
    pre = irls(y, design.X, spec.family, spec.link)
    if priors is None:
        priors = ObjectivePriors.from_data(y, design.X, spec.family, spec.link, pre_fit=pre)
    post = GlmPosterior(y, design.X, spec.family, spec.link, priors)
    u0 = post.to_unconstrained(pre.coef, pre.dispersion)
    names = ["a_centred"] + [f"theta{j}" for j in range(post.p)] + ["log_dispersion"]
    target = post.target(u0, names)

    grad_err = 0.0
    if check_gradients:
        rng = np.random.default_rng(seed_for("gradcheck", config.seed))
        scale = _laplace_scale(target, u0)
        pts = u0 + 0.5 * scale * rng.standard_normal((20, len(u0)))
        pts = [p for p in pts if np.isfinite(target.log_density(p))]
        grad_err = check_gradient(target, np.array(pts)) if pts else 0.0

    raw = sample_hmc(target, config)
    natural = post.to_natural(raw.draws)
    disp = "sigma" if spec.family == "gaussian" else "shape"
    draws = PosteriorDraws(natural, raw.chains, tuple(["(Intercept)"] + design.columns + [disp]),
                           divergence_count=raw.divergence_count, step_sizes=raw.step_sizes,
                           tree_depths=raw.tree_depths, accept_stats=raw.accept_stats)
    ll = post.pointwise_loglik(raw.draws)
    draws.pointwise_loglik = ll
    return BglmFit(spec, design, y, draws, raw.draws, ll, priors, pre, grad_err)


def _laplace_scale(target: TargetDensity, u: np.ndarray) -> np.ndarray:
    d = len(u)
    out = np.ones(d)
    for j in range(d):
        h = 1e-4 * max(1.0, abs(u[j]))
        e = np.zeros(d)
        e[j] = h
        hjj = -(target(u + e)[1][j] - target(u - e)[1][j]) / (2 * h)
        if np.isfinite(hjj) and hjj > 0:
            out[j] = 1.0 / math.sqrt(hjj)
    return out


def fit_bayes_lm(y, x, priors: Optional[ObjectivePriors] = None,
                 config: ChainConfig = ChainConfig(), response: str = "y",
                 predictor: str = "x") -> BglmFit:
    """Gaussian simple linear regression ``y ~ x`` with intercept, slope and scale."""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if len(y) != len(x) or len(y) < 10:
        raise ValueError("y and x must have equal length >= 10")
    spec = GlmSpec("gaussian", "identity", response, (Term("raw", predictor),))
    return fit_bglm({response: y, predictor: x}, spec, priors, config)
