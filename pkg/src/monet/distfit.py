"""Parametric distribution fitting and BIC-based family selection.

Two estimators are available: maximum likelihood (``MLE``) and maximum
goodness-of-fit (``MGE``), the latter minimising the Cramer-von Mises distance
between the empirical and fitted CDFs. Whatever the estimator, ``log_lik`` and
``bic`` are evaluated at the returned parameters.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .errors import NoFeasibleFamily, OptimFail, SupportError

logger = logging.getLogger(__name__)

__all__ = ["DistFamily", "FitMethod", "FitResult", "DistSelection",
           "fit_family", "select_distribution", "log_likelihood", "cdf", "ppf"]


class DistFamily(str, enum.Enum):
    NORMAL = "Normal"
    LOGNORMAL = "LogNormal"
    GAMMA = "Gamma"
    WEIBULL = "Weibull"

    @classmethod
    def parse(cls, text: str) -> "DistFamily":
        key = text.replace("-", "").replace("_", "").lower()
        for f in cls:
            if f.value.lower() == key:
                return f
        raise ValueError(f"unknown distribution family {text!r}")


class FitMethod(str, enum.Enum):
    MLE = "MLE"
    MGE = "MGE"


PARAM_NAMES = {
    DistFamily.NORMAL: ("location", "scale"),
    DistFamily.LOGNORMAL: ("log-location", "log-scale"),
    DistFamily.GAMMA: ("shape", "rate"),
    DistFamily.WEIBULL: ("shape", "scale"),
}


@dataclass(frozen=True)
class FitResult:
    family: DistFamily
    param1: float
    param2: float
    log_lik: float
    bic: float
    n: int
    method: FitMethod

    @property
    def params(self) -> tuple[float, float]:
        return self.param1, self.param2

    def cdf(self, x):
        return cdf(self.family, self.params, x)


@dataclass
class DistSelection:
    """Fits ordered by ascending BIC, plus the families skipped and why."""

    fits: list[FitResult]
    skipped: dict[DistFamily, str] = field(default_factory=dict)

    def __iter__(self):
        return iter(self.fits)

    def __getitem__(self, i):
        return self.fits[i]

    def __len__(self):
        return len(self.fits)

    @property
    def best(self) -> FitResult:
        return self.fits[0]


def _check_params(family, p1, p2):
    if family is DistFamily.NORMAL or family is DistFamily.LOGNORMAL:
        return p2 > 0
    return p1 > 0 and p2 > 0


def log_likelihood(family: DistFamily, params, x) -> float:
    return float(np.sum(logpdf(family, params, x)))


def logpdf(family: DistFamily, params, x) -> np.ndarray:
    p1, p2 = params
    x = np.asarray(x, dtype=float)
    if family is DistFamily.NORMAL:
        z = (x - p1) / p2
        return -0.5 * z * z - math.log(p2) - 0.5 * math.log(2 * math.pi)
    if family is DistFamily.LOGNORMAL:
        lx = np.log(x)
        z = (lx - p1) / p2
        return -0.5 * z * z - math.log(p2) - 0.5 * math.log(2 * math.pi) - lx
    if family is DistFamily.GAMMA:
        return p1 * math.log(p2) - special.gammaln(p1) + (p1 - 1) * np.log(x) - p2 * x
    if family is DistFamily.WEIBULL:
        z = x / p2
        return math.log(p1 / p2) + (p1 - 1) * np.log(z) - z ** p1
    raise ValueError(family)


def cdf(family: DistFamily, params, x) -> np.ndarray:
    p1, p2 = params
    x = np.asarray(x, dtype=float)
    if family is DistFamily.NORMAL:
        return special.ndtr((x - p1) / p2)
    pos = np.maximum(x, 0.0)
    if family is DistFamily.LOGNORMAL:
        with np.errstate(divide="ignore"):
            return np.where(x > 0, special.ndtr((np.log(pos) - p1) / p2), 0.0)
    if family is DistFamily.GAMMA:
        return special.gammainc(p1, p2 * pos)
    if family is DistFamily.WEIBULL:
        return -np.expm1(-((pos / p2) ** p1))
    raise ValueError(family)


def ppf(family: DistFamily, params, q) -> np.ndarray:
    p1, p2 = params
    q = np.asarray(q, dtype=float)
    if family is DistFamily.NORMAL:
        return p1 + p2 * special.ndtri(q)
    if family is DistFamily.LOGNORMAL:
        return np.exp(p1 + p2 * special.ndtri(q))
    if family is DistFamily.GAMMA:
        return special.gammaincinv(p1, q) / p2
    if family is DistFamily.WEIBULL:
        return p2 * (-np.log1p(-q)) ** (1.0 / p1)
    raise ValueError(family)


def _check_support(x: np.ndarray, family: DistFamily):
    if family is not DistFamily.NORMAL and np.any(x <= 0):
        raise SupportError(f"{family.value} requires strictly positive values")


def _moment_start(family: DistFamily, x: np.ndarray) -> tuple[float, float]:
    m, v = x.mean(), x.var()
    if family is DistFamily.NORMAL:
        return m, math.sqrt(v)
    if family is DistFamily.LOGNORMAL:
        lx = np.log(x)
        return lx.mean(), lx.std()
    if family is DistFamily.GAMMA:
        return m * m / v, m / v
    # Weibull: shape from the coefficient of variation (approximation CV^-1.086)
    k = (math.sqrt(v) / m) ** -1.086
    return k, m / math.gamma(1 + 1 / k)


def _to_free(family, params):
    p1, p2 = params
    if family is DistFamily.NORMAL or family is DistFamily.LOGNORMAL:
        return np.array([p1, math.log(p2)])
    return np.log([p1, p2])


def _from_free(family, z):
    if family is DistFamily.NORMAL or family is DistFamily.LOGNORMAL:
        return float(z[0]), float(math.exp(z[1]))
    return float(math.exp(z[0])), float(math.exp(z[1]))


def _nelder_mead(objective, family, start):
    opts = {"xatol": 1e-8, "fatol": 1e-8, "maxiter": 4000, "maxfev": 8000}
    res = optimize.minimize(objective, _to_free(family, start), method="Nelder-Mead", options=opts)
    if not res.success or not np.isfinite(res.fun):
        return None
    # polish: a second simplex from the optimum removes premature-collapse artefacts
    res2 = optimize.minimize(objective, res.x, method="Nelder-Mead", options=opts)
    best = res2 if res2.fun <= res.fun else res
    return _from_free(family, best.x)


def _mle(family: DistFamily, x: np.ndarray) -> tuple[float, float]:
    if family is DistFamily.NORMAL:
        return float(x.mean()), float(x.std())
    if family is DistFamily.LOGNORMAL:
        lx = np.log(x)
        return float(lx.mean()), float(lx.std())

    def nll(z):
        with np.errstate(over="ignore", invalid="ignore"):
            v = -log_likelihood(family, _from_free(family, z), x)
        return v if np.isfinite(v) else np.inf

    start = _moment_start(family, x)
    out = _nelder_mead(nll, family, start)
    if out is None:
        out = _nelder_mead(nll, family, _moment_start(family, x))
    if out is None:
        raise OptimFail(f"{family.value} likelihood maximisation did not converge")
    return out


def cramer_von_mises(family: DistFamily, params, x_sorted: np.ndarray) -> float:
    n = len(x_sorted)
    u = cdf(family, params, x_sorted)
    i = np.arange(1, n + 1)
    return float(1.0 / (12 * n) + np.sum((u - (2 * i - 1) / (2.0 * n)) ** 2))


def _mge(family: DistFamily, x: np.ndarray) -> tuple[float, float]:
    xs = np.sort(x)

    def obj(z):
        with np.errstate(over="ignore", invalid="ignore"):
            v = cramer_von_mises(family, _from_free(family, z), xs)
        return v if np.isfinite(v) else np.inf

    out = _nelder_mead(obj, family, _mle(family, x))
    if out is None:
        out = _nelder_mead(obj, family, _moment_start(family, x))
    if out is None:
        raise OptimFail(f"{family.value} Cramer-von Mises minimisation did not converge")
    return out


def fit_family(sample, family: DistFamily | str, method: FitMethod | str = FitMethod.MGE) -> FitResult:
    """Fit one two-parameter family to ``sample``.

    Parameters are Normal (location, scale), LogNormal (log-location,
    log-scale), Gamma (shape, rate) and Weibull (shape, scale).
    """
    family = DistFamily.parse(family) if isinstance(family, str) and not isinstance(family, DistFamily) else family
    method = FitMethod(method)
    x = np.asarray(sample, dtype=float).ravel()
    if len(x) < 8:
        raise ValueError("fit_family needs at least 8 observations")
    if not np.all(np.isfinite(x)):
        raise ValueError("sample contains non-finite values")
    _check_support(x, family)
    p1, p2 = _mle(family, x) if method is FitMethod.MLE else _mge(family, x)
    if not _check_params(family, p1, p2):
        raise OptimFail(f"{family.value} fit returned invalid parameters ({p1}, {p2})")
    ll = log_likelihood(family, (p1, p2), x)
    n = len(x)
    return FitResult(family, p1, p2, ll, 2 * math.log(n) - 2 * ll, n, method)


def select_distribution(sample, families=tuple(DistFamily),
                        method: FitMethod | str = FitMethod.MGE) -> DistSelection:
    """Fit every feasible family and order the results by BIC (ties: family name)."""
    fits, skipped = [], {}
    for fam in families:
        fam = DistFamily.parse(fam) if isinstance(fam, str) and not isinstance(fam, DistFamily) else fam
        try:
            fits.append(fit_family(sample, fam, method))
        except SupportError as exc:
            skipped[fam] = str(exc)
            logger.info("skipping %s: %s", fam.value, exc)
        except OptimFail as exc:
            skipped[fam] = str(exc)
            logger.warning("skipping %s: %s", fam.value, exc)
    if not fits:
        raise NoFeasibleFamily("no candidate family could be fitted to the sample")
    fits.sort(key=lambda f: (f.bic, f.family.value))
    return DistSelection(fits, skipped)
