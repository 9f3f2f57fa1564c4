"""Convergence diagnostics: rank-normalised split R-hat and bulk/tail ESS."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from .sampler import ChainConfig, PosteriorDraws

RHAT_THRESHOLD = 1.01


@dataclass(frozen=True)
class ChainDiagnostics:
    rhat: np.ndarray
    ess_bulk: np.ndarray
    ess_tail: np.ndarray
    divergences: int
    names: tuple[str, ...] = ()
    degenerate: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    @property
    def healthy(self) -> bool:
        if self.divergences > 0 or np.any(self.degenerate):
            return False
        return bool(np.all(self.rhat <= RHAT_THRESHOLD))

    def flags(self) -> list[str]:
        out = []
        for i, name in enumerate(self.names or [f"x{i}" for i in range(len(self.rhat))]):
            if self.degenerate.size and self.degenerate[i]:
                out.append(f"{name}: zero-variance draws (ESS undefined)")
            elif self.rhat[i] > RHAT_THRESHOLD:
                out.append(f"{name}: R-hat {self.rhat[i]:.3f} > {RHAT_THRESHOLD}")
        if self.divergences:
            out.append(f"{self.divergences} divergent transitions")
        return out


def _split(x: np.ndarray) -> np.ndarray:
    """(chains, draws) -> (2*chains, draws//2); an odd middle draw is dropped."""
    n = x.shape[1] // 2
    return np.concatenate([x[:, :n], x[:, -n:]], axis=0)


def _rank_normalize(x: np.ndarray) -> np.ndarray:
    r = stats.rankdata(x, method="average").reshape(x.shape)
    return special.ndtri((r - 0.375) / (x.size + 0.25))


def _rhat_raw(x: np.ndarray) -> float:
    m, n = x.shape
    means = x.mean(axis=1)
    w = x.var(axis=1, ddof=1).mean()
    b = n * means.var(ddof=1)
    var_plus = (n - 1) / n * w + b / n
    return float(np.sqrt(var_plus / w))


def _autocov(x: np.ndarray) -> np.ndarray:
    n = x.shape[-1]
    size = 2 ** int(np.ceil(np.log2(2 * n)))
    xc = x - x.mean(axis=-1, keepdims=True)
    f = np.fft.rfft(xc, size, axis=-1)
    ac = np.fft.irfft(f * np.conjugate(f), size, axis=-1)[..., :n]
    return ac / n


def _ess_raw(x: np.ndarray) -> float:
    """Multi-chain ESS with Geyer's initial monotone sequence."""
    m, n = x.shape
    acov = _autocov(x)
    chain_var = acov[:, 0] * n / (n - 1)
    mean_var = chain_var.mean()
    var_plus = mean_var * (n - 1) / n
    if m > 1:
        var_plus += x.mean(axis=1).var(ddof=1)
    rho = np.zeros(n)
    rho[0] = 1.0
    rho_hat_even = 1.0
    rho_hat_odd = 1.0 - (mean_var - acov[:, 1].mean()) / var_plus
    rho[1] = rho_hat_odd
    t = 1
    while t < n - 3 and rho_hat_even + rho_hat_odd > 0:
        rho_hat_even = 1.0 - (mean_var - acov[:, t + 1].mean()) / var_plus
        rho_hat_odd = 1.0 - (mean_var - acov[:, t + 2].mean()) / var_plus
        if rho_hat_even + rho_hat_odd >= 0:
            rho[t + 1] = rho_hat_even
            rho[t + 2] = rho_hat_odd
        t += 2
    max_t = t - 2
    if rho_hat_even > 0:
        rho[max_t + 1] = rho_hat_even
    # enforce monotone decrease of paired sums
    t = 1
    while t <= max_t - 2:
        pair_prev = rho[t - 1] + rho[t]
        if rho[t + 1] + rho[t + 2] > pair_prev:
            rho[t + 1] = pair_prev / 2
            rho[t + 2] = pair_prev / 2
        t += 2
    tau = -1 + 2 * rho[: max_t + 1].sum() + rho[max_t + 1]
    tau = max(tau, 1.0 / np.log10(m * n))
    return float(m * n / tau)


def rhat(x: np.ndarray) -> float:
    """Max of bulk and folded rank-normalised split R-hat for one parameter (chains, draws)."""
    s = _split(x)
    bulk = _rhat_raw(_rank_normalize(s))
    folded = np.abs(s - np.median(s))
    tail = _rhat_raw(_rank_normalize(folded))
    return max(bulk, tail)


def ess_bulk(x: np.ndarray) -> float:
    return _ess_raw(_rank_normalize(_split(x)))


def ess_tail(x: np.ndarray) -> float:
    s = _split(x)
    out = []
    for q in (0.05, 0.95):
        ind = (s <= np.quantile(s, q)).astype(float)
        if ind.std() == 0:
            return float("nan")
        out.append(_ess_raw(ind))
    return min(out)


def diagnose(draws: PosteriorDraws, config: ChainConfig | None = None) -> ChainDiagnostics:
    """Per-parameter R-hat and ESS; constant parameters are marked degenerate."""
    chains = draws.chains if config is None else config.chains
    if chains < 2:
        raise ValueError("diagnostics need at least two chains")
    x = draws.draws.reshape(chains, -1, draws.dimension)
    d = draws.dimension
    r, eb, et = np.full(d, np.nan), np.full(d, np.nan), np.full(d, np.nan)
    degenerate = np.zeros(d, dtype=bool)
    for j in range(d):
        xj = x[:, :, j]
        if np.ptp(xj) == 0 or np.any(xj.var(axis=1) == 0):
            degenerate[j] = True
            continue
        r[j] = rhat(xj)
        eb[j] = min(ess_bulk(xj), xj.size)
        et[j] = min(ess_tail(xj), xj.size)
    return ChainDiagnostics(r, eb, et, draws.divergence_count, tuple(draws.names), degenerate)


def mcse_mean(x: np.ndarray) -> float:
    """Monte Carlo standard error of the mean of one parameter laid out (chains, draws)."""
    ess = _ess_raw(_split(x))
    return float(x.std(ddof=1) / np.sqrt(ess))
