"""No-U-turn Hamiltonian Monte Carlo with windowed warmup adaptation.

Trajectories are built by doubling with multinomial sampling and the
generalised U-turn criterion; during warmup the step size is tuned by dual
averaging and a diagonal inverse metric is estimated over doubling windows.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import AllDivergent, NonFiniteGradient

logger = logging.getLogger(__name__)

__all__ = ["TargetDensity", "ChainConfig", "PosteriorDraws", "sample_hmc", "check_gradient"]

MAX_DELTA_H = 1000.0


@dataclass(frozen=True)
class TargetDensity:
    """Unnormalised log density on R^d with its gradient.

    ``value_and_grad`` may be supplied to share work between the two
    callbacks; otherwise both are called separately.
    """

    dimension: int
    log_density: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    initial: Optional[np.ndarray] = None
    names: Optional[Sequence[str]] = None
    value_and_grad: Optional[Callable[[np.ndarray], tuple]] = None

    def __call__(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        if self.value_and_grad is not None:
            lp, g = self.value_and_grad(x)
        else:
            lp, g = self.log_density(x), self.gradient(x)
        return float(lp), np.asarray(g, dtype=float)


@dataclass(frozen=True)
class ChainConfig:
    chains: int = 4
    warmup: int = 1000
    keep: int = 1000
    target_accept: float = 0.8
    max_tree_depth: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.chains < 2:
            raise ValueError("chains must be >= 2")
        if self.warmup < 100 or self.keep < 100:
            raise ValueError("warmup and keep must both be >= 100")
        if not 0 < self.target_accept < 1:
            raise ValueError("target_accept must lie in (0, 1)")
        if self.max_tree_depth < 1:
            raise ValueError("max_tree_depth must be >= 1")

    def with_seed(self, seed: int) -> "ChainConfig":
        return ChainConfig(self.chains, self.warmup, self.keep, self.target_accept,
                           self.max_tree_depth, int(seed))


@dataclass
class PosteriorDraws:
    draws: np.ndarray  # (chains * keep, dim), chain-major
    chains: int
    names: tuple[str, ...] = ()
    pointwise_loglik: Optional[np.ndarray] = None  # (chains * keep, n_obs)
    divergence_count: int = 0
    step_sizes: np.ndarray = field(default_factory=lambda: np.zeros(0))
    tree_depths: Optional[np.ndarray] = None
    accept_stats: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.draws.shape[0] % self.chains:
            raise ValueError("draw count is not a multiple of the chain count")
        if self.pointwise_loglik is not None and self.pointwise_loglik.shape[0] != self.draws.shape[0]:
            raise ValueError("pointwise log-likelihood rows do not match draws")
        if not np.all(np.isfinite(self.draws)):
            raise ValueError("non-finite posterior draws")

    @property
    def keep(self) -> int:
        return self.draws.shape[0] // self.chains

    @property
    def dimension(self) -> int:
        return self.draws.shape[1]

    def by_chain(self) -> np.ndarray:
        """Draws reshaped to (chains, keep, dim)."""
        return self.draws.reshape(self.chains, self.keep, -1)

    def mean(self) -> np.ndarray:
        return self.draws.mean(axis=0)

    def column(self, name: str) -> np.ndarray:
        return self.draws[:, list(self.names).index(name)]


def check_gradient(target: TargetDensity, points: np.ndarray, step: float = 1e-6,
                   rtol: float = 1e-4) -> float:
    """Largest relative discrepancy between the analytic and central-difference gradient.

    The error at a point is ``max|g - fd| / max(max|fd|, 1)``, so coordinates with
    large cancelling terms are judged against the gradient's overall scale.
    Raises ``ValueError`` when it exceeds ``rtol``.
    """
    worst = 0.0
    for x in np.atleast_2d(points):
        _, g = target(x)
        fd = np.empty(len(x))
        for j in range(len(x)):
            e = np.zeros_like(x)
            e[j] = step * max(1.0, abs(x[j]))
            fd[j] = (target.log_density(x + e) - target.log_density(x - e)) / (2 * e[j])
        worst = max(worst, float(np.abs(g - fd).max() / max(np.abs(fd).max(), 1.0)))
    if worst > rtol:
        raise ValueError(f"analytic gradient disagrees with finite differences (rel err {worst:.2e})")
    return worst


class _State:
    __slots__ = ("q", "p", "lp", "grad")

    def __init__(self, q, p, lp, grad):
        self.q, self.p, self.lp, self.grad = q, p, lp, grad

    def copy(self):
        return _State(self.q, self.p, self.lp, self.grad)


class _DualAveraging:
    def __init__(self, delta, gamma=0.05, kappa=0.75, t0=10.0):
        self.delta, self.gamma, self.kappa, self.t0 = delta, gamma, kappa, t0
        self.restart(1.0)

    def restart(self, eps):
        self.mu = math.log(10 * eps)
        self.counter = 0
        self.s_bar = 0.0
        self.x_bar = 0.0

    def learn(self, accept):
        self.counter += 1
        accept = min(1.0, accept)
        eta = 1.0 / (self.counter + self.t0)
        self.s_bar = (1 - eta) * self.s_bar + eta * (self.delta - accept)
        x = self.mu - self.s_bar * math.sqrt(self.counter) / self.gamma
        w = self.counter ** -self.kappa
        self.x_bar = (1 - w) * self.x_bar + w * x
        return math.exp(x)

    def final(self):
        return math.exp(self.x_bar)


def _windows(warmup: int) -> tuple[int, int, int]:
    init_buffer, term_buffer, base = 75, 50, 25
    if warmup < init_buffer + term_buffer + base:
        init_buffer = int(0.15 * warmup)
        term_buffer = int(0.1 * warmup)
        base = warmup - init_buffer - term_buffer
    return init_buffer, term_buffer, base


class _Chain:
    def __init__(self, target: TargetDensity, config: ChainConfig, rng: np.random.Generator):
        self.target = target
        self.config = config
        self.rng = rng
        self.inv_metric = np.ones(target.dimension)
        self.eps = 1.0

    # -- dynamics -------------------------------------------------------
    def _eval(self, q):
        lp, g = self.target(q)
        if not np.all(np.isfinite(g)) and np.isfinite(lp):
            raise NonFiniteGradient("gradient is not finite", point=q.copy())
        return lp, g

    def _hamiltonian(self, z):
        if not np.isfinite(z.lp):
            return math.inf
        return -z.lp + 0.5 * float(np.dot(z.p, self.inv_metric * z.p))

    def _leapfrog(self, z, eps):
        p = z.p + 0.5 * eps * z.grad
        q = z.q + eps * self.inv_metric * p
        try:
            lp, g = self.target(q)
        except (FloatingPointError, OverflowError, ValueError):
            lp, g = -math.inf, np.zeros_like(q)
        if not (np.isfinite(lp) and np.all(np.isfinite(g))):
            return _State(q, p, -math.inf, np.zeros_like(q))
        return _State(q, p + 0.5 * eps * g, lp, g)

    def _momentum(self):
        return self.rng.standard_normal(self.target.dimension) / np.sqrt(self.inv_metric)

    def init_stepsize(self, z):
        """Double or halve the step until one leapfrog's acceptance crosses 0.8."""
        z = z.copy()
        z.p = self._momentum()
        h0 = self._hamiltonian(z)
        eps = self.eps
        z1 = self._leapfrog(z, eps)
        delta = h0 - self._hamiltonian(z1)
        direction = 1 if delta > math.log(0.8) else -1
        for _ in range(100):
            z.p = self._momentum()
            h0 = self._hamiltonian(z)
            z1 = self._leapfrog(z, eps)
            delta = h0 - self._hamiltonian(z1)
            if direction == 1 and not delta > math.log(0.8):
                break
            if direction == -1 and not delta < math.log(0.8):
                break
            eps = eps * 2.0 if direction == 1 else eps * 0.5
            if eps > 1e7 or eps < 1e-12:
                break
        self.eps = eps

    # -- one NUTS transition -------------------------------------------
    def _criterion(self, p_sharp_minus, p_sharp_plus, rho):
        return np.dot(p_sharp_plus, rho) > 0 and np.dot(p_sharp_minus, rho) > 0

    def _build_tree(self, depth, z, eps, h0, stats):
        """Returns (valid, z_end, z_propose, p_sharp_beg, p_sharp_end, rho, p_beg, p_end, log_w)."""
        if depth == 0:
            z1 = self._leapfrog(z, eps)
            stats["n_leapfrog"] += 1
            h = self._hamiltonian(z1)
            if math.isnan(h):
                h = math.inf
            if h - h0 > MAX_DELTA_H:
                stats["divergent"] = True
            log_w = h0 - h
            stats["sum_metro"] += 1.0 if log_w > 0 else math.exp(log_w)
            ps = self.inv_metric * z1.p
            return (not stats["divergent"], z1, z1, ps, ps, z1.p.copy(), z1.p, z1.p, log_w)

        ok, z, zp_init, ps_beg, ps_init_end, rho_init, p_beg, p_init_end, lw_init = \
            self._build_tree(depth - 1, z, eps, h0, stats)
        if not ok:
            return (False, z, zp_init, ps_beg, ps_init_end, rho_init, p_beg, p_init_end, lw_init)
        ok, z, zp_final, ps_final_beg, ps_end, rho_final, p_final_beg, p_end, lw_final = \
            self._build_tree(depth - 1, z, eps, h0, stats)
        if not ok:
            return (False, z, zp_final, ps_beg, ps_end, rho_final, p_beg, p_end, lw_final)

        lw_sub = np.logaddexp(lw_init, lw_final)
        if lw_final > lw_sub or self.rng.uniform() < math.exp(lw_final - lw_sub):
            z_propose = zp_final
        else:
            z_propose = zp_init
        rho = rho_init + rho_final
        persist = (self._criterion(ps_beg, ps_end, rho)
                   and self._criterion(ps_beg, ps_final_beg, rho_init + p_final_beg)
                   and self._criterion(ps_init_end, ps_end, rho_final + p_init_end))
        return (persist, z, z_propose, ps_beg, ps_end, rho, p_beg, p_end, lw_sub)

    def transition(self, z0):
        z = z0.copy()
        z.p = self._momentum()
        h0 = self._hamiltonian(z)
        stats = {"n_leapfrog": 0, "sum_metro": 0.0, "divergent": False}

        z_fwd = z_bck = z
        z_sample = z
        p_fwd_fwd = p_fwd_bck = p_bck_fwd = p_bck_bck = z.p
        ps = self.inv_metric * z.p
        ps_fwd_fwd = ps_fwd_bck = ps_bck_fwd = ps_bck_bck = ps
        rho = z.p.copy()
        log_w = 0.0
        depth = 0
        while depth < self.config.max_tree_depth:
            if self.rng.uniform() > 0.5:
                rho_bck = rho
                p_bck_fwd, ps_bck_fwd = p_fwd_fwd, ps_fwd_fwd
                (ok, z_fwd, z_prop, ps_fwd_bck, ps_fwd_fwd, rho_fwd,
                 p_fwd_bck, p_fwd_fwd, lw_sub) = self._build_tree(depth, z_fwd, self.eps, h0, stats)
            else:
                rho_fwd = rho
                p_fwd_bck, ps_fwd_bck = p_bck_bck, ps_bck_bck
                (ok, z_bck, z_prop, ps_bck_fwd, ps_bck_bck, rho_bck,
                 p_bck_fwd, p_bck_bck, lw_sub) = self._build_tree(depth, z_bck, -self.eps, h0, stats)
            if not ok:
                break
            depth += 1
            if lw_sub > log_w or self.rng.uniform() < math.exp(lw_sub - log_w):
                z_sample = z_prop
            log_w = float(np.logaddexp(log_w, lw_sub))
            rho = rho_bck + rho_fwd
            persist = (self._criterion(ps_bck_bck, ps_fwd_fwd, rho)
                       and self._criterion(ps_bck_bck, ps_fwd_bck, rho_bck + p_fwd_bck)
                       and self._criterion(ps_bck_fwd, ps_fwd_fwd, rho_fwd + p_bck_fwd))
            if not persist:
                break
        accept = stats["sum_metro"] / max(stats["n_leapfrog"], 1)
        return z_sample, accept, depth, stats["divergent"]

    # -- driver ---------------------------------------------------------
    def _initial_metric(self, q, lp, g):
        """Diagonal of the negative Hessian by central differences of the gradient."""
        d = len(q)
        diag = np.empty(d)
        for j in range(d):
            h = 1e-4 * max(1.0, abs(q[j]))
            e = np.zeros(d)
            e[j] = h
            try:
                _, gp = self.target(q + e)
                _, gm = self.target(q - e)
            except (FloatingPointError, OverflowError, ValueError):
                return
            diag[j] = -(gp[j] - gm[j]) / (2 * h)
        if np.all(np.isfinite(diag)) and np.all(diag > 0):
            self.inv_metric = 1.0 / diag

    def run(self, q0):
        cfg = self.config
        lp, g = self._eval(q0)
        if not np.isfinite(lp):
            raise ValueError("log density is not finite at the initial point")
        z = _State(q0.copy(), np.zeros_like(q0), lp, g)
        self._initial_metric(z.q, lp, g)
        self.init_stepsize(z)
        da = _DualAveraging(cfg.target_accept)
        da.restart(self.eps)

        init_buffer, term_buffer, base = _windows(cfg.warmup)
        window_size = base
        window_end = init_buffer + window_size
        window_draws = []
        for it in range(cfg.warmup):
            z, accept, _, _ = self.transition(z)
            self.eps = da.learn(accept)
            if init_buffer <= it < cfg.warmup - term_buffer:
                window_draws.append(z.q)
                if it + 1 == window_end:
                    w = np.array(window_draws)
                    n = len(w)
                    var = w.var(axis=0, ddof=1)
                    # shrink toward a scale-relative floor so coordinates with
                    # very small posterior variance keep their own scale
                    floor = 1e-3 * self.inv_metric
                    self.inv_metric = (n / (n + 5.0)) * var + floor * (5.0 / (n + 5.0))
                    window_draws = []
                    self.init_stepsize(z)
                    da.restart(self.eps)
                    window_size *= 2
                    window_end = it + 1 + window_size
                    if window_end + 2 * window_size > cfg.warmup - term_buffer:
                        window_end = cfg.warmup - term_buffer
        self.eps = da.final()
        if not (np.isfinite(self.eps) and self.eps > 0):
            raise AllDivergent("step-size adaptation collapsed")

        draws = np.empty((cfg.keep, len(q0)))
        depths = np.empty(cfg.keep, dtype=int)
        accepts = np.empty(cfg.keep)
        divergent = 0
        for i in range(cfg.keep):
            z, accepts[i], depths[i], div = self.transition(z)
            divergent += div
            draws[i] = z.q
        if divergent == cfg.keep:
            raise AllDivergent("every post-warmup transition diverged")
        return draws, divergent, depths, accepts


def _chain_rngs(seed: int, chains: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(int(seed) & (2**64 - 1)).spawn(chains)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


def sample_hmc(target: TargetDensity, config: ChainConfig = ChainConfig()) -> PosteriorDraws:
    """Draw ``config.chains * config.keep`` posterior samples from ``target``.

    Each chain starts from ``target.initial`` (zeros when absent) plus a
    small uniform jitter from its own counter-based RNG stream, so results
    depend only on ``config.seed`` and never on scheduling.
    """
    d = target.dimension
    base = np.zeros(d) if target.initial is None else np.asarray(target.initial, dtype=float)
    out, depths, accepts, eps = [], [], [], []
    divergent = 0
    for rng in _chain_rngs(config.seed, config.chains):
        chain = _Chain(target, config, rng)
        q0 = base + rng.uniform(-0.1, 0.1, d) * np.maximum(np.abs(base), 1.0) * 0.01
        with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
            draws, div, dep, acc = chain.run(q0)
        out.append(draws)
        depths.append(dep)
        accepts.append(acc)
        eps.append(chain.eps)
        divergent += div
    if divergent:
        logger.warning("%d divergent transitions after warmup", divergent)
    names = tuple(target.names) if target.names is not None else tuple(f"x{i}" for i in range(d))
    return PosteriorDraws(np.concatenate(out), config.chains, names,
                          divergence_count=divergent, step_sizes=np.array(eps),
                          tree_depths=np.concatenate(depths), accept_stats=np.concatenate(accepts))
