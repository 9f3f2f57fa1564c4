"""The four candidate regressors.

Each model exposes ``fit(X, y)`` and ``predict(X)`` and is deterministic given
``seed``.  Hyperparameters are constructor keywords so a grid point is just a
dict of keyword arguments.
"""
from __future__ import annotations

import enum
import math
from typing import Optional

import numpy as np
from scipy import stats
from sklearn.ensemble import RandomForestRegressor
from sklearn.svm import SVR


class ModelKind(str, enum.Enum):
    QRF = "QRF"
    BRNN = "BRNN"
    SVM_RADIAL = "SVMRadial"
    CFOREST = "CForest"

    @classmethod
    def parse(cls, text) -> "ModelKind":
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower()
        for k in cls:
            if k.value.lower() == key or k.name.lower() == key:
                return k
        if key in ("svm", "svmradial", "svr"):
            return cls.SVM_RADIAL
        raise ValueError(f"unknown model kind {text!r}")


def _as_2d(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return X[:, None] if X.ndim == 1 else X


class _Standardiser:
    """Column standardisation; zero-variance columns map to zero."""

    def __init__(self, X):
        self.mean = X.mean(axis=0)
        sd = X.std(axis=0)
        self.sd = np.where(sd > 0, sd, 1.0)
        self.constant = sd == 0

    def __call__(self, X):
        Z = (X - self.mean) / self.sd
        Z[:, self.constant] = 0.0
        return Z


class _ConstantMixin:
    _constant: Optional[float] = None

    def _check_constant(self, y) -> bool:
        if np.ptp(y) == 0:
            self._constant = float(y[0])
            return True
        self._constant = None
        return False


# ---------------------------------------------------------------------------
# quantile regression forest

class QuantileForest(_ConstantMixin):
    """Random forest that keeps the training responses in every leaf.

    Predictions are weighted quantiles of the training responses, weighting
    each by its share of the leaves it shares with the query point.
    """

    def __init__(self, n_trees: int = 500, mtry: Optional[int] = None, min_node_size: int = 5,
                 quantile: float = 0.5, seed: int = 0):
        self.n_trees = n_trees
        self.mtry = mtry
        self.min_node_size = min_node_size
        self.quantile = quantile
        self.seed = seed

    def fit(self, X, y):
        X = _as_2d(X)
        y = np.asarray(y, dtype=float)
        if self._check_constant(y):
            return self
        self.forest_ = RandomForestRegressor(
            n_estimators=self.n_trees, max_features=self.mtry or X.shape[1],
            min_samples_leaf=self.min_node_size, bootstrap=True,
            random_state=self.seed % 2**32)
        self.forest_.fit(X, y)
        self.order_ = np.argsort(y, kind="stable")
        self.y_sorted_ = y[self.order_]
        self.train_leaves_ = self.forest_.apply(X)[self.order_]  # (n, T), sorted by y
        return self

    def weights(self, X) -> np.ndarray:
        """(m, n) weights over training responses (sorted order); rows sum to 1."""
        leaves = self.forest_.apply(_as_2d(X))
        m, T = leaves.shape
        n = len(self.y_sorted_)
        W = np.zeros((m, n))
        for t0 in range(0, T, 50):
            tl = self.train_leaves_[None, :, t0:t0 + 50]
            same = leaves[:, None, t0:t0 + 50] == tl  # (m, n, chunk)
            size = same.sum(axis=1, keepdims=True)
            W += (same / size).sum(axis=2)
        return W / T

    def predict_quantiles(self, X, quantiles) -> np.ndarray:
        X = _as_2d(X)
        q = np.atleast_1d(np.asarray(quantiles, dtype=float))
        if self._constant is not None:
            return np.full((len(X), len(q)), self._constant)
        cw = np.cumsum(self.weights(X), axis=1)
        cw /= cw[:, -1:]
        out = np.empty((len(X), len(q)))
        for j, a in enumerate(q):
            idx = (cw < a - 1e-12).sum(axis=1)
            out[:, j] = self.y_sorted_[np.minimum(idx, len(self.y_sorted_) - 1)]
        return out

    def predict(self, X) -> np.ndarray:
        return self.predict_quantiles(X, [self.quantile])[:, 0]


# ---------------------------------------------------------------------------
# Bayesian-regularised neural network

class BayesRegNet(_ConstantMixin):
    """One hidden tanh layer trained by Levenberg-Marquardt on
    beta*E_D + alpha*E_W, with alpha and beta re-estimated from the evidence
    after every accepted step (MacKay's updates).
    """

    def __init__(self, neurons: int = 2, epochs: int = 1000, mu: float = 0.005,
                 mu_max: float = 1e10, tol: float = 1e-10, seed: int = 0):
        self.neurons = neurons
        self.epochs = epochs
        self.mu = mu
        self.mu_max = mu_max
        self.tol = tol
        self.seed = seed

    # scaling to [-1, 1] as in the usual implementations
    @staticmethod
    def _range_scaler(a):
        lo, hi = a.min(axis=0), a.max(axis=0)
        span = np.where(hi > lo, hi - lo, 1.0)
        return lo, span

    def _unpack(self, theta):
        s, p = self.neurons, self.p_
        W1 = theta[:s * p].reshape(s, p)
        b1 = theta[s * p:s * p + s]
        w2 = theta[s * p + s:s * p + 2 * s]
        b2 = theta[-1]
        return W1, b1, w2, b2

    def _forward(self, theta, Z):
        W1, b1, w2, b2 = self._unpack(theta)
        H = np.tanh(Z @ W1.T + b1)
        return H, H @ w2 + b2

    def _jacobian(self, theta, Z, H):
        _, _, w2, _ = self._unpack(theta)
        dH = (1 - H * H) * w2  # (n, s)
        n = len(Z)
        J_W1 = (dH[:, :, None] * Z[:, None, :]).reshape(n, -1)
        return np.column_stack([J_W1, dH, H, np.ones(n)])

    def fit(self, X, y):
        X = _as_2d(X)
        y = np.asarray(y, dtype=float)
        if self._check_constant(y):
            return self
        self.p_ = X.shape[1]
        self.x_lo_, self.x_span_ = self._range_scaler(X)
        self.y_lo_, self.y_span_ = self._range_scaler(y)
        Z = 2 * (X - self.x_lo_) / self.x_span_ - 1
        t = 2 * (y - self.y_lo_) / self.y_span_ - 1
        n = len(t)
        nw = self.neurons * (self.p_ + 2) + 1
        rng = np.random.default_rng(self.seed)
        theta = rng.uniform(-0.5, 0.5, nw)
        alpha, beta, mu = 0.01, 1.0, self.mu
        H, out = self._forward(theta, Z)
        e = t - out
        ed, ew = float(e @ e), float(theta @ theta)
        F = beta * ed + alpha * ew
        self.trace_ = []  # (objective before, objective after) per accepted step
        self.gamma_ = float(nw)
        for _ in range(self.epochs):
            J = self._jacobian(theta, Z, H)
            JtJ = J.T @ J
            g = -2 * beta * (J.T @ e) + 2 * alpha * theta
            accepted = False
            while mu <= self.mu_max:
                A = 2 * beta * JtJ + (2 * alpha + mu) * np.eye(nw)
                step = np.linalg.solve(A, -g)
                cand = theta + step
                Hc, oc = self._forward(cand, Z)
                ec = t - oc
                Fc = beta * float(ec @ ec) + alpha * float(cand @ cand)
                if Fc <= F:
                    accepted = True
                    break
                mu *= 10
            if not accepted:
                break
            self.trace_.append((F, Fc))
            improvement = F - Fc
            theta, H, e = cand, Hc, ec
            mu = max(mu / 10, 1e-20)
            ed, ew = float(e @ e), float(theta @ theta)
            # evidence updates for the hyperparameters
            J = self._jacobian(theta, Z, H)
            Hess = 2 * beta * J.T @ J + 2 * alpha * np.eye(nw)
            try:
                gamma = nw - 2 * alpha * np.trace(np.linalg.inv(Hess))
            except np.linalg.LinAlgError:
                gamma = self.gamma_
            gamma = min(max(gamma, 1e-8), n - 1e-8)
            alpha = gamma / (2 * ew) if ew > 0 else alpha
            beta = (n - gamma) / (2 * ed) if ed > 0 else beta
            self.gamma_ = float(gamma)
            F = beta * ed + alpha * ew
            if improvement <= self.tol * max(1.0, abs(Fc)) or np.linalg.norm(g) < 1e-10:
                break
        self.theta_ = theta
        self.alpha_, self.beta_ = alpha, beta
        return self

    def predict(self, X) -> np.ndarray:
        X = _as_2d(X)
        if self._constant is not None:
            return np.full(len(X), self._constant)
        Z = 2 * (X - self.x_lo_) / self.x_span_ - 1
        _, out = self._forward(self.theta_, Z)
        return self.y_lo_ + (out + 1) * self.y_span_ / 2


# ---------------------------------------------------------------------------
# radial-kernel support vector regression

def median_heuristic_sigma(Z: np.ndarray) -> float:
    d2 = np.sum((Z[:, None, :] - Z[None, :, :]) ** 2, axis=-1)
    iu = np.triu_indices(len(Z), 1)
    med = float(np.median(d2[iu])) if len(iu[0]) else 1.0
    return math.sqrt(med / 2) if med > 0 else 1.0


def rbf_kernel(A, B, sigma: float) -> np.ndarray:
    d2 = np.sum((A[:, None, :] - B[None, :, :]) ** 2, axis=-1)
    return np.exp(-d2 / (2 * sigma * sigma))


class RadialSvm(_ConstantMixin):
    """epsilon-SVR with an RBF kernel on standardised features and response.

    ``width`` multiplies the median-heuristic kernel width (0.5, 1 or 2 in the
    default grid).
    """

    def __init__(self, C: float = 1.0, width: float = 1.0, epsilon: float = 0.1, seed: int = 0):
        self.C = C
        self.width = width
        self.epsilon = epsilon
        self.seed = seed

    def fit(self, X, y):
        X = _as_2d(X)
        y = np.asarray(y, dtype=float)
        if self._check_constant(y):
            return self
        self.scaler_ = _Standardiser(X)
        Z = self.scaler_(X)
        self.y_mean_, self.y_sd_ = float(y.mean()), float(y.std())
        self.sigma_ = median_heuristic_sigma(Z) * self.width
        self.svr_ = SVR(kernel="rbf", C=self.C, epsilon=self.epsilon,
                        gamma=1.0 / (2 * self.sigma_ ** 2), tol=1e-6)
        self.svr_.fit(Z, (y - self.y_mean_) / self.y_sd_)
        return self

    def predict(self, X) -> np.ndarray:
        X = _as_2d(X)
        if self._constant is not None:
            return np.full(len(X), self._constant)
        return self.y_mean_ + self.y_sd_ * self.svr_.predict(self.scaler_(X))


# ---------------------------------------------------------------------------
# conditional-inference forest

def _scores(x) -> np.ndarray:
    """Rank scores and centred squared rank scores, (n, 2).

    The squared term lets the test see U-shaped dependence; both depend on
    ``x`` only through its ranks.
    """
    r = stats.rankdata(x)
    c = r - (len(r) + 1) / 2.0
    return np.column_stack([r, c * c])


def _quadratic_statistic(G, H):
    """Strasser-Weber standardised quadratic form for linear statistics
    T = G' h over every column of H (permutations of the responses).

    Returns (statistics, df).
    """
    n = len(G)
    hbar = H.mean(axis=0)
    vh = np.mean((H - hbar) ** 2, axis=0)
    gs = G.sum(axis=0)
    mu = np.outer(gs, hbar)  # (q, k)
    V = n / (n - 1) * (G.T @ G - np.outer(gs, gs) / n)
    pinv = np.linalg.pinv(V, rcond=1e-10, hermitian=True)
    rank = int(np.linalg.matrix_rank(V, tol=1e-10 * max(1.0, np.abs(V).max()), hermitian=True))
    T = G.T @ H - mu
    stat = np.einsum("ik,ij,jk->k", T, pinv, T) / vh
    return stat, rank


def linear_statistic_pvalue(x, y) -> float:
    """Asymptotic chi-square p-value of the permutation test of independence
    between ``x`` (through rank scores) and ``y``.
    """
    y = np.asarray(y, dtype=float)
    if len(y) < 3 or np.ptp(y) == 0 or np.ptp(np.asarray(x)) == 0:
        return 1.0
    stat, df = _quadratic_statistic(_scores(x), y[:, None])
    if df == 0:
        return 1.0
    return float(stats.chi2.sf(stat[0], df))


def exact_permutation_pvalue(x, y) -> float:
    """Exact permutation p-value of the same statistic, enumerating every
    ordering of ``y`` (small samples only).
    """
    import itertools
    y = np.asarray(y, dtype=float)
    if len(y) > 9:
        raise ValueError("exact enumeration is limited to n <= 9")
    if np.ptp(y) == 0 or np.ptp(np.asarray(x)) == 0:
        return 1.0
    G = _scores(x)
    obs, _ = _quadratic_statistic(G, y[:, None])
    perms = np.array(list(itertools.permutations(y))).T
    stat, _ = _quadratic_statistic(G, perms)
    return float(np.mean(stat >= obs[0] * (1 - 1e-9)))


class _Node:
    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self, value):
        self.feature = -1
        self.threshold = 0.0
        self.left = self.right = None
        self.value = value


class ConditionalTree:
    """Binary tree whose split variable is the one with the smallest
    Bonferroni-adjusted permutation p-value; splitting stops when that exceeds
    ``alpha``.
    """

    def __init__(self, alpha: float = 0.05, mtry: Optional[int] = None, min_split: int = 20,
                 min_bucket: int = 7, max_depth: int = 30, rng=None):
        self.alpha = alpha
        self.mtry = mtry
        self.min_split = min_split
        self.min_bucket = min_bucket
        self.max_depth = max_depth
        self.rng = rng if rng is not None else np.random.default_rng(0)

    def fit(self, X, y):
        self.root_ = self._grow(X, y, 0)
        return self

    def _best_cut(self, x, y):
        order = np.argsort(x, kind="stable")
        xs, ys = x[order], y[order]
        n = len(ys)
        cs = np.cumsum(ys)[:-1]
        nl = np.arange(1, n)
        ok = (xs[1:] > xs[:-1]) & (nl >= self.min_bucket) & (n - nl >= self.min_bucket)
        if not ok.any():
            return None
        v = np.var(ys)
        if v == 0:
            return None
        # standardised two-sample statistic for every admissible cutpoint
        z = np.abs(cs - nl * ys.mean()) / np.sqrt(nl * (n - nl) / (n - 1) * v)
        z[~ok] = -np.inf
        i = int(np.argmax(z))
        return 0.5 * (xs[i] + xs[i + 1])

    def _grow(self, X, y, depth):
        node = _Node(float(y.mean()))
        n, p = X.shape
        if n < self.min_split or depth >= self.max_depth or np.ptp(y) == 0:
            return node
        k = min(self.mtry or p, p)
        feats = np.sort(self.rng.choice(p, size=k, replace=False)) if k < p else np.arange(p)
        pvals = np.array([linear_statistic_pvalue(X[:, j], y) for j in feats])
        adj = np.minimum(1.0, pvals * len(feats))
        j_best = int(np.argmin(adj))
        if adj[j_best] > self.alpha:
            return node
        f = int(feats[j_best])
        cut = self._best_cut(X[:, f], y)
        if cut is None:
            return node
        mask = X[:, f] <= cut
        node.feature, node.threshold = f, cut
        node.left = self._grow(X[mask], y[mask], depth + 1)
        node.right = self._grow(X[~mask], y[~mask], depth + 1)
        return node

    def predict(self, X) -> np.ndarray:
        out = np.empty(len(X))
        stack = [(self.root_, np.arange(len(X)))]
        while stack:
            node, idx = stack.pop()
            if node.left is None:
                out[idx] = node.value
                continue
            m = X[idx, node.feature] <= node.threshold
            stack.append((node.left, idx[m]))
            stack.append((node.right, idx[~m]))
        return out


class ConditionalForest(_ConstantMixin):
    """Bag of conditional-inference trees on subsamples (63.2% without
    replacement), averaged.
    """

    def __init__(self, n_trees: int = 500, mtry: Optional[int] = None, alpha: float = 0.05,
                 min_split: int = 20, min_bucket: int = 7, fraction: float = 0.632, seed: int = 0):
        self.n_trees = n_trees
        self.mtry = mtry
        self.alpha = alpha
        self.min_split = min_split
        self.min_bucket = min_bucket
        self.fraction = fraction
        self.seed = seed

    def fit(self, X, y):
        X = _as_2d(X)
        y = np.asarray(y, dtype=float)
        if self._check_constant(y):
            return self
        rng = np.random.default_rng(self.seed)
        n = len(y)
        m = max(2, int(round(self.fraction * n)))
        self.trees_ = []
        for _ in range(self.n_trees):
            idx = rng.choice(n, size=m, replace=False)
            tree = ConditionalTree(self.alpha, self.mtry, self.min_split, self.min_bucket, rng=rng)
            self.trees_.append(tree.fit(X[idx], y[idx]))
        return self

    def predict(self, X) -> np.ndarray:
        X = _as_2d(X)
        if self._constant is not None:
            return np.full(len(X), self._constant)
        return np.mean([t.predict(X) for t in self.trees_], axis=0)


MODEL_CLASSES = {
    ModelKind.QRF: QuantileForest,
    ModelKind.BRNN: BayesRegNet,
    ModelKind.SVM_RADIAL: RadialSvm,
    ModelKind.CFOREST: ConditionalForest,
}


def default_grid(kind: ModelKind, n_features: int, n_trees: int = 500) -> list[dict]:
    """Hyperparameter lattice for ``kind``."""
    kind = ModelKind.parse(kind)
    if kind is ModelKind.QRF:
        return [{"n_trees": n_trees, "mtry": m, "min_node_size": s}
                for m in range(1, n_features + 1) for s in (3, 5, 10)]
    if kind is ModelKind.BRNN:
        return [{"neurons": s} for s in (1, 2, 3, 4)]
    if kind is ModelKind.SVM_RADIAL:
        return [{"C": float(c), "width": w} for c in 2.0 ** np.arange(-2, 9)
                for w in (0.5, 1.0, 2.0)]
    return [{"n_trees": n_trees, "mtry": m, "alpha": 0.05} for m in range(1, n_features + 1)]


def make_model(kind, params: dict, seed: int):
    return MODEL_CLASSES[ModelKind.parse(kind)](**params, seed=seed)
