"""Empirical mode decomposition for trend-cycle extraction."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConvergenceError

MAX_SIFT_ITER = 1000


@dataclass(frozen=True)
class EmdResult:
    imfs: np.ndarray  # (n_imfs, n)
    residue: np.ndarray

    @property
    def n_imfs(self) -> int:
        return self.imfs.shape[0]

    @property
    def trend(self) -> np.ndarray:
        return self.residue

    def reconstruct(self) -> np.ndarray:
        return self.imfs.sum(axis=0) + self.residue


def local_extrema(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Indices of interior local maxima and minima; flat runs count once, at their centre."""
    d = np.diff(x)
    nz = np.flatnonzero(d != 0)
    if nz.size < 2:
        return np.array([], dtype=int), np.array([], dtype=int)
    s = np.sign(d[nz])
    change = np.flatnonzero(s[:-1] != s[1:])
    # extremum lies between step nz[c] and nz[c+1]
    pos = (nz[change] + 1 + nz[change + 1]) // 2
    is_max = s[change] > 0
    return pos[is_max], pos[~is_max]


def zero_crossings(x: np.ndarray) -> int:
    s = np.sign(x)
    s = s[s != 0]
    return int(np.count_nonzero(s[:-1] != s[1:]))


def _envelopes(h: np.ndarray) -> tuple[np.ndarray, np.ndarray] | None:
    n = len(h)
    mx, mn = local_extrema(h)
    if len(mx) + len(mn) < 2:
        return None
    first = min(mx[:1].tolist() + mn[:1].tolist())
    last = max(mx[-1:].tolist() + mn[-1:].tolist())
    # mirror the signal about its outermost extrema so the envelopes keep the
    # local oscillation past both ends
    t = np.arange(n)
    left = t[2 * first + 1:][::-1]
    right = t[:max(2 * last - n + 1, 0)][::-1]
    ext_t = np.concatenate([2 * first - left, t, 2 * last - right])
    ext = np.concatenate([h[left], h, h[right]])
    emx, emn = local_extrema(ext)
    if len(emx) < 2 or len(emn) < 2:
        return None
    upper = CubicSpline(ext_t[emx], ext[emx])(t)
    lower = CubicSpline(ext_t[emn], ext[emn])(t)
    return upper, lower


def _is_imf(h: np.ndarray) -> bool:
    mx, mn = local_extrema(h)
    return abs(len(mx) + len(mn) - zero_crossings(h)) <= 1


def _sift(x: np.ndarray, tol: float) -> np.ndarray:
    h = x.copy()
    for _ in range(MAX_SIFT_ITER):
        env = _envelopes(h)
        if env is None:
            return h
        mean = 0.5 * (env[0] + env[1])
        h_new = h - mean
        sd = np.sum((h - h_new) ** 2) / max(np.sum(h ** 2), np.finfo(float).tiny)
        h = h_new
        if sd < tol and _is_imf(h):
            return h
    raise ConvergenceError(f"sifting did not converge in {MAX_SIFT_ITER} iterations")


def emd_trend(series, max_imfs: int = 10, sift_tolerance: float = 0.2,
              range_threshold: float = 1e-3, power_threshold: float = 5e-3) -> EmdResult:
    """Decompose ``series`` into intrinsic mode functions and a residual trend.

    ``series`` may be a :class:`~monet.dataset.CountrySeries` or any 1-D array.
    Decomposition stops after ``max_imfs`` modes, when the residue has fewer
    than three interior extrema, or when it is negligible relative to the input
    (range below ``range_threshold`` or mean absolute value below
    ``power_threshold`` of the input's).
    """
    x = np.asarray(getattr(series, "values", series), dtype=float)
    if x.ndim != 1 or len(x) < 8:
        raise ValueError("emd_trend needs a 1-D series of length >= 8")
    scale_range = np.ptp(x)
    scale_power = np.mean(np.abs(x))
    imfs = []
    residue = x.copy()
    while len(imfs) < max_imfs:
        mx, mn = local_extrema(residue)
        # two extrema alone cannot define a mean envelope; sifting would only
        # turn the trend itself into a spurious mode
        if len(mx) + len(mn) < 3:
            break
        if imfs and (np.ptp(residue) <= range_threshold * scale_range
                     or np.mean(np.abs(residue)) <= power_threshold * scale_power):
            break
        imf = _sift(residue, sift_tolerance)
        imfs.append(imf)
        residue = x - np.sum(imfs, axis=0)
    imfs_arr = np.array(imfs) if imfs else np.zeros((0, len(x)))
    return EmdResult(imfs_arr, x - imfs_arr.sum(axis=0))
