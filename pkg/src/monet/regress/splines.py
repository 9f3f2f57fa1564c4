"""Natural cubic spline basis, constructed like R's ``splines::ns`` without intercept."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline

from ..errors import DegenerateData


@dataclass(frozen=True)
class SplineBasis:
    df: int
    interior_knots: np.ndarray
    boundary_knots: np.ndarray
    basis: np.ndarray  # basis evaluated at the construction points
    projection: np.ndarray  # maps the truncated B-spline basis to the natural basis

    def _bspline(self, deriv: int) -> BSpline:
        lo, hi = self.boundary_knots
        t = np.concatenate([[lo] * 4, self.interior_knots, [hi] * 4])
        nb = len(t) - 4
        spl = BSpline(t, np.eye(nb), 3, extrapolate=True)
        return spl.derivative(deriv) if deriv else spl

    def evaluate(self, x, deriv: int = 0) -> np.ndarray:
        """Basis (or its ``deriv``-th derivative) at ``x``; linear beyond the boundary knots."""
        x = np.asarray(x, dtype=float).ravel()
        lo, hi = self.boundary_knots
        out = np.zeros((len(x), self.df))
        inside = (x >= lo) & (x <= hi)
        if np.any(inside):
            out[inside] = self._bspline(deriv)(x[inside])[:, 1:] @ self.projection
        for edge, mask in ((lo, x < lo), (hi, x > hi)):
            if not np.any(mask):
                continue
            value = self._bspline(0)(np.array([edge]))[:, 1:] @ self.projection
            slope = self._bspline(1)(np.array([edge]))[:, 1:] @ self.projection
            if deriv == 0:
                out[mask] = value + np.outer(x[mask] - edge, slope[0])
            elif deriv == 1:
                out[mask] = slope
        return out

    __call__ = evaluate


def natural_spline_basis(x, df: int = 5) -> SplineBasis:
    """Natural cubic spline basis with ``df`` columns.

    Interior knots sit at equally spaced quantiles of ``x`` and the boundary
    knots at its range. Columns are cubic between knots, twice continuously
    differentiable, and linear outside the boundary knots.
    """
    x = np.asarray(x, dtype=float).ravel()
    if df < 2:
        raise ValueError("df must be >= 2")
    if len(np.unique(x)) < df + 1:
        raise DegenerateData(f"need at least {df + 1} distinct values for a df={df} spline")
    n_interior = df - 1
    probs = np.linspace(0, 1, n_interior + 2)[1:-1]
    interior = np.quantile(x, probs)
    lo, hi = float(x.min()), float(x.max())
    t = np.concatenate([[lo] * 4, interior, [hi] * 4])
    nb = len(t) - 4
    d2 = BSpline(t, np.eye(nb), 3).derivative(2)(np.array([lo, hi]))[:, 1:]
    q, _ = np.linalg.qr(d2.T, mode="complete")
    projection = q[:, 2:]
    proto = SplineBasis(df, interior, np.array([lo, hi]), np.zeros((0, df)), projection)
    return SplineBasis(df, interior, np.array([lo, hi]), proto.evaluate(x), projection)
