"""Natural cubic spline interpolation with clamped extrapolation.

The spline passes through every knot, has continuous first and second
derivatives at interior knots, and zero second derivative at the two end
knots. Queries outside the knot range return the boundary knot value
rather than extrapolating the end cubics.
"""

from __future__ import annotations

import numpy as np


class SplineError(Exception):
    """Invalid knot configuration."""


def _solve_tridiagonal(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray,
                       rhs: np.ndarray) -> np.ndarray:
    """Thomas algorithm for a tridiagonal system, O(n)."""
    n = diag.size
    scratch_diag = diag.astype(float).copy()
    scratch_rhs = rhs.astype(float).copy()
    for i in range(1, n):
        factor = lower[i - 1] / scratch_diag[i - 1]
        scratch_diag[i] -= factor * upper[i - 1]
        scratch_rhs[i] -= factor * scratch_rhs[i - 1]
    solution = np.empty(n, dtype=float)
    solution[-1] = scratch_rhs[-1] / scratch_diag[-1]
    for i in range(n - 2, -1, -1):
        solution[i] = (scratch_rhs[i] - upper[i] * solution[i + 1]) / scratch_diag[i]
    return solution


class NaturalCubicSpline:
    """Piecewise cubic through (x, y) knots with natural end conditions."""

    def __init__(self, x: np.ndarray, y: np.ndarray):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.ndim != 1 or y.ndim != 1 or x.size != y.size:
            raise SplineError("knot arrays must be 1-d and of equal length")
        if x.size < 2:
            raise SplineError("need at least two knots")
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
            raise SplineError("knots must be finite")
        if np.any(np.diff(x) <= 0):
            raise SplineError("knot abscissae must be strictly increasing")
        self.x = x
        self.y = y
        h = np.diff(x)
        n = x.size
        # second derivatives at the knots; natural ends pin the first and
        # last to zero, interior values come from the continuity system
        m = np.zeros(n, dtype=float)
        if n > 2:
            slopes = np.diff(y) / h
            diag = 2.0 * (h[:-1] + h[1:])
            rhs = 6.0 * np.diff(slopes)
            m[1:-1] = _solve_tridiagonal(h[1:-1], diag, h[1:-1], rhs)
        self._a = (m[1:] - m[:-1]) / (6.0 * h)
        self._b = m[:-1] / 2.0
        self._c = np.diff(y) / h - h * (2.0 * m[:-1] + m[1:]) / 6.0
        self._d = y[:-1].copy()

    def __call__(self, query):
        """Evaluate at scalar or array query points."""
        q = np.asarray(query, dtype=float)
        scalar = q.ndim == 0
        q = np.atleast_1d(q)
        out = np.empty(q.shape, dtype=float)
        below = q <= self.x[0]
        above = q >= self.x[-1]
        out[below] = self.y[0]
        out[above] = self.y[-1]
        inside = ~(below | above)
        if np.any(inside):
            qi = q[inside]
            seg = np.searchsorted(self.x, qi, side="right") - 1
            t = qi - self.x[seg]
            out[inside] = ((self._a[seg] * t + self._b[seg]) * t + self._c[seg]) * t + self._d[seg]
        return float(out[0]) if scalar else out

    @property
    def knots(self) -> tuple[np.ndarray, np.ndarray]:
        return self.x.copy(), self.y.copy()
