"""Tuning-free plug-in estimators from a discretized path.

The kernel density estimator uses the fixed bandwidth ``h = T^{-1/2}``; the
occupation-time CDF estimator needs no tuning at all.  The expected-hitting
-time curve is estimated as ``2 * int_0^x F_hat / max(rho_hat, a)`` with a
lower clamp ``M1 / 2``, and the stopping barrier is the grid argmax of
``g / xi_hat`` over the search window.

Time integrals are approximated by left-endpoint Riemann sums on the Euler
grid, so every sample except the last carries weight ``dt``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyWindow

_SHAPES = ("epanechnikov", "uniform", "triangular")


@dataclass(frozen=True)
class Kernel:
    """Compactly supported kernel on [-1, 1] with unit integral."""

    shape: str = "epanechnikov"
    support_radius: float = 1.0

    def __post_init__(self):
        if self.shape not in _SHAPES:
            raise ValueError(f"unknown kernel shape '{self.shape}'")

    def eval(self, u):
        u = np.asarray(u, dtype=float)
        inside = np.abs(u) <= 1.0
        if self.shape == "epanechnikov":
            return np.where(inside, 0.75 * (1.0 - u * u), 0.0)
        if self.shape == "uniform":
            return np.where(inside, 0.5, 0.0)
        return np.where(inside, 1.0 - np.abs(u), 0.0)


@dataclass(frozen=True)
class XiEstimate:
    """Estimated expected-hitting-time curve on a grid over [0, zeta]."""

    grid: np.ndarray
    xi_values: np.ndarray
    floor_a: float
    clamp_M1: float
    T: float


class _PathSums:
    """Sorted weight-carrying samples with prefix sums of X and X^2."""

    def __init__(self, path):
        pts = np.sort(path.samples[:-1])
        self.sorted = pts
        self.n = pts.size
        self.p1 = np.concatenate(([0.0], np.cumsum(pts)))
        self.p2 = np.concatenate(([0.0], np.cumsum(pts * pts)))


def _kernel_sum(kernel, sums, xs, h):
    """sum_k K((x - X_k) / h) over weight-carrying samples, vectorized."""
    s = sums.sorted
    lo = np.searchsorted(s, xs - h, side="left")
    hi = np.searchsorted(s, xs + h, side="right")
    m = (hi - lo).astype(float)
    if kernel.shape == "uniform":
        return 0.5 * m
    c1 = sums.p1[hi] - sums.p1[lo]
    if kernel.shape == "epanechnikov":
        c2 = sums.p2[hi] - sums.p2[lo]
        sq = xs * xs * m - 2.0 * xs * c1 + c2
        return 0.75 * (m - sq / (h * h))
    # triangular: split the window at x to sum |x - X_k|
    mid = np.searchsorted(s, xs, side="left")
    mL = (mid - lo).astype(float)
    c1L = sums.p1[mid] - sums.p1[lo]
    absdev = (xs * mL - c1L) + ((c1 - c1L) - xs * (m - mL))
    return m - absdev / h


def density_estimate(path, kernel, x):
    """Kernel density estimate ``rho_hat(x)`` with bandwidth ``T^{-1/2}``."""
    return float(density_on_grid(path, kernel, np.atleast_1d(float(x)))[0])


def density_on_grid(path, kernel, xs, sums=None):
    """Vectorized ``rho_hat`` on an array of evaluation points."""
    xs = np.asarray(xs, dtype=float)
    if sums is None:
        sums = _PathSums(path)
    h = path.T ** -0.5
    return _kernel_sum(kernel, sums, xs, h) * (path.dt / (path.T * h))


def cdf_estimate(path, x):
    """Occupation-time CDF estimate: fraction of time spent strictly below x."""
    return float(cdf_on_grid(path, np.atleast_1d(float(x)))[0])


def cdf_on_grid(path, xs, sums=None):
    xs = np.asarray(xs, dtype=float)
    if sums is None:
        sums = _PathSums(path)
    return np.searchsorted(sums.sorted, xs, side="left") / sums.n


def xi_hat(path, kernel, grid, floor_a, clamp_M1):
    """Plug-in estimate of the expected-hitting-time curve on ``grid``.

    ``floor_a`` floors the density inside the ratio; the whole curve is
    clamped below at ``clamp_M1 / 2`` (so the clamp binds at 0).
    """
    grid = np.asarray(grid, dtype=float)
    if grid[0] != 0.0:
        raise ValueError("grid must start at 0")
    if floor_a <= 0 or clamp_M1 <= 0:
        raise ValueError("floor_a and clamp_M1 must be positive")
    sums = _PathSums(path)
    rho = density_on_grid(path, kernel, grid, sums)
    F = cdf_on_grid(path, grid, sums)
    integrand = F / np.maximum(rho, floor_a)
    raw = np.empty_like(grid)
    raw[0] = 0.0
    # 2 * cumulative trapezoid: the factor 2 cancels the trapezoid's 1/2
    np.cumsum((integrand[1:] + integrand[:-1]) * np.diff(grid), out=raw[1:])
    xi = np.maximum(raw, 0.5 * clamp_M1)
    return XiEstimate(grid=grid, xi_values=xi, floor_a=float(floor_a),
                      clamp_M1=float(clamp_M1), T=path.T)


def barrier_grid(y1, zeta):
    """Uniform grid on [0, zeta] with step ``min(1e-3, (zeta - y1) / 2000)``."""
    step = min(1e-3, (zeta - y1) / 2000.0)
    n = int(np.ceil(zeta / step))
    return np.linspace(0.0, zeta, n + 1)


def estimate_barrier(xi_est, payoff, y1, zeta):
    """Grid argmax of ``g / xi_hat`` over [y1, zeta] (smallest on ties).

    Returns ``{"y_hat": float, "value": float}``.
    """
    if not (0 < y1 < zeta):
        raise ValueError("need 0 < y1 < zeta")
    mask = (xi_est.grid >= y1) & (xi_est.grid <= zeta)
    if not np.any(mask):
        raise EmptyWindow(f"no grid point in [{y1}, {zeta}]")
    xs = xi_est.grid[mask]
    ratio = payoff.eval(xs) / xi_est.xi_values[mask]
    i = int(np.argmax(ratio))  # argmax returns the first (smallest) maximizer
    return {"y_hat": float(xs[i]), "value": float(ratio[i])}
