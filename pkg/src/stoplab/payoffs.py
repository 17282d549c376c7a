"""Payoff families, payoff-class checks and the margin-condition checker.

Payoff admissibility asks for a sign change at ``y1``, boundedness by
``M_bound`` on the search window and a maximum of the payoff-per-time ratio
attained inside ``(0, zeta]`` for every admissible drift.  The margin
condition controls how fast the near-optimal set of the ratio shrinks: the
set of points within ``Delta`` of the maximum must be covered by ``n``
intervals of width ``eta * Delta^beta``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridTooCoarse, OutOfDomain


@dataclass(frozen=True)
class PayoffSpec:
    """A payoff function ``g`` with its class parameters.

    ``xi_ref`` is the expected-hitting-time curve of the reference drift used
    by the analytic families (callable of x); tabulated payoffs do not need
    it.
    """

    family: str
    y1: float
    zeta: float
    M_bound: float
    beta: float = 1.0
    params: tuple = ()
    xi_ref: object = field(default=None, compare=False)
    grid: np.ndarray | None = field(default=None, compare=False)
    values: np.ndarray | None = field(default=None, compare=False)

    @classmethod
    def sim_tent(cls, beta, xi_ref, y1=0.2, zeta=2.0):
        """``g(x) = (1 - |1 - x|^(1/beta)) * xi(x)`` (peak of g/xi at 1)."""
        spec = cls("sim_tent", float(y1), float(zeta), 1.0, float(beta),
                   (), xi_ref)
        return _with_bound(spec)

    @classmethod
    def margin_tent(cls, M, beta, y_star, xi_ref, y1=None, zeta=None):
        """``g(y) = (M - |y - y*|^(1/beta)) * xi(y)`` (peak of g/xi at y*)."""
        if not (0 < beta < 1):
            raise ValueError("margin_tent needs beta in (0, 1)")
        half = M ** beta
        if y1 is None:
            y1 = y_star - half
        if zeta is None:
            zeta = y_star + half
        spec = cls("margin_tent", float(y1), float(zeta), 1.0, float(beta),
                   (float(M), float(y_star)), xi_ref)
        return _with_bound(spec)

    @classmethod
    def two_peak(cls, M, a, delta, xi_ref, y1=None, zeta=None):
        """Two-tent ratio: left peak ``M`` at ``a/2``, right peak ``M - delta``
        at ``3a/2 + delta``, times the reference hitting-time curve."""
        if not (0 < M < a / 2):
            raise ValueError("two_peak needs 0 < M < a/2")
        if y1 is None:
            y1 = a / 2 - M
        if zeta is None:
            zeta = M + 3 * a / 2
        spec = cls("two_peak", float(y1), float(zeta), 1.0, 1.0,
                   (float(M), float(a), float(delta)), xi_ref)
        return _with_bound(spec)

    @classmethod
    def tabulated(cls, grid, values, y1, zeta):
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if grid.shape != values.shape or grid.ndim != 1:
            raise ValueError("grid and values must be matching 1-d arrays")
        spec = cls("tabulated", float(y1), float(zeta), 1.0,
                   grid=grid, values=values)
        return _with_bound(spec)

    @classmethod
    def tabulated_from_csv(cls, path, y1, zeta):
        data = np.loadtxt(path, delimiter=",", ndmin=2)
        return cls.tabulated(data[:, 0], data[:, 1], y1, zeta)

    def ratio_factor(self, x):
        """The drift-free factor f with ``g = f * xi_ref`` (analytic families)."""
        x = np.asarray(x, dtype=float)
        if self.family == "sim_tent":
            return 1.0 - np.abs(1.0 - x) ** (1.0 / self.beta)
        if self.family == "margin_tent":
            M, y_star = self.params
            return M - np.abs(x - y_star) ** (1.0 / self.beta)
        if self.family == "two_peak":
            M, a, delta = self.params
            return np.where(x < a, M - np.abs(x - a / 2),
                            M - delta - np.abs(x - 3 * a / 2 - delta))
        raise ValueError("tabulated payoffs have no analytic ratio factor")

    def eval(self, x):
        """Evaluate ``g(x)``; raises OutOfDomain for ``x <= 0``."""
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        if np.any(x <= 0):
            raise OutOfDomain("payoff defined on (0, infinity) only")
        if self.family == "tabulated":
            out = np.interp(x, self.grid, self.values)
        else:
            out = self.ratio_factor(x) * self.xi_ref(x)
        return float(out[0]) if scalar else out


def _with_bound(spec):
    """Fill M_bound with the grid sup of |g| over [y1, zeta]."""
    xs = np.linspace(spec.y1, spec.zeta, 2001)
    bound = float(np.max(np.abs(spec.eval(xs))))
    return PayoffSpec(spec.family, spec.y1, spec.zeta, bound * (1 + 1e-12),
                      spec.beta, spec.params, spec.xi_ref, spec.grid,
                      spec.values)


def make_payoff(name, **kwargs):
    """Build a payoff family by name (used by the config layer)."""
    ctor = {"sim_tent": PayoffSpec.sim_tent,
            "margin_tent": PayoffSpec.margin_tent,
            "two_peak": PayoffSpec.two_peak,
            "tabulated": PayoffSpec.tabulated_from_csv}
    if name not in ctor:
        raise ValueError(f"unknown payoff family '{name}'")
    return ctor[name](**kwargs)


@dataclass(frozen=True)
class MarginParams:
    """Parameters of the near-optimal-set covering condition."""

    Delta0: float
    n: int
    eta: float
    beta: float

    def __post_init__(self):
        if not (0 < self.Delta0 < 1):
            raise ValueError("Delta0 must lie in (0, 1)")
        if self.n < 1 or self.eta <= 0 or self.beta <= 0:
            raise ValueError("n, eta, beta must be positive")


@dataclass
class MarginReport:
    ok: bool
    maximizers: list
    witnesses: list


def default_delta_grid(Delta0, num=20):
    """Log-spaced levels in [1e-4, Delta0] used to probe the covering."""
    return np.geomspace(1e-4, Delta0, num)


def check_margin(f_on_grid, params, delta_grid=None):
    """Check the covering condition of the near-optimal sets of ``f``.

    ``f_on_grid`` is a ``(grid, values)`` pair.  For each level ``Delta`` the
    sublevel set ``{x : sup f - f(x) <= Delta}`` (on the grid) must be covered
    by ``n`` intervals of width ``eta * Delta^beta`` centered at the grid
    maximizers.  Failing ``(Delta, x)`` pairs are reported as witnesses.
    """
    grid, values = (np.asarray(a, dtype=float) for a in f_on_grid)
    if delta_grid is None:
        delta_grid = default_delta_grid(params.Delta0)
    delta_grid = np.asarray(delta_grid, dtype=float)
    if np.any(delta_grid > params.Delta0) or np.any(delta_grid <= 0):
        raise ValueError("delta levels must lie in (0, Delta0]")
    step = float(np.max(np.diff(grid)))
    if step > np.min(delta_grid) ** params.beta * params.eta / 10.0:
        raise GridTooCoarse(
            f"grid step {step:g} too coarse for the smallest delta level")
    fmax = float(np.max(values))
    maximizers = _grid_maximizers(grid, values, fmax, step, params)
    witnesses = []
    for delta in np.sort(delta_grid):
        # one grid step of slack absorbs the quantization of the maximizers
        half = 0.5 * params.eta * delta ** params.beta + step
        near = grid[fmax - values <= delta]
        covered = np.zeros(near.shape, dtype=bool)
        for xi in maximizers:
            covered |= np.abs(near - xi) <= half
        for x in near[~covered]:
            witnesses.append((float(delta), float(x)))
    return MarginReport(ok=not witnesses, maximizers=maximizers,
                        witnesses=witnesses)


def _grid_maximizers(grid, values, fmax, step, params):
    """Cluster centers of the near-maximal grid points, at most n kept.

    The tolerance accounts for both grid quantization and float rounding of
    ``f`` near its maximum (flat tents round to an exact plateau); each
    maximal run of consecutive near-maximal points forms one cluster, whose
    center is the midpoint of its peak plateau.
    """
    tol = max(step ** (1.0 / params.beta),
              8 * np.finfo(float).eps * max(abs(fmax), 1.0))
    idx = np.flatnonzero(fmax - values <= tol)
    splits = np.flatnonzero(np.diff(idx) > 1) + 1
    peaks = []
    for chunk in np.split(idx, splits):
        top = np.max(values[chunk])
        center = float(np.mean(grid[chunk[values[chunk] == top]]))
        peaks.append((float(top), center))
    peaks.sort(key=lambda p: -p[0])
    return sorted(x for _, x in peaks[:params.n])


@dataclass
class ClassGReport:
    ok: bool
    failures: list
    flags: list


def check_class_G(payoff, drift_xi_curves, grid):
    """Grid check of the payoff-class requirements.

    ``drift_xi_curves`` maps a label to the oracle hitting-time curve of an
    admissible drift.  A vanishing (rather than negative) limit at 0 is
    flagged, not rejected, since the simulation-study payoff sits exactly on
    that boundary.
    """
    grid = np.asarray(grid, dtype=float)
    if grid[0] <= 0 or grid[-1] <= payoff.zeta:
        raise ValueError("grid must cover (0, right end >> zeta]")
    g = payoff.eval(grid)
    failures, flags = [], []
    g0 = g[0]
    # a payoff vanishing linearly at 0 still reads as O(grid[0]) at the
    # first probe point; scale the boundary tolerance accordingly
    tol0 = max(1e-9, payoff.M_bound * grid[0])
    if g0 > tol0:
        failures.append(("g(0+)", float(g0)))
    elif abs(g0) <= tol0:
        flags.append(("g(0+) vanishes instead of being negative", float(g0)))
    # y1 should be the first sign change
    pos = np.flatnonzero(g > 0)
    if pos.size == 0:
        failures.append(("no positive region", None))
    else:
        first_pos = grid[pos[0]]
        stepg = float(np.max(np.diff(grid)))
        if not (payoff.y1 - stepg <= first_pos <= payoff.y1 + stepg):
            flags.append(("declared y1 differs from first sign change",
                          float(first_pos)))
    window = (grid >= payoff.y1) & (grid <= payoff.zeta)
    sup_abs = float(np.max(np.abs(g[window])))
    if sup_abs > payoff.M_bound * (1 + 1e-9):
        failures.append(("sup |g| on window exceeds M_bound", sup_abs))
    for label, xi in drift_xi_curves.items():
        ratio = g / xi(grid)
        argmax = grid[np.argmax(ratio)]
        if argmax > payoff.zeta:
            failures.append((f"ratio sup outside (0, zeta] under {label}",
                             float(argmax)))
    return ClassGReport(ok=not failures, failures=failures, flags=flags)


def check_vicinity(g, g_bar, xi_b, kappa, beta, T, c_grid, x_grid):
    """Event inclusion defining the vicinity class of ``g_bar``.

    For every ``c`` in ``c_grid`` (all > 1) the set where ``g``'s ratio falls
    more than ``kappa * c * T^{-1/(2-2beta)}`` short of its maximum must be
    contained in the set where ``g_bar``'s ratio falls more than
    ``c * T^{-1/(2-2beta)}`` short of its own maximum.
    """
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    x_grid = np.asarray(x_grid, dtype=float)
    xi_vals = xi_b(x_grid)
    r_g = g.eval(x_grid) / xi_vals
    r_bar = g_bar.eval(x_grid) / xi_vals
    gap_g = np.max(r_g) - r_g
    gap_bar = np.max(r_bar) - r_bar
    rate = T ** (-1.0 / (2.0 - 2.0 * beta))
    for c in np.asarray(c_grid, dtype=float):
        if c <= 1:
            raise ValueError("c_grid entries must exceed 1")
        bad = (gap_g > kappa * c * rate) & ~(gap_bar > c * rate)
        if np.any(bad):
            return False
    return True
