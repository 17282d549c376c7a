"""Drift catalog: drift families, ergodicity-class checks and invariant laws.

A drift is admissible if it is locally Lipschitz, grows at most linearly
(``|b(x)| <= C(1+|x|)``) and pushes inward beyond ``|x| = A`` with strength at
least ``gamma``.  Every drift in the catalog carries its class constants so
that membership can be verified on a probe grid.  The invariant density is
proportional to ``exp(2 * int_0^x b)`` and is computed by composite trapezoid
quadrature on a symmetric grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridTooCoarse, OutOfRange

# family codes shared with the numba kernels in sde.py
FAMILY_OU = 0
FAMILY_PIECEWISE_MARGIN = 1
FAMILY_PIECEWISE_GENERAL = 2
FAMILY_TABULATED = 3

_FAMILY_NAMES = {
    "ou": FAMILY_OU,
    "piecewise_margin": FAMILY_PIECEWISE_MARGIN,
    "piecewise_general": FAMILY_PIECEWISE_GENERAL,
    "tabulated": FAMILY_TABULATED,
}


@dataclass(frozen=True)
class DriftSpec:
    """A drift function together with its ergodicity-class constants.

    Use the constructors :meth:`ou`, :meth:`piecewise_margin`,
    :meth:`piecewise_general` and :meth:`tabulated` rather than building
    instances directly.
    """

    family: int
    params: tuple = ()
    class_C: float = 1.0
    class_A: float = 5.0
    class_gamma: float = 0.5
    # tabulated drifts only
    grid: np.ndarray | None = field(default=None, compare=False)
    values: np.ndarray | None = field(default=None, compare=False)

    @classmethod
    def ou(cls, slope, class_C=1.0, class_A=5.0, class_gamma=0.5):
        """Ornstein-Uhlenbeck drift ``b(x) = -slope * x``."""
        if slope <= 0:
            raise ValueError("slope must be positive")
        return cls(FAMILY_OU, (float(slope),), class_C, class_A, class_gamma)

    @classmethod
    def piecewise_margin(cls, A0, eps=0.0, class_C=1.0, class_A=None,
                         class_gamma=0.5):
        """Hypothesis drift for the margin lower bound.

        ``b(x) = -x / (1+eps)^2`` for ``x <= 0``, ``0`` on ``(0, A0]`` and
        ``-(x - A0)`` beyond.  The squared perturbation of the left slope
        makes the closed form ``xi(x) = x^2 + (1+eps) sqrt(pi) x`` exact on
        ``(0, A0]``.
        """
        if A0 <= 0 or eps < 0:
            raise ValueError("need A0 > 0 and eps >= 0")
        if class_A is None:
            class_A = A0 + class_gamma + 1.0
        return cls(FAMILY_PIECEWISE_MARGIN, (float(A0), float(eps)),
                   class_C, class_A, class_gamma)

    @classmethod
    def piecewise_general(cls, a, A0, eps=0.0, class_C=1.0, class_A=None,
                          class_gamma=0.5):
        """Hypothesis drift for the general-case lower bound.

        Unperturbed (``eps = 0``): ``-x`` for ``x <= 0``, ``0`` on
        ``(0, A0]``, ``-(x - A0)`` beyond.  The perturbation bends the flat
        stretch down on ``(a, A0]`` with slope ``-eps`` and shifts the tail
        accordingly.
        """
        if not (0 < a < A0) or eps < 0:
            raise ValueError("need 0 < a < A0 and eps >= 0")
        if class_A is None:
            class_A = A0 + class_gamma + 1.0
        return cls(FAMILY_PIECEWISE_GENERAL, (float(a), float(A0), float(eps)),
                   class_C, class_A, class_gamma)

    @classmethod
    def tabulated(cls, grid, values, class_C=1.0, class_A=5.0,
                  class_gamma=0.5):
        """Drift given by linear interpolation of ``(grid, values)``."""
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape or grid.size < 2:
            raise ValueError("grid and values must be 1-d arrays of equal length >= 2")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        return cls(FAMILY_TABULATED, (), class_C, class_A, class_gamma,
                   grid=grid, values=values)

    @classmethod
    def tabulated_from_csv(cls, path, **kwargs):
        """Load a tabulated drift from a two-column CSV ``(x, b(x))``."""
        data = np.loadtxt(path, delimiter=",", ndmin=2)
        return cls.tabulated(data[:, 0], data[:, 1], **kwargs)

    def param_array(self):
        """Family parameters as a float array (for the simulation kernels)."""
        return np.asarray(self.params, dtype=float)


def make_drift(name, **kwargs):
    """Build a catalog drift by name (used by the config layer)."""
    if name not in _FAMILY_NAMES:
        raise ValueError(f"unknown drift family '{name}'")
    if name == "ou":
        return DriftSpec.ou(**kwargs)
    if name == "piecewise_margin":
        return DriftSpec.piecewise_margin(**kwargs)
    if name == "piecewise_general":
        return DriftSpec.piecewise_general(**kwargs)
    path = kwargs.pop("path")
    return DriftSpec.tabulated_from_csv(path, **kwargs)


def eval_drift(spec, x):
    """Evaluate ``b(x)``; accepts scalars or arrays.

    Raises
    ------
    OutOfRange
        For tabulated drifts evaluated outside the tabulated grid.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    if spec.family == FAMILY_OU:
        out = -spec.params[0] * x
    elif spec.family == FAMILY_PIECEWISE_MARGIN:
        A0, eps = spec.params
        s = (1.0 + eps) ** -2
        out = np.where(x <= 0, -s * x,
                       np.where(x <= A0, 0.0, -(x - A0)))
    elif spec.family == FAMILY_PIECEWISE_GENERAL:
        a, A0, eps = spec.params
        out = np.where(x <= 0, -x,
                       np.where(x <= a, 0.0,
                                np.where(x <= A0, -eps * (x - a),
                                         -(x - A0) - eps * (A0 - a))))
    else:
        if np.any(x < spec.grid[0]) or np.any(x > spec.grid[-1]):
            raise OutOfRange("tabulated drift evaluated outside its grid")
        out = np.interp(x, spec.grid, spec.values)
    return float(out[0]) if scalar else out


@dataclass
class SigmaReport:
    """Outcome of a pointwise class-membership check."""

    ok: bool
    violations: list


def check_sigma_membership(spec, probe_grid):
    """Check the three class conditions pointwise on ``probe_grid``.

    The probe grid must extend beyond ``+-class_A`` so the inward-push
    condition is actually exercised.  Violations are reported, not raised.
    """
    probe_grid = np.asarray(probe_grid, dtype=float)
    if probe_grid[0] >= -spec.class_A or probe_grid[-1] <= spec.class_A:
        raise ValueError("probe_grid must cover [-(class_A+margin), class_A+margin]")
    b = eval_drift(spec, probe_grid)
    violations = []
    # local Lipschitz: difference quotients finite on the compact grid
    quot = np.diff(b) / np.diff(probe_grid)
    bad = ~np.isfinite(quot)
    for i in np.flatnonzero(bad):
        violations.append(("lipschitz", float(probe_grid[i]), float(quot[i])))
    # linear growth
    growth = np.abs(b) - spec.class_C * (1.0 + np.abs(probe_grid))
    for i in np.flatnonzero(growth > 1e-12):
        violations.append(("linear_growth", float(probe_grid[i]), float(growth[i])))
    # inward push beyond |x| = A
    outside = np.abs(probe_grid) > spec.class_A
    push = b * np.sign(probe_grid) + spec.class_gamma
    for i in np.flatnonzero(outside & (push > 1e-12)):
        violations.append(("inward_push", float(probe_grid[i]), float(push[i])))
    return SigmaReport(ok=not violations, violations=violations)


@dataclass(frozen=True)
class InvariantLaw:
    """Invariant density and CDF of a catalog drift on a symmetric grid."""

    grid: np.ndarray
    density: np.ndarray
    cdf: np.ndarray
    normalization_error: float

    def density_at(self, x):
        return np.interp(x, self.grid, self.density)

    def cdf_at(self, x):
        return np.interp(x, self.grid, self.cdf)


def invariant_law(spec, X_max, n_grid):
    """Invariant law by quadrature of ``exp(2 * int_0^x b)``.

    Raises
    ------
    GridTooCoarse
        If ``n_grid`` is below the supported minimum of 1000 points.
    """
    if n_grid < 1000:
        raise GridTooCoarse("invariant_law needs n_grid >= 1000")
    min_span = spec.class_A + 10.0 / spec.class_gamma
    if X_max < min_span:
        raise ValueError(f"X_max must be >= class_A + 10/gamma = {min_span:g}")
    grid = np.linspace(-X_max, X_max, int(n_grid))
    b = eval_drift(spec, grid)
    # antiderivative of b, anchored at 0
    prim = _cumtrapz(b, grid)
    prim -= np.interp(0.0, grid, prim)
    log_e = 2.0 * prim
    log_e -= log_e.max()  # guard against overflow before normalizing
    e = np.exp(log_e)
    Z = np.trapezoid(e, grid)
    density = e / Z
    cdf = _cumtrapz(density, grid)
    # the drift pushes inward at rate >= gamma beyond A, so the truncated
    # tail is dominated by an exponential with rate 2*gamma
    tail = (density[0] + density[-1]) / (2.0 * spec.class_gamma)
    return InvariantLaw(grid=grid, density=density, cdf=cdf,
                        normalization_error=float(tail))


def default_law(spec, n_grid=20001):
    """Invariant law on the default domain ``[-(A + 10/gamma), A + 10/gamma]``."""
    return invariant_law(spec, spec.class_A + 10.0 / spec.class_gamma, n_grid)


def _cumtrapz(y, x):
    """Cumulative trapezoid with a leading zero."""
    out = np.empty_like(y)
    out[0] = 0.0
    np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(x), out=out[1:])
    return out
