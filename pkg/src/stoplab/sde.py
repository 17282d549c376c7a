"""Euler-Maruyama simulation, first hitting times and impulse-controlled runs.

All randomness flows through :func:`numpy.random.default_rng` seeded
explicitly, so a path is a pure function of ``(drift, T, dt, x0, seed)``.
Replication seeds are derived as ``master_seed XOR replication_index``.
The inner stepping loops are numba-compiled; hitting detection is first
grid crossing, without any bridge correction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .drifts import FAMILY_TABULATED, eval_drift
from .errors import InvalidThreshold, NonFinite

_OVERFLOW = 1e9
_CHUNK = 1 << 16

_EMPTY = np.empty(0, dtype=np.float64)


def split_seed(master_seed, index):
    """Per-replication seed: ``master_seed XOR index`` (64-bit)."""
    return (int(master_seed) ^ int(index)) & 0x7FFFFFFFFFFFFFFF


def _kernel_args(spec):
    if spec.family == FAMILY_TABULATED:
        return spec.family, _EMPTY, spec.grid, spec.values
    return spec.family, spec.param_array(), _EMPTY, _EMPTY


@njit(cache=True)
def _bval(code, params, tg, tv, x):
    if code == 0:
        return -params[0] * x
    elif code == 1:
        A0 = params[0]
        eps = params[1]
        if x <= 0.0:
            return -x / ((1.0 + eps) * (1.0 + eps))
        elif x <= A0:
            return 0.0
        return -(x - A0)
    elif code == 2:
        a = params[0]
        A0 = params[1]
        eps = params[2]
        if x <= 0.0:
            return -x
        elif x <= a:
            return 0.0
        elif x <= A0:
            return -eps * (x - a)
        return -(x - A0) - eps * (A0 - a)
    return np.interp(x, tg, tv)


@njit(cache=True)
def _em_path(code, params, tg, tv, x0, dt, z):
    n = z.shape[0]
    out = np.empty(n + 1)
    out[0] = x0
    x = x0
    sq = np.sqrt(dt)
    for k in range(n):
        x = x + _bval(code, params, tg, tv, x) * dt + sq * z[k]
        out[k + 1] = x
    return out


@njit(cache=True)
def _run_until_cross(code, params, tg, tv, x0, dt, z, threshold):
    """Step until X >= threshold; returns (steps used, final state, crossed)."""
    n = z.shape[0]
    x = x0
    sq = np.sqrt(dt)
    for k in range(n):
        x = x + _bval(code, params, tg, tv, x) * dt + sq * z[k]
        if x >= threshold:
            return k + 1, x, True
    return n, x, False


@dataclass(frozen=True)
class DiffusionPath:
    """A discretized trajectory; ``T == dt * (len(samples) - 1)`` exactly."""

    dt: float
    samples: np.ndarray
    T: float
    seed: int
    x0: float


@dataclass
class ControlledTrajectory:
    """Outcome of an impulse-controlled run (state resets to 0 at each stop)."""

    stop_times: list
    thresholds: list
    payoffs: list
    exploration_time: float
    total_T: float
    path_segments: np.ndarray | None = field(default=None, repr=False)


def simulate_path(spec, T, dt, x0=0.0, seed=0, zero_noise=False):
    """Euler-Maruyama path ``X_{k+1} = X_k + b(X_k) dt + sqrt(dt) Z_k``.

    ``zero_noise=True`` disables the Gaussian increments (debug mode).

    Raises
    ------
    NonFinite
        If a sample overflows, signalling a drift violating linear growth
        on the realized range.
    """
    if dt > 0.05 or dt <= 0:
        raise ValueError("need 0 < dt <= 0.05")
    n = int(round(T / dt))
    if n < 1:
        raise ValueError("need T >= dt")
    if zero_noise:
        z = np.zeros(n)
    else:
        z = np.random.default_rng(seed).standard_normal(n)
    code, params, tg, tv = _kernel_args(spec)
    samples = _em_path(code, params, tg, tv, float(x0), float(dt), z)
    if not np.all(np.isfinite(samples)) or np.max(np.abs(samples)) > _OVERFLOW:
        raise NonFinite("simulated path overflowed")
    return DiffusionPath(dt=float(dt), samples=samples, T=dt * n,
                         seed=int(seed), x0=float(x0))


def first_hitting_time(spec, threshold, dt, seed, t_cap):
    """First grid time with ``X >= threshold``, starting at ``X_0 = 0``.

    Returns ``{"tau": float, "hit": bool}``; ``tau = t_cap`` when the cap is
    reached without a crossing.
    """
    if threshold <= 0.0:
        return {"tau": 0.0, "hit": True}
    rng = np.random.default_rng(seed)
    code, params, tg, tv = _kernel_args(spec)
    max_steps = int(np.ceil(t_cap / dt))
    x = 0.0
    done = 0
    while done < max_steps:
        z = rng.standard_normal(min(_CHUNK, max_steps - done))
        k, x, crossed = _run_until_cross(code, params, tg, tv, x, dt, z,
                                         threshold)
        done += k
        if crossed:
            return {"tau": done * dt, "hit": True}
    return {"tau": float(t_cap), "hit": False}


def simulate_impulse_controlled(spec, strategy, payoff, T, dt, seed,
                                record_path=False):
    """Run a threshold impulse strategy up to time ``T``.

    ``strategy(n)`` must return the threshold for cycle ``n`` (1-based),
    using only information available before the cycle.  Each cycle starts at
    0, stops at the first grid crossing of the threshold (recording the
    pre-stop state's payoff) and resets the state to 0.  The final cycle is
    truncated at ``T``.
    """
    rng = np.random.default_rng(seed)
    code, params, tg, tv = _kernel_args(spec)
    total_steps = int(round(T / dt))
    stop_times, thresholds, payoffs = [], [], []
    segments = [] if record_path else None
    t_steps = 0
    n = 0
    while t_steps < total_steps:
        n += 1
        y_n = float(strategy(n))
        if not (payoff.y1 <= y_n <= payoff.zeta):
            raise InvalidThreshold(
                f"cycle {n}: threshold {y_n} outside [{payoff.y1}, {payoff.zeta}]")
        x = 0.0
        crossed = False
        while t_steps < total_steps and not crossed:
            z = rng.standard_normal(min(_CHUNK, total_steps - t_steps))
            if record_path:
                seg = _em_path(code, params, tg, tv, x, dt, z)
                above = np.flatnonzero(seg[1:] >= y_n)
                if above.size:
                    k = int(above[0]) + 1
                    x, crossed = seg[k], True
                    segments.append(seg[1:k + 1])
                else:
                    k, x = z.shape[0], seg[-1]
                    segments.append(seg[1:])
            else:
                k, x, crossed = _run_until_cross(code, params, tg, tv, x, dt,
                                                 z, y_n)
            t_steps += k
        if crossed:
            stop_times.append(t_steps * dt)
            thresholds.append(y_n)
            payoffs.append(payoff.eval(x))
    path = np.concatenate(segments) if record_path and segments else None
    return ControlledTrajectory(stop_times=stop_times, thresholds=thresholds,
                                payoffs=payoffs, exploration_time=0.0,
                                total_T=dt * total_steps, path_segments=path)


def stationary_start(law, seed):
    """Draw an initial state from an invariant law by inverse-CDF sampling."""
    u = np.random.default_rng(seed).uniform()
    return float(np.interp(u, law.cdf, law.grid))


def default_t_cap(xi_at_zeta=None, T=None):
    """Cap for hitting-time simulations: 10 mean hitting times when the
    oracle is available, else 100 T."""
    if xi_at_zeta is not None:
        return 10.0 * xi_at_zeta
    if T is not None:
        return 100.0 * T
    raise ValueError("need xi_at_zeta or T")


def drift_of(spec):
    """Scalar drift evaluator (used by tests and debug tooling)."""
    return lambda x: eval_drift(spec, x)
