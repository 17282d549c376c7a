"""Monte Carlo harness: simple-regret sweeps over horizon grids, rate-slope
fits, PAC horizon formulas and the exploration-exploitation runner.

Replication ``r`` uses the derived seed ``master_seed XOR r``, so paths for
different horizons at the same replication share their increments (common
random numbers).  Within a replication the hitting-time curve estimate is
shared across payoffs, since it does not depend on the payoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .drifts import default_law
from .errors import (BadParameters, DegenerateDesign, StoplabError,
                     TooFewRecords)
from .estimators import Kernel, barrier_grid, estimate_barrier, xi_hat
from .oracle import xi_curve
from .payoffs import PayoffSpec
from .sde import (DiffusionPath, _em_path, _kernel_args, _run_until_cross,
                  simulate_path, split_seed)

_CHUNK = 1 << 16


@dataclass
class RegretRecord:
    """One replication of threshold estimation at one horizon."""

    T: float
    beta: float
    replication: int
    y_hat: float
    regret: float
    seed: int
    error: str = ""


@dataclass
class CumulativeRecord:
    """One exploration-exploitation run: ``regret_cum = phi * T - sum(payoffs)``."""

    T: float
    regret_cum: float
    exploration_time: float
    n_cycles: int
    seed: int
    replication: int = 0


@dataclass
class ExperimentConfig:
    """Shared configuration of the Monte Carlo harness.

    ``payoffs`` maps a margin exponent beta to its payoff; the estimator
    constants ``floor_a`` (density floor) and ``clamp_M1`` (hitting-time
    lower bound at ``y1``) default to oracle-derived values.
    """

    drift: object
    payoffs: dict
    T_grid: tuple
    dt: float = 0.01
    replications: int = 50
    master_seed: int = 0
    y1: float = 0.2
    zeta: float = 2.0
    floor_a: float | None = None
    clamp_M1: float | None = None
    mode: str = "simple"
    schedule: str = "margin"
    block_len: float = 1.0
    kernel: Kernel = field(default_factory=Kernel)

    def __post_init__(self):
        self.T_grid = tuple(sorted(float(t) for t in self.T_grid))
        if not self.T_grid:
            raise ValueError("T_grid must be nonempty")
        if self.dt <= 0 or self.dt > 0.05:
            raise ValueError("need 0 < dt <= 0.05")
        if self.replications < 1:
            raise ValueError("need replications >= 1")
        if not (0 < self.y1 < self.zeta):
            raise ValueError("need 0 < y1 < zeta")


def default_estimator_constants(drift, y1, zeta, law=None):
    """Oracle-derived density floor and hitting-time clamp.

    Half the minimal invariant density over ``[0, zeta]`` and half the true
    hitting time of ``y1``, so both safeguards hold with slack.
    """
    if law is None:
        law = default_law(drift)
    xs = np.linspace(0.0, zeta, 512)
    floor_a = 0.5 * float(np.min(law.density_at(xs)))
    M1 = 0.5 * float(xi_curve(law)(np.atleast_1d(y1))[0])
    return floor_a, M1


def _resolved_constants(config, law):
    floor_a, M1 = config.floor_a, config.clamp_M1
    if floor_a is None or M1 is None:
        da, dm = default_estimator_constants(config.drift, config.y1,
                                             config.zeta, law)
        floor_a = da if floor_a is None else floor_a
        M1 = dm if M1 is None else M1
    return floor_a, M1


def run_simple_regret_sweep(config):
    """Simple-regret records for every (T, beta, replication) triple.

    Per-record failures are caught and flagged in the record's ``error``
    field so one bad replication cannot abort a long sweep.
    """
    law = default_law(config.drift)
    xi_fn = xi_curve(law)
    floor_a, M1 = _resolved_constants(config, law)
    grid = barrier_grid(config.y1, config.zeta)
    window = grid[(grid >= config.y1) & (grid <= config.zeta)]
    xi_ref = xi_fn(window)
    # optimal rate and per-point rates, shared by all replications
    targets = {}
    for beta, payoff in config.payoffs.items():
        ratio = payoff.eval(window) / xi_ref
        targets[beta] = (float(np.max(ratio)),
                         dict(zip(window.tolist(), ratio.tolist())))
    records = []
    for T in config.T_grid:
        for rep in range(config.replications):
            seed = split_seed(config.master_seed, rep)
            try:
                path = simulate_path(config.drift, T, config.dt, 0.0, seed)
                est = xi_hat(path, config.kernel, grid, floor_a, M1)
            except StoplabError as exc:
                for beta in config.payoffs:
                    records.append(RegretRecord(T, beta, rep, math.nan,
                                                math.nan, seed, str(exc)))
                continue
            for beta, payoff in config.payoffs.items():
                phi, rate_at = targets[beta]
                try:
                    y_hat = estimate_barrier(est, payoff, config.y1,
                                             config.zeta)["y_hat"]
                    regret = max(phi - rate_at[y_hat], 0.0)
                    records.append(RegretRecord(T, beta, rep, y_hat, regret,
                                                seed))
                except StoplabError as exc:
                    records.append(RegretRecord(T, beta, rep, math.nan,
                                                math.nan, seed, str(exc)))
    return records


def summarize_by_T(records):
    """Mean/median regret and standard error per horizon (valid records)."""
    out = {}
    for r in records:
        if r.error:
            continue
        out.setdefault(r.T, []).append(r.regret)
    rows = []
    for T in sorted(out):
        vals = np.asarray(out[T])
        rows.append({"T": T, "mean": float(vals.mean()),
                     "median": float(np.median(vals)),
                     "stderr": float(vals.std(ddof=1) / np.sqrt(vals.size))
                     if vals.size > 1 else 0.0,
                     "n": int(vals.size)})
    return rows


def fit_rate_slope(records, x_axis="logT"):
    """OLS of log mean regret against log T (or T for the fast regime).

    Returns ``{slope, intercept, r2, ci95, zero_floored}``; exact-zero means
    are floored at machine-tiny before the log, with a flag.
    """
    rows = summarize_by_T(records)
    if len(rows) < 4:
        raise DegenerateDesign("need at least 4 distinct horizons")
    T = np.array([r["T"] for r in rows])
    mean = np.array([r["mean"] for r in rows])
    zero_floored = bool(np.any(mean <= 0))
    y = np.log(np.maximum(mean, 1e-300))
    x = np.log(T) if x_axis == "logT" else T
    if np.ptp(x) == 0:
        raise DegenerateDesign("horizons are not distinct")
    fit = stats.linregress(x, y)
    half = stats.t.ppf(0.975, len(x) - 2) * fit.stderr if len(x) > 2 \
        else math.inf
    return {"slope": float(fit.slope), "intercept": float(fit.intercept),
            "r2": float(fit.rvalue ** 2),
            "ci95": (float(fit.slope - half), float(fit.slope + half)),
            "zero_floored": zero_floored}


def pac_bounds(beta, eps, delta, C1=1.0, c3=1.0):
    """Sufficient horizons for regret <= eps with probability >= 1 - delta.

    ``T_margin`` covers the margin-condition regime (polynomial in 1/eps for
    beta < 1, logarithmic for beta >= 1); ``T_general`` the assumption-free
    regime; ``psi(alpha, T, u)`` evaluates the high-probability regret
    envelope at confidence parameter ``u``.
    """
    if not (0 < eps < 1) or not (0 < delta <= math.exp(-1)) or C1 <= 0 \
            or c3 <= 0 or beta <= 0:
        raise BadParameters("need eps in (0,1), delta in (0, 1/e], "
                            "C1, c3, beta > 0")
    if beta < 1:
        T_margin = (4.0 * C1 * C1 * math.exp(2.0 - 2.0 * beta)
                    * math.log(1.0 / delta)
                    / ((1.0 - beta) * eps ** (2.0 - 2.0 * beta)))
    else:
        T_margin = (4.0 * C1 * C1 / math.log(2.0) * math.log(2.0 / delta)
                    * math.log(math.e / eps))
    T_general = 4.0 * math.e ** 2 * c3 * c3 * math.log(1.0 / delta) / eps ** 2

    def psi(alpha, T, u):
        if not (0 < alpha < 1) or T <= 0 or u <= 0:
            raise BadParameters("psi needs alpha in (0,1), T > 0, u > 0")
        p = T ** (-1.0 / (2.0 - 2.0 * alpha))
        v = u / (1.0 - alpha)
        return (math.e * C1 ** (1.0 / (1.0 - alpha)) * p
                * (v ** (1.0 / (2.0 - 2.0 * alpha))
                   + v ** (1.0 / (1.0 - alpha)) * p))

    return {"T_margin": T_margin, "T_general": T_general, "psi": psi}


def empirical_pac_check(records, eps):
    """Fraction of replications with regret >= eps (compare against delta)."""
    vals = [r.regret for r in records if not r.error]
    if len(vals) < 50:
        raise TooFewRecords("need at least 50 valid records")
    vals = np.asarray(vals)
    return {"freq": float(np.mean(vals >= eps)), "n": int(vals.size)}


def exploration_budget(t, schedule, beta):
    """Exploration time allowed by time ``t``: ``t^{(2-2b)/(3-2b)}`` under
    the margin schedule, ``t^{1/2}`` otherwise."""
    if schedule == "margin":
        expo = (2.0 - 2.0 * beta) / (3.0 - 2.0 * beta)
    elif schedule == "general":
        expo = 0.5
    else:
        raise ValueError(f"unknown schedule '{schedule}'")
    return t ** expo


def run_exploration_exploitation(config, payoff=None):
    """Adaptive impulse control alternating exploration and exploitation.

    While accumulated exploration time lags the budget, the unstopped
    process is observed for one block (continuing from its current state)
    and appended to the estimation dataset; otherwise the barrier is
    re-estimated from the dataset and one stopping cycle is played from 0.
    Cumulative regret is measured against the oracle optimal rate.
    """
    if payoff is None:
        if len(config.payoffs) != 1:
            raise ValueError("pass the payoff explicitly for multi-payoff "
                             "configs")
        (beta, payoff), = config.payoffs.items()
    else:
        beta = payoff.beta
    law = default_law(config.drift)
    xi_fn = xi_curve(law)
    floor_a, M1 = _resolved_constants(config, law)
    grid = barrier_grid(config.y1, config.zeta)
    window = grid[(grid >= config.y1) & (grid <= config.zeta)]
    phi = float(np.max(payoff.eval(window) / xi_fn(window)))
    code, params, tg, tv = _kernel_args(config.drift)
    dt = config.dt
    block_steps = max(int(round(config.block_len / dt)), 1)
    kernel = config.kernel
    records = []
    for ti, T in enumerate(config.T_grid):
        total_steps = int(round(T / dt))
        for rep in range(config.replications):
            seed = split_seed(config.master_seed, (ti << 20) + rep)
            rng = np.random.default_rng(seed)
            explore_chunks = []
            explore_steps = 0
            x_explore = 0.0
            y_cached, cached_n = None, -1
            total_payoff = 0.0
            n_cycles = 0
            t_steps = 0
            while t_steps < total_steps:
                t_now = t_steps * dt
                if explore_steps * dt < exploration_budget(
                        t_now, config.schedule, beta) or explore_steps == 0:
                    k = min(block_steps, total_steps - t_steps)
                    seg = _em_path(code, params, tg, tv, x_explore, dt,
                                   rng.standard_normal(k))
                    explore_chunks.append(seg[1:])
                    x_explore = seg[-1]
                    explore_steps += k
                    t_steps += k
                    continue
                if explore_steps != cached_n:
                    data = np.concatenate(explore_chunks)
                    pseudo = DiffusionPath(dt=dt,
                                           samples=np.append(data, data[-1]),
                                           T=dt * data.size, seed=seed,
                                           x0=float(data[0]))
                    est = xi_hat(pseudo, kernel, grid, floor_a, M1)
                    y_cached = estimate_barrier(est, payoff, config.y1,
                                                config.zeta)["y_hat"]
                    cached_n = explore_steps
                x = 0.0
                crossed = False
                while t_steps < total_steps and not crossed:
                    z = rng.standard_normal(min(_CHUNK,
                                                total_steps - t_steps))
                    k, x, crossed = _run_until_cross(code, params, tg, tv,
                                                     x, dt, z, y_cached)
                    t_steps += k
                if crossed:
                    total_payoff += float(payoff.eval(x))
                    n_cycles += 1
            records.append(CumulativeRecord(
                T=dt * total_steps, regret_cum=phi * dt * total_steps
                - total_payoff, exploration_time=explore_steps * dt,
                n_cycles=n_cycles, seed=seed, replication=rep))
    return records
