"""Command-line entrypoint.

One TOML config file drives every subcommand; outputs (CSV/JSON plus a run
manifest) land under ``--out`` (or ``$STOPLAB_OUT``, default ``./out``).
CSV bodies are byte-stable across reruns with the same config and seed:
floats are written with shortest round-trip formatting, '.' decimal, fixed
column order.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .drifts import check_sigma_membership, default_law, make_drift
from .errors import ConfigError, EmptyInput, StoplabError
from .estimators import Kernel, barrier_grid, estimate_barrier, xi_hat
from .experiments import (ExperimentConfig, fit_rate_slope, pac_bounds,
                          run_exploration_exploitation,
                          run_simple_regret_sweep, summarize_by_T)
from .oracle import (build_hypotheses, stationary_kl, verify_separation,
                     xi_curve)
from .payoffs import MarginParams, PayoffSpec, check_margin, make_payoff
from .sde import simulate_path

SUBCOMMANDS = ("simulate", "estimate", "regret-sweep", "cumulative", "pac",
               "hypotheses", "margin-check")


def _fmt(v):
    """Locale-free scalar formatting for CSV cells."""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def config_hash(cfg):
    """Stable hash of the parsed config (invariant to key order)."""
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _require(cfg, section, key=None):
    if section not in cfg:
        raise ConfigError(section, "required section missing")
    if key is not None:
        if key not in cfg[section]:
            raise ConfigError(f"{section}.{key}", "required key missing")
        return cfg[section][key]
    return cfg[section]


def _build_drift(cfg):
    section = dict(_require(cfg, "drift"))
    family = section.pop("family", None)
    if family is None:
        raise ConfigError("drift.family", "required key missing")
    try:
        return make_drift(family, **section)
    except (TypeError, ValueError) as exc:
        raise ConfigError("drift", str(exc)) from exc


def _window(cfg):
    w = cfg.get("window", {})
    return float(w.get("y1", 0.2)), float(w.get("zeta", 2.0))


def _horizons(cfg):
    h = _require(cfg, "horizons")
    dt = float(h.get("dt", 0.01))
    if "T" in h:
        T_grid = [float(t) for t in np.atleast_1d(h["T"])]
    elif "log_grid" in h:
        g = h["log_grid"]
        for k in ("from", "to", "num"):
            if k not in g:
                raise ConfigError(f"horizons.log_grid.{k}",
                                  "required key missing")
        T_grid = list(np.exp(np.linspace(g["from"], g["to"], int(g["num"]))))
    else:
        raise ConfigError("horizons.T", "need T or log_grid")
    return T_grid, dt


def _payoffs(cfg, drift, y1, zeta):
    """Payoff per beta from the [payoff] section, with the oracle
    hitting-time curve of the configured drift as reference."""
    p = dict(_require(cfg, "payoff"))
    family = p.pop("family", None)
    if family is None:
        raise ConfigError("payoff.family", "required key missing")
    betas = p.pop("betas", None)
    if betas is None:
        betas = [p.pop("beta", 1.0)]
    xi_ref = xi_curve(default_law(drift))
    out = {}
    for beta in betas:
        kwargs = dict(p)
        if family in ("sim_tent", "margin_tent"):
            kwargs["beta"] = float(beta)
        if family != "tabulated":
            kwargs["xi_ref"] = xi_ref
            kwargs.setdefault("y1", y1)
            kwargs.setdefault("zeta", zeta)
        try:
            out[float(beta)] = make_payoff(family, **kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError("payoff", str(exc)) from exc
    return out


def _experiment_config(cfg, seed):
    drift = _build_drift(cfg)
    y1, zeta = _window(cfg)
    T_grid, dt = _horizons(cfg)
    est = cfg.get("estimator", {})
    sweep = cfg.get("sweep", {})
    explore = cfg.get("explore", {})
    return ExperimentConfig(
        drift=drift, payoffs=_payoffs(cfg, drift, y1, zeta),
        T_grid=tuple(T_grid), dt=dt,
        replications=int(sweep.get("replications", 50)),
        master_seed=seed, y1=y1, zeta=zeta,
        floor_a=est.get("floor_a"), clamp_M1=est.get("clamp_M1"),
        schedule=explore.get("schedule", "margin"),
        block_len=float(explore.get("block_len", 1.0)),
        kernel=Kernel(est.get("kernel", "epanechnikov")))


def emit_figure_data(records, mode):
    """Plot-ready rows (x, y, beta, n_reps, stderr): x is log T (``loglog``)
    or T (``semilog``), y is log mean regret."""
    if not records:
        raise EmptyInput("no records to plot")
    rows = []
    betas = sorted({r.beta for r in records})
    for beta in betas:
        sub = [r for r in records if r.beta == beta]
        for s in summarize_by_T(sub):
            x = math.log(s["T"]) if mode == "loglog" else s["T"]
            y = math.log(max(s["mean"], 1e-300))
            rows.append((x, y, beta, s["n"], s["stderr"]))
    return rows


def _cmd_simulate(cfg, out_dir, seed):
    drift = _build_drift(cfg)
    sim = _require(cfg, "simulate")
    T = float(_require(cfg, "simulate", "T"))
    dt = float(sim.get("dt", 0.01))
    path = simulate_path(drift, T, dt, float(sim.get("x0", 0.0)), seed)
    fp = os.path.join(out_dir, "path.csv")
    ts = np.arange(path.samples.size) * dt
    write_csv(fp, ["t", "x"], zip(ts.tolist(), path.samples.tolist()))
    report = check_sigma_membership(
        drift, np.linspace(-drift.class_A - 2, drift.class_A + 2, 2001))
    write_json(os.path.join(out_dir, "simulate.json"),
               {"T": path.T, "dt": dt, "n_samples": int(path.samples.size),
                "seed": seed, "sigma_check_ok": report.ok})
    return [fp, os.path.join(out_dir, "simulate.json")]


def _cmd_estimate(cfg, out_dir, seed):
    drift = _build_drift(cfg)
    y1, zeta = _window(cfg)
    T_grid, dt = _horizons(cfg)
    payoff = next(iter(_payoffs(cfg, drift, y1, zeta).values()))
    est_cfg = cfg.get("estimator", {})
    from .experiments import default_estimator_constants
    floor_a, M1 = est_cfg.get("floor_a"), est_cfg.get("clamp_M1")
    if floor_a is None or M1 is None:
        da, dm = default_estimator_constants(drift, y1, zeta)
        floor_a = da if floor_a is None else floor_a
        M1 = dm if M1 is None else M1
    path = simulate_path(drift, T_grid[-1], dt, 0.0, seed)
    grid = barrier_grid(y1, zeta)
    est = xi_hat(path, Kernel(est_cfg.get("kernel", "epanechnikov")), grid,
                 floor_a, M1)
    res = estimate_barrier(est, payoff, y1, zeta)
    fp = os.path.join(out_dir, "xi_hat.csv")
    write_csv(fp, ["x", "xi_hat"], zip(grid.tolist(), est.xi_values.tolist()))
    jp = os.path.join(out_dir, "estimate.json")
    write_json(jp, {"y_hat": res["y_hat"], "value": res["value"],
                    "T": path.T, "floor_a": floor_a, "clamp_M1": M1})
    return [fp, jp]


def _cmd_regret_sweep(cfg, out_dir, seed):
    config = _experiment_config(cfg, seed)
    records = run_simple_regret_sweep(config)
    fp = os.path.join(out_dir, "records.csv")
    write_csv(fp, ["T", "beta", "replication", "y_hat", "regret", "seed",
                   "error"],
              ((r.T, r.beta, r.replication, r.y_hat, r.regret, r.seed,
                r.error) for r in records))
    summary = {}
    for beta in sorted(config.payoffs):
        sub = [r for r in records if r.beta == beta]
        x_axis = "T" if beta >= 1 else "logT"
        fit = fit_rate_slope(sub, x_axis)
        fit["x_axis"] = x_axis
        summary[str(beta)] = fit
    jp = os.path.join(out_dir, "summary.json")
    write_json(jp, summary)
    fig = os.path.join(out_dir, "figure.csv")
    mode = "semilog" if all(b >= 1 for b in config.payoffs) else "loglog"
    write_csv(fig, ["x", "y", "beta", "n_reps", "stderr"],
              emit_figure_data(records, mode))
    return [fp, jp, fig]


def _cmd_cumulative(cfg, out_dir, seed):
    config = _experiment_config(cfg, seed)
    records = run_exploration_exploitation(config)
    fp = os.path.join(out_dir, "cumulative.csv")
    write_csv(fp, ["T", "regret_cum", "exploration_time", "n_cycles", "seed",
                   "replication"],
              ((r.T, r.regret_cum, r.exploration_time, r.n_cycles, r.seed,
                r.replication) for r in records))
    means = {}
    for r in records:
        means.setdefault(r.T, []).append(r.regret_cum)
    rows = [{"T": T, "regret": float(np.mean(v)), "error": ""}
            for T, v in means.items()]

    class _Row:
        def __init__(self, d):
            self.__dict__.update(d)
    fit = fit_rate_slope([_Row(r) for r in rows]) if len(rows) >= 4 else None
    jp = os.path.join(out_dir, "cumulative_summary.json")
    write_json(jp, {"slope_fit": fit,
                    "mean_by_T": {str(T): float(np.mean(v))
                                  for T, v in sorted(means.items())}})
    return [fp, jp]


def _cmd_pac(cfg, out_dir, seed):
    p = _require(cfg, "pac")
    for k in ("beta", "eps", "delta"):
        if k not in p:
            raise ConfigError(f"pac.{k}", "required key missing")
    res = pac_bounds(p["beta"], p["eps"], p["delta"],
                     p.get("C1", 1.0), p.get("c3", 1.0))
    psi = res.pop("psi")
    res["psi_at_u1"] = {str(T): psi(min(p["beta"], 0.999), T, 1.0)
                        for T in (1e2, 1e4, 1e6)}
    jp = os.path.join(out_dir, "pac.json")
    write_json(jp, res)
    return [jp]


def _cmd_hypotheses(cfg, out_dir, seed):
    h = _require(cfg, "hypotheses")
    mode = h.get("mode")
    if mode not in ("margin", "general"):
        raise ConfigError("hypotheses.mode", "must be 'margin' or 'general'")
    if "T" not in h or "M" not in h:
        raise ConfigError("hypotheses.T", "need T and M")
    pair = build_hypotheses(mode, float(h["T"]), float(h["M"]),
                            beta=h.get("beta"), y_star=h.get("y_star"),
                            a=h.get("a"))
    kl = stationary_kl(pair.b, pair.b_bar, pair.T,
                       (default_law(pair.b, 8001),
                        default_law(pair.b_bar, 8001)))
    rep = verify_separation(pair)
    jp = os.path.join(out_dir, "hypotheses.json")
    write_json(jp, {"mode": mode, "T": pair.T, "eps": pair.eps,
                    "delta": pair.params.get("delta"), "kl": kl,
                    "separation_report": {"holds": rep.holds,
                                          "c_constants": rep.c_constants,
                                          "details": rep.details}})
    grid = np.linspace(pair.g.y1, pair.g.zeta, 2001)
    g_vals = pair.g.eval(grid)
    fp = os.path.join(out_dir, "ratio_curves.csv")
    write_csv(fp, ["x", "ratio_b", "ratio_b_bar"],
              zip(grid.tolist(), (g_vals / pair.xi_b(grid)).tolist(),
                  (g_vals / pair.xi_bbar(grid)).tolist()))
    return [jp, fp]


def _cmd_margin_check(cfg, out_dir, seed):
    m = _require(cfg, "margin_check")
    for k in ("Delta0", "n", "eta", "beta"):
        if k not in m:
            raise ConfigError(f"margin_check.{k}", "required key missing")
    drift = _build_drift(cfg)
    y1, zeta = _window(cfg)
    payoff = next(iter(_payoffs(cfg, drift, y1, zeta).values()))
    params = MarginParams(Delta0=float(m["Delta0"]), n=int(m["n"]),
                          eta=float(m["eta"]), beta=float(m["beta"]))
    grid = np.linspace(y1, zeta, int(m.get("n_grid", 200001)))
    report = check_margin((grid, payoff.ratio_factor(grid)), params)
    jp = os.path.join(out_dir, "margin_check.json")
    write_json(jp, {"ok": report.ok, "maximizers": report.maximizers,
                    "witnesses": report.witnesses[:100]})
    return [jp]


_DISPATCH = {"simulate": _cmd_simulate, "estimate": _cmd_estimate,
             "regret-sweep": _cmd_regret_sweep, "cumulative": _cmd_cumulative,
             "pac": _cmd_pac, "hypotheses": _cmd_hypotheses,
             "margin-check": _cmd_margin_check}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="stoplab",
        description="Data-driven optimal stopping experiments")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="TOML config file")
    parser.add_argument("--out", default=None,
                        help="output directory (default $STOPLAB_OUT or ./out)")
    parser.add_argument("--seed", type=int, default=None,
                        help="master seed, overrides [run].seed")
    parser.add_argument("--threads", type=int, default=None)
    args = parser.parse_args(argv)
    out_dir = args.out or os.environ.get("STOPLAB_OUT", "out")
    os.makedirs(out_dir, exist_ok=True)
    t0 = time.time()
    try:
        with open(args.config, "rb") as fh:
            cfg = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        return _fail(out_dir, "ConfigError", f"cannot parse config: {exc}")
    if args.threads:
        try:
            import numba
            numba.set_num_threads(args.threads)
        except (ImportError, ValueError):
            pass
    seed = args.seed if args.seed is not None \
        else int(cfg.get("run", {}).get("seed", 0))
    try:
        outputs = _DISPATCH[args.subcommand](cfg, out_dir, seed)
    except StoplabError as exc:
        return _fail(out_dir, type(exc).__name__, str(exc))
    manifest = {"config_hash": config_hash(cfg), "subcommand": args.subcommand,
                "master_seed": seed, "version": __version__,
                "outputs": sorted(outputs),
                "duration_s": round(time.time() - t0, 3)}
    write_json(os.path.join(out_dir, "manifest.json"), manifest)
    return 0


def _fail(out_dir, kind, message):
    payload = {"error": kind, "message": message}
    try:
        write_json(os.path.join(out_dir, "error.json"), payload)
    except OSError:
        pass
    print(json.dumps(payload), file=sys.stderr)
    return 2 if kind == "ConfigError" else 1


if __name__ == "__main__":
    sys.exit(main())
