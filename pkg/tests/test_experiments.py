import math

import numpy as np
import pytest

from stoplab.drifts import DriftSpec, default_law
from stoplab.errors import BadParameters, DegenerateDesign, TooFewRecords
from stoplab.experiments import (CumulativeRecord, ExperimentConfig,
                                 RegretRecord, default_estimator_constants,
                                 empirical_pac_check, exploration_budget,
                                 fit_rate_slope, pac_bounds,
                                 run_exploration_exploitation,
                                 run_simple_regret_sweep, summarize_by_T)
from stoplab.oracle import xi_curve
from stoplab.payoffs import PayoffSpec


@pytest.fixture(scope="module")
def ou_setup():
    drift = DriftSpec.ou(0.5)
    law = default_law(drift)
    return drift, xi_curve(law), law


def _small_config(drift, xi_fn, **kwargs):
    payoffs = {0.5: PayoffSpec.sim_tent(0.5, xi_fn)}
    defaults = dict(T_grid=(20.0, 55.0, 150.0, 400.0), replications=3,
                    master_seed=17)
    defaults.update(kwargs)
    return ExperimentConfig(drift, payoffs, **defaults)


def test_config_validation(ou_setup):
    drift, xi_fn, _ = ou_setup
    with pytest.raises(ValueError):
        _small_config(drift, xi_fn, T_grid=())
    with pytest.raises(ValueError):
        _small_config(drift, xi_fn, dt=0.2)
    with pytest.raises(ValueError):
        _small_config(drift, xi_fn, replications=0)


def test_default_estimator_constants(ou_setup):
    drift, xi_fn, law = ou_setup
    floor_a, M1 = default_estimator_constants(drift, 0.2, 2.0, law)
    # half the minimal density on [0, zeta] and half xi(y1)
    assert floor_a == pytest.approx(0.5 * law.density_at(2.0), rel=1e-3)
    assert M1 == pytest.approx(0.5 * xi_fn(np.atleast_1d(0.2))[0], rel=1e-6)


def test_sweep_determinism_and_validity(ou_setup):
    drift, xi_fn, _ = ou_setup
    config = _small_config(drift, xi_fn)
    a = run_simple_regret_sweep(config)
    b = run_simple_regret_sweep(config)
    assert a == b
    assert len(a) == 4 * 3
    for r in a:
        assert not r.error
        assert r.regret >= 0.0
        assert 0.2 <= r.y_hat <= 2.0


def test_sweep_mean_regret_decreases(ou_setup):
    drift, xi_fn, _ = ou_setup
    config = _small_config(drift, xi_fn, T_grid=(20.0, 1100.0),
                           replications=8)
    rows = summarize_by_T(run_simple_regret_sweep(config))
    assert rows[-1]["mean"] < rows[0]["mean"] + rows[0]["stderr"]


def test_fit_rate_slope_synthetic_power_law():
    records = [RegretRecord(T, 0.5, 0, 1.0, 1.0 / T, 0)
               for T in (10.0, 100.0, 1000.0, 10000.0)]
    fit = fit_rate_slope(records)
    assert fit["slope"] == pytest.approx(-1.0, abs=1e-12)
    assert fit["r2"] == pytest.approx(1.0)
    assert not fit["zero_floored"]


def test_fit_rate_slope_exponential_vs_T():
    records = [RegretRecord(T, 1.0, 0, 1.0, math.exp(-0.01 * T), 0)
               for T in (100.0, 200.0, 300.0, 400.0)]
    fit = fit_rate_slope(records, x_axis="T")
    assert fit["slope"] == pytest.approx(-0.01, abs=1e-12)


def test_fit_rate_slope_degenerate():
    records = [RegretRecord(T, 0.5, 0, 1.0, 1.0 / T, 0)
               for T in (10.0, 100.0, 1000.0)]
    with pytest.raises(DegenerateDesign):
        fit_rate_slope(records)


def test_pac_bounds_reference_value():
    res = pac_bounds(0.5, 0.1, math.exp(-1.0), C1=1.0)
    assert res["T_margin"] == pytest.approx(80.0 * math.e, rel=1e-12)


def test_pac_bounds_beta_above_one_log_dependence():
    delta = math.exp(-1.0)
    t1 = pac_bounds(1.5, 0.1, delta)["T_margin"]
    t2 = pac_bounds(1.5, 0.05, delta)["T_margin"]
    per_unit = 4.0 / math.log(2.0) * math.log(2.0 / delta)
    assert t2 - t1 == pytest.approx(per_unit * math.log(2.0), rel=1e-12)


def test_pac_bounds_monotone_and_psi():
    res = pac_bounds(0.5, 0.1, 0.1)
    assert res["T_margin"] < pac_bounds(0.5, 0.05, 0.1)["T_margin"]
    assert res["T_margin"] < pac_bounds(0.5, 0.1, 0.01)["T_margin"]
    psi = res["psi"]
    assert psi(0.5, 1e8, 1.0) < psi(0.5, 1e4, 1.0)
    assert psi(0.5, 1e12, 1.0) < 1e-4
    with pytest.raises(BadParameters):
        psi(1.5, 1e4, 1.0)


def test_pac_bounds_validation():
    with pytest.raises(BadParameters):
        pac_bounds(0.5, 1.5, 0.1)
    with pytest.raises(BadParameters):
        pac_bounds(0.5, 0.1, 0.9)  # delta must be <= 1/e


def test_empirical_pac_check():
    records = [RegretRecord(10.0, 0.5, i, 1.0, 0.0, i) for i in range(60)]
    assert empirical_pac_check(records, 0.1)["freq"] == 0.0
    records[0].regret = 1.0
    assert empirical_pac_check(records, 0.5)["freq"] == pytest.approx(1 / 60)
    with pytest.raises(TooFewRecords):
        empirical_pac_check(records[:10], 0.1)


def test_exploration_budget_exponents():
    assert exploration_budget(16.0, "margin", 0.5) == pytest.approx(4.0)
    assert exploration_budget(16.0, "general", 0.5) == pytest.approx(4.0)
    assert exploration_budget(16.0, "margin", 0.75) == pytest.approx(
        16.0 ** (0.5 / 1.5))
    with pytest.raises(ValueError):
        exploration_budget(16.0, "ucb", 0.5)


def test_exploration_exploitation_run(ou_setup):
    drift, xi_fn, _ = ou_setup
    config = _small_config(drift, xi_fn, T_grid=(60.0, 160.0),
                           replications=2)
    records = run_exploration_exploitation(config)
    assert len(records) == 4
    again = run_exploration_exploitation(config)
    assert records == again
    for r in records:
        assert isinstance(r, CumulativeRecord)
        assert 0.0 < r.exploration_time <= r.T
        assert r.n_cycles > 0
        assert math.isfinite(r.regret_cum)
    # exploration stays close to the schedule budget (one block of slack)
    for r in records:
        budget = exploration_budget(r.T, "margin", 0.5)
        assert r.exploration_time <= budget + 2 * config.block_len
