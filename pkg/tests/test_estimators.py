import numpy as np
import pytest

from stoplab.drifts import DriftSpec
from stoplab.errors import EmptyWindow
from stoplab.estimators import (Kernel, XiEstimate, barrier_grid,
                                cdf_estimate, cdf_on_grid, density_estimate,
                                density_on_grid, estimate_barrier, xi_hat)
from stoplab.payoffs import PayoffSpec
from stoplab.sde import DiffusionPath, simulate_path


def _toy_path(samples, dt=0.01):
    samples = np.asarray(samples, dtype=float)
    return DiffusionPath(dt=dt, samples=samples, T=dt * (samples.size - 1),
                         seed=0, x0=float(samples[0]))


@pytest.mark.parametrize("shape", ["epanechnikov", "uniform", "triangular"])
def test_kernel_unit_mass(shape):
    u = np.linspace(-1.5, 1.5, 30001)
    k = Kernel(shape)
    assert np.trapezoid(k.eval(u), u) == pytest.approx(1.0, abs=1e-4)
    assert np.all(k.eval(np.array([-1.2, 1.2])) == 0.0)


def test_kernel_unknown_shape():
    with pytest.raises(ValueError):
        Kernel("gaussian")


@pytest.mark.parametrize("shape", ["epanechnikov", "uniform", "triangular"])
def test_density_matches_naive_sum(shape):
    rng = np.random.default_rng(1)
    path = _toy_path(rng.standard_normal(2001))
    k = Kernel(shape)
    xs = np.linspace(-2.0, 2.0, 17)
    h = path.T ** -0.5
    weights = path.samples[:-1]
    naive = np.array([
        np.sum(k.eval((x - weights) / h)) * path.dt / (path.T * h)
        for x in xs])
    np.testing.assert_allclose(density_on_grid(path, k, xs), naive,
                               rtol=1e-10, atol=1e-12)
    assert density_estimate(path, k, 0.5) == pytest.approx(naive[10])


def test_density_integrates_to_one():
    path = simulate_path(DriftSpec.ou(0.5), 200.0, 0.01, 0.0, seed=2)
    xs = np.linspace(-6.0, 6.0, 4001)
    total = np.trapezoid(density_on_grid(path, Kernel(), xs), xs)
    assert total == pytest.approx(1.0, abs=1e-3)


def test_cdf_strictly_below():
    path = _toy_path([0.0, 1.0, 1.0, 2.0, 3.0])  # last sample carries no time
    # time fraction strictly below 1.0 is 1/4 (only the sample at 0.0)
    assert cdf_estimate(path, 1.0) == pytest.approx(0.25)
    assert cdf_estimate(path, 1.0001) == pytest.approx(0.75)
    np.testing.assert_allclose(cdf_on_grid(path, np.array([0.0, 5.0])),
                               [0.0, 1.0])


def test_xi_hat_clamp_and_monotonicity():
    path = simulate_path(DriftSpec.ou(0.5), 100.0, 0.01, 0.0, seed=3)
    grid = barrier_grid(0.2, 2.0)
    est = xi_hat(path, Kernel(), grid, floor_a=0.02, clamp_M1=0.3)
    assert est.xi_values[0] == pytest.approx(0.15)  # clamp binds at 0
    assert np.all(np.diff(est.xi_values) >= 0)
    assert est.T == pytest.approx(100.0)


def test_xi_hat_validation():
    path = simulate_path(DriftSpec.ou(0.5), 10.0, 0.01, 0.0, seed=3)
    with pytest.raises(ValueError):
        xi_hat(path, Kernel(), np.linspace(0.1, 2.0, 100), 0.02, 0.3)
    with pytest.raises(ValueError):
        xi_hat(path, Kernel(), barrier_grid(0.2, 2.0), -1.0, 0.3)


def test_barrier_grid_resolution():
    grid = barrier_grid(0.2, 2.0)
    assert grid[0] == 0.0
    assert grid[-1] == pytest.approx(2.0)
    assert np.max(np.diff(grid)) <= 1e-3


def test_estimate_barrier_smallest_tie():
    grid = np.linspace(0.0, 2.0, 201)
    est = XiEstimate(grid=grid, xi_values=np.ones_like(grid), floor_a=0.01,
                     clamp_M1=0.01, T=10.0)
    pg = np.linspace(0.01, 2.0, 500)
    vals = np.where((np.abs(pg - 0.5) < 0.05) | (np.abs(pg - 1.5) < 0.05),
                    1.0, 0.1)
    payoff = PayoffSpec.tabulated(pg, vals, y1=0.2, zeta=2.0)
    res = estimate_barrier(est, payoff, 0.2, 2.0)
    assert res["y_hat"] < 1.0  # smallest of the two tied maximizers


def test_estimate_barrier_empty_window():
    grid = np.linspace(0.0, 2.0, 21)
    est = XiEstimate(grid=grid, xi_values=np.ones_like(grid), floor_a=0.01,
                     clamp_M1=0.01, T=10.0)
    payoff = PayoffSpec.tabulated([0.01, 2.0], [1.0, 1.0], y1=0.2, zeta=2.0)
    with pytest.raises(EmptyWindow):
        estimate_barrier(est, payoff, 1.001, 1.099)
