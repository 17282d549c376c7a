import numpy as np
import pytest

from stoplab.drifts import (DriftSpec, check_sigma_membership, default_law,
                            eval_drift, invariant_law, make_drift)
from stoplab.errors import GridTooCoarse, OutOfRange


def test_ou_eval():
    spec = DriftSpec.ou(0.5)
    assert eval_drift(spec, 2.0) == -1.0
    np.testing.assert_allclose(eval_drift(spec, np.array([-1.0, 0.0, 3.0])),
                               [0.5, 0.0, -1.5])


def test_piecewise_margin_eval():
    spec = DriftSpec.piecewise_margin(3.0, 0.0)
    assert eval_drift(spec, -1.0) == 1.0
    assert eval_drift(spec, 1.5) == 0.0
    assert eval_drift(spec, 4.0) == -1.0
    # the perturbation reduces the pull on the negative half line
    pert = DriftSpec.piecewise_margin(3.0, 0.1)
    assert eval_drift(pert, -1.0) == pytest.approx(1.1 ** -2)


def test_piecewise_general_eval():
    spec = DriftSpec.piecewise_general(1.0, 1.2, 0.01)
    assert eval_drift(spec, 0.5) == 0.0
    assert eval_drift(spec, 1.1) == pytest.approx(-0.001)
    # beyond A0 the slope is -1 and the bend carries over continuously
    assert eval_drift(spec, 1.2) == pytest.approx(-0.002)
    assert eval_drift(spec, 2.2) == pytest.approx(-1.002)


def test_tabulated_eval_and_range():
    spec = DriftSpec.tabulated([-1.0, 0.0, 1.0], [1.0, 0.0, -1.0])
    assert eval_drift(spec, 0.5) == -0.5
    with pytest.raises(OutOfRange):
        eval_drift(spec, 2.0)


def test_make_drift_unknown():
    with pytest.raises(ValueError):
        make_drift("brownian")


def test_sigma_membership_ou():
    spec = DriftSpec.ou(0.5)
    probe = np.linspace(-8.0, 8.0, 2001)
    assert check_sigma_membership(spec, probe).ok


def test_sigma_membership_needs_wide_probe():
    spec = DriftSpec.ou(0.5)
    with pytest.raises(ValueError):
        check_sigma_membership(spec, np.linspace(-2.0, 2.0, 101))


def test_sigma_membership_flags_outward_drift():
    x = np.linspace(-8.0, 8.0, 401)
    spec = DriftSpec.tabulated(x, 0.5 * x)  # pushes outward everywhere
    report = check_sigma_membership(spec, x)
    assert not report.ok
    assert any(v[0] == "inward_push" for v in report.violations)


def test_invariant_law_ou_is_standard_normal():
    law = default_law(DriftSpec.ou(0.5))
    assert law.density_at(0.0) == pytest.approx(1 / np.sqrt(2 * np.pi),
                                                abs=1e-4)
    assert law.cdf_at(0.0) == pytest.approx(0.5, abs=1e-4)
    assert law.cdf_at(1.0) == pytest.approx(0.841345, abs=1e-3)
    assert law.normalization_error < 1e-10


def test_invariant_law_margin_flat_stretch():
    law = default_law(DriftSpec.piecewise_margin(3.0, 0.0))
    # zero drift on (0, A0] makes the density constant there
    assert law.density_at(0.5) == pytest.approx(law.density_at(2.5), rel=1e-6)


def test_invariant_law_grid_checks():
    spec = DriftSpec.ou(0.5)
    with pytest.raises(GridTooCoarse):
        invariant_law(spec, 30.0, 500)
    with pytest.raises(ValueError):
        invariant_law(spec, 3.0, 2000)
