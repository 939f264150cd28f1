import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpol.channels import Scenario
from qpol.errors import UnsupportedScenarioError
from qpol.estimators import (
    GRID_POINTS,
    SWEEP_COLUMNS,
    AngleEstimate,
    EstimatorKind,
    alpha_hat_1,
    alpha_hat_2,
    bias_sweep,
    bias_variance,
    check_alpha1_scenario,
    estimate,
    fidelity_landscape,
    run_trial,
    trial_seed,
)
from qpol.noise import NoiseConfig, apply_dark_counts
from qpol.qmath import fidelity

LP_NL = Scenario("lp", "nonlocal")
QWP_NL = Scenario("qwp", "nonlocal")
LP_L = Scenario("lp", "local")
QWP_L = Scenario("qwp", "local")
INFORMATIVE = (LP_NL, QWP_NL, LP_L)
A37 = math.radians(37)
GRID_5 = np.radians(np.arange(5, 90, 5))


def identifiable(sc, alpha):
    # the element-ratio QWP estimator sees cos^2(2 alpha), which folds at 45 deg
    return sc is not QWP_NL or alpha <= math.pi / 4 + 1e-12


def test_alpha1_substitution_examples():
    import sympy as sp

    a = sp.symbols("a", real=True)
    A, B, C = sp.sin(a) * sp.cos(a), sp.sin(a) ** 2, sp.cos(a) ** 2
    # nonlocal LP: rho11 / rho22 = A^2 / C^2 = tan^2 a
    assert sp.simplify(A**2 / C**2 - sp.tan(a) ** 2) == 0
    # local LP: rho11 = sin^2 a, rho22 = cos^2 a
    assert sp.simplify(B / C - sp.tan(a) ** 2) == 0
    # nonlocal QWP: 2 (rho33 - rho44) = cos^2 2a
    rho33 = sp.Abs(C + sp.I * B) ** 2 / 2
    rho44 = sp.Abs((sp.I - 1) * A) ** 2 / 2
    assert sp.simplify(sp.trigsimp(sp.expand_complex(2 * (rho33 - rho44)) - sp.cos(2 * a) ** 2)) == 0
    for sc in INFORMATIVE:
        est = alpha_hat_1(sc.ideal_output(A37), sc)
        assert est.alpha == pytest.approx(A37, abs=1e-10)
        assert est.flags() == []


def test_alpha1_qwp_folds_above_45():
    est = alpha_hat_1(QWP_NL.ideal_output(math.radians(60)), QWP_NL)
    assert est.degrees == pytest.approx(30.0, abs=1e-8)


def test_alpha1_refusals():
    with pytest.raises(UnsupportedScenarioError, match="zero quantum Fisher information"):
        alpha_hat_1(np.eye(2) / 2, QWP_L)
    with pytest.raises(UnsupportedScenarioError):
        check_alpha1_scenario(Scenario("lp", "local", "superposition"))


def test_alpha1_limit_flag():
    est = alpha_hat_1(LP_NL.ideal_output(math.pi / 2), LP_NL)
    assert est.alpha == pytest.approx(math.pi / 2) and est.limit


def test_alpha1_clamp_flag():
    rho = np.diag([0.0, 0.0, 0.9, 0.1]).astype(complex)
    est = alpha_hat_1(rho, QWP_NL)
    assert est.clamped and est.alpha == 0.0


def test_alpha2_examples():
    est = alpha_hat_2(QWP_NL.ideal_output(A37), QWP_NL)
    assert est.alpha == pytest.approx(A37, abs=1e-4)
    flat = alpha_hat_2(np.eye(2) / 2, QWP_L)
    assert flat.no_information and flat.alpha == 0.0
    noisy = apply_dark_counts(LP_NL.ideal_output(A37), 0.9)
    assert alpha_hat_2(noisy, LP_NL).alpha == pytest.approx(A37, abs=1e-3)


@pytest.mark.parametrize("sc", INFORMATIVE, ids=lambda s: s.name)
@pytest.mark.parametrize("alpha", GRID_5, ids=lambda a: f"{math.degrees(a):.0f}")
def test_estimators_agree_on_ideal_outputs(sc, alpha):
    rho = sc.ideal_output(alpha)
    a2 = alpha_hat_2(rho, sc)
    assert a2.alpha == pytest.approx(alpha, abs=1e-4)
    if identifiable(sc, alpha):
        a1 = alpha_hat_1(rho, sc)
        assert not a1.clamped
        assert abs(a1.alpha - a2.alpha) <= 1e-4


@settings(max_examples=30, deadline=None)
@given(st.floats(0, math.pi / 2), st.sampled_from(INFORMATIVE), st.floats(0.3, 1.0))
def test_alpha2_is_grid_global_max_and_in_range(alpha, sc, q2):
    rho = apply_dark_counts(sc.ideal_output(alpha) if alpha < math.pi / 2 - 1e-9 or sc is QWP_NL else sc.ideal_output(alpha - 1e-3), q2)
    est = alpha_hat_2(rho, sc)
    assert 0.0 <= est.alpha <= math.pi / 2
    _, land = fidelity_landscape(rho, sc)
    assert fidelity(rho, sc.ideal_output(est.alpha)) >= land.max() - 1e-12
    a1 = alpha_hat_1(rho, sc)
    assert 0.0 <= a1.alpha <= math.pi / 2


def test_landscape_grid():
    grid, fids = fidelity_landscape(LP_NL.ideal_output(A37), LP_NL)
    assert len(grid) == GRID_POINTS
    assert grid[1] - grid[0] == pytest.approx(math.radians(0.05))


def test_estimate_dispatch_and_kind():
    rho = LP_NL.ideal_output(A37)
    assert estimate(rho, LP_NL, "alpha1").estimator == "alpha1"
    assert estimate(rho, LP_NL, EstimatorKind.ALPHA2).estimator == "alpha2"
    with pytest.raises(ValueError):
        EstimatorKind.parse("alpha3")
    est = AngleEstimate(A37, "alpha1")
    assert float(est) == A37 and est.degrees == pytest.approx(37.0)


def test_bias_variance_examples():
    rep = bias_variance([A37] * 5, A37)
    assert rep.bias == 0 and rep.variance == 0
    rep = bias_variance([math.radians(36), math.radians(38)], A37)
    assert rep.bias_deg == pytest.approx(0.0, abs=1e-12)
    assert rep.variance_deg2 == pytest.approx(2.0)
    rho = QWP_NL.ideal_output(A37)
    rep = bias_variance([alpha_hat_2(rho, QWP_NL) for _ in range(10)], A37)
    assert rep.variance <= 1e-20
    with pytest.raises(ValueError):
        bias_variance([A37], A37)


def test_run_trial_reproducible():
    cfg = NoiseConfig.standard(0.1, seed=5)
    a = run_trial(LP_NL, A37, cfg, ("alpha1", "alpha2"), trial_seed(5, 0))
    b = run_trial(LP_NL, A37, cfg, ("alpha1", "alpha2"), trial_seed(5, 0))
    assert a == b


def test_sweep_noiseless_row_and_columns():
    cfg = NoiseConfig.noiseless(seed=3)
    res = bias_sweep(LP_NL, ["alpha1", "alpha2"], [0.0, 0.3], cfg, trials=4)
    assert len(res.rows) == 4
    for row in res.rows:
        for col in SWEEP_COLUMNS:
            assert hasattr(row, col)
    zero = [r for r in res.rows if r.q == 0.0]
    assert all(r.mean_abs_bias_deg <= 0.05 for r in zero)
    assert all(r.var_deg2 >= 0 for r in res.rows)
    assert res.trend("alpha1") == pytest.approx(1.0)
    assert res.trend("nope") != res.trend("nope")
    assert res.estimates[(0.3, "alpha1")].shape == (4,)


def test_sweep_independent_of_jobs():
    cfg = NoiseConfig.standard(0.0, seed=8)
    a = bias_sweep(LP_L, ["alpha1"], [0.0, 0.2], cfg, trials=3)
    b = bias_sweep(LP_L, ["alpha1"], [0.0, 0.2], cfg, trials=3, jobs=2)
    assert a.rows == b.rows


def test_sweep_validation():
    cfg = NoiseConfig.standard(0.0)
    with pytest.raises(ValueError):
        bias_sweep(LP_NL, ["alpha1"], [1.5], cfg, trials=2)
    with pytest.raises(ValueError):
        bias_sweep(LP_NL, ["alpha1"], [0.1], cfg, trials=0)
    with pytest.raises(UnsupportedScenarioError):
        bias_sweep(QWP_L, ["alpha1"], [0.1], cfg, trials=2)


def test_sweep_alpha2_on_local_qwp_reports_no_information():
    cfg = NoiseConfig.standard(0.0, seed=1)
    res = bias_sweep(QWP_L, ["alpha2"], [0.0], cfg, trials=2)
    # estimator returns 0 for a flat landscape, hence |bias| = 37 deg
    assert res.rows[0].mean_abs_bias_deg == pytest.approx(37.0, abs=1.0)


def test_sweep_reference_noise_zero_strength_is_statistical_only():
    # Poisson counting and misalignment remain at q = 0
    res = bias_sweep(LP_NL, ["alpha1", "alpha2"], [0.0], NoiseConfig.standard(0.0, seed=3), trials=20)
    for row in res.rows:
        se = math.sqrt(row.var_deg2 / row.trial_count)
        assert row.mean_abs_bias_deg <= 3 * se
