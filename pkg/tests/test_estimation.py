import math
from dataclasses import replace

import numpy as np
import pytest

from conftest import REFERENCE_CAVITY, SWEEP_POWERS, TRUTH, noisy_sweep
from opasqueeze.errors import AboveThresholdError, DomainError, IllConditionedError
from opasqueeze.estimation import (
    ANTISQUEEZED,
    SQUEEZED,
    Dataset,
    FitConfig,
    FitResult,
    MeasurementPoint,
    effective_sigma,
    fit,
    jacobian,
    model_prediction,
    parameter_errors,
    residual_vector,
)
from opasqueeze.quadrature import (
    OperatingPoint,
    apply_phase_jitter,
    opa_variance_pair,
    to_db,
)
from opasqueeze.synth import TraceSpec, synth_pump_sweep


def point(p, tag, value=0.0, sigma=0.3, sp=0.0, f=5e6):
    return MeasurementPoint(p, sp, f, tag, value, sigma)


def central_jacobian(params, dataset, domain, sigma=None, rel=1e-6):
    base = np.array([params.efficiency, params.threshold_power, params.phase_jitter])
    cols = []
    for k in range(3):
        h = rel * base[k] if base[k] != 0 else rel
        up, dn = base.copy(), base.copy()
        up[k] += h
        dn[k] -= h
        r_up = residual_vector(_with(params, up), dataset, domain, sigma)
        r_dn = residual_vector(_with(params, dn), dataset, domain, sigma)
        cols.append((r_up - r_dn) / (2 * h))
    return np.column_stack(cols)


def _with(params, v):
    return replace(params, efficiency=v[0], threshold_power=v[1], phase_jitter=v[2])


def max_rel_err(a, b):
    scale = np.maximum(np.abs(b), 1e-6 * np.max(np.abs(b)))
    return float(np.max(np.abs(a - b) / scale))


# model_prediction ---------------------------------------------------------

def test_reference_point_predictions(reference_params):
    sqz = model_prediction(reference_params, point(0.180, SQUEEZED))
    asq = model_prediction(reference_params, point(0.180, ANTISQUEEZED))
    assert sqz == pytest.approx(-12.41, abs=0.005)
    assert asq == pytest.approx(19.79, abs=0.005)


def test_prediction_matches_scalar_composition_exactly(reference_params):
    for p in (0.0, 0.05, 0.180, 0.22):
        pair = apply_phase_jitter(opa_variance_pair(reference_params, OperatingPoint(p, 5e6)),
                                  reference_params.phase_jitter)
        assert model_prediction(reference_params, point(p, SQUEEZED)) == to_db(pair.v1)
        assert model_prediction(reference_params, point(p, ANTISQUEEZED)) == to_db(pair.v2)


def test_unpumped_prediction_is_vacuum(reference_params):
    assert model_prediction(reference_params, point(0.0, SQUEEZED)) == 0.0
    assert model_prediction(reference_params, point(0.0, ANTISQUEEZED)) == 0.0


def test_prediction_above_threshold(reference_params):
    with pytest.raises(AboveThresholdError):
        model_prediction(reference_params, point(0.3, SQUEEZED))


def test_squeezed_prediction_falls_with_efficiency(reference_params):
    lo = replace(reference_params, efficiency=0.96)
    hi = replace(reference_params, efficiency=0.97)
    pt = point(0.18, SQUEEZED)
    assert model_prediction(hi, pt) < model_prediction(lo, pt)


def test_measurement_point_validation():
    with pytest.raises(DomainError):
        point(-1e-3, SQUEEZED)
    with pytest.raises(DomainError):
        point(0.1, SQUEEZED, sigma=0.0)
    with pytest.raises(DomainError):
        point(0.1, "rotated")
    with pytest.raises(DomainError):
        point(0.1, SQUEEZED, f=0.0)


# residuals ------------------------------------------------------------------

def test_residuals_vanish_at_truth(noiseless_sweep):
    r = residual_vector(TRUTH, noiseless_sweep)
    np.testing.assert_allclose(r, 0.0, atol=1e-12)


def test_one_sigma_offset_gives_unit_residual(reference_params):
    truth = model_prediction(reference_params, point(0.1, SQUEEZED))
    ds = Dataset([point(0.1, SQUEEZED, truth + 0.3), point(0.05, ANTISQUEEZED,
                  model_prediction(reference_params, point(0.05, ANTISQUEEZED)))], REFERENCE_CAVITY)
    r = residual_vector(reference_params, ds)
    assert r[0] == pytest.approx(1.0, rel=1e-12)
    assert r[1] == pytest.approx(0.0, abs=1e-12)


def test_zero_pump_sigma_leaves_sigma_unchanged(noiseless_sweep):
    pts = [replace(p, sigma_pump=0.0) for p in noiseless_sweep.points]
    ds = Dataset(pts, REFERENCE_CAVITY)
    np.testing.assert_array_equal(effective_sigma(TRUTH, ds), [p.sigma_db for p in pts])


def test_pump_sigma_inflates_effective_sigma(noiseless_sweep):
    sig = effective_sigma(TRUTH, noiseless_sweep)
    raw = np.array([p.sigma_db for p in noiseless_sweep.points])
    assert np.all(sig >= raw)
    assert np.any(sig > raw)


# jacobian -------------------------------------------------------------------

@pytest.mark.parametrize("domain", ["db", "linear"])
def test_jacobian_matches_finite_differences(domain):
    ds = noisy_sweep(3)
    params = replace(TRUTH, efficiency=0.95, threshold_power=0.25, phase_jitter=math.radians(1.1))
    sigma = effective_sigma(params, ds, domain)
    frozen = jacobian(params, ds, domain)
    assert max_rel_err(frozen, central_jacobian(params, ds, domain, sigma)) < 1e-5
    full = jacobian(params, ds, domain, frozen_weights=False)
    assert max_rel_err(full, central_jacobian(params, ds, domain)) < 1e-5


def test_jacobian_at_reference_point(reference_params):
    ds = Dataset([point(0.18, SQUEEZED, -12.0, sp=0.0054), point(0.18, ANTISQUEEZED, 19.5, sp=0.0054)],
                 REFERENCE_CAVITY)
    assert max_rel_err(jacobian(reference_params, ds, frozen_weights=False),
                       central_jacobian(reference_params, ds, "db")) < 1e-5


def test_phase_derivative_vanishes_without_jitter(reference_params):
    params = replace(reference_params, phase_jitter=0.0)
    ds = Dataset([point(0.18, SQUEEZED, -13.0), point(0.1, ANTISQUEEZED, 12.0)], REFERENCE_CAVITY)
    assert jacobian(params, ds)[0, 2] == 0.0


def test_efficiency_derivative_sign(reference_params):
    ds = Dataset([point(0.18, SQUEEZED, -12.0), point(0.1, SQUEEZED, -10.0)], REFERENCE_CAVITY)
    # residual = obs - model, and model falls with eta
    assert np.all(jacobian(reference_params, ds)[:, 0] > 0)


# fitting --------------------------------------------------------------------

def _rel(res, truth=TRUTH):
    got = np.array([res.params.efficiency, res.params.threshold_power, res.params.phase_jitter])
    ref = np.array([truth.efficiency, truth.threshold_power, truth.phase_jitter])
    return np.abs(got / ref - 1)


@pytest.mark.parametrize("domain", ["db", "linear"])
def test_noiseless_recovery(noiseless_sweep, domain):
    res = fit(noiseless_sweep, FitConfig(residual_domain=domain))
    assert res.converged
    assert np.all(_rel(res) < 1e-6)


def test_noisy_fit_converges_with_sensible_errors():
    res = fit(noisy_sweep(7))
    assert res.converged
    assert res.dof == 24 - 3
    assert np.all(np.linalg.eigvalsh(res.covariance) >= -1e-18)
    np.testing.assert_allclose(res.std_errors, np.sqrt(np.diag(res.covariance)))
    np.testing.assert_allclose(res.covariance, res.covariance_unscaled * res.chi_squared / res.dof)
    assert res.std_errors[0] < 0.02
    assert res.std_errors[1] < 0.02


def test_chi_squared_never_increases():
    res = fit(noisy_sweep(11))
    hist = np.array(res.chi2_history)
    assert np.all(np.diff(hist) <= 0)


def test_fit_invariant_under_reordering():
    ds = noisy_sweep(5)
    perm = np.random.default_rng(0).permutation(len(ds))
    shuffled = Dataset([ds.points[i] for i in perm], ds.cavity)
    a, b = fit(ds), fit(shuffled)
    np.testing.assert_allclose(
        [a.params.efficiency, a.params.threshold_power, a.params.phase_jitter],
        [b.params.efficiency, b.params.threshold_power, b.params.phase_jitter], rtol=1e-7)


def test_pump_rescaling_scales_threshold_only():
    ds = noisy_sweep(9)
    k = 3.5
    scaled = Dataset([replace(p, pump_power=k * p.pump_power, sigma_pump=k * p.sigma_pump)
                      for p in ds.points], ds.cavity)
    a = fit(ds)
    b = fit(scaled)
    assert b.params.threshold_power == pytest.approx(k * a.params.threshold_power, rel=1e-7)
    assert b.params.efficiency == pytest.approx(a.params.efficiency, rel=1e-7)
    assert b.params.phase_jitter == pytest.approx(a.params.phase_jitter, rel=1e-6)


def test_two_parameter_fit_without_jitter():
    truth = replace(TRUTH, phase_jitter=0.0)
    ds = synth_pump_sweep(truth, SWEEP_POWERS, 5e6, TraceSpec(relative_scatter=0.0))
    two = fit(ds, FitConfig(fixed={"phase_jitter": 0.0}))
    assert two.free == ("efficiency", "threshold_power")
    assert two.params.efficiency == pytest.approx(0.965, rel=1e-6)
    assert two.params.threshold_power == pytest.approx(0.221, rel=1e-6)
    assert two.std_errors[2] == 0.0
    three = fit(ds)
    assert three.chi_squared <= two.chi_squared + 1e-20


def test_third_parameter_never_worsens_chi_squared():
    ds = synth_pump_sweep(replace(TRUTH, phase_jitter=0.0), SWEEP_POWERS, 5e6, TraceSpec(seed=4))
    two = fit(ds, FitConfig(fixed={"phase_jitter": 0.0}))
    three = fit(ds)
    assert three.chi_squared <= two.chi_squared * (1 + 1e-9)


def test_vacuum_data_drives_efficiency_to_zero():
    pts = [point(p, tag, 0.0) for p in (0.02, 0.06, 0.1, 0.14) for tag in (SQUEEZED, ANTISQUEEZED)]
    res = fit(Dataset(pts, REFERENCE_CAVITY))
    assert res.params.efficiency < 1e-6
    assert "efficiency" in res.at_bound


@pytest.mark.parametrize("pts", [
    [],
    [point(0.1, SQUEEZED, -5.0)] * 6,
    [point(0.1, SQUEEZED, -5.0), point(0.05, ANTISQUEEZED, 5.0), point(0.02, SQUEEZED, -1.0)],
    [point(0.0, SQUEEZED), point(0.0, ANTISQUEEZED)] * 3,
])
def test_degenerate_datasets(pts):
    with pytest.raises(IllConditionedError):
        fit(Dataset(pts, REFERENCE_CAVITY))


def test_fixed_threshold_below_data_rejected(noiseless_sweep):
    with pytest.raises(AboveThresholdError):
        fit(noiseless_sweep, FitConfig(fixed={"threshold_power": 0.1}))


def test_fit_config_validation():
    with pytest.raises(DomainError):
        FitConfig(residual_domain="log")
    with pytest.raises(DomainError):
        FitConfig(fixed={"gain": 1.0})


def test_iteration_cap_flags_non_convergence():
    res = fit(noisy_sweep(2), FitConfig(max_iterations=1))
    assert not res.converged
    assert res.iterations == 1
    with pytest.raises(DomainError):
        parameter_errors(res)


# parameter_errors -----------------------------------------------------------

def _result(cov):
    return FitResult(TRUTH, np.asarray(cov, float), np.zeros(3), 1.0, 1, True, 1)


def test_parameter_errors_identity():
    np.testing.assert_array_equal(parameter_errors(_result(np.eye(3))), [1, 1, 1])


def test_parameter_errors_diagonal():
    np.testing.assert_allclose(parameter_errors(_result(np.diag([4e-6, 9e-6, 1e-6]))),
                               [2e-3, 3e-3, 1e-3], rtol=1e-12)


@pytest.mark.slow
def test_monte_carlo_spread_matches_reported_errors():
    fits = [fit(noisy_sweep(s)) for s in range(100)]
    est = np.array([[f.params.efficiency, f.params.threshold_power, f.params.phase_jitter]
                    for f in fits])
    reported = np.median([f.std_errors for f in fits], axis=0)
    spread = est.std(axis=0, ddof=1)
    ratio = spread / reported
    assert np.all(ratio > 1 / 1.5) and np.all(ratio < 1.5), ratio
