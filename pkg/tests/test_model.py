import numpy as np
import pytest
from numpy.testing import assert_allclose

from helpers import kron_lyapunov, noise_free_extension, structural_innovations
from gywpanel.errors import NonStationaryError, SingularSystemError
from gywpanel.model import (
    CoefficientSet,
    ModelSpec,
    PanelSeries,
    build_transition,
    draw_stable_spec,
    fitted_values,
    forecast,
    is_stationary,
    population_covariances,
    simulate,
    transition_from,
)
from gywpanel.weights import WeightMatrix, inverse_distance_weights, scenario1_weights

SWAP2 = WeightMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]), "row")


def test_panel_series_validation():
    with pytest.raises(ValueError):
        PanelSeries(values=np.array([1.0, 2.0]))  # 1-d
    with pytest.raises(ValueError):
        PanelSeries(values=np.array([[1.0, np.inf]]))
    with pytest.raises(ValueError):
        PanelSeries(values=np.zeros((2, 3)), names=("a",))
    with pytest.raises(ValueError):
        PanelSeries(values=np.zeros((2, 3)), names=("a", "a"))
    series = PanelSeries(values=np.zeros((3, 4)))
    assert series.names == ("loc1", "loc2", "loc3")
    assert (series.p, series.n) == (3, 4)
    with pytest.raises(ValueError):
        series.values[0, 0] = 1.0


def test_coefficient_set_validation():
    with pytest.raises(ValueError):
        CoefficientSet(lambda0=[0.1], lambda1=[0.1, 0.2], lambda2=[0.1])
    with pytest.raises(ValueError):
        CoefficientSet(lambda0=[np.inf], lambda1=[0.1], lambda2=[0.1])
    incomplete = CoefficientSet(lambda0=[np.nan, 0.1], lambda1=[0.0, 0.0], lambda2=[0.0, 0.0])
    assert not incomplete.is_complete()
    full = CoefficientSet(lambda0=[0.1, 0.2], lambda1=[0.3, 0.4], lambda2=[0.5, 0.6])
    assert full.is_complete()
    assert_allclose(full.as_matrix(), [[0.1, 0.3, 0.5], [0.2, 0.4, 0.6]])
    again = CoefficientSet.from_matrix(full.as_matrix())
    assert np.array_equal(again.lambda1, full.lambda1)


def test_transition_hand_example():
    # S = [[1, -0.5], [0, 1]], D(l1) + D(l2) W = [[0.3, 0], [0.1, 0.2]]
    coeffs = CoefficientSet(lambda0=[0.5, 0.0], lambda1=[0.3, 0.2], lambda2=[0.0, 0.1])
    tr = transition_from(SWAP2, coeffs)
    assert_allclose(tr.s_inverse, [[1.0, 0.5], [0.0, 1.0]], atol=1e-15)
    assert_allclose(tr.a_matrix, [[0.35, 0.1], [0.1, 0.2]], atol=1e-15)
    # symmetric A: eigenvalues 0.275 +- 0.125
    assert abs(tr.spectral_radius - 0.4) < 1e-12
    check = is_stationary(tr)
    assert check.stationary
    assert abs(check.margin - 0.6) < 1e-12


def test_transition_singular_s():
    coeffs = CoefficientSet(lambda0=[1.0, 1.0], lambda1=[0.0, 0.0], lambda2=[0.0, 0.0])
    with pytest.raises(SingularSystemError):
        transition_from(SWAP2, coeffs)
    with pytest.raises(SingularSystemError):
        ModelSpec(weights=SWAP2, coeffs=coeffs, noise_sd=1.0)


def test_model_spec_noise_broadcast_and_validation():
    coeffs = CoefficientSet(lambda0=[0.2, 0.2], lambda1=[0.1, 0.1], lambda2=[0.0, 0.0])
    spec = ModelSpec(weights=SWAP2, coeffs=coeffs, noise_sd=2.0)
    assert_allclose(spec.noise_sd, [2.0, 2.0])
    with pytest.raises(ValueError):
        ModelSpec(weights=SWAP2, coeffs=coeffs, noise_sd=[1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        ModelSpec(weights=SWAP2, coeffs=coeffs, noise_sd=-1.0)
    incomplete = CoefficientSet(lambda0=[np.nan, 0.0], lambda1=[0.0, 0.0], lambda2=[0.0, 0.0])
    with pytest.raises(ValueError):
        ModelSpec(weights=SWAP2, coeffs=incomplete, noise_sd=1.0)


def test_spectral_radius_power_iteration_oracle(w25):
    for seed in (2, 10):
        _, tr, _ = draw_stable_spec(w25, np.random.default_rng(seed))
        x = np.ones(25) / 5.0
        for _ in range(4000):
            y = tr.a_matrix @ x
            x = y / np.linalg.norm(y)
        estimate = abs(x @ tr.a_matrix @ x) / (x @ x)
        assert abs(estimate - tr.spectral_radius) < 1e-8


def test_population_covariances_scalar_ar1():
    w1 = WeightMatrix(np.zeros((1, 1)), "none")
    coeffs = CoefficientSet(lambda0=[0.0], lambda1=[0.5], lambda2=[0.0])
    spec = ModelSpec(weights=w1, coeffs=coeffs, noise_sd=1.0)
    sigma0, sigma1 = population_covariances(spec)
    assert abs(sigma0[0, 0] - 4.0 / 3.0) < 1e-14
    assert abs(sigma1[0, 0] - 2.0 / 3.0) < 1e-14


def test_population_covariances_kronecker_oracle():
    w = inverse_distance_weights(5, tau=3.0)
    spec, tr, _ = draw_stable_spec(w, np.random.default_rng(4))
    sigma0, sigma1 = population_covariances(spec)
    scaled = tr.s_inverse * spec.noise_sd[None, :]
    expected0 = kron_lyapunov(tr.a_matrix, scaled @ scaled.T)
    assert_allclose(sigma0, expected0, rtol=1e-12, atol=1e-13)
    assert_allclose(sigma1, tr.a_matrix @ expected0, rtol=1e-12, atol=1e-13)
    # and the fixed-point property itself
    assert_allclose(tr.a_matrix @ sigma0 @ tr.a_matrix.T + scaled @ scaled.T, sigma0, rtol=1e-12)


def test_population_covariances_need_stationarity():
    coeffs = CoefficientSet(lambda0=[0.0, 0.0], lambda1=[1.05, 1.05], lambda2=[0.0, 0.0])
    spec = ModelSpec(weights=SWAP2, coeffs=coeffs, noise_sd=1.0)
    with pytest.raises(NonStationaryError):
        population_covariances(spec)


def test_simulate_deterministic(spec9):
    a = simulate(spec9, 50, seed=np.random.SeedSequence(5))
    b = simulate(spec9, 50, seed=np.random.SeedSequence(5))
    c = simulate(spec9, 50, seed=np.random.SeedSequence(6))
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)
    assert (a.p, a.n) == (9, 50)


def test_simulate_zero_noise_is_zero(w9):
    coeffs = CoefficientSet(lambda0=np.full(9, 0.2), lambda1=np.full(9, 0.3), lambda2=np.zeros(9))
    spec = ModelSpec(weights=w9, coeffs=coeffs, noise_sd=0.0)
    series = simulate(spec, 20, seed=1)
    assert np.all(series.values == 0.0)


def test_simulate_rejects_unstable_unless_allowed():
    coeffs = CoefficientSet(lambda0=[0.0, 0.0], lambda1=[1.05, 1.05], lambda2=[0.0, 0.0])
    spec = ModelSpec(weights=SWAP2, coeffs=coeffs, noise_sd=1.0)
    with pytest.raises(NonStationaryError):
        simulate(spec, 10, seed=0)
    series = simulate(spec, 10, burn_in=0, seed=0, allow_unstable=True)
    assert np.all(np.isfinite(series.values))


def test_simulate_needs_two_points(spec9):
    with pytest.raises(ValueError):
        simulate(spec9, 1, seed=0)
    with pytest.raises(ValueError):
        simulate(spec9, 10, burn_in=-1, seed=0)


def test_draw_stable_spec_deterministic_and_bounded(w25):
    spec_a, tr_a, redraws_a = draw_stable_spec(w25, np.random.default_rng(123))
    spec_b, tr_b, redraws_b = draw_stable_spec(w25, np.random.default_rng(123))
    assert np.array_equal(spec_a.coeffs.as_matrix(), spec_b.coeffs.as_matrix())
    assert np.array_equal(spec_a.noise_sd, spec_b.noise_sd)
    assert redraws_a == redraws_b >= 0
    assert tr_a.spectral_radius <= 0.95
    assert np.all(np.abs(spec_a.coeffs.as_matrix()) <= 0.6)
    assert np.all((spec_a.noise_sd >= 0.5) & (spec_a.noise_sd <= 1.5))


def test_fitted_values_recover_structural_innovations(spec9, series9):
    fit = fitted_values(series9, spec9.weights, spec9.coeffs)
    eps = structural_innovations(spec9, series9.values)
    assert fit.residuals.values.shape == (9, series9.n - 1)
    assert_allclose(fit.residuals.values, eps, atol=1e-12)
    assert_allclose(fit.fitted.values + fit.residuals.values, series9.values[:, 1:], atol=1e-12)


def test_fitted_values_need_complete_coeffs(series9, w9):
    lam = np.full(9, 0.1)
    broken = lam.copy()
    broken[4] = np.nan
    coeffs = CoefficientSet(lambda0=broken, lambda1=lam, lambda2=lam)
    with pytest.raises(ValueError, match="finite"):
        fitted_values(series9, w9, coeffs)


def test_forecast_matches_iterated_one_step(spec9, series9):
    horizon = 6
    multi = forecast(series9, spec9.weights, spec9.coeffs, horizon)
    rolled = series9.values
    for k in range(horizon):
        step = forecast(PanelSeries(values=rolled), spec9.weights, spec9.coeffs, 1)
        assert_allclose(step[:, 0], multi[:, k], rtol=0, atol=1e-12)
        rolled = np.hstack([rolled, step])


def test_forecast_equals_noise_free_dynamics(spec9, series9):
    extended = noise_free_extension(spec9, series9.values, 4)
    predicted = forecast(series9, spec9.weights, spec9.coeffs, 4)
    assert_allclose(predicted, extended[:, -4:], atol=1e-12)


def test_forecast_warns_when_unstable(series9, w9):
    coeffs = CoefficientSet(
        lambda0=np.zeros(9), lambda1=np.full(9, 1.1), lambda2=np.zeros(9)
    )
    with pytest.warns(RuntimeWarning):
        forecast(series9, w9, coeffs, 2)


def test_build_transition_matches_transition_from(spec9):
    tr = build_transition(spec9)
    direct = transition_from(spec9.weights, spec9.coeffs)
    assert np.array_equal(tr.a_matrix, direct.a_matrix)
    assert tr.spectral_radius == direct.spectral_radius
