import numpy as np
import pytest
from numpy.testing import assert_allclose

from helpers import constant_spec, population_pair
from gywpanel.errors import SingularSystemError
from gywpanel.inference import (
    _bootstrap_statistics,
    homogeneity_test,
    pooled_estimate,
    pooled_from_covariances,
)
from gywpanel.model import PanelSeries, draw_stable_spec, simulate
from gywpanel.weights import WeightMatrix


def test_pooled_exact_on_population_under_homogeneity():
    rng = np.random.default_rng(8)
    raw = np.abs(rng.standard_normal((5, 5))) + 0.1
    np.fill_diagonal(raw, 0.0)
    w5 = WeightMatrix(raw / raw.sum(axis=1, keepdims=True), "row")
    triple = (0.3, 0.25, -0.15)
    spec = constant_spec(w5, triple, noise_sd=1.0)
    pooled = pooled_from_covariances(population_pair(spec), w5)
    assert_allclose(pooled, triple, atol=1e-10)


def test_pooled_degenerate_under_complete_graph_blocks(w25):
    # the 5x5 districts of the block design are complete graphs, so
    # w_i = (1_B - e_i)/4; summing each block's moment equations under
    # one shared triple ties Sigma1' 1_B to Sigma0 1_B and makes the
    # first design column a fixed combination of the other two at every
    # location.  The population-stacked system is rank 2 whatever the
    # noise, and the pooled solve must refuse it.
    spec = constant_spec(w25, (0.3, 0.25, -0.15), noise_sd=np.linspace(0.6, 1.4, 25))
    with pytest.raises(SingularSystemError):
        pooled_from_covariances(population_pair(spec), w25)


def test_pooled_rank_deficiency():
    # W = 0 kills the first and third design columns
    w0 = WeightMatrix(np.zeros((3, 3)), "none")
    spec = constant_spec(
        WeightMatrix(np.array([[0.0, 1.0, 0], [1.0, 0, 0], [0, 1.0, 0]]), "row"),
        (0.0, 0.4, 0.0),
    )
    series = simulate(spec, 200, seed=9)
    with pytest.raises(SingularSystemError):
        pooled_estimate(series, w0)


def test_bootstrap_zero_residuals_give_zero_statistics():
    rng = np.random.default_rng(7)
    regressors = rng.standard_normal((3, 5, 40))
    pooled_fit = 0.2 * regressors[0] - 0.1 * regressors[1] + 0.4 * regressors[2]
    stats = _bootstrap_statistics(
        pooled_fit, regressors, np.zeros((5, 40)), replicates=50, seed=1
    )
    assert np.all(np.abs(stats) < 1e-12)


def test_homogeneity_report_is_deterministic(w9, series9):
    a = homogeneity_test(series9, w9, replicates=100, seed=42)
    b = homogeneity_test(series9, w9, replicates=100, seed=42)
    c = homogeneity_test(series9, w9, replicates=100, seed=43)
    assert np.array_equal(a.u_bootstrap, b.u_bootstrap)
    assert a.p_value == b.p_value
    assert a.u_observed == b.u_observed
    assert not np.array_equal(a.u_bootstrap, c.u_bootstrap)


def test_homogeneity_p_value_is_exact_count(w9, series9):
    report = homogeneity_test(series9, w9, replicates=100, seed=4)
    recount = np.count_nonzero(report.u_bootstrap > report.u_observed) / 100
    assert report.p_value == recount
    assert 0.0 <= report.p_value <= 1.0
    assert report.u_observed > 0.0
    assert report.replicates == 100
    assert report.u_bootstrap.shape == (100,)
    with pytest.raises(ValueError):
        report.u_bootstrap[0] = -1.0


def test_homogeneity_rejects_heterogeneous_panel(w25):
    spec, _, _ = draw_stable_spec(w25, np.random.default_rng(61))
    series = simulate(spec, 300, seed=62)
    report = homogeneity_test(series, w25, replicates=200, seed=63)
    assert report.p_value < 0.05


def test_homogeneity_accepts_homogeneous_panel(w25):
    spec = constant_spec(w25, (0.25, 0.3, -0.2), noise_sd=1.0)
    series = simulate(spec, 300, seed=64)
    report = homogeneity_test(series, w25, replicates=200, seed=65)
    assert report.p_value > 0.05


def test_homogeneity_guards(w9, series9):
    with pytest.raises(ValueError):
        homogeneity_test(series9, w9, replicates=50, seed=0)
    flat = PanelSeries(values=np.ones((9, 100)))
    with pytest.raises(SingularSystemError):
        homogeneity_test(flat, w9, replicates=100, seed=0)
