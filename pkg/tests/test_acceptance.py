"""End-to-end acceptance checks for the package's advertised guarantees.

One test per numbered criterion, each asserting the documented tolerance
and runtime budget on fixed seeds.  Heavy Monte Carlo studies are built
once in module fixtures together with their wall-clock build time, so
the runtime assertions measure the actual work.
"""

import json
import time

import numpy as np
import pytest
from helpers import constant_spec, noise_free_extension, population_pair

from gywpanel.cli import main
from gywpanel.covariance import sample_autocov
from gywpanel.estimator import gyw_estimate, gyw_estimate_from_covariances, restricted_estimate
from gywpanel.evaluation import ExperimentConfig, out_of_sample_eval, run_experiment
from gywpanel.inference import homogeneity_test
from gywpanel.io import write_json
from gywpanel.model import (
    PanelSeries,
    build_transition,
    draw_stable_spec,
    forecast,
    population_covariances,
    simulate,
)
from gywpanel.weights import scenario1_weights

W25 = scenario1_weights(25)


def _timed_experiment(**kwargs):
    start = time.perf_counter()
    result = run_experiment(ExperimentConfig(**kwargs))
    return result, time.perf_counter() - start


@pytest.fixture(scope="module")
def convergence_study():
    return _timed_experiment(
        scenario="scenario1",
        p_grid=(25,),
        n_grid=(100, 250, 500, 1000),
        replications=100,
        seed=520301,
        estimators=("full", "restricted"),
    )


@pytest.fixture(scope="module")
def dimension_study_scenario1():
    return _timed_experiment(
        scenario="scenario1",
        p_grid=(25, 100, 529),
        n_grid=(500,),
        replications=50,
        seed=520401,
        estimators=("full",),
    )


@pytest.fixture(scope="module")
def dimension_study_scenario2():
    return _timed_experiment(
        scenario="scenario2",
        p_grid=(25, 100, 529),
        n_grid=(500,),
        replications=50,
        seed=520402,
        estimators=("full",),
    )


@pytest.fixture(scope="module")
def ridge_study():
    return _timed_experiment(
        scenario="scenario1",
        p_grid=(529,),
        n_grid=(500,),
        replications=50,
        seed=520501,
        estimators=("restricted", "restricted_ridge"),
    )


def test_criterion_1_population_exactness():
    start = time.perf_counter()
    worst = 0.0
    for p in (9, 25):
        weights = scenario1_weights(p)
        for k in range(10):
            rng = np.random.default_rng(np.random.SeedSequence([520101, p, k]))
            spec, _, _ = draw_stable_spec(weights, rng)
            report = gyw_estimate_from_covariances(population_pair(spec), weights)
            assert not report.failures
            for est, true in (
                (report.coeffs.lambda0, spec.coeffs.lambda0),
                (report.coeffs.lambda1, spec.coeffs.lambda1),
                (report.coeffs.lambda2, spec.coeffs.lambda2),
            ):
                worst = max(worst, float(np.max(np.abs(est - true))))
    elapsed = time.perf_counter() - start
    print(f"max abs error {worst:.3e} over 20 specs, {elapsed:.2f}s")
    assert worst < 1e-8
    assert elapsed < 10.0


def test_criterion_2_full_selection_identity():
    start = time.perf_counter()
    worst = 0.0
    for k in range(10):
        rng = np.random.default_rng(np.random.SeedSequence([520201, k]))
        spec, _, _ = draw_stable_spec(W25, rng)
        series = simulate(spec, 500, seed=np.random.SeedSequence([520201, k, 1]))
        full = gyw_estimate(series, W25)
        restricted = restricted_estimate(series, W25, d=25)
        for a, b in (
            (full.coeffs.lambda0, restricted.coeffs.lambda0),
            (full.coeffs.lambda1, restricted.coeffs.lambda1),
            (full.coeffs.lambda2, restricted.coeffs.lambda2),
        ):
            worst = max(worst, float(np.max(np.abs(a - b))))
    elapsed = time.perf_counter() - start
    print(f"max abs deviation {worst:.3e} over 10 datasets, {elapsed:.2f}s")
    assert worst < 1e-10
    assert elapsed < 10.0


def test_criterion_3_convergence_in_n(convergence_study):
    result, elapsed = convergence_study
    n_grid = result.config.n_grid
    medians = {}
    for estimator in ("full", "restricted"):
        meds = [float(np.median(result.cell(estimator, 25, n))) for n in n_grid]
        medians[estimator] = meds
        assert all(a > b for a, b in zip(meds, meds[1:])), (estimator, meds)
        assert meds[-1] < 0.6 * meds[0], (estimator, meds)
    print(f"median MAE by n {medians}, {elapsed:.1f}s")
    assert elapsed < 300.0


def test_criterion_4_dimension_regimes(
    dimension_study_scenario1, dimension_study_scenario2
):
    result1, elapsed1 = dimension_study_scenario1
    result2, elapsed2 = dimension_study_scenario2
    meds1 = [float(np.median(result1.cell("full", p, 500))) for p in (25, 100, 529)]
    meds2 = [float(np.median(result2.cell("full", p, 500))) for p in (25, 100, 529)]
    elapsed = elapsed1 + elapsed2
    print(f"flat-regime medians {meds1}, growing-regime medians {meds2}, {elapsed:.1f}s")
    assert max(meds1) < 2.0 * min(meds1), meds1
    assert meds2[2] > meds2[0], meds2
    assert elapsed < 900.0


def test_criterion_5_ridge_mitigation(ridge_study):
    result, elapsed = ridge_study
    plain = float(np.median(result.cell("restricted", 529, 500)))
    ridge = float(np.median(result.cell("restricted_ridge", 529, 500)))
    print(f"median MAE restricted {plain:.4f} vs ridge {ridge:.4f}, {elapsed:.1f}s")
    assert ridge <= plain


def _stable_shared_spec(weights, rng):
    # one scalar triple for every location, redrawn until stable
    while True:
        triple = rng.uniform(-0.6, 0.6, size=3)
        noise = rng.uniform(0.5, 1.5, size=weights.p)
        spec = constant_spec(weights, tuple(triple), noise)
        if build_transition(spec).spectral_radius < 0.95:
            return spec


def _heterogeneous_spec(weights, rng):
    spec, _, _ = draw_stable_spec(weights, rng)
    return spec


def _rejection_rate(build_spec, trials, tag):
    rejections = 0
    for trial in range(trials):
        draw_ss, sim_ss, boot_ss = np.random.SeedSequence(
            [520601, tag, trial]
        ).spawn(3)
        spec = build_spec(W25, np.random.default_rng(draw_ss))
        series = simulate(spec, 300, seed=sim_ss)
        boot_seed = int(boot_ss.generate_state(1, dtype=np.uint64)[0] >> 1)
        report = homogeneity_test(series, W25, 200, seed=boot_seed)
        rejections += report.p_value <= 0.05
    return rejections / trials


def test_criterion_6_bootstrap_size_and_power():
    start = time.perf_counter()
    power = _rejection_rate(_heterogeneous_spec, 100, tag=1)
    size = _rejection_rate(_stable_shared_spec, 200, tag=0)
    elapsed = time.perf_counter() - start
    print(f"size {size:.3f} (target [0.01, 0.12]), power {power:.3f}, {elapsed:.1f}s")
    assert elapsed < 600.0
    assert power > 0.80, power
    assert 0.01 <= size <= 0.12, size


def test_criterion_7_simulation_fidelity():
    start = time.perf_counter()
    weights = scenario1_weights(9)
    errors0 = []
    errors1 = []
    for k in range(10):
        rng = np.random.default_rng(np.random.SeedSequence([520701, k]))
        spec, _, _ = draw_stable_spec(weights, rng)
        pop0, pop1 = population_covariances(spec)
        series = simulate(spec, 5000, seed=np.random.SeedSequence([520701, k, 1]))
        cov = sample_autocov(series)
        errors0.append(
            np.linalg.norm(cov.sigma0_hat - pop0) / np.linalg.norm(pop0)
        )
        errors1.append(
            np.linalg.norm(cov.sigma1_hat - pop1) / np.linalg.norm(pop1)
        )
    elapsed = time.perf_counter() - start
    mean0, mean1 = float(np.mean(errors0)), float(np.mean(errors1))
    print(f"mean relative Frobenius error lag0 {mean0:.4f} lag1 {mean1:.4f}, {elapsed:.1f}s")
    assert mean0 < 0.1
    assert mean1 < 0.1
    assert elapsed < 30.0


def test_criterion_8_forecast_coherence(w9, spec9, series9):
    direct = forecast(series9, w9, spec9.coeffs, 6)
    rolled = series9
    steps = []
    for _ in range(6):
        one = forecast(rolled, w9, spec9.coeffs, 1)
        steps.append(one)
        rolled = PanelSeries(
            values=np.hstack([rolled.values, one]), names=series9.names
        )
    iterated = np.hstack(steps)
    gap = float(np.max(np.abs(direct - iterated)))

    extended = PanelSeries(
        values=noise_free_extension(spec9, series9.values, 6), names=series9.names
    )
    holdout = out_of_sample_eval(extended, w9, holdout=6, coeffs=spec9.coeffs)
    error = float(np.max(np.abs(holdout.signed_error)))
    print(f"iterated-forecast gap {gap:.3e}, zero-noise holdout error {error:.3e}")
    assert gap < 1e-12
    assert error < 1e-8


def _run_pipeline(out_dir, workers=None):
    sim_config = {
        "seed": 11,
        "output_dir": str(out_dir),
        "n": 120,
        "p": 9,
        "weights": {"kind": "scenario1"},
    }
    est_config = {
        "seed": 11,
        "output_dir": str(out_dir),
        "series": str(out_dir / "series.csv"),
        "weights": {"kind": "file", "path": str(out_dir / "weights.csv")},
        "truth": str(out_dir / "model_spec.json"),
        "standard_errors": True,
    }
    test_config = {
        "seed": 11,
        "output_dir": str(out_dir),
        "series": str(out_dir / "series.csv"),
        "weights": {"kind": "file", "path": str(out_dir / "weights.csv")},
        "replicates": 100,
    }
    fc_config = {
        "seed": 11,
        "output_dir": str(out_dir),
        "series": str(out_dir / "series.csv"),
        "weights": {"kind": "file", "path": str(out_dir / "weights.csv")},
        "horizon": 4,
    }
    exp_config = {
        "seed": 11,
        "output_dir": str(out_dir),
        "scenario": "scenario1",
        "p_grid": [9],
        "n_grid": [60],
        "replications": 2,
        "estimators": ["full"],
    }
    for command, config in (
        ("simulate", sim_config),
        ("estimate", est_config),
        ("test-homogeneity", test_config),
        ("forecast", fc_config),
        ("experiment", exp_config),
    ):
        path = out_dir / f"{command}_config.json"
        write_json(config, path)
        args = [command, "--config", str(path)]
        if command == "experiment" and workers is not None:
            args += ["--workers", str(workers)]
        assert main(args) == 0, command


def test_criterion_9_determinism(tmp_path, capsys):
    run_a = tmp_path / "a"
    run_b = tmp_path / "b"
    run_a.mkdir()
    run_b.mkdir()
    _run_pipeline(run_a)
    _run_pipeline(run_b)
    names_a = sorted(f.name for f in run_a.iterdir())
    names_b = sorted(f.name for f in run_b.iterdir())
    assert names_a == names_b
    compared = []
    for name in names_a:
        if name.endswith("_config.json") or name == "run_config.json":
            continue  # these embed the output path itself
        assert (run_a / name).read_bytes() == (run_b / name).read_bytes(), name
        compared.append(name)
    assert "experiment_results.csv" in compared
    assert "fitted_series.png" in compared

    serial = tmp_path / "serial"
    parallel = tmp_path / "parallel"
    serial.mkdir()
    parallel.mkdir()
    _run_pipeline(serial, workers=1)
    _run_pipeline(parallel, workers=2)
    for name in ("experiment_results.csv", "experiment_summary.csv"):
        assert (serial / name).read_bytes() == (parallel / name).read_bytes(), name
    print(f"byte-identical artifacts: {len(compared)} files, serial == parallel")
