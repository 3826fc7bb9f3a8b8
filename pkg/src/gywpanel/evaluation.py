"""Monte Carlo evaluation of the estimators.

A convergence experiment draws coefficient sets uniformly from a box,
rejects unstable draws, simulates a panel, fits one or more estimators,
and records the mean absolute coefficient error

    MAE(i) = (1/3) * sum_j |lhat_ji - l_ji|,     MAE = (1/p) * sum_i MAE(i)

per (scenario, estimator, p, n, replicate) cell.  Replicates are seeded
individually from the root seed and their grid position, so results do
not depend on execution order and serial and parallel runs agree to the
byte.
"""

from __future__ import annotations

import concurrent.futures
import logging
import os
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import SingularSystemError
from .estimator import (
    EstimationReport,
    gyw_estimate,
    restricted_estimate,
    ridge_restricted_estimate,
)
from .model import (
    CoefficientSet,
    PanelSeries,
    draw_stable_spec,
    forecast,
    simulate,
)
from .weights import WeightMatrix, scenario1_weights, scenario2_weights

__all__ = [
    "MaeResult",
    "mae",
    "ExperimentConfig",
    "ExperimentRecord",
    "ExperimentResult",
    "run_experiment",
    "fit_estimator",
    "OutOfSampleResult",
    "out_of_sample_eval",
    "WORKERS_ENV_VAR",
    "resolve_workers",
]

logger = logging.getLogger(__name__)

WORKERS_ENV_VAR = "GYWPANEL_WORKERS"

SCENARIOS = ("scenario1", "scenario2", "custom")
_SCENARIO_CODES = {"scenario1": 1, "scenario2": 2, "custom": 3}
ESTIMATORS = ("full", "restricted", "restricted_ridge")


class MaeResult(NamedTuple):
    per_location: NDArray[np.float64]
    overall: float


def mae(estimated: CoefficientSet, truth: CoefficientSet) -> MaeResult:
    """Mean absolute coefficient error, per location and overall.

    NaN estimates (failed locations) propagate into the result.
    """
    if estimated.p != truth.p:
        raise ValueError(
            f"coefficient sets cover {estimated.p} and {truth.p} locations"
        )
    diff = np.abs(estimated.as_matrix() - truth.as_matrix())
    per_location = diff.mean(axis=1)
    return MaeResult(per_location=per_location, overall=float(per_location.mean()))


@dataclass(frozen=True)
class ExperimentConfig:
    """Grid definition for a convergence experiment."""

    scenario: str
    p_grid: tuple[int, ...]
    n_grid: tuple[int, ...]
    seed: int
    replications: int = 100
    estimators: tuple[str, ...] = ("full", "restricted")
    burn_in: int = 500
    coeff_low: float = -0.6
    coeff_high: float = 0.6
    noise_low: float = 0.5
    noise_high: float = 1.5
    max_spectral_radius: float = 0.95
    equation_count: int | None = None
    ridge_constant: float | None = None
    custom_weights: WeightMatrix | None = None

    def __post_init__(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ValueError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        object.__setattr__(self, "p_grid", tuple(int(p) for p in self.p_grid))
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, "estimators", tuple(self.estimators))
        if not self.p_grid or not self.n_grid:
            raise ValueError("p_grid and n_grid must be nonempty")
        if any(n < 3 for n in self.n_grid):
            raise ValueError("every n in n_grid must be >= 3")
        if self.replications < 1:
            raise ValueError(f"replications must be >= 1, got {self.replications}")
        if not self.estimators:
            raise ValueError("estimators must be nonempty")
        unknown = [e for e in self.estimators if e not in ESTIMATORS]
        if unknown:
            raise ValueError(f"unknown estimators {unknown}; choose from {ESTIMATORS}")
        if len(set(self.estimators)) != len(self.estimators):
            raise ValueError("estimators must not repeat")
        if not self.coeff_low < self.coeff_high:
            raise ValueError("coefficient box must have coeff_low < coeff_high")
        if not 0.0 <= self.noise_low <= self.noise_high:
            raise ValueError("noise box must satisfy 0 <= noise_low <= noise_high")
        if not 0.0 < self.max_spectral_radius < 1.0:
            raise ValueError("max_spectral_radius must lie in (0, 1)")
        if self.scenario == "custom":
            if self.custom_weights is None:
                raise ValueError("custom scenario needs custom_weights")
            bad = [p for p in self.p_grid if p != self.custom_weights.p]
            if bad:
                raise ValueError(
                    f"custom weights cover p={self.custom_weights.p} but the grid asks "
                    f"for {bad}"
                )
        elif self.custom_weights is not None:
            raise ValueError("custom_weights is only valid with scenario='custom'")


@dataclass(frozen=True)
class ExperimentRecord:
    """One replicate's error for one estimator."""

    scenario: str
    estimator: str
    p: int
    n: int
    replicate: int
    mae: float


@dataclass
class ExperimentResult:
    """All replicate records of one experiment plus redraw accounting."""

    config: ExperimentConfig
    records: list[ExperimentRecord]
    redraws: dict[tuple[int, int], int] = field(default_factory=dict)

    def cell(self, estimator: str, p: int, n: int) -> NDArray[np.float64]:
        """MAE values of one (estimator, p, n) cell, ordered by replicate."""
        picked = [
            r.mae
            for r in self.records
            if r.estimator == estimator and r.p == p and r.n == n
        ]
        return np.array(picked)

    def summary(self) -> list[dict]:
        """Per-cell quantile summary, ordered like the grid."""
        rows = []
        for estimator in self.config.estimators:
            for p in self.config.p_grid:
                for n in self.config.n_grid:
                    values = self.cell(estimator, p, n)
                    if values.size == 0:
                        continue
                    rows.append(
                        {
                            "scenario": self.config.scenario,
                            "estimator": estimator,
                            "p": p,
                            "n": n,
                            "replications": int(values.size),
                            "mean_mae": float(values.mean()),
                            "median_mae": float(np.median(values)),
                            "q25_mae": float(np.quantile(values, 0.25)),
                            "q75_mae": float(np.quantile(values, 0.75)),
                        }
                    )
        return rows


def _weights_for(config: ExperimentConfig, p: int) -> WeightMatrix:
    if config.scenario == "scenario1":
        return scenario1_weights(p)
    if config.scenario == "scenario2":
        return scenario2_weights(p)
    assert config.custom_weights is not None
    return config.custom_weights


def fit_estimator(
    series: PanelSeries,
    weights: WeightMatrix,
    method: str,
    d: int | None,
    ridge_constant: float | None,
) -> EstimationReport:
    if method == "full":
        return gyw_estimate(series, weights)
    if method == "restricted":
        return restricted_estimate(series, weights, d=d)
    if method == "restricted_ridge":
        return ridge_restricted_estimate(
            series, weights, d=d, ridge_constant=ridge_constant
        )
    raise ValueError(f"unknown estimator {method!r}")


def _run_replicate(
    config: ExperimentConfig, p: int, n: int, replicate: int
) -> tuple[int, list[tuple[str, float]]]:
    """One replicate: draw a stable spec, simulate, fit every estimator."""
    weights = _weights_for(config, p)
    root = np.random.SeedSequence(
        [config.seed, _SCENARIO_CODES[config.scenario], p, n, replicate]
    )
    draw_seq, sim_seq = root.spawn(2)
    spec, _, redraws = draw_stable_spec(
        weights,
        np.random.default_rng(draw_seq),
        coeff_low=config.coeff_low,
        coeff_high=config.coeff_high,
        noise_low=config.noise_low,
        noise_high=config.noise_high,
        max_spectral_radius=config.max_spectral_radius,
    )
    series = simulate(spec, n, burn_in=config.burn_in, seed=sim_seq)
    results = []
    for estimator in config.estimators:
        report = fit_estimator(
            series, weights, estimator, config.equation_count, config.ridge_constant
        )
        results.append((estimator, mae(report.coeffs, spec.coeffs).overall))
    return redraws, results


def _replicate_task(args: tuple[ExperimentConfig, int, int, int]):
    return _run_replicate(*args)


def resolve_workers(workers: int | None) -> int:
    """Explicit worker count, or the environment override, or 1."""
    if workers is None:
        raw = os.environ.get(WORKERS_ENV_VAR, "")
        if raw:
            try:
                workers = int(raw)
            except ValueError as exc:
                raise ValueError(
                    f"{WORKERS_ENV_VAR} must be an integer, got {raw!r}"
                ) from exc
        else:
            workers = 1
    if workers < 1:
        raise ValueError(f"worker count must be >= 1, got {workers}")
    return workers


def run_experiment(
    config: ExperimentConfig, workers: int | None = None
) -> ExperimentResult:
    """Run the full replication grid, serially or across processes.

    The output is identical for any worker count: every replicate is
    seeded from (seed, scenario, p, n, replicate) alone.
    """
    workers = resolve_workers(workers)
    tasks = [
        (config, p, n, r)
        for p in config.p_grid
        for n in config.n_grid
        for r in range(config.replications)
    ]
    logger.info(
        "running %d replicates (%d cells) with %d worker(s)",
        len(tasks),
        len(config.p_grid) * len(config.n_grid),
        workers,
    )
    if workers > 1 and len(tasks) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_replicate_task, tasks, chunksize=1))
    else:
        outcomes = [_replicate_task(t) for t in tasks]
    records: list[ExperimentRecord] = []
    redraws: dict[tuple[int, int], int] = {}
    for (_, p, n, r), (drawn, fits) in zip(tasks, outcomes):
        redraws[(p, n)] = redraws.get((p, n), 0) + drawn
        for estimator, value in fits:
            records.append(
                ExperimentRecord(
                    scenario=config.scenario,
                    estimator=estimator,
                    p=p,
                    n=n,
                    replicate=r,
                    mae=value,
                )
            )
    total_redraws = sum(redraws.values())
    if total_redraws:
        logger.info("rejected %d unstable coefficient draws in total", total_redraws)
    return ExperimentResult(config=config, records=records, redraws=redraws)


class OutOfSampleResult(NamedTuple):
    forecasts: NDArray[np.float64]
    actuals: NDArray[np.float64]
    signed_error: NDArray[np.float64]
    squared_error: NDArray[np.float64]
    report: EstimationReport | None


def out_of_sample_eval(
    series: PanelSeries,
    weights: WeightMatrix,
    holdout: int = 6,
    method: str = "full",
    d: int | None = None,
    ridge_constant: float | None = None,
    coeffs: CoefficientSet | None = None,
) -> OutOfSampleResult:
    """Hold out the last ``holdout`` time points and forecast them.

    Coefficients are estimated on the training segment by ``method``
    unless ``coeffs`` supplies them directly (then no estimation runs,
    e.g. to evaluate forecasts under the generating coefficients).
    Signed errors are forecast minus actual, averaged over the horizon
    per location; squared errors likewise.
    """
    if holdout < 1:
        raise ValueError(f"holdout must be >= 1, got {holdout}")
    n_train = series.n - holdout
    if n_train < 3:
        raise ValueError(
            f"series has {series.n} points; holding out {holdout} leaves "
            f"{n_train} < 3 for training"
        )
    train = PanelSeries(values=series.values[:, :n_train], names=series.names)
    report: EstimationReport | None = None
    if coeffs is None:
        report = fit_estimator(train, weights, method, d, ridge_constant)
        if report.failures:
            failed = sorted(report.failures)[:5]
            raise SingularSystemError(
                f"estimation failed at locations {failed}; cannot forecast"
            )
        coeffs = report.coeffs
    predictions = forecast(train, weights, coeffs, holdout)
    actuals = np.asarray(series.values[:, n_train:])
    err = predictions - actuals
    return OutOfSampleResult(
        forecasts=predictions,
        actuals=actuals,
        signed_error=err.mean(axis=1),
        squared_error=(err**2).mean(axis=1),
        report=report,
    )
