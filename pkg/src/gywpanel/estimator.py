"""Generalized Yule-Walker estimation of the location-specific coefficients.

For location i with weight row w_i, the lag-0/lag-1 autocovariances of
the stationary model satisfy the moment identity

    Sigma_1' e_i = l0_i Sigma_1' w_i + l1_i Sigma_0 e_i + l2_i Sigma_0 w_i,

a p-equation linear system in the three unknowns (l0_i, l1_i, l2_i).
Plugging in sample autocovariances and solving each system by least
squares gives the full estimator.  Because only a handful of locations
materially enter w_i, most of the p equations carry little signal when
p is large; the restricted estimator scores every equation by

    score_k = |e_k' Sigma1_hat' w_i| + |e_k' Sigma0_hat e_i| + |e_k' Sigma0_hat w_i|

(the absolute row sums of the design) and keeps only the d highest
scoring rows.  A ridge variant adds the penalty weight C * p / n to the
restricted normal equations, stabilizing the solve when the kept rows
are still nearly collinear.

All solvers run through a QR-based least-squares path rather than
explicit normal-equation inversion.  Failures are per location: a
location whose design is rank deficient or non-finite gets NaN
coefficients and an entry in the report's failure map, while the other
locations are unaffected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

from .covariance import CovariancePair, sample_autocov
from .errors import SingularSystemError
from .model import CoefficientSet, PanelSeries, fitted_values
from .weights import WeightMatrix

__all__ = [
    "EquationSystem",
    "RelevanceScores",
    "EstimationReport",
    "equation_system",
    "relevance_scores",
    "default_equation_count",
    "gyw_estimate",
    "gyw_estimate_from_covariances",
    "restricted_estimate",
    "restricted_from_covariances",
    "ridge_restricted_estimate",
    "ridge_restricted_from_covariances",
    "choose_ridge_constant",
    "asymptotic_variance",
    "DEFAULT_RIDGE_GRID",
]

DEFAULT_CONDITION_LIMIT = 1e12
DEFAULT_RIDGE_GRID = (0.1, 0.5, 1.0, 5.0, 10.0, 50.0)

METHOD_FULL = "full"
METHOD_RESTRICTED = "restricted"
METHOD_RIDGE = "restricted_ridge"


@dataclass(frozen=True)
class EquationSystem:
    """The moment equations kept for one location.

    ``design[r]`` holds the three regressor values of equation
    ``equations[r]`` and ``response[r]`` its left-hand side.
    """

    location: int
    design: NDArray[np.float64]
    response: NDArray[np.float64]
    equations: NDArray[np.intp]

    def __post_init__(self) -> None:
        design = np.array(self.design, dtype=float)
        response = np.array(self.response, dtype=float)
        equations = np.array(self.equations, dtype=np.intp)
        if design.ndim != 2 or design.shape[1] != 3:
            raise ValueError(f"design must be (rows, 3), got shape {design.shape}")
        if response.shape != (design.shape[0],):
            raise ValueError(
                f"response must have one entry per design row, got {response.shape}"
            )
        if equations.shape != (design.shape[0],):
            raise ValueError("equations must list one index per design row")
        for arr in (design, response, equations):
            arr.setflags(write=False)
        object.__setattr__(self, "design", design)
        object.__setattr__(self, "response", response)
        object.__setattr__(self, "equations", equations)


@dataclass(frozen=True)
class RelevanceScores:
    """Equation relevance scores for one location.

    ``ranking`` lists equation indices by descending score, ties broken
    by ascending index.
    """

    location: int
    scores: NDArray[np.float64]
    ranking: NDArray[np.intp]


@dataclass(frozen=True)
class EstimationReport:
    """Estimates plus per-location diagnostics.

    ``coeffs`` carries NaN at failed locations; ``failures`` maps each
    failed location index to the reason.  ``equation_counts`` records
    how many moment equations each location's solve used, and
    ``selected`` the ascending equation indices.  ``ridge_weight`` is
    the penalty actually added to the normal equations (0 when the
    method is not ridge) and ``ridge_constant`` the tuning constant C
    it came from.
    """

    coeffs: CoefficientSet
    method: str
    n_used: int
    equation_counts: NDArray[np.intp]
    selected: tuple[NDArray[np.intp], ...]
    condition_numbers: NDArray[np.float64]
    residual_norms: NDArray[np.float64]
    failures: dict[int, str] = field(default_factory=dict)
    ridge_constant: float | None = None
    ridge_weight: float = 0.0

    @property
    def p(self) -> int:
        return self.coeffs.p


def _design_blocks(
    cov: CovariancePair, weights: WeightMatrix
) -> tuple[NDArray, NDArray, NDArray, NDArray]:
    """Columns i of the returned blocks are the design columns and response
    of location i: Sigma1' w_i, Sigma0 e_i, Sigma0 w_i, and Sigma1' e_i."""
    if cov.p != weights.p:
        raise ValueError(
            f"covariances are {cov.p} x {cov.p} but weights are {weights.p} x {weights.p}"
        )
    wt = weights.entries.T
    lag1t = cov.sigma1_hat.T
    return lag1t @ wt, cov.sigma0_hat, cov.sigma0_hat @ wt, lag1t


def _check_location(p: int, location: int) -> int:
    location = int(location)
    if not 0 <= location < p:
        raise ValueError(f"location must be in [0, {p}), got {location}")
    return location


def _scores_from_blocks(
    blocks: tuple[NDArray, NDArray, NDArray, NDArray], location: int
) -> tuple[NDArray[np.float64], NDArray[np.intp]]:
    spatial_lag1, own_lag0, spatial_lag0, _ = blocks
    scores = (
        np.abs(spatial_lag1[:, location])
        + np.abs(own_lag0[:, location])
        + np.abs(spatial_lag0[:, location])
    )
    ranking = np.argsort(-scores, kind="stable")
    return scores, ranking


def _system_from_blocks(
    blocks: tuple[NDArray, NDArray, NDArray, NDArray],
    location: int,
    equations: Sequence[int] | None,
) -> EquationSystem:
    spatial_lag1, own_lag0, spatial_lag0, response_block = blocks
    p = response_block.shape[0]
    if equations is None:
        kept = np.arange(p, dtype=np.intp)
    else:
        kept = np.asarray(equations, dtype=np.intp)
        if kept.ndim != 1 or kept.size < 1:
            raise ValueError("equations must be a nonempty index vector")
        if np.unique(kept).size != kept.size:
            raise ValueError("equations must not repeat indices")
        if kept.min() < 0 or kept.max() >= p:
            raise ValueError(f"equation indices must lie in [0, {p})")
        kept = np.sort(kept)
    design = np.column_stack(
        [
            spatial_lag1[kept, location],
            own_lag0[kept, location],
            spatial_lag0[kept, location],
        ]
    )
    return EquationSystem(
        location=location,
        design=design,
        response=response_block[kept, location],
        equations=kept,
    )


def relevance_scores(
    cov: CovariancePair, weights: WeightMatrix, location: int
) -> RelevanceScores:
    """Score every moment equation's contribution to one location's design."""
    location = _check_location(cov.p, location)
    scores, ranking = _scores_from_blocks(_design_blocks(cov, weights), location)
    return RelevanceScores(location=location, scores=scores, ranking=ranking)


def equation_system(
    cov: CovariancePair,
    weights: WeightMatrix,
    location: int,
    equations: Sequence[int] | None = None,
) -> EquationSystem:
    """Assemble the (possibly restricted) moment system for one location.

    ``equations`` selects which of the p moment equations to keep; the
    default keeps all of them.  Indices are sorted ascending so that
    selecting every equation reproduces the full system exactly.
    """
    location = _check_location(cov.p, location)
    return _system_from_blocks(_design_blocks(cov, weights), location, equations)


def default_equation_count(p: int, n: int) -> int:
    """Default restriction size min(p, floor(n^(10/21))), clamped to [3, p]."""
    if p < 3:
        raise ValueError(f"restricted estimation needs p >= 3, got {p}")
    raw = int(math.floor(n ** (10.0 / 21.0)))
    return max(3, min(p, raw))


def _solve_system(
    design: NDArray[np.float64],
    response: NDArray[np.float64],
    ridge_weight: float,
    condition_limit: float,
) -> tuple[NDArray[np.float64] | None, float, float, str | None]:
    """QR least squares with optional ridge augmentation.

    Returns (coefficients, condition, residual_norm, failure_reason);
    coefficients is None exactly when failure_reason is set.  The
    condition number is the one of the matrix actually solved, while
    the residual norm is always taken on the unpenalized system.
    """
    if not (np.all(np.isfinite(design)) and np.all(np.isfinite(response))):
        return None, math.inf, math.nan, "design or response contains nonfinite values"
    if ridge_weight > 0.0:
        solve_design = np.vstack([design, math.sqrt(ridge_weight) * np.eye(3)])
        solve_response = np.concatenate([response, np.zeros(3)])
    else:
        solve_design = design
        solve_response = response
    svals = np.linalg.svd(solve_design, compute_uv=False)
    condition = math.inf if svals[-1] == 0.0 else float(svals[0] / svals[-1])
    if not math.isfinite(condition) or condition > condition_limit:
        return None, condition, math.nan, f"near-singular design (condition {condition:.3e})"
    coef, _, rank, _ = scipy.linalg.lstsq(
        solve_design, solve_response, lapack_driver="gelsy"
    )
    if rank < 3:
        return None, condition, math.nan, f"design rank {rank} < 3"
    residual = float(np.linalg.norm(design @ coef - response))
    return coef, condition, residual, None


def _estimate_from_cov(
    cov: CovariancePair,
    weights: WeightMatrix,
    d: int | Sequence[int] | None,
    method: str,
    ridge_constant: float | None,
    ridge_weight: float,
    condition_limit: float,
) -> EstimationReport:
    p = cov.p
    if d is None:
        counts = np.full(p, p, dtype=np.intp)
    else:
        counts = np.broadcast_to(np.asarray(d, dtype=np.intp), (p,)).copy()
        bad = (counts < 3) | (counts > p)
        if np.any(bad):
            raise ValueError(
                f"equation counts must lie in [3, p={p}], got {counts[bad][:5].tolist()}"
            )
    coeff_matrix = np.full((p, 3), np.nan)
    conditions = np.empty(p)
    residuals = np.empty(p)
    selected: list[NDArray[np.intp]] = []
    failures: dict[int, str] = {}
    blocks = _design_blocks(cov, weights)
    for i in range(p):
        if d is None:
            kept = None
        elif counts[i] == p:
            kept = np.arange(p, dtype=np.intp)
        else:
            _, ranking = _scores_from_blocks(blocks, i)
            kept = np.sort(ranking[: counts[i]])
        system = _system_from_blocks(blocks, i, kept)
        selected.append(system.equations)
        coef, condition, residual, reason = _solve_system(
            system.design, system.response, ridge_weight, condition_limit
        )
        conditions[i] = condition
        residuals[i] = residual
        if reason is not None:
            failures[i] = reason
        else:
            coeff_matrix[i] = coef
    coeffs = CoefficientSet(
        lambda0=coeff_matrix[:, 0],
        lambda1=coeff_matrix[:, 1],
        lambda2=coeff_matrix[:, 2],
    )
    return EstimationReport(
        coeffs=coeffs,
        method=method,
        n_used=cov.n_used,
        equation_counts=counts,
        selected=tuple(selected),
        condition_numbers=conditions,
        residual_norms=residuals,
        failures=failures,
        ridge_constant=ridge_constant,
        ridge_weight=ridge_weight,
    )


def gyw_estimate_from_covariances(
    cov: CovariancePair,
    weights: WeightMatrix,
    condition_limit: float = DEFAULT_CONDITION_LIMIT,
) -> EstimationReport:
    """Full estimator from precomputed (possibly population) covariances.

    Feeding exact population covariances of a stable spec recovers the
    generating coefficients up to solver precision.
    """
    return _estimate_from_cov(
        cov, weights, None, METHOD_FULL, None, 0.0, condition_limit
    )


def gyw_estimate(
    series: PanelSeries,
    weights: WeightMatrix,
    condition_limit: float = DEFAULT_CONDITION_LIMIT,
) -> EstimationReport:
    """Full estimator: solve all p moment equations per location."""
    return gyw_estimate_from_covariances(sample_autocov(series), weights, condition_limit)


def restricted_from_covariances(
    cov: CovariancePair,
    weights: WeightMatrix,
    d: int | Sequence[int],
    condition_limit: float = DEFAULT_CONDITION_LIMIT,
) -> EstimationReport:
    """Restricted estimator from precomputed covariances."""
    return _estimate_from_cov(
        cov, weights, d, METHOD_RESTRICTED, None, 0.0, condition_limit
    )


def restricted_estimate(
    series: PanelSeries,
    weights: WeightMatrix,
    d: int | Sequence[int] | None = None,
    condition_limit: float = DEFAULT_CONDITION_LIMIT,
) -> EstimationReport:
    """Restricted estimator keeping the d most relevant equations per location.

    ``d`` may be a single count or one per location; when omitted it
    defaults to min(p, floor(n^(10/21))), clamped below at 3.
    """
    cov = sample_autocov(series)
    if d is None:
        d = default_equation_count(series.p, cov.n_used)
    return restricted_from_covariances(cov, weights, d, condition_limit)


def ridge_restricted_from_covariances(
    cov: CovariancePair,
    weights: WeightMatrix,
    d: int | Sequence[int],
    ridge_constant: float,
    condition_limit: float = DEFAULT_CONDITION_LIMIT,
) -> EstimationReport:
    """Ridge-penalized restricted estimator with a given tuning constant C.

    The penalty added to the normal equations is C * p / n_used; C = 0
    reproduces the plain restricted estimator exactly.
    """
    if ridge_constant < 0.0:
        raise ValueError(f"ridge constant must be nonnegative, got {ridge_constant}")
    weight = ridge_constant * cov.p / cov.n_used
    return _estimate_from_cov(
        cov, weights, d, METHOD_RIDGE, ridge_constant, weight, condition_limit
    )


def _segment_covariances(
    values: NDArray[np.float64], segments: list[NDArray[np.intp]]
) -> CovariancePair | None:
    """Autocovariances over a union of disjoint contiguous index segments."""
    n0 = 0
    n1 = 0
    p = values.shape[0]
    sigma0 = np.zeros((p, p))
    sigma1 = np.zeros((p, p))
    for seg in segments:
        if seg.size == 0:
            continue
        block = values[:, seg]
        sigma0 += block @ block.T
        n0 += seg.size
        if seg.size >= 2:
            sigma1 += block[:, 1:] @ block[:, :-1].T
            n1 += seg.size - 1
    if n0 < 3 or n1 < 2:
        return None
    sigma0 /= n0
    sigma1 /= n1
    return CovariancePair(
        sigma0_hat=(sigma0 + sigma0.T) / 2.0, sigma1_hat=sigma1, n_used=n0
    )


def choose_ridge_constant(
    series: PanelSeries,
    weights: WeightMatrix,
    d: int | Sequence[int],
    grid: Sequence[float] = DEFAULT_RIDGE_GRID,
    folds: int = 5,
    condition_limit: float = DEFAULT_CONDITION_LIMIT,
) -> float:
    """Pick the ridge constant by blocked cross-validation.

    Time is split into ``folds`` contiguous blocks.  For each fold the
    estimator is fit on the remaining blocks' covariances and scored by
    the squared one-step prediction error on the held-out block, summed
    over locations; the grid value with the smallest total wins, ties
    keeping the earlier entry.
    """
    if folds < 2:
        raise ValueError(f"cross-validation needs >= 2 folds, got {folds}")
    if not grid:
        raise ValueError("ridge grid must be nonempty")
    n = series.n
    if n < 3 * folds:
        raise ValueError(f"n={n} is too short for {folds} contiguous folds")
    y = series.values
    wy = weights.entries @ y
    blocks = np.array_split(np.arange(n, dtype=np.intp), folds)
    totals = np.zeros(len(grid))
    for held in blocks:
        start, stop = int(held[0]), int(held[-1]) + 1
        segments = [
            np.arange(0, start, dtype=np.intp),
            np.arange(stop, n, dtype=np.intp),
        ]
        cov = _segment_covariances(y, segments)
        if cov is None:
            continue
        scorable = held[held >= 1]
        if scorable.size == 0:
            continue
        for g, constant in enumerate(grid):
            report = ridge_restricted_from_covariances(
                cov, weights, d, constant, condition_limit
            )
            lam = report.coeffs
            pred = (
                lam.lambda0[:, None] * wy[:, scorable]
                + lam.lambda1[:, None] * y[:, scorable - 1]
                + lam.lambda2[:, None] * wy[:, scorable - 1]
            )
            err = y[:, scorable] - pred
            ok = ~np.isnan(err).any(axis=1)
            totals[g] += float(np.sum(err[ok] ** 2))
    return float(grid[int(np.argmin(totals))])


def ridge_restricted_estimate(
    series: PanelSeries,
    weights: WeightMatrix,
    d: int | Sequence[int] | None = None,
    ridge_constant: float | None = None,
    grid: Sequence[float] = DEFAULT_RIDGE_GRID,
    folds: int = 5,
    condition_limit: float = DEFAULT_CONDITION_LIMIT,
) -> EstimationReport:
    """Ridge-penalized restricted estimator.

    When ``ridge_constant`` is None the constant is chosen by blocked
    cross-validation over ``grid``.
    """
    cov = sample_autocov(series)
    if d is None:
        d = default_equation_count(series.p, cov.n_used)
    if ridge_constant is None:
        ridge_constant = choose_ridge_constant(
            series, weights, d, grid, folds, condition_limit
        )
    return ridge_restricted_from_covariances(
        cov, weights, d, ridge_constant, condition_limit
    )


def asymptotic_variance(
    series: PanelSeries,
    weights: WeightMatrix,
    report: EstimationReport,
    location: int,
    hac_lag: int | None = None,
) -> NDArray[np.float64]:
    """Sandwich estimate of the coefficient covariance at one location.

    With Z the location's kept design and u_t = z_{t-1} eps_hat_{i,t}
    (kept entries of y_{t-1} scaled by the fitted residual), the
    estimate is V^{-1} U V^{-1} / m with V = Z'Z, U = Z' L Z, and L the
    Bartlett long-run covariance of u_t truncated at
    ``hac_lag`` (default floor(m^(1/3)), m = number of residual time
    points).  Divided by m, the result approximates Var(coefficients).
    """
    location = _check_location(series.p, location)
    if location in report.failures:
        raise ValueError(
            f"location {location} has no estimate: {report.failures[location]}"
        )
    cov = sample_autocov(series)
    kept = report.selected[location]
    system = equation_system(cov, weights, location, kept)
    design = system.design
    resid = fitted_values(series, weights, report.coeffs).residuals.values[location]
    m = resid.size
    lag = int(math.floor(m ** (1.0 / 3.0))) if hac_lag is None else int(hac_lag)
    if not 0 <= lag < m:
        raise ValueError(f"hac_lag must lie in [0, {m}), got {lag}")
    u = series.values[kept, :-1] * resid[None, :]
    longrun = u @ u.T / m
    for j in range(1, lag + 1):
        gamma = u[:, j:] @ u[:, :-j].T / m
        longrun += (1.0 - j / (lag + 1.0)) * (gamma + gamma.T)
    v = design.T @ design
    svals = np.linalg.svd(v, compute_uv=False)
    if svals[-1] == 0.0 or svals[0] / svals[-1] > DEFAULT_CONDITION_LIMIT:
        raise SingularSystemError(
            f"normal matrix for location {location} is near-singular"
        )
    middle = design.T @ longrun @ design
    v_inv = np.linalg.inv(v)
    avar = v_inv @ middle @ v_inv / m
    return (avar + avar.T) / 2.0
