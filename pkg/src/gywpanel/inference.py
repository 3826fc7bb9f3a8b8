"""Bootstrap test of coefficient homogeneity across locations.

The null hypothesis is that all locations share one coefficient triple
(l0, l1, l2).  Under the null the triple is estimated by stacking every
location's moment equations into a single least-squares problem, and
the test statistic is the average L1 distance between the panel and its
pooled one-step fit,

    U = (1/(n-1)) sum_{t=2..n} || y_t - y~_t ||_1,
    y~_t = l0 W y_t + l1 y_{t-1} + l2 W y_{t-1}.

The reference distribution comes from a residual bootstrap: innovations
are resampled as whole cross-sectional columns (i.i.d. over time) from
the residuals of the unrestricted location-specific fit, panels are
rebuilt around the pooled fit, and each bootstrap panel is refit by
plain time-domain least squares on the observed regressors.  The
p-value is the exact fraction of bootstrap statistics exceeding U.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

from .covariance import CovariancePair, sample_autocov
from .errors import SingularSystemError
from .estimator import equation_system, gyw_estimate
from .model import PanelSeries, fitted_values
from .weights import WeightMatrix

__all__ = ["HomogeneityTestReport", "pooled_estimate", "homogeneity_test"]

_COND_LIMIT = 1e12


@dataclass(frozen=True)
class HomogeneityTestReport:
    """Observed statistic, bootstrap sample, and the exact p-value."""

    u_observed: float
    u_bootstrap: NDArray[np.float64]
    p_value: float
    pooled_coeffs: tuple[float, float, float]
    replicates: int
    seed: int

    def __post_init__(self) -> None:
        boot = np.array(self.u_bootstrap, dtype=float)
        boot.setflags(write=False)
        object.__setattr__(self, "u_bootstrap", boot)


def pooled_from_covariances(
    cov: CovariancePair, weights: WeightMatrix
) -> tuple[float, float, float]:
    """Single coefficient triple solving all p moment systems jointly."""
    systems = [equation_system(cov, weights, i) for i in range(cov.p)]
    design = np.vstack([s.design for s in systems])
    response = np.concatenate([s.response for s in systems])
    svals = np.linalg.svd(design, compute_uv=False)
    if svals[-1] == 0.0 or svals[0] / svals[-1] > _COND_LIMIT:
        raise SingularSystemError("stacked moment design is rank deficient")
    coef, _, rank, _ = scipy.linalg.lstsq(design, response, lapack_driver="gelsy")
    if rank < 3:
        raise SingularSystemError(f"stacked moment design has rank {rank} < 3")
    return float(coef[0]), float(coef[1]), float(coef[2])


def pooled_estimate(
    series: PanelSeries, weights: WeightMatrix
) -> tuple[float, float, float]:
    """Pooled (homogeneous) coefficient estimate from a panel."""
    return pooled_from_covariances(sample_autocov(series), weights)


def _l1_time_average(diff: NDArray[np.float64]) -> float:
    return float(np.sum(np.abs(diff)) / diff.shape[1])


def _bootstrap_statistics(
    pooled_fit: NDArray[np.float64],
    regressors: NDArray[np.float64],
    residuals: NDArray[np.float64],
    replicates: int,
    seed: int,
) -> NDArray[np.float64]:
    """Bootstrap statistics around a pooled fit.

    ``pooled_fit`` is the p x m panel of pooled one-step fits,
    ``regressors`` the 3 x p x m stack (W y_t, y_{t-1}, W y_{t-1}), and
    ``residuals`` the p x m unrestricted residual pool.  With all-zero
    residuals every bootstrap panel equals the pooled fit, the refit
    reproduces it exactly, and every statistic is 0.
    """
    p, m = pooled_fit.shape
    design = regressors.reshape(3, p * m).T
    solve = np.linalg.pinv(design)
    children = np.random.SeedSequence(seed).spawn(replicates)
    stats = np.empty(replicates)
    for b in range(replicates):
        rng = np.random.default_rng(children[b])
        cols = rng.integers(0, m, size=m)
        panel = pooled_fit + residuals[:, cols]
        coef = solve @ panel.reshape(p * m)
        refit = (
            coef[0] * regressors[0] + coef[1] * regressors[1] + coef[2] * regressors[2]
        )
        stats[b] = _l1_time_average(panel - refit)
    return stats


def homogeneity_test(
    series: PanelSeries,
    weights: WeightMatrix,
    replicates: int = 1000,
    *,
    seed: int,
) -> HomogeneityTestReport:
    """Bootstrap test of one shared coefficient triple against the
    location-specific alternative.

    Larger U means the pooled fit explains less of the panel; the
    p-value is #{U* > U} / replicates, computed exactly.
    """
    if replicates < 100:
        raise ValueError(f"need at least 100 bootstrap replicates, got {replicates}")
    if series.n < 3:
        raise ValueError(f"homogeneity testing needs n >= 3, got n={series.n}")
    pooled = pooled_estimate(series, weights)
    unrestricted = gyw_estimate(series, weights)
    if unrestricted.failures:
        failed = sorted(unrestricted.failures)[:5]
        raise SingularSystemError(
            f"unrestricted fit failed at locations {failed}; "
            "cannot form the residual pool"
        )
    resid = fitted_values(series, weights, unrestricted.coeffs).residuals.values
    y = series.values
    wy = weights.entries @ y
    regressors = np.stack([wy[:, 1:], y[:, :-1], wy[:, :-1]])
    pooled_fit = (
        pooled[0] * regressors[0] + pooled[1] * regressors[1] + pooled[2] * regressors[2]
    )
    u_observed = _l1_time_average(y[:, 1:] - pooled_fit)
    u_bootstrap = _bootstrap_statistics(
        pooled_fit, regressors, resid, replicates, seed
    )
    p_value = float(np.count_nonzero(u_bootstrap > u_observed) / replicates)
    return HomogeneityTestReport(
        u_observed=u_observed,
        u_bootstrap=u_bootstrap,
        p_value=p_value,
        pooled_coeffs=pooled,
        replicates=replicates,
        seed=seed,
    )
