"""Sample autocovariance matrices of a panel.

The estimators below target Sigma_k = Cov(y_{t+k}, y_t) for k = 0, 1:

    Sigma0_hat = (1/n) sum_{t=1..n} y_t y_t',
    Sigma1_hat = (1/(n-1)) sum_{t=2..n} y_t y_{t-1}',

each divided by the number of terms it sums.  The series is taken to
have mean zero; pass ``center=True`` to subtract per-location sample
means first.  Sigma0_hat is symmetrized against floating-point drift
and is positive semidefinite by construction when centering is off.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .model import PanelSeries

__all__ = ["CovariancePair", "sample_autocov"]

_SYM_TOL = 1e-12


@dataclass(frozen=True)
class CovariancePair:
    """Lag-0 and lag-1 autocovariance estimates with their sample size."""

    sigma0_hat: NDArray[np.float64]
    sigma1_hat: NDArray[np.float64]
    n_used: int

    def __post_init__(self) -> None:
        sigma0 = np.array(self.sigma0_hat, dtype=float)
        sigma1 = np.array(self.sigma1_hat, dtype=float)
        for name, mat in (("sigma0_hat", sigma0), ("sigma1_hat", sigma1)):
            if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
                raise ValueError(f"{name} must be square, got shape {mat.shape}")
            if not np.all(np.isfinite(mat)):
                raise ValueError(f"{name} must be finite")
        if sigma0.shape != sigma1.shape:
            raise ValueError(
                f"lag-0 and lag-1 shapes differ: {sigma0.shape} vs {sigma1.shape}"
            )
        scale = max(float(np.max(np.abs(sigma0))), 1.0)
        if float(np.max(np.abs(sigma0 - sigma0.T))) > _SYM_TOL * scale:
            raise ValueError("sigma0_hat must be symmetric")
        if self.n_used < 3:
            raise ValueError(f"n_used must be >= 3, got {self.n_used}")
        sigma0.setflags(write=False)
        sigma1.setflags(write=False)
        object.__setattr__(self, "sigma0_hat", sigma0)
        object.__setattr__(self, "sigma1_hat", sigma1)

    @property
    def p(self) -> int:
        return self.sigma0_hat.shape[0]


def sample_autocov(series: PanelSeries, center: bool = False) -> CovariancePair:
    """Sample lag-0 and lag-1 autocovariances of a panel."""
    if series.n < 3:
        raise ValueError(f"autocovariance estimation needs n >= 3, got n={series.n}")
    y = series.values
    if center:
        y = y - y.mean(axis=1, keepdims=True)
    n = series.n
    sigma0 = y @ y.T / n
    sigma0 = (sigma0 + sigma0.T) / 2.0
    sigma1 = y[:, 1:] @ y[:, :-1].T / (n - 1)
    return CovariancePair(sigma0_hat=sigma0, sigma1_hat=sigma1, n_used=n)
