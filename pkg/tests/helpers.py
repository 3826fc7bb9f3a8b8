"""Shared oracles and builders for the test suite.

The Lyapunov oracle here deliberately uses the dense Kronecker solve,
which is exact up to one linear solve and completely independent of the
doubling iteration shipped in the package.
"""

from __future__ import annotations

import numpy as np

from gywpanel.covariance import CovariancePair
from gywpanel.model import (
    CoefficientSet,
    ModelSpec,
    build_transition,
    population_covariances,
)
from gywpanel.weights import WeightMatrix


def kron_lyapunov(a: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Solve Sigma = A Sigma A' + Q by the vectorized dense system."""
    p = a.shape[0]
    lhs = np.eye(p * p) - np.kron(a, a)
    sigma = np.linalg.solve(lhs, q.reshape(p * p)).reshape(p, p)
    return (sigma + sigma.T) / 2.0


def population_pair(spec: ModelSpec, n_used: int = 1000) -> CovariancePair:
    """Exact population covariances wrapped as a CovariancePair."""
    sigma0, sigma1 = population_covariances(spec)
    return CovariancePair(sigma0_hat=sigma0, sigma1_hat=sigma1, n_used=n_used)


def constant_spec(
    weights: WeightMatrix,
    triple: tuple[float, float, float],
    noise_sd: float | np.ndarray = 1.0,
) -> ModelSpec:
    """Spec with one shared coefficient triple at every location."""
    p = weights.p
    coeffs = CoefficientSet(
        lambda0=np.full(p, triple[0]),
        lambda1=np.full(p, triple[1]),
        lambda2=np.full(p, triple[2]),
    )
    return ModelSpec(weights=weights, coeffs=coeffs, noise_sd=noise_sd)


def structural_innovations(spec: ModelSpec, values: np.ndarray) -> np.ndarray:
    """Recover eps_t = S y_t - (D(l1) + D(l2) W) y_{t-1} for t = 2..n."""
    w = spec.weights.entries
    s = np.eye(spec.p) - spec.coeffs.lambda0[:, None] * w
    lagged = spec.coeffs.lambda2[:, None] * w
    lagged[np.arange(spec.p), np.arange(spec.p)] += spec.coeffs.lambda1
    return s @ values[:, 1:] - lagged @ values[:, :-1]


def noise_free_extension(spec: ModelSpec, values: np.ndarray, steps: int) -> np.ndarray:
    """Append ``steps`` noise-free transitions to an observed panel."""
    a = build_transition(spec).a_matrix
    out = np.empty((values.shape[0], values.shape[1] + steps))
    out[:, : values.shape[1]] = values
    state = values[:, -1].copy()
    for k in range(steps):
        state = a @ state
        out[:, values.shape[1] + k] = state
    return out
