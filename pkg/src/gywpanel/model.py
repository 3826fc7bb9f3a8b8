"""Spatio-temporal autoregressive panel model.

Each location's current value combines the contemporaneous spatial
average of its neighbours, its own previous value, and the previous
spatial average, plus independent Gaussian noise:

    y_t = D(l0) W y_t + D(l1) y_{t-1} + D(l2) W y_{t-1} + eps_t,

where D(v) is the diagonal matrix built from the length-p vector v,
W is a known spatial weight matrix with zero diagonal, and eps_t has
independent N(0, sigma_i^2) entries.  Every location carries its own
triple (l0_i, l1_i, l2_i), so the model has 3p coefficients.

Solving for y_t gives the reduced transition form

    y_t = A y_{t-1} + S^{-1} eps_t,   S = I - D(l0) W,
    A = S^{-1} (D(l1) + D(l2) W),

which is stationary when the spectral radius of A is below one.  The
lag-k autocovariances Sigma_k = Cov(y_{t+k}, y_t) of the stationary
solution satisfy the discrete Lyapunov equation

    Sigma_0 = A Sigma_0 A' + S^{-1} D(sigma^2) S^{-'} ,
    Sigma_1 = A Sigma_0.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numpy.typing import NDArray

from .errors import NonStationaryError, NumericalError, SingularSystemError
from .weights import WeightMatrix

__all__ = [
    "PanelSeries",
    "CoefficientSet",
    "ModelSpec",
    "TransitionForm",
    "StationarityCheck",
    "FittedValues",
    "build_transition",
    "transition_from",
    "is_stationary",
    "simulate",
    "draw_stable_spec",
    "population_covariances",
    "fitted_values",
    "forecast",
]

DEFAULT_CONDITION_LIMIT = 1e12


def _default_names(p: int) -> tuple[str, ...]:
    return tuple(f"loc{i + 1}" for i in range(p))


@dataclass(frozen=True)
class PanelSeries:
    """A p-location panel observed at n consecutive time points.

    ``values[i, t]`` is location i at time t, oldest time first.  Names
    label the locations and become the CSV header on disk.
    """

    values: NDArray[np.float64]
    names: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError(f"panel values must be 2-d (locations x time), got {values.ndim}-d")
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError(f"panel must be nonempty, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("panel values must be finite")
        names = self.names
        if names is None:
            names = _default_names(values.shape[0])
        else:
            names = tuple(str(x) for x in names)
            if len(names) != values.shape[0]:
                raise ValueError(
                    f"got {len(names)} location names for {values.shape[0]} locations"
                )
            if any(not x for x in names):
                raise ValueError("location names must be nonempty")
            if len(set(names)) != len(names):
                raise ValueError("location names must be unique")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", names)

    @property
    def p(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class CoefficientSet:
    """Location-specific coefficient triples (lambda0, lambda1, lambda2).

    Entries may be NaN to mark locations without an estimate; anything
    that builds on the coefficients (specs, transitions, fits) requires
    them fully finite and says so when they are not.
    """

    lambda0: NDArray[np.float64]
    lambda1: NDArray[np.float64]
    lambda2: NDArray[np.float64]

    def __post_init__(self) -> None:
        arrays = []
        for name in ("lambda0", "lambda1", "lambda2"):
            vec = np.atleast_1d(np.array(getattr(self, name), dtype=float))
            if vec.ndim != 1:
                raise ValueError(f"{name} must be a vector, got {vec.ndim}-d")
            if np.any(np.isinf(vec)):
                raise ValueError(f"{name} must not contain infinities")
            arrays.append(vec)
        if not (arrays[0].size == arrays[1].size == arrays[2].size):
            sizes = tuple(a.size for a in arrays)
            raise ValueError(f"coefficient vectors must share a length, got {sizes}")
        if arrays[0].size < 1:
            raise ValueError("coefficient vectors must be nonempty")
        for name, vec in zip(("lambda0", "lambda1", "lambda2"), arrays):
            vec.setflags(write=False)
            object.__setattr__(self, name, vec)

    @property
    def p(self) -> int:
        return self.lambda0.size

    def is_complete(self) -> bool:
        """True when every location has a finite coefficient triple."""
        return bool(
            np.all(np.isfinite(self.lambda0))
            and np.all(np.isfinite(self.lambda1))
            and np.all(np.isfinite(self.lambda2))
        )

    def as_matrix(self) -> NDArray[np.float64]:
        """Stack into a (p, 3) array with columns lambda0, lambda1, lambda2."""
        return np.column_stack([self.lambda0, self.lambda1, self.lambda2])

    @classmethod
    def from_matrix(cls, mat: NDArray[np.float64]) -> "CoefficientSet":
        mat = np.asarray(mat, dtype=float)
        if mat.ndim != 2 or mat.shape[1] != 3:
            raise ValueError(f"expected a (p, 3) coefficient matrix, got shape {mat.shape}")
        return cls(lambda0=mat[:, 0], lambda1=mat[:, 1], lambda2=mat[:, 2])


def _condition_1norm(mat: NDArray[np.float64]) -> float:
    try:
        inv = np.linalg.inv(mat)
    except np.linalg.LinAlgError:
        return math.inf
    return float(np.linalg.norm(mat, 1) * np.linalg.norm(inv, 1))


@dataclass(frozen=True)
class ModelSpec:
    """A fully specified data-generating process.

    Construction verifies dimensions and that S = I - D(lambda0) W is
    invertible; the 1-norm condition estimate is kept in
    ``s_condition``.
    """

    weights: WeightMatrix
    coeffs: CoefficientSet
    noise_sd: NDArray[np.float64]
    s_condition: float = field(init=False)

    def __post_init__(self) -> None:
        noise = np.atleast_1d(np.array(self.noise_sd, dtype=float))
        if noise.size == 1:
            noise = np.full(self.weights.p, float(noise[0]))
        if noise.ndim != 1 or noise.size != self.weights.p:
            raise ValueError(
                f"noise_sd must have length p={self.weights.p}, got shape {noise.shape}"
            )
        if not np.all(np.isfinite(noise)) or np.any(noise < 0.0):
            raise ValueError("noise_sd must be finite and nonnegative")
        if self.weights.p != self.coeffs.p:
            raise ValueError(
                f"weights are {self.weights.p} x {self.weights.p} but coefficients "
                f"cover {self.coeffs.p} locations"
            )
        if not self.coeffs.is_complete():
            raise ValueError("a model spec needs finite coefficients at every location")
        s = np.eye(self.weights.p) - self.coeffs.lambda0[:, None] * self.weights.entries
        cond = _condition_1norm(s)
        if not math.isfinite(cond) or cond > DEFAULT_CONDITION_LIMIT:
            raise SingularSystemError(
                f"I - D(lambda0) W is singular or near-singular (condition {cond:.3e})"
            )
        noise.setflags(write=False)
        object.__setattr__(self, "noise_sd", noise)
        object.__setattr__(self, "s_condition", cond)

    @property
    def p(self) -> int:
        return self.weights.p


@dataclass(frozen=True)
class TransitionForm:
    """Reduced autoregressive form: y_t = a_matrix @ y_{t-1} + s_inverse @ eps_t."""

    a_matrix: NDArray[np.float64]
    s_inverse: NDArray[np.float64]
    spectral_radius: float

    def __post_init__(self) -> None:
        for name in ("a_matrix", "s_inverse"):
            mat = np.array(getattr(self, name), dtype=float)
            mat.setflags(write=False)
            object.__setattr__(self, name, mat)

    @property
    def p(self) -> int:
        return self.a_matrix.shape[0]


class StationarityCheck(NamedTuple):
    stationary: bool
    margin: float


class FittedValues(NamedTuple):
    fitted: PanelSeries
    residuals: PanelSeries


def transition_from(
    weights: WeightMatrix,
    coeffs: CoefficientSet,
    condition_limit: float = DEFAULT_CONDITION_LIMIT,
) -> TransitionForm:
    """Reduce a (weights, coefficients) pair to its transition form."""
    if weights.p != coeffs.p:
        raise ValueError(
            f"weights are {weights.p} x {weights.p} but coefficients cover "
            f"{coeffs.p} locations"
        )
    if not coeffs.is_complete():
        raise ValueError("transition form needs finite coefficients at every location")
    p = weights.p
    w = weights.entries
    s = np.eye(p) - coeffs.lambda0[:, None] * w
    try:
        s_inverse = np.linalg.inv(s)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError("I - D(lambda0) W is singular") from exc
    cond = float(np.linalg.norm(s, 1) * np.linalg.norm(s_inverse, 1))
    if not math.isfinite(cond) or cond > condition_limit:
        raise SingularSystemError(
            f"I - D(lambda0) W is near-singular (condition {cond:.3e})"
        )
    lagged = coeffs.lambda2[:, None] * w
    lagged[np.arange(p), np.arange(p)] += coeffs.lambda1
    a = s_inverse @ lagged
    radius = float(np.max(np.abs(np.linalg.eigvals(a))))
    return TransitionForm(a_matrix=a, s_inverse=s_inverse, spectral_radius=radius)


def build_transition(spec: ModelSpec) -> TransitionForm:
    return transition_from(spec.weights, spec.coeffs)


def is_stationary(transition: TransitionForm) -> StationarityCheck:
    """Stability check with margin = 1 - spectral radius (negative when unstable)."""
    radius = transition.spectral_radius
    return StationarityCheck(stationary=radius < 1.0, margin=1.0 - radius)


def simulate(
    spec: ModelSpec,
    n: int,
    burn_in: int = 500,
    *,
    seed,
    allow_unstable: bool = False,
) -> PanelSeries:
    """Draw a length-n panel from the stationary solution.

    The recursion starts at zero and runs ``burn_in`` extra steps that
    are discarded, so the retained block is close to stationarity.
    Identical seeds give identical output.
    """
    if n < 2:
        raise ValueError(f"need n >= 2 time points, got {n}")
    if burn_in < 0:
        raise ValueError(f"burn_in must be nonnegative, got {burn_in}")
    transition = build_transition(spec)
    check = is_stationary(transition)
    if not check.stationary and not allow_unstable:
        raise NonStationaryError(
            f"spectral radius {transition.spectral_radius:.6f} >= 1; "
            "pass allow_unstable=True to simulate anyway"
        )
    rng = np.random.default_rng(seed)
    p = spec.p
    eps = rng.standard_normal((p, burn_in + n)) * spec.noise_sd[:, None]
    innov = transition.s_inverse @ eps
    a = transition.a_matrix
    values = np.empty((p, n))
    state = np.zeros(p)
    for t in range(burn_in + n):
        state = a @ state + innov[:, t]
        if t >= burn_in:
            values[:, t - burn_in] = state
    if not np.all(np.isfinite(values)):
        raise NumericalError("simulation overflowed; the spec is too unstable to simulate")
    return PanelSeries(values=values)


def draw_stable_spec(
    weights: WeightMatrix,
    rng: np.random.Generator,
    coeff_low: float = -0.6,
    coeff_high: float = 0.6,
    noise_low: float = 0.5,
    noise_high: float = 1.5,
    max_spectral_radius: float = 0.95,
    max_draws: int = 1000,
) -> tuple[ModelSpec, TransitionForm, int]:
    """Draw coefficients and noise scales until the transition is stable.

    Coefficients are uniform on [coeff_low, coeff_high], noise standard
    deviations uniform on [noise_low, noise_high].  Draws whose S is
    singular or whose spectral radius exceeds ``max_spectral_radius``
    are rejected and redrawn; the redraw count is returned.
    """
    p = weights.p
    redraws = 0
    for _ in range(max_draws):
        mat = rng.uniform(coeff_low, coeff_high, size=(p, 3))
        noise = rng.uniform(noise_low, noise_high, size=p)
        coeffs = CoefficientSet.from_matrix(mat)
        try:
            transition = transition_from(weights, coeffs)
        except SingularSystemError:
            redraws += 1
            continue
        if transition.spectral_radius > max_spectral_radius:
            redraws += 1
            continue
        spec = ModelSpec(weights=weights, coeffs=coeffs, noise_sd=noise)
        return spec, transition, redraws
    raise NumericalError(
        f"no stable coefficient draw found in {max_draws} attempts "
        f"(radius cap {max_spectral_radius})"
    )


def population_covariances(
    spec: ModelSpec,
    tol: float = 1e-14,
    max_doublings: int = 64,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Exact lag-0 and lag-1 autocovariances of the stationary solution.

    Solves Sigma_0 = A Sigma_0 A' + Q, Q = S^{-1} D(sigma^2) S^{-'},
    by the squared fixed-point iteration

        Sigma <- Sigma + M Sigma M',   M <- M M',  starting at Sigma = Q, M = A,

    which after k steps equals the series sum over A^j Q A^j' for
    j < 2^k and converges quadratically for spectral radius < 1.
    """
    transition = build_transition(spec)
    if transition.spectral_radius >= 1.0:
        raise NonStationaryError(
            f"population covariances need spectral radius < 1, "
            f"got {transition.spectral_radius:.6f}"
        )
    scaled = transition.s_inverse * spec.noise_sd[None, :]
    q = scaled @ scaled.T
    sigma = q.copy()
    m = transition.a_matrix.copy()
    for _ in range(max_doublings):
        term = m @ sigma @ m.T
        sigma += term
        if not np.all(np.isfinite(sigma)):
            raise NumericalError("Lyapunov iteration overflowed")
        scale = float(np.linalg.norm(sigma, "fro"))
        if float(np.linalg.norm(term, "fro")) <= tol * max(scale, 1e-300):
            break
        m = m @ m
    else:
        raise NumericalError(
            f"Lyapunov iteration did not converge in {max_doublings} doublings"
        )
    sigma0 = (sigma + sigma.T) / 2.0
    sigma1 = transition.a_matrix @ sigma0
    return sigma0, sigma1


def _regressor_blocks(
    series: PanelSeries, weights: WeightMatrix
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """Per-location regressors for t = 2..n: W y_t, y_{t-1}, W y_{t-1}."""
    if series.p != weights.p:
        raise ValueError(
            f"panel has {series.p} locations but weights are {weights.p} x {weights.p}"
        )
    if series.n < 2:
        raise ValueError(f"need at least 2 time points, got {series.n}")
    y = series.values
    wy = weights.entries @ y
    return wy[:, 1:], y[:, :-1], wy[:, :-1]


def fitted_values(
    series: PanelSeries, weights: WeightMatrix, coeffs: CoefficientSet
) -> FittedValues:
    """One-step fitted values and residuals for t = 2..n.

    The fit uses the structural equation directly, so the spatial term
    at time t enters with the observed contemporaneous values.
    """
    if series.p != coeffs.p:
        raise ValueError(
            f"panel has {series.p} locations but coefficients cover {coeffs.p}"
        )
    if not coeffs.is_complete():
        raise ValueError(
            "fitted values need finite coefficients at every location "
            "(some locations failed during estimation)"
        )
    spatial_now, own_lag, spatial_lag = _regressor_blocks(series, weights)
    fitted = (
        coeffs.lambda0[:, None] * spatial_now
        + coeffs.lambda1[:, None] * own_lag
        + coeffs.lambda2[:, None] * spatial_lag
    )
    residuals = series.values[:, 1:] - fitted
    return FittedValues(
        fitted=PanelSeries(values=fitted, names=series.names),
        residuals=PanelSeries(values=residuals, names=series.names),
    )


def forecast(
    series: PanelSeries,
    weights: WeightMatrix,
    coeffs: CoefficientSet,
    horizon: int,
) -> NDArray[np.float64]:
    """Iterated mean forecasts: column k is the (k+1)-step-ahead prediction.

    Extends the noise-free recursion y_{n+k} = A y_{n+k-1} from the last
    observed cross-section, so the h-step forecast equals h applications
    of the one-step map.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if series.p != weights.p or series.p != coeffs.p:
        raise ValueError(
            f"dimension mismatch: panel p={series.p}, weights p={weights.p}, "
            f"coefficients p={coeffs.p}"
        )
    transition = transition_from(weights, coeffs)
    check = is_stationary(transition)
    if not check.stationary:
        warnings.warn(
            f"forecasting with spectral radius {transition.spectral_radius:.4f} >= 1; "
            "predictions will diverge",
            RuntimeWarning,
            stacklevel=2,
        )
    out = np.empty((series.p, horizon))
    state = series.values[:, -1]
    for k in range(horizon):
        state = transition.a_matrix @ state
        out[:, k] = state
    return out
