"""Figure rendering for report outputs.

Every function draws from the same result objects the delimited files
are written from and saves a PNG next to them.  Rendering is headless
(Agg) and uses fixed sizes, so repeated runs produce identical files.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)
import numpy as np

from .evaluation import ExperimentResult
from .inference import HomogeneityTestReport
from .model import PanelSeries

__all__ = [
    "save_mae_by_sample_size",
    "save_mae_by_dimension",
    "save_fitted_series",
    "save_forecast_errors",
    "save_bootstrap_histogram",
]

_BOX_STYLE = {"widths": 0.55, "showfliers": False, "medianprops": {"color": "C1"}}


def _finite(values: np.ndarray) -> np.ndarray:
    return values[np.isfinite(values)]


def save_mae_by_sample_size(result: ExperimentResult, path: str | Path) -> Path:
    """Boxplots of replicate MAE against n, one panel per (p, estimator)."""
    path = Path(path)
    config = result.config
    rows, cols = len(config.p_grid), len(config.estimators)
    fig, axes = plt.subplots(
        rows, cols, figsize=(3.2 * cols + 1.0, 2.6 * rows + 0.8), squeeze=False
    )
    for r, p in enumerate(config.p_grid):
        for c, estimator in enumerate(config.estimators):
            ax = axes[r][c]
            data = [_finite(result.cell(estimator, p, n)) for n in config.n_grid]
            ax.boxplot(data, tick_labels=[str(n) for n in config.n_grid], **_BOX_STYLE)
            ax.set_title(f"{estimator}, p={p}", fontsize=10)
            ax.set_xlabel("n")
            if c == 0:
                ax.set_ylabel("MAE")
    fig.suptitle(f"Coefficient error by sample size ({config.scenario})")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_mae_by_dimension(result: ExperimentResult, path: str | Path) -> Path:
    """Boxplots of replicate MAE against p, one panel per (n, estimator)."""
    path = Path(path)
    config = result.config
    rows, cols = len(config.n_grid), len(config.estimators)
    fig, axes = plt.subplots(
        rows, cols, figsize=(3.2 * cols + 1.0, 2.6 * rows + 0.8), squeeze=False
    )
    for r, n in enumerate(config.n_grid):
        for c, estimator in enumerate(config.estimators):
            ax = axes[r][c]
            data = [_finite(result.cell(estimator, p, n)) for p in config.p_grid]
            ax.boxplot(data, tick_labels=[str(p) for p in config.p_grid], **_BOX_STYLE)
            ax.set_title(f"{estimator}, n={n}", fontsize=10)
            ax.set_xlabel("p")
            if c == 0:
                ax.set_ylabel("MAE")
    fig.suptitle(f"Coefficient error by panel dimension ({config.scenario})")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_fitted_series(
    observed: PanelSeries,
    fitted: PanelSeries,
    path: str | Path,
    locations: Sequence[int] | None = None,
    max_locations: int = 4,
) -> Path:
    """Observed vs one-step fitted paths for a few locations."""
    path = Path(path)
    if locations is None:
        locations = list(range(min(observed.p, max_locations)))
    fig, axes = plt.subplots(
        len(locations), 1, figsize=(7.0, 1.9 * len(locations) + 0.8), squeeze=False
    )
    lag = observed.n - fitted.n
    time_fit = np.arange(lag, observed.n)
    for ax, i in zip(axes[:, 0], locations):
        ax.plot(np.arange(observed.n), observed.values[i], lw=0.8, label="observed")
        ax.plot(time_fit, fitted.values[i], lw=1.4, label="fitted")
        ax.set_ylabel(observed.names[i], fontsize=9)
    axes[0, 0].legend(loc="upper right", fontsize=8)
    axes[-1, 0].set_xlabel("time")
    fig.suptitle("Observed and one-step fitted values")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_bootstrap_histogram(report: HomogeneityTestReport, path: str | Path) -> Path:
    """Bootstrap distribution of the homogeneity statistic with the observed value."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.hist(report.u_bootstrap, bins=40, color="C0", alpha=0.75)
    ax.axvline(report.u_observed, color="C3", lw=1.5, label="observed U")
    ax.set_xlabel("bootstrap statistic")
    ax.set_ylabel("count")
    ax.set_title(f"Homogeneity bootstrap (p-value {report.p_value:.3f})")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_forecast_errors(
    names: Sequence[str],
    signed_error: Sequence[float],
    squared_error: Sequence[float],
    path: str | Path,
) -> Path:
    """Per-location signed and squared forecast errors over the holdout."""
    path = Path(path)
    x = np.arange(len(names))
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(max(6.0, 0.25 * len(names)), 5.2))
    ax1.axhline(0.0, color="0.6", lw=0.8)
    ax1.plot(x, np.asarray(signed_error, dtype=float), "o", ms=3)
    ax1.set_ylabel("mean error")
    ax2.plot(x, np.asarray(squared_error, dtype=float), "o", ms=3, color="C1")
    ax2.set_ylabel("mean squared error")
    ax2.set_xlabel("location")
    for ax in (ax1, ax2):
        if len(names) <= 40:
            ax.set_xticks(x)
            ax.set_xticklabels(names, rotation=90, fontsize=7)
    fig.suptitle("Holdout forecast errors by location")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
