"""Spatial weight matrices.

A weight matrix W encodes which locations influence each other: entry
w_ij is the weight location i places on location j, and the diagonal is
identically zero so no location neighbours itself.  The constructors
here cover the two synthetic designs used in the convergence
experiments (banded blocks on the diagonal, and banded blocks repeated
down even sub-diagonal block positions) plus two data-driven designs
(absolute-correlation weights and truncated inverse-distance weights).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from numpy.typing import NDArray

if TYPE_CHECKING:
    from .model import PanelSeries

__all__ = [
    "WeightMatrix",
    "scenario1_weights",
    "scenario2_weights",
    "correlation_weights",
    "inverse_distance_weights",
]

NORMALIZATIONS = ("none", "row", "column")

_SUM_TOL = 1e-12


@dataclass(frozen=True)
class WeightMatrix:
    """A validated p x p spatial weight matrix.

    Parameters
    ----------
    entries:
        Square array of nonnegative finite weights with a zero diagonal.
    normalization:
        One of ``"none"``, ``"row"``, ``"column"``.  When ``"row"``
        (``"column"``) is claimed, every row (column) containing a
        nonzero entry must sum to 1 within 1e-12.

    The entry array is copied and marked read-only, so instances can be
    shared freely across threads and processes.
    """

    entries: NDArray[np.float64]
    normalization: str = "none"

    def __post_init__(self) -> None:
        entries = np.array(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError(f"weight matrix must be square, got shape {entries.shape}")
        if entries.shape[0] < 1:
            raise ValueError("weight matrix must have at least one location")
        if not np.all(np.isfinite(entries)):
            raise ValueError("weight matrix entries must be finite")
        if np.any(entries < 0.0):
            raise ValueError("weight matrix entries must be nonnegative")
        if np.any(np.diagonal(entries) != 0.0):
            raise ValueError("weight matrix diagonal must be exactly zero")
        if self.normalization not in NORMALIZATIONS:
            msg = f"normalization must be one of {NORMALIZATIONS}, got {self.normalization!r}"
            raise ValueError(msg)
        if self.normalization == "row":
            _check_unit_sums(entries.sum(axis=1), "row")
        elif self.normalization == "column":
            _check_unit_sums(entries.sum(axis=0), "column")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def p(self) -> int:
        return self.entries.shape[0]


def _check_unit_sums(sums: NDArray[np.float64], axis_name: str) -> None:
    nonzero = sums != 0.0
    if np.any(np.abs(sums[nonzero] - 1.0) > _SUM_TOL):
        worst = float(np.max(np.abs(sums[nonzero] - 1.0)))
        msg = (
            f"claimed {axis_name} normalization but a nonzero {axis_name} "
            f"sum deviates from 1 by {worst:.3e}"
        )
        raise ValueError(msg)


def _row_normalized(entries: NDArray[np.float64]) -> NDArray[np.float64]:
    sums = entries.sum(axis=1, keepdims=True)
    out = np.divide(entries, sums, out=np.zeros_like(entries), where=sums != 0.0)
    return out


def _band_block(m: int, band: int) -> NDArray[np.float64]:
    """Row-normalized m x m matrix with ones where 1 <= |i - j| <= band."""
    idx = np.arange(m)
    dist = np.abs(idx[:, None] - idx[None, :])
    block = ((dist >= 1) & (dist <= band)).astype(float)
    return _row_normalized(block)


def _block_grid_size(p: int) -> int:
    m = math.isqrt(p)
    if m * m != p:
        raise ValueError(f"p must be a perfect square, got {p}")
    if m <= 1:
        raise ValueError(f"p={p} is too small for the band construction (sqrt(p) <= 1)")
    return m


def scenario1_weights(p: int) -> WeightMatrix:
    """Block-diagonal design: sqrt(p) independent districts.

    Each district is a sqrt(p) x sqrt(p) band matrix with ones at
    1 <= |i - j| <= 4, row-normalized.  Rows therefore sum to 1 and the
    matrix is block diagonal, so districts do not interact.
    """
    m = _block_grid_size(p)
    star = _band_block(m, band=4)
    entries = np.zeros((p, p))
    for b in range(m):
        sl = slice(b * m, (b + 1) * m)
        entries[sl, sl] = star
    return WeightMatrix(entries=entries, normalization="row")


def scenario2_weights(p: int) -> WeightMatrix:
    """Cross-district design with growing connectivity.

    The same band block (band width 2 here) sits on the main block
    diagonal and on every even sub-diagonal block position (block
    offsets 2, 4, ...), so the number of districts influencing a given
    district grows with the block count.  The assembled matrix is
    row-normalized, which divides each block copy in a block-row by
    that row's block count and keeps row sums at 1.
    """
    m = _block_grid_size(p)
    star = _band_block(m, band=2)
    entries = np.zeros((p, p))
    for b in range(m):
        rows = slice(b * m, (b + 1) * m)
        for c in range(b, -1, -2):
            entries[rows, c * m : (c + 1) * m] = star
    return WeightMatrix(entries=_row_normalized(entries), normalization="row")


def correlation_weights(series: "PanelSeries") -> WeightMatrix:
    """Column-normalized absolute correlation weights.

    w_ij = |corr(y_i, y_j)| off the diagonal, then each column is
    divided by its sum, so column j describes how the remaining
    locations share the influence attributed to location j.
    """
    values = series.values
    if series.n < 2:
        raise ValueError("correlation weights need at least two time points")
    sds = values.std(axis=1)
    flat = np.flatnonzero(sds == 0.0)
    if flat.size:
        name = series.names[int(flat[0])]
        raise ValueError(f"location {name!r} has zero variance; correlation is undefined")
    corr = np.corrcoef(values)
    entries = np.abs(corr)
    np.fill_diagonal(entries, 0.0)
    sums = entries.sum(axis=0, keepdims=True)
    entries = np.divide(entries, sums, out=np.zeros_like(entries), where=sums != 0.0)
    return WeightMatrix(entries=entries, normalization="column")


def inverse_distance_weights(p: int, tau: float) -> WeightMatrix:
    """Column-normalized inverse-distance weights on a line of locations.

    Raw weights are 1 / (1 + |i - j|), zeroed where the index distance
    exceeds ``tau`` before normalization.
    """
    if p < 2:
        raise ValueError(f"inverse-distance weights need p >= 2, got {p}")
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    idx = np.arange(p)
    dist = np.abs(idx[:, None] - idx[None, :]).astype(float)
    entries = 1.0 / (1.0 + dist)
    entries[dist > tau] = 0.0
    np.fill_diagonal(entries, 0.0)
    sums = entries.sum(axis=0, keepdims=True)
    entries = np.divide(entries, sums, out=np.zeros_like(entries), where=sums != 0.0)
    return WeightMatrix(entries=entries, normalization="column")
