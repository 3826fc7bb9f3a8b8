"""File formats.

Panels travel as CSV with one header row of location names and one row
per time point, oldest first.  Weight matrices are dense headerless CSV
with a JSON sidecar (``<file>.meta.json``) recording the claimed
normalization.  Reports are JSON.  Floats are written with repr(), the
shortest exact round-trip form, so identical runs produce byte-identical
files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataFormatError
from .estimator import EstimationReport
from .evaluation import ExperimentResult
from .inference import HomogeneityTestReport
from .model import CoefficientSet, ModelSpec, PanelSeries
from .weights import NORMALIZATIONS, WeightMatrix

__all__ = [
    "read_panel_csv",
    "write_panel_csv",
    "read_weights_csv",
    "write_weights_csv",
    "read_coefficients_json",
    "write_model_spec_json",
    "write_estimation_report_json",
    "write_homogeneity_report_json",
    "write_experiment_csv",
    "write_experiment_summary_csv",
    "write_forecast_errors_csv",
    "write_json",
]


def _fmt(x: float) -> str:
    return repr(float(x))


def _float_list(values: Iterable[float]) -> list[float]:
    return [float(v) for v in values]


def _parse_float(raw: str, path: Path, line_num: int) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise DataFormatError(
            f"{path}: line {line_num}: {raw!r} is not a number"
        ) from None
    return value


def write_panel_csv(series: PanelSeries, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(series.names)
        for t in range(series.n):
            writer.writerow([_fmt(v) for v in series.values[:, t]])


def read_panel_csv(path: str | Path) -> PanelSeries:
    path = Path(path)
    with path.open("r", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: file is empty") from None
        names = tuple(name.strip() for name in header)
        p = len(names)
        rows: list[list[float]] = []
        for row in reader:
            if not row:
                continue
            if len(row) != p:
                raise DataFormatError(
                    f"{path}: line {reader.line_num}: expected {p} fields, got {len(row)}"
                )
            parsed = [_parse_float(cell, path, reader.line_num) for cell in row]
            for value in parsed:
                if not np.isfinite(value):
                    raise DataFormatError(
                        f"{path}: line {reader.line_num}: non-finite value {value}"
                    )
            rows.append(parsed)
    if not rows:
        raise DataFormatError(f"{path}: no data rows after the header")
    values = np.array(rows, dtype=float).T
    try:
        return PanelSeries(values=values, names=names)
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc


def _meta_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def write_weights_csv(weights: WeightMatrix, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        for row in weights.entries:
            writer.writerow([_fmt(v) for v in row])
    meta = {"p": weights.p, "normalization": weights.normalization}
    write_json(meta, _meta_path(path))


def read_weights_csv(path: str | Path) -> WeightMatrix:
    """Load a weight matrix; a missing sidecar means no claimed normalization."""
    path = Path(path)
    with path.open("r", newline="") as handle:
        reader = csv.reader(handle)
        rows: list[list[float]] = []
        width: int | None = None
        for row in reader:
            if not row:
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DataFormatError(
                    f"{path}: line {reader.line_num}: expected {width} fields, got {len(row)}"
                )
            rows.append([_parse_float(cell, path, reader.line_num) for cell in row])
    if not rows:
        raise DataFormatError(f"{path}: file is empty")
    entries = np.array(rows, dtype=float)
    normalization = "none"
    meta_file = _meta_path(path)
    if meta_file.exists():
        try:
            meta = json.loads(meta_file.read_text())
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{meta_file}: invalid JSON: {exc}") from exc
        if not isinstance(meta, dict):
            raise DataFormatError(f"{meta_file}: expected a JSON object")
        normalization = meta.get("normalization", "none")
        if normalization not in NORMALIZATIONS:
            raise DataFormatError(
                f"{meta_file}: normalization must be one of {NORMALIZATIONS}, "
                f"got {normalization!r}"
            )
        claimed_p = meta.get("p")
        if claimed_p is not None and claimed_p != entries.shape[0]:
            raise DataFormatError(
                f"{meta_file}: claims p={claimed_p} but the matrix is "
                f"{entries.shape[0]} x {entries.shape[1]}"
            )
    try:
        return WeightMatrix(entries=entries, normalization=normalization)
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc


def write_json(obj, path: str | Path) -> None:
    path = Path(path)
    with path.open("w") as handle:
        json.dump(obj, handle, indent=2)
        handle.write("\n")


def read_coefficients_json(path: str | Path) -> CoefficientSet:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise DataFormatError(f"{path}: expected a JSON object")
    missing = [k for k in ("lambda0", "lambda1", "lambda2") if k not in raw]
    if missing:
        raise DataFormatError(f"{path}: missing keys {missing}")
    try:
        return CoefficientSet(
            lambda0=np.asarray(raw["lambda0"], dtype=float),
            lambda1=np.asarray(raw["lambda1"], dtype=float),
            lambda2=np.asarray(raw["lambda2"], dtype=float),
        )
    except (TypeError, ValueError) as exc:
        raise DataFormatError(f"{path}: {exc}") from exc


def write_model_spec_json(
    spec: ModelSpec,
    path: str | Path,
    spectral_radius: float,
    seed: int,
    redraws: int,
) -> None:
    record = {
        "lambda0": _float_list(spec.coeffs.lambda0),
        "lambda1": _float_list(spec.coeffs.lambda1),
        "lambda2": _float_list(spec.coeffs.lambda2),
        "noise_sd": _float_list(spec.noise_sd),
        "spectral_radius": float(spectral_radius),
        "seed": seed,
        "redraws": redraws,
    }
    write_json(record, path)


def write_estimation_report_json(
    report: EstimationReport,
    path: str | Path,
    names: Sequence[str],
    mae_overall: float | None = None,
    mae_per_location: Sequence[float] | None = None,
) -> None:
    record = {
        "method": report.method,
        "n_used": report.n_used,
        "ridge_constant": report.ridge_constant,
        "ridge_weight": float(report.ridge_weight),
        "locations": list(names),
        "lambda0": _float_list(report.coeffs.lambda0),
        "lambda1": _float_list(report.coeffs.lambda1),
        "lambda2": _float_list(report.coeffs.lambda2),
        "equation_counts": [int(c) for c in report.equation_counts],
        "selected_equations": [[int(k) for k in sel] for sel in report.selected],
        "condition_numbers": _float_list(report.condition_numbers),
        "residual_norms": _float_list(report.residual_norms),
        "failures": {str(k): v for k, v in sorted(report.failures.items())},
    }
    if mae_overall is not None:
        record["mae_overall"] = float(mae_overall)
    if mae_per_location is not None:
        record["mae_per_location"] = _float_list(mae_per_location)
    write_json(record, path)


def write_homogeneity_report_json(
    report: HomogeneityTestReport, path: str | Path
) -> None:
    record = {
        "u_observed": float(report.u_observed),
        "p_value": float(report.p_value),
        "replicates": report.replicates,
        "seed": report.seed,
        "pooled_lambda0": float(report.pooled_coeffs[0]),
        "pooled_lambda1": float(report.pooled_coeffs[1]),
        "pooled_lambda2": float(report.pooled_coeffs[2]),
        "u_bootstrap": _float_list(report.u_bootstrap),
    }
    write_json(record, path)


def write_experiment_csv(result: ExperimentResult, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["scenario", "estimator", "p", "n", "replicate", "mae"])
        for rec in result.records:
            writer.writerow(
                [rec.scenario, rec.estimator, rec.p, rec.n, rec.replicate, _fmt(rec.mae)]
            )


def write_experiment_summary_csv(result: ExperimentResult, path: str | Path) -> None:
    path = Path(path)
    rows = result.summary()
    columns = [
        "scenario",
        "estimator",
        "p",
        "n",
        "replications",
        "mean_mae",
        "median_mae",
        "q25_mae",
        "q75_mae",
    ]
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow(
                [
                    row["scenario"],
                    row["estimator"],
                    row["p"],
                    row["n"],
                    row["replications"],
                    _fmt(row["mean_mae"]),
                    _fmt(row["median_mae"]),
                    _fmt(row["q25_mae"]),
                    _fmt(row["q75_mae"]),
                ]
            )


def write_forecast_errors_csv(
    names: Sequence[str],
    signed_error: Sequence[float],
    squared_error: Sequence[float],
    path: str | Path,
) -> None:
    path = Path(path)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["location", "signed_error", "squared_error"])
        for name, signed, squared in zip(names, signed_error, squared_error):
            writer.writerow([name, _fmt(signed), _fmt(squared)])
