"""Command-line interface.

Five subcommands cover the full workflow:

    gywpanel simulate          draw a stable spec and write a panel
    gywpanel estimate          fit the coefficients of one panel
    gywpanel test-homogeneity  bootstrap test of one shared coefficient triple
    gywpanel forecast          iterated forecasts, optionally scored on a holdout
    gywpanel experiment        replicated convergence study over a (p, n) grid

Every command takes a single JSON configuration file.  The schema is
strict: unknown keys are rejected, and a ``seed`` is always required so
any run can be reproduced exactly.  Each command writes the resolved
configuration back to ``run_config.json`` in the output directory
alongside its delimited outputs, and report-style commands also render
PNG figures there (disable with ``"figures": false``).

Exit codes: 0 success, 2 configuration error, 3 input data error,
4 numerical failure, 5 partial success (some locations unestimable).
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import metadata
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import evaluation, figures, io
from .errors import ConfigError, DataFormatError, NumericalError
from .estimator import asymptotic_variance
from .evaluation import ExperimentConfig, mae, out_of_sample_eval, run_experiment
from .inference import homogeneity_test
from .model import (
    ModelSpec,
    PanelSeries,
    build_transition,
    draw_stable_spec,
    fitted_values,
    forecast as model_forecast,
    simulate,
)
from .weights import (
    WeightMatrix,
    correlation_weights,
    inverse_distance_weights,
    scenario1_weights,
    scenario2_weights,
)

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4
EXIT_PARTIAL = 5


def _version() -> str:
    try:
        return metadata.version("gywpanel")
    except metadata.PackageNotFoundError:
        return "unknown"


# ---------------------------------------------------------------- schema


def _check_keys(obj: dict, allowed: set[str], required: set[str], context: str) -> None:
    if not isinstance(obj, dict):
        raise ConfigError(f"{context}: expected a JSON object")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigError(f"{context}: unknown keys {unknown}")
    missing = sorted(required - set(obj))
    if missing:
        raise ConfigError(f"{context}: missing required keys {missing}")


def _as_int(obj: dict, key: str, context: str, default=None, minimum=None):
    if key not in obj:
        return default
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{context}: {key} must be an integer")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{context}: {key} must be >= {minimum}, got {value}")
    return value


def _as_float(obj: dict, key: str, context: str, default=None):
    if key not in obj:
        return default
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{context}: {key} must be a number")
    return float(value)


def _as_bool(obj: dict, key: str, context: str, default=None):
    if key not in obj:
        return default
    value = obj[key]
    if not isinstance(value, bool):
        raise ConfigError(f"{context}: {key} must be true or false")
    return value


def _as_str(obj: dict, key: str, context: str, default=None, choices=None):
    if key not in obj:
        return default
    value = obj[key]
    if not isinstance(value, str):
        raise ConfigError(f"{context}: {key} must be a string")
    if choices is not None and value not in choices:
        raise ConfigError(f"{context}: {key} must be one of {sorted(choices)}, got {value!r}")
    return value


def _as_int_list(obj: dict, key: str, context: str, minimum=1):
    value = obj[key]
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{context}: {key} must be a nonempty list of integers")
    out = []
    for item in value:
        if isinstance(item, bool) or not isinstance(item, int):
            raise ConfigError(f"{context}: {key} entries must be integers")
        if item < minimum:
            raise ConfigError(f"{context}: {key} entries must be >= {minimum}")
        out.append(item)
    return out


def _as_str_list(obj: dict, key: str, context: str):
    value = obj[key]
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{context}: {key} must be a nonempty list of strings")
    for item in value:
        if not isinstance(item, str):
            raise ConfigError(f"{context}: {key} entries must be strings")
    return list(value)


def _load_config(path: str) -> dict:
    file = Path(path)
    try:
        text = file.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {file}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{file}: invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ConfigError(f"{file}: the configuration must be a JSON object")
    return obj


def _output_dir(config: dict, context: str) -> Path:
    raw = _as_str(config, "output_dir", context)
    if raw is None:
        raise ConfigError(f"{context}: missing required keys ['output_dir']")
    out = Path(raw)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"{context}: cannot create output_dir {out}: {exc}") from exc
    return out


def _write_run_config(out: Path, command: str, resolved: dict) -> None:
    record = {"command": command, "version": _version(), "config": resolved}
    io.write_json(record, out / "run_config.json")


# ---------------------------------------------------------------- weights


_WEIGHT_KINDS = {"scenario1", "scenario2", "file", "correlation", "inverse_distance"}


def _parse_weights_section(config: dict, context: str) -> dict:
    section = config.get("weights")
    if section is None:
        raise ConfigError(f"{context}: missing required keys ['weights']")
    ctx = f"{context}.weights"
    if not isinstance(section, dict):
        raise ConfigError(f"{ctx}: expected a JSON object")
    kind = _as_str(section, "kind", ctx, choices=_WEIGHT_KINDS)
    if kind is None:
        raise ConfigError(f"{ctx}: missing required keys ['kind']")
    allowed = {"kind"}
    required = {"kind"}
    if kind == "file":
        allowed |= {"path"}
        required |= {"path"}
    elif kind == "inverse_distance":
        allowed |= {"tau"}
        required |= {"tau"}
    _check_keys(section, allowed, required, ctx)
    if kind == "file":
        _as_str(section, "path", ctx)
    if kind == "inverse_distance":
        tau = _as_float(section, "tau", ctx)
        if not tau > 0:
            raise ConfigError(f"{ctx}: tau must be positive, got {tau}")
    return section


def _build_weights(
    section: dict, series: PanelSeries | None, p_hint: int | None, context: str
) -> WeightMatrix:
    kind = section["kind"]
    p = series.p if series is not None else p_hint
    if kind == "file":
        weights = io.read_weights_csv(section["path"])
        if series is not None and weights.p != series.p:
            raise DataFormatError(
                f"weights file covers {weights.p} locations but the panel has {series.p}"
            )
        return weights
    if kind == "correlation":
        if series is None:
            raise ConfigError(
                f"{context}: correlation weights need an observed panel"
            )
        return correlation_weights(series)
    if p is None:
        raise ConfigError(f"{context}: cannot infer p for weights kind {kind!r}")
    if kind == "scenario1":
        return scenario1_weights(p)
    if kind == "scenario2":
        return scenario2_weights(p)
    return inverse_distance_weights(p, float(section["tau"]))


# ---------------------------------------------------------------- simulate


_SIMULATE_KEYS = {
    "seed",
    "output_dir",
    "n",
    "p",
    "burn_in",
    "weights",
    "coefficients",
    "noise",
    "coeff_low",
    "coeff_high",
    "max_spectral_radius",
    "allow_unstable",
}


def _parse_noise(config: dict, context: str) -> dict:
    section = config.get("noise", {"low": 0.5, "high": 1.5})
    ctx = f"{context}.noise"
    if not isinstance(section, dict):
        raise ConfigError(f"{ctx}: expected a JSON object")
    keys = set(section)
    if keys == {"value"}:
        value = _as_float(section, "value", ctx)
        if value < 0:
            raise ConfigError(f"{ctx}: value must be nonnegative")
        return {"value": value}
    if keys == {"values"}:
        values = section["values"]
        if not isinstance(values, list) or not values:
            raise ConfigError(f"{ctx}: values must be a nonempty list of numbers")
        out = []
        for v in values:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"{ctx}: values must be numbers")
            if v < 0:
                raise ConfigError(f"{ctx}: values must be nonnegative")
            out.append(float(v))
        return {"values": out}
    if keys == {"low", "high"}:
        low = _as_float(section, "low", ctx)
        high = _as_float(section, "high", ctx)
        if not 0 <= low <= high:
            raise ConfigError(f"{ctx}: need 0 <= low <= high")
        return {"low": low, "high": high}
    raise ConfigError(
        f"{ctx}: give either low/high bounds, a single value, or per-location values"
    )


def cmd_simulate(config: dict) -> int:
    context = "simulate"
    _check_keys(config, _SIMULATE_KEYS, {"seed", "output_dir", "n", "weights"}, context)
    seed = _as_int(config, "seed", context, minimum=0)
    n = _as_int(config, "n", context, minimum=2)
    burn_in = _as_int(config, "burn_in", context, default=500, minimum=0)
    p_hint = _as_int(config, "p", context, minimum=1)
    weights_section = _parse_weights_section(config, context)
    noise = _parse_noise(config, context)
    coeff_low = _as_float(config, "coeff_low", context, default=-0.6)
    coeff_high = _as_float(config, "coeff_high", context, default=0.6)
    max_radius = _as_float(config, "max_spectral_radius", context, default=0.95)
    allow_unstable = _as_bool(config, "allow_unstable", context, default=False)
    coeff_path = _as_str(config, "coefficients", context)
    out = _output_dir(config, context)

    weights = _build_weights(weights_section, None, p_hint, context)
    p = weights.p
    if p_hint is not None and p_hint != p:
        raise ConfigError(f"{context}: p={p_hint} but the weights cover {p} locations")

    redraws = 0
    if coeff_path is not None:
        coeffs = io.read_coefficients_json(coeff_path)
        if "low" in noise:
            raise ConfigError(
                f"{context}: explicit coefficients need a fixed noise value or values"
            )
        if "value" in noise:
            noise_sd = np.full(p, noise["value"])
        else:
            noise_sd = np.asarray(noise["values"], dtype=float)
        spec = ModelSpec(weights=weights, coeffs=coeffs, noise_sd=noise_sd)
        transition = build_transition(spec)
    else:
        if "low" not in noise:
            box = (noise.get("value"), noise.get("value"))
            if noise.get("values") is not None:
                raise ConfigError(
                    f"{context}: per-location noise values need explicit coefficients"
                )
            noise = {"low": box[0], "high": box[1]}
        spec, transition, redraws = draw_stable_spec(
            weights,
            np.random.default_rng(np.random.SeedSequence([seed, 0])),
            coeff_low=coeff_low,
            coeff_high=coeff_high,
            noise_low=noise["low"],
            noise_high=noise["high"],
            max_spectral_radius=max_radius,
        )
    series = simulate(
        spec,
        n,
        burn_in=burn_in,
        seed=np.random.SeedSequence([seed, 1]),
        allow_unstable=allow_unstable,
    )
    io.write_panel_csv(series, out / "series.csv")
    io.write_weights_csv(weights, out / "weights.csv")
    io.write_model_spec_json(
        spec, out / "model_spec.json", transition.spectral_radius, seed, redraws
    )
    _write_run_config(out, "simulate", config)
    print(f"simulated panel: p={p} n={n} spectral_radius={transition.spectral_radius!r}")
    print(f"redraws: {redraws}")
    print(f"output: {out}")
    return EXIT_OK


# ---------------------------------------------------------------- estimate


_ESTIMATE_KEYS = {
    "seed",
    "output_dir",
    "series",
    "weights",
    "method",
    "equation_count",
    "ridge_constant",
    "truth",
    "standard_errors",
    "figures",
}


def cmd_estimate(config: dict) -> int:
    context = "estimate"
    _check_keys(config, _ESTIMATE_KEYS, {"seed", "output_dir", "series", "weights"}, context)
    _as_int(config, "seed", context, minimum=0)
    series_path = _as_str(config, "series", context)
    method = _as_str(
        config, "method", context, default="full", choices=set(evaluation.ESTIMATORS)
    )
    equation_count = _as_int(config, "equation_count", context, minimum=3)
    ridge_constant = _as_float(config, "ridge_constant", context)
    truth_path = _as_str(config, "truth", context)
    want_se = _as_bool(config, "standard_errors", context, default=False)
    want_figures = _as_bool(config, "figures", context, default=True)
    weights_section = _parse_weights_section(config, context)
    out = _output_dir(config, context)

    series = io.read_panel_csv(series_path)
    weights = _build_weights(weights_section, series, None, context)
    report = evaluation.fit_estimator(
        series, weights, method, equation_count, ridge_constant
    )

    mae_overall = None
    mae_per_location = None
    if truth_path is not None:
        truth = io.read_coefficients_json(truth_path)
        result = mae(report.coeffs, truth)
        mae_overall = result.overall
        mae_per_location = result.per_location
    io.write_estimation_report_json(
        report,
        out / "estimation_report.json",
        series.names,
        mae_overall=mae_overall,
        mae_per_location=mae_per_location,
    )
    if want_se:
        errors = np.full((series.p, 3), np.nan)
        for i in range(series.p):
            if i in report.failures:
                continue
            try:
                errors[i] = np.sqrt(np.diag(asymptotic_variance(series, weights, report, i)))
            except NumericalError:
                pass
        io.write_json(
            {
                "locations": list(series.names),
                "se_lambda0": [float(v) for v in errors[:, 0]],
                "se_lambda1": [float(v) for v in errors[:, 1]],
                "se_lambda2": [float(v) for v in errors[:, 2]],
            },
            out / "standard_errors.json",
        )
    if want_figures and not report.failures:
        fit = fitted_values(series, weights, report.coeffs)
        figures.save_fitted_series(series, fit.fitted, out / "fitted_series.png")
    _write_run_config(out, "estimate", config)
    print(f"method: {report.method}")
    print(f"locations: {series.p}  time_points: {series.n}")
    print(f"failures: {len(report.failures)}")
    if mae_overall is not None:
        print(f"mae_overall: {mae_overall!r}")
    print(f"output: {out}")
    return EXIT_PARTIAL if report.failures else EXIT_OK


# ---------------------------------------------------------------- homogeneity


_TEST_KEYS = {"seed", "output_dir", "series", "weights", "replicates", "figures"}


def cmd_test_homogeneity(config: dict) -> int:
    context = "test-homogeneity"
    _check_keys(config, _TEST_KEYS, {"seed", "output_dir", "series", "weights"}, context)
    seed = _as_int(config, "seed", context, minimum=0)
    series_path = _as_str(config, "series", context)
    replicates = _as_int(config, "replicates", context, default=1000, minimum=100)
    want_figures = _as_bool(config, "figures", context, default=True)
    weights_section = _parse_weights_section(config, context)
    out = _output_dir(config, context)

    series = io.read_panel_csv(series_path)
    weights = _build_weights(weights_section, series, None, context)
    report = homogeneity_test(series, weights, replicates, seed=seed)
    io.write_homogeneity_report_json(report, out / "homogeneity_report.json")
    if want_figures:
        figures.save_bootstrap_histogram(report, out / "bootstrap_histogram.png")
    _write_run_config(out, "test-homogeneity", config)
    print(f"u_observed: {report.u_observed!r}")
    print(f"p_value: {report.p_value!r}")
    print(f"replicates: {report.replicates}")
    print(f"output: {out}")
    return EXIT_OK


# ---------------------------------------------------------------- forecast


_FORECAST_KEYS = {
    "seed",
    "output_dir",
    "series",
    "weights",
    "horizon",
    "holdout",
    "method",
    "equation_count",
    "ridge_constant",
    "coefficients",
    "figures",
}


def cmd_forecast(config: dict) -> int:
    context = "forecast"
    _check_keys(config, _FORECAST_KEYS, {"seed", "output_dir", "series", "weights"}, context)
    _as_int(config, "seed", context, minimum=0)
    series_path = _as_str(config, "series", context)
    horizon = _as_int(config, "horizon", context, default=6, minimum=1)
    holdout = _as_bool(config, "holdout", context, default=True)
    method = _as_str(
        config, "method", context, default="full", choices=set(evaluation.ESTIMATORS)
    )
    equation_count = _as_int(config, "equation_count", context, minimum=3)
    ridge_constant = _as_float(config, "ridge_constant", context)
    coeff_path = _as_str(config, "coefficients", context)
    want_figures = _as_bool(config, "figures", context, default=True)
    weights_section = _parse_weights_section(config, context)
    out = _output_dir(config, context)

    series = io.read_panel_csv(series_path)
    weights = _build_weights(weights_section, series, None, context)
    coeffs = io.read_coefficients_json(coeff_path) if coeff_path is not None else None

    if holdout:
        result = out_of_sample_eval(
            series,
            weights,
            holdout=horizon,
            method=method,
            d=equation_count,
            ridge_constant=ridge_constant,
            coeffs=coeffs,
        )
        io.write_panel_csv(
            PanelSeries(values=result.forecasts, names=series.names),
            out / "forecasts.csv",
        )
        io.write_forecast_errors_csv(
            series.names, result.signed_error, result.squared_error,
            out / "forecast_errors.csv",
        )
        if want_figures:
            figures.save_forecast_errors(
                series.names, result.signed_error, result.squared_error,
                out / "forecast_errors.png",
            )
        mean_abs = float(np.mean(np.abs(result.signed_error)))
        print(f"holdout: {horizon}")
        print(f"mean_abs_signed_error: {mean_abs!r}")
    else:
        if coeffs is None:
            report = evaluation.fit_estimator(
                series, weights, method, equation_count, ridge_constant
            )
            if report.failures:
                failed = sorted(report.failures)[:5]
                raise NumericalError(
                    f"estimation failed at locations {failed}; cannot forecast"
                )
            coeffs = report.coeffs
        predictions = model_forecast(series, weights, coeffs, horizon)
        io.write_panel_csv(
            PanelSeries(values=predictions, names=series.names), out / "forecasts.csv"
        )
        print(f"horizon: {horizon}")
    _write_run_config(out, "forecast", config)
    print(f"output: {out}")
    return EXIT_OK


# ---------------------------------------------------------------- experiment


_EXPERIMENT_KEYS = {
    "seed",
    "output_dir",
    "scenario",
    "p_grid",
    "n_grid",
    "replications",
    "estimators",
    "burn_in",
    "coeff_low",
    "coeff_high",
    "noise_low",
    "noise_high",
    "max_spectral_radius",
    "equation_count",
    "ridge_constant",
    "weights",
    "workers",
    "figures",
}


def cmd_experiment(config: dict, workers_flag: int | None = None) -> int:
    context = "experiment"
    _check_keys(
        config, _EXPERIMENT_KEYS, {"seed", "output_dir", "scenario", "p_grid", "n_grid"},
        context,
    )
    seed = _as_int(config, "seed", context, minimum=0)
    scenario = _as_str(config, "scenario", context, choices=set(evaluation.SCENARIOS))
    p_grid = _as_int_list(config, "p_grid", context, minimum=2)
    n_grid = _as_int_list(config, "n_grid", context, minimum=3)
    replications = _as_int(config, "replications", context, default=100, minimum=1)
    if "estimators" in config:
        estimators = tuple(_as_str_list(config, "estimators", context))
    else:
        estimators = ("full", "restricted")
    burn_in = _as_int(config, "burn_in", context, default=500, minimum=0)
    coeff_low = _as_float(config, "coeff_low", context, default=-0.6)
    coeff_high = _as_float(config, "coeff_high", context, default=0.6)
    noise_low = _as_float(config, "noise_low", context, default=0.5)
    noise_high = _as_float(config, "noise_high", context, default=1.5)
    max_radius = _as_float(config, "max_spectral_radius", context, default=0.95)
    equation_count = _as_int(config, "equation_count", context, minimum=3)
    ridge_constant = _as_float(config, "ridge_constant", context)
    workers_key = _as_int(config, "workers", context, minimum=1)
    want_figures = _as_bool(config, "figures", context, default=True)
    out = _output_dir(config, context)

    custom_weights = None
    if scenario == "custom":
        if "weights" not in config:
            raise ConfigError(f"{context}: scenario 'custom' needs a weights section")
        section = _parse_weights_section(config, context)
        if section["kind"] != "file":
            raise ConfigError(
                f"{context}: scenario 'custom' needs weights of kind 'file'"
            )
        custom_weights = _build_weights(section, None, None, context)
    elif "weights" in config:
        raise ConfigError(
            f"{context}: a weights section is only valid with scenario 'custom'"
        )

    try:
        exp_config = ExperimentConfig(
            scenario=scenario,
            p_grid=tuple(p_grid),
            n_grid=tuple(n_grid),
            seed=seed,
            replications=replications,
            estimators=estimators,
            burn_in=burn_in,
            coeff_low=coeff_low,
            coeff_high=coeff_high,
            noise_low=noise_low,
            noise_high=noise_high,
            max_spectral_radius=max_radius,
            equation_count=equation_count,
            ridge_constant=ridge_constant,
            custom_weights=custom_weights,
        )
    except ValueError as exc:
        raise ConfigError(f"{context}: {exc}") from exc
    workers = workers_flag if workers_flag is not None else workers_key
    result = run_experiment(exp_config, workers=workers)
    io.write_experiment_csv(result, out / "experiment_results.csv")
    io.write_experiment_summary_csv(result, out / "experiment_summary.csv")
    if want_figures:
        figures.save_mae_by_sample_size(result, out / "mae_by_n.png")
        figures.save_mae_by_dimension(result, out / "mae_by_p.png")
    _write_run_config(out, "experiment", config)
    total_redraws = sum(result.redraws.values())
    print(f"records: {len(result.records)}")
    print(f"redraws: {total_redraws}")
    print(f"output: {out}")
    return EXIT_OK


# ---------------------------------------------------------------- dispatch


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gywpanel",
        description="Generalized Yule-Walker estimation for spatio-temporal panels.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("simulate", "draw a stable spec and simulate a panel"),
        ("estimate", "estimate location-specific coefficients"),
        ("test-homogeneity", "bootstrap test of coefficient homogeneity"),
        ("forecast", "iterated forecasts with optional holdout scoring"),
        ("experiment", "replicated convergence experiment"),
    ]:
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="path to the JSON configuration")
        if name == "experiment":
            cmd.add_argument(
                "--workers",
                type=int,
                default=None,
                help="process count (overrides the config key and "
                f"the {evaluation.WORKERS_ENV_VAR} variable)",
            )
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    handlers: dict[str, Callable[[], int]] = {
        "simulate": lambda: cmd_simulate(config),
        "estimate": lambda: cmd_estimate(config),
        "test-homogeneity": lambda: cmd_test_homogeneity(config),
        "forecast": lambda: cmd_forecast(config),
        "experiment": lambda: cmd_experiment(config, getattr(args, "workers", None)),
    }
    try:
        config = _load_config(args.config)
        return handlers[args.command]()
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataFormatError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, ValueError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
