"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical error.
Diagnostics go to stderr; machine output goes to files or to stdout with
``--out -``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from dataclasses import asdict

import numpy as np

from . import __version__
from .dataset import CsvSchema, load_csv, split_arms, standardize_covariates
from .embedding import (
    DEFAULT_GRID_SIZE,
    RidgeSolveConfig,
    counterfactual_embedding,
    decompose,
    observational_embedding,
)
from .exceptions import DataError, NumericalError
from .kernels import GaussianKernel, median_heuristic, time_grid
from .simulate import SimConfig, rate_experiment, variability_study
from .survival import build_weighted_arm, kaplan_meier
from .svg import line_chart

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def _threads_default():
    env = os.environ.get("CSE_THREADS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        raise UsageError(f"CSE_THREADS must be an integer, got {env!r}") from None


def _open_out(path):
    if path in (None, "-"):
        return _StdoutProxy()
    return open(path, "w", newline="", encoding="utf-8")


class _StdoutProxy(io.StringIO):
    def close(self):
        sys.stdout.write(self.getvalue())
        sys.stdout.flush()
        super().close()


def _write_json(path, payload):
    text = json.dumps(_jsonable(payload), indent=2, allow_nan=False) + "\n"
    with _open_out(path) as fh:
        fh.write(text)


def _write_rows(path, header, rows):
    with _open_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def _digest(path):
    if not path:
        return None
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _manifest(args, started):
    config = {k: v for k, v in vars(args).items() if k not in ("func", "command")}
    return {
        "subcommand": args.command,
        "config": config,
        "input_sha256": _digest(getattr(args, "input", None)),
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "duration_seconds": time.perf_counter() - started,
    }


# -- argument groups ---------------------------------------------------------

def _csv_list(text):
    return [s.strip() for s in str(text).split(",") if s.strip()]


def _int_list(text):
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    try:
        return [int(s) for s in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_common(p):
    p.add_argument("--config", default=None, help="flat JSON object of flag values; explicit flags win")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (falls back to $CSE_THREADS, then 1)")


def _add_data(p):
    g = p.add_argument_group("input")
    g.add_argument("--input", default=None, help="CSV file with a header row (required)")
    g.add_argument("--time-col", default="time", help="observed time column")
    g.add_argument("--event-col", default="event", help="event indicator column (1 = event)")
    g.add_argument("--arm-col", default="arm", help="treatment indicator column")
    g.add_argument("--covariate-cols", default=None,
                   help="comma-separated covariate columns (default: all other columns)")
    g.add_argument("--lenient", action="store_true",
                   help="drop rows with missing values instead of failing")
    g.add_argument("--standardize", action="store_true",
                   help="center and scale covariates using pooled moments")


def _add_ridge(p):
    g = p.add_argument_group("estimator")
    g.add_argument("--epsilon", type=float, default=None,
                   help="fixed ridge regulariser (default: constant * n^-exponent)")
    g.add_argument("--epsilon-constant", type=float, default=0.1, help="constant of the epsilon rule")
    g.add_argument("--epsilon-exponent", type=float, default=1.0 / 3.0, help="exponent of the epsilon rule")
    g.add_argument("--solver", choices=("general", "symmetric"), default="general", help="linear solver")
    g.add_argument("--cov-sigma2", type=float, default=None,
                   help="covariate kernel sigma^2 (default: median heuristic, pooled arms)")
    g.add_argument("--time-sigma2", type=float, default=None,
                   help="time kernel sigma^2 (default: median heuristic, all times)")
    g.add_argument("--grid-size", type=int, default=DEFAULT_GRID_SIZE, help="number of grid points")


def _add_output(p, out_help, svg=True, report=True):
    g = p.add_argument_group("output")
    g.add_argument("--out", default="-", help=out_help)
    if report:
        g.add_argument("--report", default=None, help="JSON report path ('-' for stdout)")
    if svg:
        g.add_argument("--svg", default=None, help="write an SVG line chart to this path")


def _add_sim(p):
    g = p.add_argument_group("simulation")
    g.add_argument("--c0", type=float, default=0.2, help="event-time noise mean, control arm")
    g.add_argument("--c1", type=float, default=0.1, help="event-time noise mean, treated arm")
    g.add_argument("--treated-mean-shift", type=float, default=0.5, help="mean of X1 in the treated arm")
    g.add_argument("--intercept-treated", type=float, default=2.0, help="log-time intercept of the treated arm")
    g.add_argument("--event-noise-sd", type=float, default=1.0, help="sd of the event-time noise")
    g.add_argument("--censor-noise-sd", type=float, default=1.0, help="sd of the censoring-time noise")
    g.add_argument("--B", type=int, default=100, help="simulation runs")
    g.add_argument("--seed", type=int, default=0, help="base seed (unsigned 64-bit)")
    g.add_argument("--grid-size", type=int, default=100, help="number of grid points")
    g.add_argument("--grid-quantile", type=float, default=0.75,
                   help="grid upper end as a quantile of pilot observed times")
    g.add_argument("--pilot-size", type=int, default=1000, help="pilot draw size per arm")
    g.add_argument("--n-mc", type=int, default=200_000, help="Monte Carlo draws for the oracle")
    g.add_argument("--epsilon", type=float, default=None, help="fixed ridge regulariser")
    g.add_argument("--epsilon-constant", type=float, default=0.1, help="constant of the epsilon rule")
    g.add_argument("--epsilon-exponent", type=float, default=1.0 / 3.0, help="exponent of the epsilon rule")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="cfsurv", description="Counterfactual survival mean embeddings.",
                     formatter_class=fmt, allow_abbrev=False)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_, func):
        p = sub.add_parser(name, help=help_, description=help_, formatter_class=fmt, allow_abbrev=False)
        p.set_defaults(func=func)
        _add_common(p)
        return p

    p = add("validate", "load and validate a dataset, print a summary", cmd_validate)
    _add_data(p)
    _add_output(p, "JSON summary path ('-' for stdout)", svg=False, report=False)

    p = add("km", "per-arm Kaplan-Meier curves", cmd_km)
    _add_data(p)
    _add_output(p, "CSV path for (t, survival, arm) rows", report=False)

    p = add("embed", "counterfactual mean embedding of one arm over the other's covariates", cmd_embed)
    _add_data(p)
    _add_ridge(p)
    p.add_argument("--direction", choices=("0|1", "1|0"), default="0|1",
                   help="'0|1': control outcome law over treated covariates; '1|0' the reverse")
    p.add_argument("--with-observational", action="store_true",
                   help="also emit both arms' own IPCW embeddings")
    _add_output(p, "CSV path for (t, value, curve_label) rows")

    p = add("decompose", "split the arm gap into covariate and treatment terms", cmd_decompose)
    _add_data(p)
    _add_ridge(p)
    p.add_argument("--observational", choices=("ipcw", "conditional"), default="ipcw",
                   help="estimator for each arm's own embedding")
    p.add_argument("--components", action="store_true",
                   help="also emit mu<0|0>, mu<0|1>, mu<1|1>")
    _add_output(p, "CSV path for (t, value, curve_label) rows")

    p = add("simulate", "variability study under the log-normal simulation model", cmd_simulate)
    _add_sim(p)
    p.add_argument("--n", type=int, default=None, help="units per arm (sets both arm sizes)")
    p.add_argument("--n-control", type=int, default=100, help="control arm size")
    p.add_argument("--n-treated", type=int, default=100, help="treated arm size")
    p.add_argument("--curves", default=None, help="CSV path for (t, run_id, value) rows")
    _add_output(p, "JSON report path ('-' for stdout)", report=False)

    p = add("rate", "fit the empirical rate of the pointwise sd in n", cmd_rate)
    _add_sim(p)
    p.add_argument("--sizes", type=_int_list, default="100,200,300,400,500,600",
                   help="comma-separated per-arm sample sizes")
    _add_output(p, "JSON report path ('-' for stdout)", report=False)
    return parser


# -- helpers ------------------------------------------------------------------

def _load(args):
    cols = _csv_list(args.covariate_cols) if args.covariate_cols else None
    if isinstance(args.covariate_cols, (list, tuple)):
        cols = list(args.covariate_cols)
    schema = CsvSchema(args.time_col, args.event_col, args.arm_col, cols)
    sample = load_csv(args.input, schema, lenient=args.lenient)
    if args.standardize:
        sample, _ = standardize_covariates(sample)
    return sample


def _ridge(args):
    return RidgeSolveConfig(
        epsilon=args.epsilon,
        constant=args.epsilon_constant,
        exponent=args.epsilon_exponent,
        solver=args.solver,
    )


def _kernels(args, sample):
    cov = args.cov_sigma2 if args.cov_sigma2 is not None else median_heuristic(sample.covariates)
    tim = args.time_sigma2 if args.time_sigma2 is not None else median_heuristic(sample.time)
    return GaussianKernel(cov), GaussianKernel(tim)


def _curve_rows(curves):
    for c in curves:
        for t, v in zip(c.grid, c.grid_values):
            yield (float(t), float(v), c.label)


def _curves_svg(path, curves, title):
    series = [{"x": c.grid, "y": c.grid_values, "label": c.label} for c in curves]
    line_chart(series, path, title=title, xlabel="time", ylabel="embedding")


def _arm_summary(sample):
    out = {}
    for a in (0, 1):
        m = sample.arm == a
        k = int(m.sum())
        out[str(a)] = {
            "n": k,
            "events": int(sample.event[m].sum()),
            "censoring_fraction": float(1 - sample.event[m].mean()) if k else None,
        }
    return out


# -- subcommands ----------------------------------------------------------------

def cmd_validate(args, started):
    sample = _load(args)
    payload = {
        "n": sample.size,
        "covariate_dim": sample.covariate_dim,
        "covariate_names": list(sample.covariate_names or ()),
        "dropped_count": sample.dropped_count,
        "arms": _arm_summary(sample),
        "time_range": [float(sample.time.min()), float(sample.time.max())] if sample.size else None,
        "manifest": _manifest(args, started),
    }
    _write_json(args.out, payload)


def cmd_km(args, started):
    sample = _load(args)
    rows, series = [], []
    for a in (0, 1):
        m = sample.arm == a
        if not m.any():
            continue
        km = kaplan_meier(sample.time[m], sample.event[m])
        rows.extend((float(t), float(s), a) for t, s in zip(km.jump_times, km.values_after))
        # step path for plotting, starting at (0, 1)
        xs, ys = [0.0], [1.0]
        for t, s in zip(km.jump_times, km.values_after):
            xs += [t, t]
            ys += [ys[-1], s]
        xs.append(float(sample.time[m].max()))
        ys.append(ys[-1])
        series.append({"x": xs, "y": ys, "label": f"arm {a}"})
    _write_rows(args.out, ["t", "survival", "arm"], rows)
    if args.svg:
        line_chart(series, args.svg, title="Kaplan-Meier", xlabel="time", ylabel="survival")


def cmd_embed(args, started):
    sample = _load(args)
    control, treated = split_arms(sample)
    kernels = _kernels(args, sample)
    grid = time_grid(sample.time, args.grid_size)
    source, target = (control, treated) if args.direction == "0|1" else (treated, control)
    a, b = args.direction.split("|")
    arm = build_weighted_arm(source)
    ridge = _ridge(args)
    curve = counterfactual_embedding(arm, target.covariates, kernels, ridge, grid, label=f"mu<{a}|{b}>")
    curves = [curve]
    warnings = [f"arm {a}: {arm.n_capped} weight(s) capped"] if arm.n_capped else []
    if args.with_observational:
        curves.append(observational_embedding(build_weighted_arm(control), kernels[1], grid, "mu<0|0>"))
        curves.append(observational_embedding(build_weighted_arm(treated), kernels[1], grid, "mu<1|1>"))
    _write_rows(args.out, ["t", "value", "curve_label"], _curve_rows(curves))
    if args.report:
        _write_json(args.report, {
            "n": source.size,
            "m": target.size,
            "epsilon": ridge.resolve(source.size),
            "sigma2_time": kernels[1].sigma2,
            "sigma2_cov": kernels[0].sigma2,
            "censoring_fraction_per_arm": {"0": control.censoring_fraction, "1": treated.censoring_fraction},
            "rkhs_norm": curve.rkhs_norm(),
            "warnings": warnings,
            "manifest": _manifest(args, started),
        })
    if args.svg:
        _curves_svg(args.svg, curves, "Counterfactual mean embedding")


def cmd_decompose(args, started):
    sample = _load(args)
    control, treated = split_arms(sample)
    kernels = _kernels(args, sample)
    grid = time_grid(sample.time, args.grid_size)
    dec = decompose(sample, kernels, _ridge(args), grid, observational=args.observational)
    curves = [dec.term_a, dec.term_b, dec.total]
    if args.components:
        curves += list(dec.components.values())
    _write_rows(args.out, ["t", "value", "curve_label"], _curve_rows(curves))
    if args.report:
        _write_json(args.report, {
            "n": control.size,
            "m": treated.size,
            "epsilon": dec.epsilon,
            "sigma2_time": kernels[1].sigma2,
            "sigma2_cov": kernels[0].sigma2,
            "censoring_fraction_per_arm": {"0": control.censoring_fraction, "1": treated.censoring_fraction},
            "rkhs_norms": {c.label: c.rkhs_norm() for c in curves},
            "warnings": list(dec.warnings),
            "manifest": _manifest(args, started),
        })
    if args.svg:
        _curves_svg(args.svg, curves, "Decomposition of the arm difference")


def _sim_config(args, **extra):
    return SimConfig(
        c0=args.c0,
        c1=args.c1,
        treated_mean_shift=args.treated_mean_shift,
        intercept_treated=args.intercept_treated,
        event_noise_sd=args.event_noise_sd,
        censor_noise_sd=args.censor_noise_sd,
        seed=args.seed,
        B=args.B,
        grid_size=args.grid_size,
        n_mc=args.n_mc,
        epsilon=args.epsilon,
        epsilon_constant=args.epsilon_constant,
        epsilon_exponent=args.epsilon_exponent,
        pilot_size=args.pilot_size,
        grid_quantile=args.grid_quantile,
        threads=args.threads,
        **extra,
    )


def cmd_simulate(args, started):
    if args.n is not None:
        args.n_control = args.n_treated = args.n
    config = _sim_config(args, n_control=args.n_control, n_treated=args.n_treated)
    report = variability_study(config)
    payload = report.to_dict(include_runs=False)
    payload["manifest"] = _manifest(args, started)
    _write_json(args.out, payload)
    if args.curves:
        rows = []
        for b, curve in enumerate(report.per_run_curves):
            rows.extend((float(t), b, float(v)) for t, v in zip(report.grid, curve))
        for tag, curve in (("mean", report.mean_curve), ("oracle", report.oracle_curve),
                           ("sd", report.pointwise_sd)):
            rows.extend((float(t), tag, float(v)) for t, v in zip(report.grid, curve))
        _write_rows(args.curves, ["t", "run_id", "value"], rows)
    if args.svg:
        series = [{"x": report.grid, "y": c, "color": "#999999", "width": 0.7, "opacity": 0.5}
                  for c in report.per_run_curves]
        series.append({"x": report.grid, "y": report.mean_curve, "color": "#000000", "width": 2, "label": "mean"})
        series.append({"x": report.grid, "y": report.oracle_curve, "color": "#e6b800", "width": 2,
                       "dash": True, "label": "oracle"})
        line_chart(series, args.svg, title=f"n = {config.n_control}, B = {config.B}",
                   xlabel="time", ylabel="mu<0|1>")


def cmd_rate(args, started):
    sizes = _int_list(args.sizes)
    config = _sim_config(args)
    overrides = {k: v for k, v in asdict(config).items()
                 if k not in ("seed", "B", "threads", "n_control", "n_treated")}
    report = rate_experiment(sizes, B=args.B, seed=args.seed, threads=args.threads, **overrides)
    payload = report.to_dict()
    payload["manifest"] = _manifest(args, started)
    _write_json(args.out, payload)
    if args.svg:
        ln = np.log(report.sample_sizes)
        fit = report.fitted_intercept - report.fitted_slope * ln
        line_chart(
            [{"x": ln, "y": np.log(report.V), "label": "log V"},
             {"x": ln, "y": fit, "dash": True, "label": f"slope -{report.fitted_slope:.3f}"}],
            args.svg, title="Empirical rate", xlabel="log n", ylabel="log V",
        )


# -- entry point --------------------------------------------------------------

def _apply_config(parser, argv):
    """Two-pass parse so that ``--config`` values act as defaults."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        with open(args.config, encoding="utf-8") as fh:
            overlay = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from None
    if not isinstance(overlay, dict):
        raise UsageError("config file must hold a flat JSON object")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    dests = {a.dest for a in sub._actions}
    overlay = {k.replace("-", "_"): v for k, v in overlay.items()}
    unknown = sorted(set(overlay) - dests - {"command", "config"})
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    overlay.pop("command", None)
    overlay.pop("config", None)
    sub.set_defaults(**overlay)
    return parser.parse_args(argv)


def run(argv=None) -> int:
    started = time.perf_counter()
    parser = build_parser()
    try:
        args = _apply_config(parser, list(sys.argv[1:] if argv is None else argv))
        if args.threads is None:
            args.threads = _threads_default()
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        if getattr(args, "input", None) is None and "input" in vars(args):
            raise UsageError("--input is required")
        args.func(args, started)
    except SystemExit as exc:
        # --help / --version
        return exc.code if isinstance(exc.code, int) else EXIT_OK
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FileNotFoundError, IsADirectoryError, UnicodeDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
