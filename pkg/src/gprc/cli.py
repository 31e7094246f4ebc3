"""Command-line interface.

``gprc experiment CONFIG``
    run a simulation study described by a TOML config.
``gprc calibrate DATA --model ... --alpha ...``
    tune the learning rate for a data file and print the calibrated limit.
``gprc scenarios list``
    list the built-in simulation scenarios.
"""

from __future__ import annotations

import argparse
import csv
import logging
import re
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .calibrate import MAX_ITER, StepSchedule, gprc_calibrate, prepare_replicates
from .errors import ConfigError, GPrCError, InsufficientDataError
from .experiment import (
    DEFAULT_BOOTSTRAP,
    DEFAULT_MODEL,
    MODELS,
    build_model,
    default_threads,
    load_config,
    run_experiment,
)
from .experiment import _MODEL_FAMILY as MODEL_FAMILY
from .models import GPAdapter, SpatialData, variogram_fit
from .resampling import BootstrapPlan
from .simgen import SCENARIOS, Scenario

__all__ = ["main", "build_parser", "read_data", "calibrate_file"]

log = logging.getLogger("gprc")

_SPLIT = re.compile(r"[,\s]+")


class DataParseError(ConfigError):
    """A data file could not be parsed."""


def _parse_rows(path):
    rows = []
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise DataParseError(f"cannot read data file: {exc}", path=str(path)) from exc
    width = None
    for lineno, raw in enumerate(lines, start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        try:
            row = [float(tok) for tok in _SPLIT.split(text) if tok]
        except ValueError:
            raise DataParseError(f"non-numeric entry in {raw.strip()!r}", path=str(path),
                                 line=lineno) from None
        if not all(np.isfinite(row)):
            raise DataParseError("non-finite entry", path=str(path), line=lineno)
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise DataParseError(f"expected {width} columns, found {len(row)}", path=str(path),
                                 line=lineno)
        rows.append(row)
    if not rows:
        raise InsufficientDataError(f"{path}: no data rows")
    return np.array(rows, dtype=float)


def read_data(path, structure, target=(0.0, 0.0)):
    """Parse a data file for the given structure.

    ``iid`` and ``timeseries`` files hold one numeric column (time order for
    the latter).  ``regression`` files hold covariates followed by the
    response on each row.  ``spatial`` files hold ``x, y, value`` triples.
    Blank lines and ``#`` comments are ignored.
    """
    rows = _parse_rows(path)
    n = rows.shape[0]
    if n < 2:
        raise InsufficientDataError(f"{path}: need at least two observations, found {n}")
    if structure in ("iid", "timeseries"):
        if rows.shape[1] != 1:
            raise DataParseError(f"expected one column, found {rows.shape[1]}", path=str(path),
                                 line=1)
        return rows[:, 0]
    if structure == "regression":
        if rows.shape[1] < 2:
            raise DataParseError("regression rows need covariates and a response",
                                 path=str(path), line=1)
        return rows[:, :-1], rows[:, -1]
    if structure == "spatial":
        if rows.shape[1] != 3:
            raise DataParseError(f"expected x, y, value triples, found {rows.shape[1]} columns",
                                 path=str(path), line=1)
        locations = np.vstack([rows[:, :2], np.asarray(target, dtype=float)[None, :]])
        return SpatialData(locations, rows[:, 2])
    raise ConfigError(f"unknown data structure {structure!r}")


def _parse_prior(items):
    prior = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"prior setting {item!r} is not key=value", path="--prior")
        try:
            prior[key.strip()] = float(value)
        except ValueError:
            low = value.strip().lower()
            if low not in ("true", "false"):
                raise ConfigError(f"prior value {value!r} is not a number", path="--prior") from None
            prior[key.strip()] = low == "true"
    return prior


def _floats(text, name):
    try:
        return [float(t) for t in _SPLIT.split(text.strip()) if t]
    except ValueError:
        raise ConfigError(f"{name} must be comma-separated numbers", path=name) from None


def calibrate_file(path, model_id, alpha, B=200, seed=0, bootstrap=None, block_length=None,
                   schedule=StepSchedule(), max_iter=MAX_ITER, prior=None, at=None,
                   target=(0.0, 0.0)):
    """Calibrate ``model_id`` on the data in ``path``.

    Returns ``(result, quantile)`` where ``quantile`` is the upper-alpha
    limit of the calibrated predictive at the prediction point: the
    covariate row ``at`` (default: the column means) for regression, the
    last value for time series and ``target`` for spatial data.
    """
    family = MODEL_FAMILY[model_id]
    kind = bootstrap or DEFAULT_BOOTSTRAP[family]
    data = read_data(path, family, target)
    prior = dict(prior or {})
    if family == "spatial":
        adapter = GPAdapter(data.locations, variogram_fit(data.sites, data.y),
                            build_model("gp", prior))
        point = None
    else:
        adapter = build_model(model_id, prior)
        point = None
        if family == "regression":
            X = data[0]
            x_new = X.mean(axis=0) if at is None else np.asarray(at, dtype=float)
            if x_new.shape != (X.shape[1],):
                raise ConfigError(f"--at needs {X.shape[1]} values", path="--at")
            point = x_new[None, :]
        elif family == "timeseries":
            point = np.array([data[-1]])
    plan = BootstrapPlan(kind, B, block_length, seed=seed)
    reps = prepare_replicates(data, plan, adapter)
    result = gprc_calibrate(data, alpha, plan, schedule=schedule, model_adapter=adapter,
                            max_iter=max_iter, replicates=reps)
    y = data.y if family == "spatial" else data
    state = adapter.fit(y)
    q = float(np.asarray(adapter.quantile(state, result.eta_hat, alpha, at=point)).reshape(-1)[0])
    return result, q


def _write_trace(path, trace):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "eta", "coverage"])
        for t, (eta, c) in enumerate(trace):
            w.writerow([t, repr(float(eta)), repr(float(c))])


def _fmt_cell(v):
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


def _print_summary(rows, out):
    cols = ["method", "alpha", "coverage", "score", "relative_score", "eta_hat", "converged",
            "errors"]
    table = [cols] + [[_fmt_cell(r.get(c)) for c in cols] for r in rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(cols))]
    for row in table:
        print("  ".join(cell.rjust(w) for cell, w in zip(row, widths)), file=out)


def _cmd_experiment(args):
    cfg = load_config(args.config)
    overrides = {}
    if args.output:
        overrides["output"] = args.output
    if args.tidy_output:
        overrides["tidy_output"] = args.tidy_output
    if args.R:
        overrides["R"] = args.R
    if overrides:
        cfg = replace(cfg, **overrides)
    threads = args.threads or cfg.threads or default_threads()
    summary, _ = run_experiment(cfg, threads=threads)
    _print_summary(summary, sys.stdout)
    if cfg.output:
        print(f"summary written to {cfg.output}")
    if cfg.tidy_output:
        print(f"replications written to {cfg.tidy_output}")
    return 0


def _cmd_calibrate(args):
    bootstrap = args.bootstrap
    if args.timeseries:
        if bootstrap not in (None, "block"):
            raise ConfigError("--timeseries implies the block bootstrap", path="--bootstrap")
        bootstrap = "block"
    schedule = StepSchedule(args.kappa0, args.exponent, alpha_scaled=not args.no_alpha_scaling)
    at = _floats(args.at, "--at") if args.at else None
    target = _floats(args.target, "--target")
    if len(target) != 2:
        raise ConfigError("--target needs two coordinates", path="--target")
    result, q = calibrate_file(args.data, args.model, args.alpha, B=args.B, seed=args.seed,
                               bootstrap=bootstrap, block_length=args.block_length,
                               schedule=schedule, max_iter=args.max_iter,
                               prior=_parse_prior(args.prior), at=at, target=target)
    print(f"eta_hat     {result.eta_hat:.6f}")
    print(f"quantile    {q:.6f}")
    print(f"coverage    {result.trace[-1][1]:.6f}")
    print(f"iterations  {result.iterations}")
    print(f"converged   {str(result.converged).lower()}")
    print(f"tolerance   {result.tolerance_used:.6g}")
    if args.trace:
        _write_trace(args.trace, result.trace)
        print(f"trace written to {args.trace}")
    return 0 if result.converged else 3


def _cmd_scenarios(args):
    print(f"{'id':18s}{'data':12s}{'default model':16s}parameters")
    for sid in SCENARIOS:
        sc = Scenario(sid)
        params = ", ".join(f"{k}={v}" for k, v in sc.params.items())
        print(f"{sid:18s}{sc.family:12s}{DEFAULT_MODEL[sid]:16s}{params}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="gprc", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("experiment", help="run a simulation study from a TOML config")
    e.add_argument("config", help="path to the TOML config")
    e.add_argument("--threads", type=int, help="worker threads (default: $GPRC_THREADS or cores)")
    e.add_argument("--output", help="summary CSV path (overrides the config)")
    e.add_argument("--tidy-output", help="per-replication CSV path (overrides the config)")
    e.add_argument("--R", type=int, help="number of replications (overrides the config)")
    e.set_defaults(func=_cmd_experiment)

    c = sub.add_parser("calibrate", help="calibrate a model on a data file")
    c.add_argument("data", help="data file (see README for layouts)")
    c.add_argument("--model", required=True, choices=sorted(MODELS))
    c.add_argument("--alpha", type=float, required=True)
    c.add_argument("--B", type=int, default=200, help="bootstrap replicates (default 200)")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--bootstrap", choices=["iid", "paired", "residual", "block", "spatial"],
                   help="resampling scheme (default depends on the model)")
    c.add_argument("--timeseries", action="store_true",
                   help="treat the data as serially dependent (block bootstrap)")
    c.add_argument("--block-length", type=int)
    c.add_argument("--kappa0", type=float, default=1.0)
    c.add_argument("--exponent", type=float, default=0.51)
    c.add_argument("--no-alpha-scaling", action="store_true",
                   help="do not scale the step size by 0.5/alpha")
    c.add_argument("--max-iter", type=int, default=MAX_ITER)
    c.add_argument("--prior", action="append", metavar="KEY=VALUE",
                   help="model hyperparameter, repeatable")
    c.add_argument("--at", help="regression covariates of the prediction point")
    c.add_argument("--target", default="0,0", help="spatial target site (default 0,0)")
    c.add_argument("--trace", help="write the (t, eta, coverage) trace to this CSV")
    c.set_defaults(func=_cmd_calibrate)

    s = sub.add_parser("scenarios", help="built-in simulation scenarios")
    s.add_argument("action", choices=["list"])
    s.set_defaults(func=_cmd_scenarios)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except GPrCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
