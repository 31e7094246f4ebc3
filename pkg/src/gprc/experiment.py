"""Configuration and replication loop for the simulation studies.

A config names a scenario, a model, the sample size, the levels and the
methods to compare.  Each replication simulates ``n`` observations plus the
value to be predicted, runs every method at every level and records the
upper limit it produced.  Results are written as two CSV files: a summary
with one row per ``(method, alpha)`` and a tidy file with one row per
``(replication, method, alpha)``.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import gammaincinv

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

from .calibrate import BOOTSTRAP_KINDS, MAX_ITER, StepSchedule, gprc_calibrate, prepare_replicates
from .errors import ConfigError, GPrCError
from .metrics import SUMMARY_COLUMNS, ReplicationRecord, empirical_coverage, interval_score, relative_score
from .models import (
    AR1Model,
    GammaModel,
    GPAdapter,
    GPPrior,
    LogNormalModel,
    NIGNormalModel,
    NormalKnownVarModel,
    RegressionModel,
    ar1_plugin_limit,
    gp_generalized_predictive,
    regression_plugin_limit,
    spatial_bootstrap_limit,
    spatial_plugin_limit,
    variogram_fit,
)
from .predictive import predictive_quantile
from .resampling import BootstrapPlan
from .simgen import SCENARIOS, Scenario
from ._normal import norm_ppf

__all__ = [
    "METHODS",
    "MODELS",
    "TIDY_COLUMNS",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "build_model",
    "plugin_limit",
    "run_replication",
    "run_experiment",
    "default_threads",
]

log = logging.getLogger(__name__)

METHODS = ("gprc", "bayes_eta1", "plugin", "bootstrap_raw")
TIDY_COLUMNS = (
    "scenario", "method", "n", "alpha", "replication", "q_hat", "y_next", "q_star",
    "eta_hat", "iterations", "converged", "error",
)
THREADS_ENV = "GPRC_THREADS"

MODELS = {
    "gamma": GammaModel,
    "normal_knownvar": NormalKnownVarModel,
    "nig_normal": NIGNormalModel,
    "lognormal": LogNormalModel,
    "regression": RegressionModel,
    "ar1": AR1Model,
    "gp": GPPrior,
}

_MODEL_FAMILY = {
    "gamma": "iid", "normal_knownvar": "iid", "nig_normal": "iid", "lognormal": "iid",
    "regression": "regression", "ar1": "timeseries", "gp": "spatial",
}

DEFAULT_MODEL = {
    "gamma_true": "gamma", "normal_scale": "normal_knownvar", "lognormal": "gamma",
    "pareto": "lognormal", "gev": "lognormal", "laplace_normal": "nig_normal",
    "regression_chisq": "regression", "regression_gev": "regression",
    "ts1": "ar1", "ts2": "ar1", "ts3": "ar1", "sp1": "gp", "sp2": "gp", "sp3": "gp",
}

DEFAULT_BOOTSTRAP = {"iid": "iid", "regression": "paired", "timeseries": "block", "spatial": "spatial"}


def default_threads():
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(int(env), 1)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines one simulation study."""

    scenario: str
    n: int
    alphas: tuple
    R: int = 200
    B: int = 200
    seed: int = 0
    methods: tuple = ("gprc", "bayes_eta1")
    scenario_params: dict = field(default_factory=dict)
    model: Optional[str] = None
    prior: dict = field(default_factory=dict)
    M: int = 5000
    bootstrap: Optional[str] = None
    block_length: Optional[int] = None
    kappa0: float = 1.0
    exponent: float = 0.51
    alpha_scaled: bool = True
    max_iter: int = MAX_ITER
    output: Optional[str] = None
    tidy_output: Optional[str] = None
    threads: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in np.atleast_1d(self.alphas)))
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.model is None:
            object.__setattr__(self, "model", DEFAULT_MODEL.get(self.scenario))
        self.validate()

    @property
    def family(self):
        return _MODEL_FAMILY[self.model]

    @property
    def bootstrap_kind(self):
        return self.bootstrap or DEFAULT_BOOTSTRAP[self.family]

    def validate(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}", path="scenario.id")
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}", path="model.id")
        scen_family = Scenario(self.scenario).family
        if scen_family != self.family:
            raise ConfigError(
                f"model {self.model!r} is for {self.family} data but scenario "
                f"{self.scenario!r} produces {scen_family} data", path="model.id")
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 2):
            raise ConfigError("n must be an integer >= 2", path="n")
        if not self.alphas or not all(0.0 < a < 1.0 for a in self.alphas):
            raise ConfigError("alpha values must lie in (0, 1)", path="alpha")
        for name in ("R", "B", "M", "max_iter"):
            value = getattr(self, name)
            if not (isinstance(value, (int, np.integer)) and value >= 1):
                raise ConfigError(f"{name} must be a positive integer", path=name)
        if not self.methods:
            raise ConfigError("methods must be nonempty", path="methods")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}", path="methods")
        if "bootstrap_raw" in self.methods and self.family != "spatial":
            raise ConfigError("bootstrap_raw is only defined for spatial scenarios", path="methods")
        if self.bootstrap_kind not in BOOTSTRAP_KINDS[self.family]:
            raise ConfigError(f"bootstrap {self.bootstrap_kind!r} does not fit {self.family} data",
                              path="calibration.bootstrap")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be positive", path="threads")
        checks = (
            ("scenario.params", lambda: Scenario(self.scenario, dict(self.scenario_params))),
            ("model.prior", lambda: build_model(self.model, self.prior)),
            ("calibration", lambda: StepSchedule(self.kappa0, self.exponent)),
            ("calibration.block_length",
             lambda: BootstrapPlan(self.bootstrap_kind, self.B, self.block_length, seed=0)),
        )
        for path, check in checks:
            try:
                check()
            except ConfigError:
                raise
            except (GPrCError, TypeError) as exc:
                raise ConfigError(str(exc), path=path) from exc


def build_model(model_id, prior=None):
    """Adapter (or GP prior) for ``model_id`` with ``prior`` hyperparameters."""
    try:
        cls = MODELS[model_id]
    except KeyError:
        raise ConfigError(f"unknown model {model_id!r}", path="model.id") from None
    params = {k: v for k, v in dict(prior or {}).items() if k != "predictive"}
    return cls(**params)


# ---------------------------------------------------------------------------
# config files

_TOP_KEYS = {"n", "alpha", "R", "B", "M", "seed", "methods", "output", "tidy_output", "threads",
             "scenario", "model", "calibration"}
_CAL_KEYS = {"bootstrap", "block_length", "kappa0", "exponent", "alpha_scaled", "max_iter"}


def _require_table(value, path):
    if not isinstance(value, dict):
        raise ConfigError("expected a table", path=path)
    return value


def parse_config(doc: dict, base_dir=None) -> ExperimentConfig:
    """Build a config from a parsed TOML document."""
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", path=sorted(unknown)[0])
    for key in ("scenario", "n", "alpha"):
        if key not in doc:
            raise ConfigError("missing required key", path=key)
    scen = doc["scenario"]
    if isinstance(scen, str):
        scen = {"id": scen}
    scen = _require_table(scen, "scenario")
    if "id" not in scen:
        raise ConfigError("missing required key", path="scenario.id")
    model = doc.get("model", {})
    if isinstance(model, str):
        model = {"id": model}
    model = _require_table(model, "model")
    cal = _require_table(doc.get("calibration", {}), "calibration")
    bad = set(cal) - _CAL_KEYS
    if bad:
        raise ConfigError("unknown key", path=f"calibration.{sorted(bad)[0]}")

    def resolve(p):
        if p is None or base_dir is None or os.path.isabs(p):
            return p
        return str(Path(base_dir) / p)

    alpha = doc["alpha"]
    alphas = tuple(alpha) if isinstance(alpha, list) else (alpha,)
    for i, a in enumerate(alphas):
        if not isinstance(a, (int, float)) or isinstance(a, bool):
            raise ConfigError("alpha values must be numbers", path=f"alpha[{i}]")
    methods = doc.get("methods", ["gprc", "bayes_eta1"])
    if not isinstance(methods, list):
        raise ConfigError("methods must be a list", path="methods")
    return ExperimentConfig(
        scenario=scen["id"],
        scenario_params=_require_table(scen.get("params", {}), "scenario.params"),
        model=model.get("id"),
        prior=_require_table(model.get("prior", {}), "model.prior"),
        n=doc["n"],
        alphas=alphas,
        R=doc.get("R", 200),
        B=doc.get("B", 200),
        M=doc.get("M", 5000),
        seed=doc.get("seed", 0),
        methods=tuple(methods),
        bootstrap=cal.get("bootstrap"),
        block_length=cal.get("block_length"),
        kappa0=cal.get("kappa0", 1.0),
        exponent=cal.get("exponent", 0.51),
        alpha_scaled=cal.get("alpha_scaled", True),
        max_iter=cal.get("max_iter", MAX_ITER),
        output=resolve(doc.get("output")),
        tidy_output=resolve(doc.get("tidy_output")),
        threads=doc.get("threads"),
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", path=str(path)) from exc
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(f"malformed config: {exc}", path=str(path), line=line) from exc
    return parse_config(doc, base_dir=path.parent)


# ---------------------------------------------------------------------------
# methods


def plugin_limit(adapter, model_id, data, alpha, context=None):
    """Maximum-likelihood plug-in upper limit for the model ``model_id``."""
    z = norm_ppf(1.0 - alpha)
    if model_id == "regression":
        return regression_plugin_limit(data, context, alpha)
    if model_id == "ar1":
        return ar1_plugin_limit(data, context, alpha)
    y = np.asarray(data, dtype=float)
    if model_id == "gamma":
        k = adapter.model_shape
        return float(gammaincinv(k, 1.0 - alpha) * y.mean() / k)
    if model_id == "normal_knownvar":
        return float(y.mean() + z * math.sqrt(adapter.sigma2))
    if model_id == "nig_normal":
        return float(y.mean() + z * y.std())
    if model_id == "lognormal":
        ly = np.log(y)
        return float(np.exp(ly.mean() + z * ly.std()))
    raise ConfigError(f"no plug-in limit for model {model_id!r}")


def _point_quantile(adapter, state, eta, alpha, at):
    q = adapter.quantile(state, eta, alpha, at=at)
    return float(np.asarray(q).reshape(-1)[0])


@dataclass(frozen=True)
class _Row:
    method: str
    alpha: float
    q_hat: float = math.nan
    q_star: Optional[float] = None
    eta_hat: float = math.nan
    iterations: int = 0
    converged: Optional[bool] = None
    error: str = ""


def _replication_streams(seed, r):
    ss = np.random.SeedSequence(seed, spawn_key=(r,))
    data_ss, boot_ss = ss.spawn(2)
    return np.random.default_rng(data_ss), int(boot_ss.generate_state(1, np.uint64)[0])


def run_replication(config: ExperimentConfig, r: int):
    """Simulate replication ``r`` and run every configured method on it.

    Returns ``(y_next, rows)``.  Failures are caught per method and level
    and reported in the row's ``error`` field.
    """
    rng, boot_seed = _replication_streams(config.seed, r)
    scenario = Scenario(config.scenario, dict(config.scenario_params))
    draw = scenario.simulate(config.n, rng)
    rows = []
    q_star = {a: scenario.true_quantile(a, draw.context, draw.data) for a in config.alphas}

    def failed(method, alpha, exc):
        log.debug("replication %d, %s at alpha=%g failed: %s", r, method, alpha, exc)
        return _Row(method, alpha, q_star=q_star[alpha], error=f"{type(exc).__name__}: {exc}")

    family = config.family
    setup_error = None
    adapter = theta_hat = state = None
    try:
        if family == "spatial":
            data = draw.data
            theta_hat = variogram_fit(data.sites, data.y)
            adapter = GPAdapter(data.locations, theta_hat, build_model("gp", config.prior))
            state = adapter.fit(data.y)
            at = None
        else:
            adapter = build_model(config.model, config.prior)
            state = adapter.fit(draw.data)
            at = draw.context
            if family == "regression":
                at = np.atleast_2d(draw.context)
            elif family == "timeseries":
                at = np.array([draw.context])
    except (GPrCError, np.linalg.LinAlgError, FloatingPointError) as exc:
        setup_error = exc

    reps = None
    plan = BootstrapPlan(config.bootstrap_kind, config.B, config.block_length, seed=boot_seed)
    needs_boot = any(m in ("gprc", "bootstrap_raw") for m in config.methods)
    if setup_error is None and needs_boot:
        try:
            reps = prepare_replicates(draw.data, plan, adapter)
        except (GPrCError, np.linalg.LinAlgError, FloatingPointError) as exc:
            setup_error = exc

    schedule = StepSchedule(config.kappa0, config.exponent, alpha_scaled=config.alpha_scaled)
    for method in config.methods:
        for alpha in config.alphas:
            if setup_error is not None and method != "plugin":
                rows.append(failed(method, alpha, setup_error))
                continue
            try:
                if method == "gprc":
                    res = gprc_calibrate(draw.data, alpha, plan, schedule=schedule,
                                         model_adapter=adapter, max_iter=config.max_iter,
                                         replicates=reps)
                    q = _final_quantile(config, adapter, state, draw, res.eta_hat, alpha, at,
                                        boot_seed)
                    rows.append(_Row(method, alpha, q, q_star[alpha], res.eta_hat,
                                     res.iterations, res.converged))
                elif method == "bayes_eta1":
                    q = _final_quantile(config, adapter, state, draw, 1.0, alpha, at, boot_seed)
                    rows.append(_Row(method, alpha, q, q_star[alpha], eta_hat=1.0))
                elif method == "plugin":
                    if family == "spatial":
                        d = draw.data
                        th = theta_hat if theta_hat is not None else variogram_fit(d.sites, d.y)
                        q = spatial_plugin_limit(d.sites, d.y, d.target, th, alpha)
                    else:
                        q = plugin_limit(adapter or build_model(config.model, config.prior),
                                         config.model, draw.data, alpha, draw.context)
                    rows.append(_Row(method, alpha, float(q), q_star[alpha]))
                else:  # bootstrap_raw
                    q = spatial_bootstrap_limit(reps.reference, alpha)
                    rows.append(_Row(method, alpha, q, q_star[alpha]))
            except (GPrCError, np.linalg.LinAlgError, FloatingPointError) as exc:
                rows.append(failed(method, alpha, exc))
    return draw.y_next, rows


def _final_quantile(config, adapter, state, draw, eta, alpha, at, boot_seed):
    """Upper limit from the eta-generalized predictive of the observed data.

    The GP model uses the Monte-Carlo predictive with ``M`` draws when the
    prior table sets ``predictive = "mc"``; calibration always uses the
    equivalent closed form.
    """
    if config.family == "spatial" and config.prior.get("predictive") == "mc":
        d = draw.data
        th = adapter.theta_hat
        rng = np.random.default_rng(np.random.SeedSequence(boot_seed, spawn_key=(1,)))
        curve = gp_generalized_predictive(d.sites, d.y, d.target, th.phi_hat, th.tau_hat, eta,
                                          prior=adapter.prior, n_draws=config.M, rng=rng)
        return float(predictive_quantile(curve, alpha))
    return _point_quantile(adapter, state, eta, alpha, at)


# ---------------------------------------------------------------------------
# driver


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return "" if math.isnan(value) else repr(float(value))
    return str(value)


def _write_csv_atomic(path, columns, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(c)) for c in columns])
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(buf.getvalue())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _summarize(config, results):
    summary = []
    for method in config.methods:
        for alpha in config.alphas:
            recs, etas, its, convs, errors = [], [], [], [], 0
            for y_next, rows in results:
                row = next(x for x in rows if x.method == method and x.alpha == alpha)
                if row.error:
                    errors += 1
                    continue
                recs.append(ReplicationRecord(row.q_hat, y_next, row.q_star))
                if method == "gprc":
                    etas.append(row.eta_hat)
                    its.append(row.iterations)
                    convs.append(row.converged)
            out = {"scenario": config.scenario, "method": method, "n": config.n, "alpha": alpha,
                   "R": config.R, "seed": config.seed, "errors": errors}
            if recs:
                out["coverage"] = empirical_coverage(recs)
                out["score"] = interval_score(recs, alpha)
                if all(r.q_star is not None for r in recs):
                    out["relative_score"] = relative_score(recs, alpha)
            if etas:
                out["eta_hat"] = float(np.mean(etas))
                out["iterations"] = float(np.mean(its))
                out["converged"] = float(np.mean(convs))
            elif method == "bayes_eta1" and recs:
                out["eta_hat"] = 1.0
            summary.append(out)
    return summary


def _tidy(config, results):
    tidy = []
    for r, (y_next, rows) in enumerate(results):
        for row in rows:
            tidy.append({
                "scenario": config.scenario, "method": row.method, "n": config.n,
                "alpha": row.alpha, "replication": r, "q_hat": row.q_hat, "y_next": y_next,
                "q_star": row.q_star, "eta_hat": row.eta_hat if row.method == "gprc" else None,
                "iterations": row.iterations if row.method == "gprc" else None,
                "converged": row.converged, "error": row.error,
            })
    return tidy


def run_experiment(config: ExperimentConfig, threads: Optional[int] = None, progress=None):
    """Run all replications and return ``(summary_rows, tidy_rows)``.

    Replication ``r`` draws its data and bootstrap streams from
    ``(config.seed, r)`` alone, so thread count never changes the output.
    When ``config.output`` / ``config.tidy_output`` are set the tables are
    written there atomically.
    """
    threads = threads or config.threads or default_threads()

    def one(r):
        out = run_replication(config, r)
        if progress is not None:
            progress(r)
        return out

    if threads > 1 and config.R > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(config.R)))
    else:
        results = [one(r) for r in range(config.R)]

    summary = _summarize(config, results)
    tidy = _tidy(config, results)
    if config.output:
        _write_csv_atomic(config.output, SUMMARY_COLUMNS, summary)
    if config.tidy_output:
        _write_csv_atomic(config.tidy_output, TIDY_COLUMNS, tidy)
    return summary, tidy
