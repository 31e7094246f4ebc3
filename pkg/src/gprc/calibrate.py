"""Bootstrap coverage estimators and the GPrC learning-rate loop.

The bootstrap replicates are drawn and their posteriors fitted once per
run; each iteration only re-evaluates predictive quantiles at the new
learning rate, so an update costs O(B) quantile evaluations.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InsufficientDataError, NonConvergenceError, ShapeError
from .models.regression import ols_fit
from .models.spatial import SpatialData
from .resampling import (
    BootstrapPlan,
    block_bootstrap,
    iid_bootstrap,
    paired_bootstrap,
    residual_bootstrap,
    spatial_semiparametric_bootstrap,
)

__all__ = [
    "BOOTSTRAP_KINDS",
    "ETA0",
    "ETA_FLOOR",
    "StepSchedule",
    "CalibrationResult",
    "Replicates",
    "coverage_iid",
    "coverage_regression",
    "coverage_timeseries",
    "coverage_spatial",
    "robbins_monro_step",
    "tolerance_for",
    "prepare_replicates",
    "gprc_calibrate",
]

log = logging.getLogger(__name__)

ETA0 = 0.5
ETA_FLOOR = 1e-4
MAX_ITER = 1000

BOOTSTRAP_KINDS = {
    "iid": ("iid", "block"),
    "regression": ("paired", "residual"),
    "timeseries": ("block",),
    "spatial": ("spatial",),
}


@dataclass(frozen=True)
class StepSchedule:
    """Gains ``kappa_t = kappa0 * (t + 1) ** -exponent`` for ``t = 0, 1, ...``.

    With ``alpha_scaled`` the calibration loop multiplies ``kappa0`` by
    ``reference_alpha / alpha``.  The slope of the coverage curve in ``eta``
    shrinks roughly in proportion to ``alpha``, so unscaled gains stall at
    small levels.  Set ``alpha_scaled=False`` for the plain schedule.
    """

    kappa0: float = 1.0
    exponent: float = 0.51
    alpha_scaled: bool = True
    reference_alpha: float = 0.5

    def __post_init__(self):
        if not self.kappa0 > 0:
            raise DomainError("kappa0 must be positive")
        if not 0.5 < self.exponent <= 1.0:
            raise DomainError("exponent must lie in (0.5, 1]")
        if not 0.0 < self.reference_alpha <= 1.0:
            raise DomainError("reference_alpha must lie in (0, 1]")

    def __call__(self, t):
        return self.kappa0 * (t + 1.0) ** -self.exponent

    def for_alpha(self, alpha) -> "StepSchedule":
        """The unscaled schedule actually run at level ``alpha``."""
        if not self.alpha_scaled:
            return self
        return StepSchedule(self.kappa0 * self.reference_alpha / alpha, self.exponent,
                            alpha_scaled=False)


@dataclass
class CalibrationResult:
    eta_hat: float
    trace: list = field(default_factory=list)  # (eta, c_hat) per evaluation
    iterations: int = 0
    converged: bool = False
    tolerance_used: float = 0.0


def _checked(q):
    q = np.asarray(q, dtype=float)
    bad = np.isnan(q)
    if np.any(bad):
        b = int(np.argwhere(bad)[0][0]) if q.ndim else None
        raise NonConvergenceError("predictive quantile could not be evaluated", replicate=b)
    return q


def coverage_iid(eta, state, data, alpha, adapter):
    """``B^-1 sum_b n^-1 sum_i 1{Y_i <= Q_alpha(eta; Y_b)}``.

    ``state`` holds the fitted posteriors of the ``B`` bootstrap samples.
    """
    q = _checked(adapter.quantile(state, eta, alpha)).reshape(-1)
    ordered = np.sort(np.asarray(data, dtype=float))
    return float(np.searchsorted(ordered, q, side="right").mean() / ordered.size)


def coverage_regression(eta, state, pairs, alpha, adapter):
    """Average of ``1{Q_alpha(eta; X_i, D_b) >= Y_i}`` over replicates and
    the original pairs."""
    X, y = pairs
    X = np.asarray(X, dtype=float)
    X = X[:, None] if X.ndim == 1 else X
    q = _checked(adapter.quantile(state, eta, alpha, at=X))
    return float(np.mean(q >= np.asarray(y, dtype=float)))


def coverage_timeseries(eta, state, series, alpha, adapter, lag=1):
    """Average of ``1{Q_alpha(eta; Y_i, Y_b) >= Y_{i+lag}}`` over replicates
    and the ``n - lag`` consecutive transitions."""
    series = np.asarray(series, dtype=float)
    if series.size < lag + 1:
        raise InsufficientDataError("time-series coverage needs at least two observations")
    q = _checked(adapter.quantile(state, eta, alpha, at=series[:-lag]))
    return float(np.mean(q >= series[lag:]))


def coverage_spatial(eta, state, fields, alpha, adapter):
    """``B^-1 sum_b 1{Q_alpha(eta; target, Y_b(s^n)) >= Y_b(target)}``.

    ``fields`` are the ``(B, n + 1)`` bootstrap fields whose last column is
    the value at the target site.
    """
    fields = np.atleast_2d(np.asarray(fields, dtype=float))
    if fields.shape[1] < 2:
        raise ShapeError("bootstrap fields must include the target entry")
    q = _checked(adapter.quantile(state, eta, alpha)).reshape(-1)
    if q.size != fields.shape[0]:
        raise ShapeError("one quantile per bootstrap field expected")
    return float(np.mean(q >= fields[:, -1]))


def robbins_monro_step(eta_t, c_hat, alpha, kappa_t, floor=ETA_FLOOR):
    """``eta + kappa (c_hat - (1 - alpha))``, floored at ``floor``."""
    return max(eta_t + kappa_t * (c_hat - (1.0 - alpha)), floor)


def tolerance_for(alpha, regime, B):
    if regime == "spatial":
        return max(0.01 * alpha, 1.0 / B)
    return 0.01 * alpha


@dataclass(frozen=True)
class Replicates:
    """Cached bootstrap state for one calibration run."""

    regime: str
    state: object
    reference: object  # what the coverage estimator compares against
    B: int


def prepare_replicates(data, plan: BootstrapPlan, adapter) -> Replicates:
    """Draw the bootstrap replicates named by ``plan`` and fit ``adapter``
    to all of them.

    ``data`` is a 1-d sample (iid), ``(X, y)`` (paired/residual), a 1-d
    series (block) or :class:`~gprc.models.spatial.SpatialData` (spatial;
    the adapter must carry ``theta_hat``).  The coverage estimator follows
    ``adapter.regime``; an iid model may be paired with the block bootstrap
    when the caller declares the data to be serially dependent.
    """
    kind = plan.kind
    regime = getattr(adapter, "regime", None)
    if regime not in BOOTSTRAP_KINDS:
        raise DomainError(f"adapter has unknown regime {regime!r}")
    if kind not in BOOTSTRAP_KINDS[regime]:
        raise DomainError(f"{kind} bootstrap does not apply to a {regime} model")
    if kind == "iid":
        data = np.asarray(data, dtype=float)
        _need_two(data.shape[-1] if data.ndim else 0)
        state, ref = adapter.fit(iid_bootstrap(data, plan)), data
    elif kind == "paired":
        _need_two(len(data[1]))
        Xb, yb = paired_bootstrap(data, plan)
        state, ref = adapter.fit((Xb, yb)), data
    elif kind == "residual":
        X, y = data
        X = np.asarray(X, dtype=float)
        X = X[:, None] if X.ndim == 1 else X
        _, fitted, resid = ols_fit(X, y)
        yb = residual_bootstrap(X, fitted, resid, plan)
        Xb = np.broadcast_to(X, (plan.B,) + X.shape)
        state, ref = adapter.fit((Xb, yb)), (X, np.asarray(y, dtype=float))
    elif kind == "block":
        series = np.asarray(data, dtype=float)
        _need_two(series.size)
        boot, links = block_bootstrap(series, plan, return_links=True)
        if getattr(adapter, "skip_block_joins", False):
            state = adapter.fit(boot, links=links)
        else:
            state = adapter.fit(boot)
        ref = series
    else:
        if not isinstance(data, SpatialData):
            raise ShapeError("spatial calibration expects SpatialData")
        fields = spatial_semiparametric_bootstrap(data.locations, data.y, adapter.theta_hat, plan)
        state, ref = adapter.fit(fields[:, :-1]), fields
    return Replicates(regime, state, ref, plan.B)


def _need_two(n):
    if n < 2:
        raise InsufficientDataError(f"calibration needs at least two observations, got {n}")


_COVERAGE = {
    "iid": coverage_iid,
    "regression": coverage_regression,
    "timeseries": coverage_timeseries,
    "spatial": coverage_spatial,
}


def gprc_calibrate(data, alpha, plan: BootstrapPlan, schedule: StepSchedule = StepSchedule(),
                   model_adapter=None, max_iter=MAX_ITER, eta0=ETA0, replicates=None,
                   on_iteration=None) -> CalibrationResult:
    """Tune the learning rate so the bootstrap coverage of the upper-alpha
    predictive quantile matches ``1 - alpha``.

    The stopping rule is tested before each update.  Hitting ``max_iter``
    updates returns the last iterate with ``converged=False``.
    ``on_iteration(t, eta, c_hat)`` is called after every coverage
    evaluation.  Pass ``replicates`` from :func:`prepare_replicates` to
    reuse a bootstrap across several levels.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if model_adapter is None:
        raise DomainError("a model adapter is required")
    reps = prepare_replicates(data, plan, model_adapter) if replicates is None else replicates
    coverage = _COVERAGE[reps.regime]
    tol = tolerance_for(alpha, reps.regime, reps.B)
    gains = schedule.for_alpha(alpha)
    target = 1.0 - alpha

    eta = float(eta0)
    c_hat = coverage(eta, reps.state, reps.reference, alpha, model_adapter)
    trace = [(eta, c_hat)]
    if on_iteration is not None:
        on_iteration(0, eta, c_hat)
    t = 0
    while abs(c_hat - target) > tol and t < max_iter:
        eta = robbins_monro_step(eta, c_hat, alpha, gains(t))
        c_hat = coverage(eta, reps.state, reps.reference, alpha, model_adapter)
        t += 1
        trace.append((eta, c_hat))
        if on_iteration is not None:
            on_iteration(t, eta, c_hat)
    converged = abs(c_hat - target) <= tol
    if not converged:
        log.debug("GPrC stopped after %d updates at eta=%.4f, c=%.5f", t, eta, c_hat)
    return CalibrationResult(eta_hat=eta, trace=trace, iterations=len(trace),
                             converged=converged, tolerance_used=tol)
