"""True data-generating processes for the simulation studies.

Each scenario draws ``n`` observations plus the next value to be predicted
and knows its own upper-alpha quantile (conditional on the observed data
where the truth is dependent and the quantile is available in closed form).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import gammaincinv

from ._normal import norm_cdf, norm_ppf
from .covariance import GPModel, cholesky_lower, exp_covariance
from .errors import DomainError, FactorizationError, InsufficientDataError, InvalidParameterError
from .models.spatial import SpatialData, kriging_moments

__all__ = [
    "SCENARIOS",
    "Scenario",
    "Draw",
    "pareto_sample",
    "pareto_quantile",
    "gev_sample",
    "gev_quantile",
    "gev_mean",
    "laplace_quantile",
    "timeseries_sample",
    "conditional_true_quantile",
    "disc_sites",
    "spatial_sample",
    "regression_design",
    "regression_sample",
    "simulate",
]

log = logging.getLogger(__name__)

SCENARIOS = (
    "gamma_true", "normal_scale", "lognormal", "pareto", "gev", "laplace_normal",
    "regression_chisq", "regression_gev", "ts1", "ts2", "ts3", "sp1", "sp2", "sp3",
)

BURN_IN = 100
DISC_RADIUS = 20.0
TARGET_SITE = (0.0, 0.0)
BETA_TRUE = np.full(5, 2.0)
DESIGN_RHO = 0.5


# ---------------------------------------------------------------------------
# heavy-tailed iid laws


def pareto_sample(a, n, rng, u=None):
    """Inverse-CDF draws from ``F(y) = 1 - (1 + y)**-a``."""
    if not a > 0:
        raise DomainError("Pareto shape must be positive")
    u = rng.random(n) if u is None else np.asarray(u, dtype=float)
    return (1.0 - u) ** (-1.0 / a) - 1.0


def pareto_quantile(a, alpha):
    if not a > 0:
        raise DomainError("Pareto shape must be positive")
    return alpha ** (-1.0 / a) - 1.0


def gev_sample(xi, n, rng, u=None):
    """Draws from ``F(y) = exp(-(1 + xi (y - 2))**(-1/xi))``."""
    if not xi > 0:
        raise DomainError("GEV shape must be positive")
    u = rng.random(n) if u is None else np.asarray(u, dtype=float)
    return 2.0 + ((-np.log(u)) ** (-xi) - 1.0) / xi


def gev_quantile(xi, alpha):
    if not xi > 0:
        raise DomainError("GEV shape must be positive")
    return 2.0 + ((-np.log1p(-alpha)) ** (-xi) - 1.0) / xi


def gev_mean(xi):
    if not 0 < xi < 1:
        raise DomainError("GEV mean is finite only for 0 < xi < 1")
    return 2.0 + (gamma_fn(1.0 - xi) - 1.0) / xi


def laplace_quantile(p, loc=0.0, scale=1.0):
    """Quantile of the Laplace law at probability ``p``."""
    p = np.asarray(p, dtype=float)
    return loc - scale * np.sign(p - 0.5) * np.log1p(-2.0 * np.abs(p - 0.5))


# ---------------------------------------------------------------------------
# time series


def _ts_step(kind, y, eps):
    if kind == "ts1":
        return 0.9 * y + eps
    if kind == "ts2":
        return np.sin(y) + eps
    if kind == "ts3":
        return np.sin(y) + np.sqrt(0.5 + 0.25 * y * y) * eps
    raise DomainError(f"unknown time-series scenario {kind!r}")


def timeseries_sample(kind, n, rng, burn_in=BURN_IN):
    """``n`` consecutive values after ``burn_in`` steps from ``Y_0 = 0``."""
    if n < 2:
        raise InsufficientDataError("time series needs n >= 2")
    eps = rng.laplace(0.0, 1.0, burn_in + n)
    y = 0.0
    out = np.empty(n)
    for i in range(burn_in + n):
        y = _ts_step(kind, y, eps[i])
        if i >= burn_in:
            out[i - burn_in] = y
    return out


def conditional_true_quantile(kind, y_prev, alpha):
    lq = laplace_quantile(1.0 - alpha)
    if kind == "ts1":
        return 0.9 * y_prev + lq
    if kind == "ts2":
        return np.sin(y_prev) + lq
    if kind == "ts3":
        return np.sin(y_prev) + np.sqrt(0.5 + 0.25 * y_prev ** 2) * lq
    raise DomainError(f"unknown time-series scenario {kind!r}")


# ---------------------------------------------------------------------------
# spatial


SP_TRUTH = GPModel(mu=0.0, sigma2=1.0, phi_hat=3.0, tau_hat=0.0)
SP3_Z1 = GPModel(mu=10.0, sigma2=1.0, phi_hat=4.0, tau_hat=0.0)
SP3_Z2 = GPModel(mu=0.0, sigma2=1.0, phi_hat=1.4, tau_hat=0.0)
SP3_SIGMA, SP3_XI = 3.0, 0.5
_LOGN_SD = np.sqrt(np.e ** 2 - np.e)


def disc_sites(n, rng, radius=DISC_RADIUS):
    """``n`` points uniform in the disc, followed by the target site."""
    r = radius * np.sqrt(rng.random(n))
    ang = 2.0 * np.pi * rng.random(n)
    pts = np.column_stack([r * np.cos(ang), r * np.sin(ang)])
    return np.vstack([pts, TARGET_SITE])


def _factor(locations, model):
    cov = exp_covariance(locations, locations, model.sigma2, model.phi_hat, model.tau_hat)
    return cholesky_lower(cov)


def _sites_and_factors(n, rng, models):
    for attempt in range(2):
        locs = disc_sites(n, rng)
        if attempt:
            locs[:-1] += rng.normal(scale=1e-6, size=(n, 2))
        try:
            return locs, [_factor(locs, m) for m in models]
        except FactorizationError:
            if attempt:
                raise
            log.warning("degenerate site configuration; jittering and retrying once")


def spatial_sample(kind, n, rng, max_redraws=1000):
    """Sites (``n`` plus the target) and the field over all ``n + 1`` of
    them.  Returns ``(locations, field, redraws)``."""
    if n < 2:
        raise InsufficientDataError("spatial sample needs n >= 2")
    if kind == "sp1":
        locs, (chol,) = _sites_and_factors(n, rng, [SP_TRUTH])
        return locs, SP_TRUTH.mu + chol @ rng.standard_normal(n + 1), 0
    if kind == "sp2":
        locs, (chol,) = _sites_and_factors(n, rng, [SP_TRUTH])
        for redraw in range(max_redraws):
            arg = SP_TRUTH.mu + chol @ (rng.lognormal(0.0, 1.0, n + 1) / _LOGN_SD)
            if np.all(arg > 0):
                if redraw:
                    log.info("sp2 field redrawn %d times", redraw)
                return locs, np.log(arg), redraw
        raise DomainError("sp2 field kept producing nonpositive values")
    if kind == "sp3":
        locs, (c1, c2) = _sites_and_factors(n, rng, [SP3_Z1, SP3_Z2])
        for redraw in range(max_redraws):
            z1 = SP3_Z1.mu + c1 @ rng.standard_normal(n + 1)
            z2 = SP3_Z2.mu + c2 @ rng.standard_normal(n + 1)
            frechet = -1.0 / np.log(norm_cdf(z2))
            w = z1 + SP3_SIGMA / SP3_XI * (frechet ** SP3_XI - 1.0)
            if np.all(w > 0):
                return locs, np.log(w), redraw
        raise DomainError("sp3 field kept producing nonpositive values")
    raise DomainError(f"unknown spatial scenario {kind!r}")


# ---------------------------------------------------------------------------
# regression


def regression_design(n, rng, d=5, rho=DESIGN_RHO):
    """Gaussian rows with unit variances and ``corr(x_j, x_k) = rho**|j-k|``."""
    x = np.empty((n, d))
    x[:, 0] = rng.standard_normal(n)
    innov = np.sqrt(1.0 - rho * rho)
    for j in range(1, d):
        x[:, j] = rho * x[:, j - 1] + innov * rng.standard_normal(n)
    return x


def _centered_error(kind, n, rng):
    if kind == "chisq2_centered":
        return rng.chisquare(2.0, n) - 2.0
    if kind == "gev05_centered":
        return gev_sample(0.5, n, rng) - gev_mean(0.5)
    raise DomainError(f"unknown error kind {kind!r}")


def _error_quantile(kind, alpha):
    if kind == "chisq2_centered":
        return 2.0 * gammaincinv(1.0, 1.0 - alpha) - 2.0
    return gev_quantile(0.5, alpha) - gev_mean(0.5)


def regression_sample(error_kind, n, rng):
    """``(X, y)`` with ``y = X beta + centered error``."""
    if n <= BETA_TRUE.size:
        raise InsufficientDataError("regression sample needs n > 5")
    X = regression_design(n, rng)
    return X, X @ BETA_TRUE + _centered_error(error_kind, n, rng)


# ---------------------------------------------------------------------------
# scenario registry


@dataclass(frozen=True)
class Draw:
    """One simulated data set, the value to predict, and what the truth
    needs to report its quantile (``context``)."""

    data: object
    y_next: float
    context: object = None
    redraws: int = 0


_DEFAULT_PARAMS = {
    "gamma_true": {"shape": 3.0, "rate": 2.0},
    "normal_scale": {"mu": 0.0, "sigma": 1.0},
    "lognormal": {"mu": 1.0, "sigma": 1.0},
    "pareto": {"a": 2.0},
    "gev": {"xi": 0.7},
    "laplace_normal": {"mu": 0.0, "scale": 1.0},
    "regression_chisq": {"error": "chisq2_centered"},
    "regression_gev": {"error": "gev05_centered"},
}


@dataclass(frozen=True)
class Scenario:
    id: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.id not in SCENARIOS:
            raise DomainError(f"unknown scenario {self.id!r}")
        merged = dict(_DEFAULT_PARAMS.get(self.id, {}))
        merged.update(self.params or {})
        object.__setattr__(self, "params", merged)
        p = merged
        checks = {
            "gamma_true": p.get("shape", 1) > 0 and p.get("rate", 1) > 0,
            "normal_scale": p.get("sigma", 1) > 0,
            "lognormal": p.get("sigma", 1) > 0,
            "pareto": p.get("a", 1) > 0,
            "gev": p.get("xi", 1) > 0,
            "laplace_normal": p.get("scale", 1) > 0,
        }
        if not checks.get(self.id, True):
            raise InvalidParameterError(f"invalid parameters for {self.id}: {p}")

    @property
    def family(self):
        if self.id.startswith("regression"):
            return "regression"
        if self.id.startswith("ts"):
            return "timeseries"
        if self.id.startswith("sp"):
            return "spatial"
        return "iid"

    def sample_iid(self, n, rng):
        p = self.params
        if self.id == "gamma_true":
            return rng.gamma(p["shape"], 1.0 / p["rate"], n)
        if self.id == "normal_scale":
            return rng.normal(p["mu"], p["sigma"], n)
        if self.id == "lognormal":
            return rng.lognormal(p["mu"], p["sigma"], n)
        if self.id == "pareto":
            return pareto_sample(p["a"], n, rng)
        if self.id == "gev":
            return gev_sample(p["xi"], n, rng)
        if self.id == "laplace_normal":
            return rng.laplace(p["mu"], p["scale"], n)
        raise DomainError(f"{self.id} is not an iid scenario")

    def simulate(self, n, rng) -> Draw:
        """``n`` observations plus the next value."""
        fam = self.family
        if fam == "iid":
            y = self.sample_iid(n + 1, rng)
            return Draw(data=y[:n], y_next=float(y[n]))
        if fam == "regression":
            X, y = regression_sample(self.params["error"], n + 1, rng)
            return Draw(data=(X[:n], y[:n]), y_next=float(y[n]), context=X[n])
        if fam == "timeseries":
            y = timeseries_sample(self.id, n + 1, rng)
            return Draw(data=y[:n], y_next=float(y[n]), context=float(y[n - 1]))
        locs, fld, redraws = spatial_sample(self.id, n, rng)
        return Draw(data=SpatialData(locs, fld[:n]), y_next=float(fld[n]), redraws=redraws)

    def true_quantile(self, alpha, context=None, data=None) -> Optional[float]:
        """Upper-``alpha`` quantile of the law of the next value, or None
        where it has no closed form."""
        p = self.params
        z = norm_ppf(1.0 - alpha)
        if self.id == "gamma_true":
            return float(gammaincinv(p["shape"], 1.0 - alpha) / p["rate"])
        if self.id == "normal_scale":
            return p["mu"] + p["sigma"] * z
        if self.id == "lognormal":
            return float(np.exp(p["mu"] + p["sigma"] * z))
        if self.id == "pareto":
            return pareto_quantile(p["a"], alpha)
        if self.id == "gev":
            return gev_quantile(p["xi"], alpha)
        if self.id == "laplace_normal":
            return float(laplace_quantile(1.0 - alpha, p["mu"], p["scale"]))
        if self.family == "regression":
            x = np.asarray(context, dtype=float)
            return float(x @ BETA_TRUE + _error_quantile(p["error"], alpha))
        if self.family == "timeseries":
            return float(conditional_true_quantile(self.id, context, alpha))
        if self.id == "sp1" and data is not None:
            km = kriging_moments(SP_TRUTH, data.sites, data.y, data.target)
            return km.mean + z * np.sqrt(km.variance)
        return None


def simulate(scenario: Scenario, n, rng) -> Draw:
    return scenario.simulate(n, rng)
