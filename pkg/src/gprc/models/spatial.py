"""Constant-mean Gaussian-process model with exponential covariance.

The range ``phi_hat`` and scaled nugget ``tau_hat`` come from a variogram
fit and stay fixed; ``(mu, sigma2)`` gets a conjugate normal-inverse-gamma
prior.  Given the correlation matrix ``R`` of the observed sites, the
kriging mean at the target is affine in ``mu`` and the kriging variance is
``sigma2`` times a constant, so both the Monte-Carlo and the closed-form
eta-generalized predictive are available.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import least_squares
from scipy.spatial.distance import pdist

from .._normal import norm_logpdf, norm_ppf
from ..conjugate import StudentTLocationScale
from ..covariance import GPModel, cholesky_lower, exp_correlation, exp_covariance
from ..errors import FitError, InsufficientDataError, InvalidParameterError, ShapeError
from ..predictive import (
    DEFAULT_GRID_SIZE,
    PosteriorSampleSet,
    default_grid,
    mc_generalized_predictive,
)

__all__ = [
    "GPModel",
    "KrigingMoments",
    "SpatialData",
    "GPPrior",
    "GPAdapter",
    "empirical_semivariogram",
    "variogram_fit",
    "kriging_moments",
    "gp_generalized_predictive",
    "spatial_plugin_limit",
    "spatial_bootstrap_limit",
]

N_BINS = 15
SIGMA2_FLOOR = 1e-10


@dataclass(frozen=True)
class KrigingMoments:
    mean: float
    variance: float


@dataclass(frozen=True)
class SpatialData:
    """``n`` observed sites followed by the target site, and the ``n``
    observed values."""

    locations: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        locs = np.asarray(self.locations, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if locs.shape != (y.size + 1, 2):
            raise ShapeError(f"expected {y.size + 1} locations in the plane, got {locs.shape}")
        object.__setattr__(self, "locations", locs)
        object.__setattr__(self, "y", y)

    @property
    def sites(self):
        return self.locations[:-1]

    @property
    def target(self):
        return self.locations[-1]


@dataclass(frozen=True)
class GPPrior:
    """``mu | sigma2 ~ N(m, k sigma2)``, ``1/sigma2 ~ Gamma(a, b)``."""

    m: float = 0.0
    k: float = 100.0
    a: float = 2.0
    b: float = 1.0


# ---------------------------------------------------------------------------
# variogram


def empirical_semivariogram(locations, y, n_bins=N_BINS):
    """Matheron estimator on equal-width bins up to half the largest
    pairwise distance.  Returns ``(mean lag, semivariance, pair count)`` for
    the nonempty bins."""
    d = pdist(np.asarray(locations, dtype=float))
    y = np.asarray(y, dtype=float)
    i, j = np.triu_indices(y.size, k=1)
    sv = 0.5 * (y[i] - y[j]) ** 2
    cutoff = 0.5 * d.max()
    edges = np.linspace(0.0, cutoff, n_bins + 1)
    which = np.digitize(d, edges[1:-1])
    keep = d <= cutoff
    counts = np.bincount(which[keep], minlength=n_bins).astype(float)
    lag_sum = np.bincount(which[keep], weights=d[keep], minlength=n_bins)
    sv_sum = np.bincount(which[keep], weights=sv[keep], minlength=n_bins)
    ok = counts > 0
    return lag_sum[ok] / counts[ok], sv_sum[ok] / counts[ok], counts[ok]


def _exp_variogram(params, h):
    sigma2, phi, tau = params
    return sigma2 * tau + sigma2 * (1.0 - np.exp(-h / phi))


def variogram_fit(locations, y, n_bins=N_BINS) -> GPModel:
    """Fit ``gamma(h) = sigma2 tau + sigma2 (1 - exp(-h/phi))`` by weighted
    least squares (pair-count weights) to the empirical semivariogram.

    ``mu_hat`` is the sample mean.  The fit runs on data standardized by the
    sample standard deviation, so it is exactly scale-equivariant.
    """
    locations = np.asarray(locations, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.size < 10 or np.unique(locations, axis=0).shape[0] < 10:
        raise InsufficientDataError("variogram fit needs at least 10 distinct locations")
    mu_hat = float(y.mean())
    spread = float(y.std())
    scale = spread if spread > 0 else 1.0
    lags, gam, counts = empirical_semivariogram(locations, (y - mu_hat) / scale, n_bins)
    if lags.size < 3:
        raise FitError("fewer than 3 nonempty variogram bins")
    w = np.sqrt(counts)
    hmax = lags.max()

    def resid(p):
        return w * (_exp_variogram(p, lags) - gam)

    lower = [SIGMA2_FLOOR, 1e-3 * hmax, 0.0]
    upper = [np.inf, 10.0 * hmax, 100.0]
    best = None
    for phi0 in (0.1 * hmax, 0.3 * hmax, hmax):
        x0 = [max(gam.max(), 2 * SIGMA2_FLOOR), phi0, 0.05]
        fit = least_squares(resid, x0, bounds=(lower, upper), method="trf")
        if best is None or fit.cost < best.cost:
            best = fit
    sigma2, phi, tau = best.x
    return GPModel(mu=mu_hat, sigma2=float(sigma2) * scale ** 2, phi_hat=float(phi),
                   tau_hat=float(tau))


# ---------------------------------------------------------------------------
# kriging


def kriging_moments(model: GPModel, locations, y, s_new) -> KrigingMoments:
    """Gaussian conditional mean and variance of the field at ``s_new``."""
    locations = np.asarray(locations, dtype=float)
    y = np.asarray(y, dtype=float)
    s_new = np.atleast_2d(np.asarray(s_new, dtype=float))
    cov = exp_covariance(locations, locations, model.sigma2, model.phi_hat, model.tau_hat)
    chol = cholesky_lower(cov)
    gamma = exp_covariance(locations, s_new, model.sigma2, model.phi_hat, model.tau_hat)[:, 0]
    weights = cho_solve((chol, True), gamma)
    mean = model.mu + weights @ (y - model.mu)
    c00 = model.sigma2 * (1.0 + model.tau_hat)
    var = max(c00 - gamma @ weights, 0.0)
    return KrigingMoments(mean=float(mean), variance=float(var))


def spatial_plugin_limit(locations, y, s_new, theta_hat: GPModel, alpha):
    km = kriging_moments(theta_hat, locations, y, s_new)
    return km.mean + norm_ppf(1.0 - alpha) * np.sqrt(km.variance)


def spatial_bootstrap_limit(boot_fields, alpha):
    """Upper-``alpha`` empirical quantile of the bootstrap target values."""
    fields = np.atleast_2d(np.asarray(boot_fields, dtype=float))
    return float(np.quantile(fields[:, -1], 1.0 - alpha))


# ---------------------------------------------------------------------------
# conjugate GP predictive


@dataclass(frozen=True)
class GPPosterior:
    mu_n: np.ndarray
    k_n: float
    a_n: float
    b_n: np.ndarray
    offset: np.ndarray  # kriging mean at the target is mu * weight + offset


class GPAdapter:
    """Model adapter for one site configuration.

    Everything that depends only on the sites and ``(phi_hat, tau_hat)`` is
    factorized once at construction; :meth:`fit` then handles a ``(B, n)``
    stack of fields with a single triangular solve.
    """

    regime = "spatial"

    def __init__(self, locations, theta_hat: GPModel, prior: GPPrior = GPPrior()):
        locations = np.asarray(locations, dtype=float)
        self.locations = locations
        self.theta_hat = theta_hat
        self.prior = prior
        sites, target = locations[:-1], locations[-1:]
        phi, tau = theta_hat.phi_hat, theta_hat.tau_hat
        self.n = sites.shape[0]
        self._chol = cholesky_lower(exp_correlation(sites, sites, phi, tau))
        r = exp_correlation(sites, target, phi, tau)[:, 0]
        self._u = solve_triangular(self._chol, np.ones(self.n), lower=True)
        self._v = solve_triangular(self._chol, r, lower=True)
        self.mean_weight = 1.0 - self._v @ self._u  # coefficient of mu in the kriging mean
        self.var_factor = max(1.0 + tau - self._v @ self._v, 0.0)  # kriging variance / sigma2

    @classmethod
    def from_data(cls, data: SpatialData, prior: GPPrior = GPPrior()):
        return cls(data.locations, variogram_fit(data.sites, data.y), prior)

    def fit(self, y):
        y = np.asarray(y, dtype=float)
        if y.shape[-1] != self.n:
            raise ShapeError(f"expected fields over {self.n} sites, got {y.shape}")
        z = solve_triangular(self._chol, y.T, lower=True)  # (n, ...)
        p = self.prior
        prec = 1.0 / p.k + self._u @ self._u
        mu_n = (p.m / p.k + self._u @ z) / prec
        quad = np.einsum("i...,i...->...", z, z)
        b_n = p.b + 0.5 * (quad + p.m ** 2 / p.k - mu_n ** 2 * prec)
        return GPPosterior(mu_n=mu_n, k_n=1.0 / prec, a_n=p.a + 0.5 * self.n, b_n=b_n,
                           offset=self._v @ z)

    def predictive(self, state, eta):
        """Closed-form Student-t eta-generalized predictive at the target."""
        if not eta > 0:
            raise InvalidParameterError("learning rate must be positive")
        df = 2.0 * state.a_n + eta - 1.0
        w = self.mean_weight
        spread = self.var_factor / eta + w * w * state.k_n
        return StudentTLocationScale(df=df, location=w * state.mu_n + state.offset,
                                     scale=np.sqrt(spread * 2.0 * state.b_n / df))

    def quantile(self, state, eta, alpha, at=None):
        return np.asarray(self.predictive(state, eta).ppf(1.0 - alpha))

    def sample_posterior(self, state, size, rng):
        """Draws of ``(mu, sigma2)`` from the NIG posterior of one field."""
        lam = rng.gamma(state.a_n, 1.0 / state.b_n, size)
        sigma2 = 1.0 / lam
        mu = rng.normal(state.mu_n, np.sqrt(state.k_n * sigma2))
        return PosteriorSampleSet(np.column_stack([mu, sigma2]))

    def conditional_logpdf(self, state):
        """``log p_theta(y | target, data)`` as a function of ``(theta, y)``."""
        w, c, kappa = self.mean_weight, float(state.offset), self.var_factor

        def log_density(theta, y):
            mean = w * theta[:, 0:1] + c
            sd = np.sqrt(kappa * theta[:, 1:2])
            return norm_logpdf(y[None, :], mean, sd)

        return log_density


def gp_generalized_predictive(locations, y, s_new, phi_hat, tau_hat, eta, prior=GPPrior(),
                              method="mc", n_draws=2000, rng=None, samples=None, grid=None):
    """eta-generalized predictive of the GP model at ``s_new``.

    ``method="mc"`` averages powered kriging densities over ``n_draws``
    posterior draws (or over ``samples`` when given, e.g. a point mass) and
    returns a :class:`~gprc.predictive.PredictiveCurve`.  ``method="exact"``
    returns the equivalent closed-form Student-t.
    """
    locations = np.vstack([np.asarray(locations, dtype=float), np.atleast_2d(s_new)])
    theta = GPModel(mu=0.0, sigma2=1.0, phi_hat=phi_hat, tau_hat=tau_hat)
    adapter = GPAdapter(locations, theta, prior)
    state = adapter.fit(y)
    if method == "exact":
        return adapter.predictive(state, eta)
    if method != "mc":
        raise InvalidParameterError(f"unknown method {method!r}")
    if samples is None:
        rng = np.random.default_rng() if rng is None else rng
        samples = adapter.sample_posterior(state, n_draws, rng)
    elif not isinstance(samples, PosteriorSampleSet):
        samples = PosteriorSampleSet(samples)
    if grid is None:
        s = samples.samples
        means = adapter.mean_weight * s[:, 0] + float(state.offset)
        sds = np.sqrt(adapter.var_factor * s[:, 1])
        lo, hi = np.min(means - 5 * sds), np.max(means + 5 * sds)
        if not hi > lo:
            lo, hi = lo - 1.0, hi + 1.0
        grid = default_grid(lo, hi, DEFAULT_GRID_SIZE, widen=eta ** -0.5)
    return mc_generalized_predictive(samples, adapter.conditional_logpdf(state), eta, grid)
