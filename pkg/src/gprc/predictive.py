"""Monte-Carlo eta-generalized predictives, gridded curves and quantiles.

A predictive built from posterior draws ``theta_1..theta_M`` has density
proportional to ``mean_m p_{theta_m}(y)**eta``.  The powers are accumulated
in log space with a running per-grid-point maximum so that tails, where the
calibrated quantiles live, do not underflow.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSupportError, DomainError, NonConvergenceError, ShapeError

__all__ = [
    "PosteriorSampleSet",
    "PredictiveCurve",
    "mc_generalized_predictive",
    "predictive_quantile",
    "default_grid",
    "density_mass",
    "DEFAULT_GRID_SIZE",
]

DEFAULT_GRID_SIZE = 4096
_MAX_DOUBLINGS = 200


@dataclass(frozen=True)
class PosteriorSampleSet:
    """``M`` posterior draws stored as an ``(M, dim)`` array."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        if s.ndim != 2 or s.shape[0] < 1:
            raise ShapeError("posterior samples must be a nonempty (M, dim) array")
        object.__setattr__(self, "samples", s)

    @property
    def size(self):
        return self.samples.shape[0]


@dataclass(frozen=True)
class PredictiveCurve:
    """Density tabulated on a strictly increasing grid.

    ``density`` is unnormalized; ``density / normalization`` integrates to
    one under the trapezoid rule.  Between grid points the density is taken
    to be linear, and :meth:`cdf` / :meth:`ppf` are exact for that
    piecewise-linear density, so quantile inversion round-trips.
    """

    grid: np.ndarray
    density: np.ndarray
    normalization: float
    _cum: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        dens = np.asarray(self.density, dtype=float)
        if grid.ndim != 1 or grid.shape != dens.shape or grid.size < 2:
            raise ShapeError("grid and density must be 1-d arrays of equal length >= 2")
        if not np.all(np.diff(grid) > 0):
            raise ShapeError("grid must be strictly increasing")
        if np.any(dens < 0) or not np.all(np.isfinite(dens)):
            raise DomainError("density must be finite and nonnegative")
        if not self.normalization > 0:
            raise DegenerateSupportError("density vanishes on the whole grid")
        f = dens / self.normalization
        cells = 0.5 * (f[1:] + f[:-1]) * np.diff(grid)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "density", dens)
        object.__setattr__(self, "_cum", np.concatenate([[0.0], np.cumsum(cells)]))

    @classmethod
    def from_density(cls, grid, density):
        grid = np.asarray(grid, dtype=float)
        density = np.asarray(density, dtype=float)
        return cls(grid, density, float(np.trapezoid(density, grid)))

    @property
    def support(self):
        return float(self.grid[0]), float(self.grid[-1])

    def pdf(self, y):
        return np.interp(y, self.grid, self.density / self.normalization, left=0.0, right=0.0)

    def logpdf(self, y):
        with np.errstate(divide="ignore"):
            return np.log(self.pdf(y))

    def cdf(self, y):
        y = np.asarray(y, dtype=float)
        g = self.grid
        f = self.density / self.normalization
        i = np.clip(np.searchsorted(g, y, side="right") - 1, 0, g.size - 2)
        h = g[i + 1] - g[i]
        t = np.clip(y - g[i], 0.0, h)
        out = self._cum[i] + f[i] * t + (f[i + 1] - f[i]) * t * t / (2.0 * h)
        out = np.where(y < g[0], 0.0, out)
        return np.minimum(np.where(y >= g[-1], self._cum[-1], out), 1.0)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        g = self.grid
        f = self.density / self.normalization
        cum = self._cum
        target = np.clip(u, 0.0, cum[-1])
        i = np.clip(np.searchsorted(cum, target, side="right") - 1, 0, g.size - 2)
        h = g[i + 1] - g[i]
        r = target - cum[i]
        slope = (f[i + 1] - f[i]) / h
        # solve f_i t + slope t^2 / 2 = r for t in [0, h]
        disc = np.maximum(f[i] * f[i] + 2.0 * slope * r, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            t_quad = 2.0 * r / (f[i] + np.sqrt(disc))
            t_lin = np.where(f[i] > 0, r / f[i], 0.0)
        t = np.where(np.abs(slope) * h > 1e-14 * max(f.max(), 1.0), t_quad, t_lin)
        t = np.where(np.isfinite(t), t, 0.0)
        return g[i] + np.clip(t, 0.0, h)


def default_grid(lower, upper, num=DEFAULT_GRID_SIZE, upper_extension=0.25, widen=1.0):
    """Grid spanning ``[lower, upper]`` of a reference predictive.

    ``widen`` scales the span about its midpoint (use ``eta**-0.5`` for
    learning rates below one, whose predictives are wider than the
    reference); the upper end is then pushed out by ``upper_extension`` of
    the span.
    """
    lower, upper = float(lower), float(upper)
    if not upper > lower:
        raise DomainError("grid upper bound must exceed lower bound")
    mid, half = 0.5 * (lower + upper), 0.5 * (upper - lower) * max(widen, 1.0)
    lo, hi = mid - half, mid + half
    return np.linspace(lo, hi + upper_extension * (hi - lo), num)


def mc_generalized_predictive(post: PosteriorSampleSet, log_density, eta, grid, chunk=2048):
    """Gridded predictive proportional to ``mean_m p_{theta_m}(y)**eta``.

    ``log_density(theta, y)`` is called with a chunk of draws of shape
    ``(m, dim)`` and the grid of shape ``(G,)`` and must return the
    ``(m, G)`` array of model log densities.
    """
    if not eta > 0:
        raise DomainError(f"learning rate must be positive, got {eta}")
    grid = np.asarray(grid, dtype=float)
    samples = post.samples
    shift = np.full(grid.shape, -np.inf)
    acc = np.zeros(grid.shape)
    for start in range(0, samples.shape[0], chunk):
        logp = eta * np.asarray(log_density(samples[start:start + chunk], grid), dtype=float)
        if logp.ndim == 1:
            logp = logp[None, :]
        new_shift = np.maximum(shift, logp.max(axis=0))
        safe = np.where(np.isfinite(new_shift), new_shift, 0.0)
        with np.errstate(invalid="ignore"):
            acc = acc * np.exp(np.where(np.isfinite(shift), shift - safe, -np.inf))
        acc += np.exp(logp - safe).sum(axis=0)
        shift = new_shift
    with np.errstate(divide="ignore"):
        logf = np.where(np.isfinite(shift), shift + np.log(acc), -np.inf)
    top = logf.max()
    if not np.isfinite(top):
        raise DegenerateSupportError("generalized predictive is zero on the whole grid")
    density = np.exp(logf - top)
    norm = float(np.trapezoid(density, grid))
    if not norm > 0:
        raise DegenerateSupportError("generalized predictive is zero on the whole grid")
    return PredictiveCurve(grid, density, norm)


def _bracket(cdf, u, support, shape):
    """Expand ``[lo, hi]`` until it contains the ``u`` quantile.

    Positive-support laws are expanded in ``log y`` (each step doubles the
    log distance from 1), others on the raw scale.
    """
    lo_sup, _ = support
    positive = lo_sup == 0.0
    lo = np.full(shape, 0.5 if positive else -1.0)
    hi = np.full(shape, 2.0 if positive else 1.0)
    for _ in range(_MAX_DOUBLINGS):
        low_bad = cdf(lo) > u
        if not np.any(low_bad):
            break
        lo = np.where(low_bad, lo * lo if positive else lo * 2.0, lo)
        if positive and np.any(lo[low_bad] < np.finfo(float).tiny):
            raise NonConvergenceError("quantile lies below the smallest normal float")
    else:
        raise NonConvergenceError("quantile bracket expansion exceeded 200 doublings")
    for _ in range(_MAX_DOUBLINGS):
        high_bad = cdf(hi) < u
        if not np.any(high_bad):
            break
        hi = np.where(high_bad, hi * hi if positive else hi * 2.0, hi)
        if not np.all(np.isfinite(hi)):
            raise NonConvergenceError("quantile bracket overflowed")
    else:
        raise NonConvergenceError("quantile bracket expansion exceeded 200 doublings")
    return lo, hi


def predictive_quantile(pred, alpha, tol=1e-8):
    """Upper-``alpha`` quantile ``q`` solving ``CDF(q) = 1 - alpha``.

    Gridded curves are inverted exactly; closed-form families are solved by
    bracketed bisection on their CDF until ``|CDF(q) - (1 - alpha)| <= tol``
    (geometric bisection for positive-support laws).  Array-valued families
    give an array of quantiles.
    """
    alpha = np.asarray(alpha, dtype=float)
    if np.any((alpha <= 0) | (alpha >= 1)):
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    u = 1.0 - alpha
    if isinstance(pred, PredictiveCurve):
        return pred.ppf(u)

    shape = np.broadcast(np.asarray(pred.cdf(1.0)), u).shape
    lo, hi = _bracket(pred.cdf, u, pred.support, shape)
    geometric = pred.support[0] == 0.0
    mid = 0.5 * (lo + hi)
    for _ in range(2000):
        mid = np.sqrt(lo * hi) if geometric else 0.5 * (lo + hi)
        fm = pred.cdf(mid)
        done = (np.abs(fm - u) <= tol) | (hi - lo <= 4 * np.finfo(float).eps * np.abs(mid))
        if np.all(done):
            break
        below = fm < u
        lo = np.where(~done & below, mid, lo)
        hi = np.where(~done & ~below, mid, hi)
    else:
        raise NonConvergenceError("bisection did not reach the requested tolerance")
    return float(mid) if np.ndim(mid) == 0 else mid


def density_mass(pred, num=200_001, tail=1e-10):
    """Trapezoid integral of ``pred.pdf`` over its effective support.

    Positive-support laws are integrated on a uniform grid in ``log y``.
    The grid ends are found by bisection, not by the family's own inverse.
    """
    lo = predictive_quantile(pred, 1.0 - tail)
    hi = predictive_quantile(pred, tail)
    if pred.support[0] == 0.0:
        x = np.linspace(np.log(lo), np.log(hi), num)
        y = np.exp(x)
        return float(np.trapezoid(pred.pdf(y) * y, x))
    y = np.linspace(lo, hi, num)
    return float(np.trapezoid(pred.pdf(y), y))
