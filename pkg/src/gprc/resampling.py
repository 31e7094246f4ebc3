"""Bootstrap engines: iid, paired, residual, moving-block and the
semi-parametric spatial scheme.

Replicate ``b`` always draws from its own stream, seeded by
``SeedSequence(plan.seed, spawn_key=(b,))``, so any single replicate can be
regenerated in isolation and serial and parallel runs agree.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular

from .covariance import GPModel, cholesky_lower, exp_covariance
from .errors import InsufficientDataError, InvalidParameterError, ShapeError

__all__ = [
    "BootstrapPlan",
    "KINDS",
    "replicate_rng",
    "default_block_length",
    "iid_bootstrap",
    "paired_bootstrap",
    "residual_bootstrap",
    "block_bootstrap",
    "spatial_residuals",
    "spatial_semiparametric_bootstrap",
]

KINDS = ("iid", "paired", "residual", "block", "spatial")


@dataclass(frozen=True)
class BootstrapPlan:
    """Resampling strategy, replicate count and seed.

    ``block_length`` is only meaningful for ``kind="block"``; left as None
    it resolves to ``round(n ** (1/3))`` when the series length is known.
    """

    kind: str = "iid"
    B: int = 200
    block_length: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameterError(f"unknown bootstrap kind {self.kind!r}")
        if int(self.B) < 1:
            raise InvalidParameterError("B must be at least 1")
        if self.block_length is not None:
            if self.kind != "block":
                raise InvalidParameterError("block_length only applies to block bootstrap")
            if int(self.block_length) < 1:
                raise InvalidParameterError("block_length must be a positive integer")


def replicate_rng(seed, b):
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(b),)))


def default_block_length(n):
    return max(1, int(round(n ** (1.0 / 3.0))))


def _indices(n, plan, size=None):
    size = n if size is None else size
    return np.stack([replicate_rng(plan.seed, b).integers(0, n, size) for b in range(plan.B)])


def iid_bootstrap(data, plan: BootstrapPlan):
    """``(B, n)`` array of with-replacement resamples of ``data``."""
    data = np.asarray(data, dtype=float)
    if data.ndim != 1 or data.size == 0:
        raise InsufficientDataError("iid bootstrap needs a nonempty 1-d sample")
    return data[_indices(data.size, plan)]


def paired_bootstrap(pairs, plan: BootstrapPlan):
    """Resample ``(x_i, y_i)`` jointly.

    ``pairs`` is ``(X, y)`` with ``X`` of shape ``(n, d)``; returns
    ``(X_boot, y_boot)`` of shapes ``(B, n, d)`` and ``(B, n)``.
    """
    X, y = pairs
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if y.size == 0:
        raise InsufficientDataError("paired bootstrap needs at least one pair")
    if X.shape[0] != y.shape[0]:
        raise ShapeError("X and y must have the same number of rows")
    idx = _indices(y.size, plan)
    return X[idx], y[idx]


def residual_bootstrap(design, fitted, residuals, plan: BootstrapPlan):
    """``(B, n)`` responses ``fitted + resampled residuals``; the design stays
    fixed and is accepted only to check shapes."""
    fitted = np.asarray(fitted, dtype=float)
    residuals = np.asarray(residuals, dtype=float)
    if fitted.shape != residuals.shape or fitted.ndim != 1:
        raise ShapeError("fitted and residuals must be 1-d of equal length")
    if design is not None and np.asarray(design).shape[0] != fitted.size:
        raise ShapeError("design rows must match the number of responses")
    if fitted.size == 0:
        raise InsufficientDataError("residual bootstrap needs at least one observation")
    return fitted[None, :] + residuals[_indices(fitted.size, plan)]


def block_bootstrap(series, plan: BootstrapPlan, return_links=False):
    """Moving-block bootstrap.

    Each replicate concatenates ``k = ceil(n / l)`` overlapping blocks of
    length ``l`` whose starts are uniform over the ``n - l + 1`` admissible
    positions, then truncates to length ``n``.

    With ``return_links`` also returns a ``(B, n - 1)`` boolean array that
    is True where entries ``i`` and ``i + 1`` of a replicate are consecutive
    in the original series, i.e. everywhere except at block joins.
    """
    series = np.asarray(series, dtype=float)
    if series.ndim != 1 or series.size == 0:
        raise InsufficientDataError("block bootstrap needs a nonempty 1-d series")
    n = series.size
    ell = default_block_length(n) if plan.block_length is None else int(plan.block_length)
    if ell > n:
        raise InvalidParameterError(f"block length {ell} exceeds series length {n}")
    k = -(-n // ell)
    starts = _indices(n - ell + 1, plan, size=k)  # (B, k)
    idx = (starts[:, :, None] + np.arange(ell)).reshape(plan.B, k * ell)[:, :n]
    if return_links:
        return series[idx], np.diff(idx, axis=1) == 1
    return series[idx]


def spatial_residuals(y, chol_n, mu_hat):
    """Whitened residuals ``L_n^{-1} (y - mu_hat)``."""
    return solve_triangular(chol_n, np.asarray(y, dtype=float) - mu_hat, lower=True)


def spatial_semiparametric_bootstrap(locations, y, theta_hat: GPModel, plan: BootstrapPlan,
                                     return_residuals=False):
    """Semi-parametric spatial bootstrap.

    ``locations`` holds the ``n`` observed sites followed by the target
    site.  The observed field is whitened with the Cholesky factor of the
    fitted covariance on the ``n`` sites, ``n + 1`` residuals are drawn with
    replacement and recoloured with the factor on all ``n + 1`` sites.
    Column ``n`` of the ``(B, n + 1)`` result is the bootstrap value at the
    target.
    """
    locations = np.asarray(locations, dtype=float)
    y = np.asarray(y, dtype=float)
    n = y.size
    if locations.shape != (n + 1, 2):
        raise ShapeError(f"expected {n + 1} locations of dimension 2, got {locations.shape}")
    cov = exp_covariance(locations, locations, theta_hat.sigma2, theta_hat.phi_hat,
                         theta_hat.tau_hat)
    chol = cholesky_lower(cov)
    # the leading n x n block of the (n+1)-site factor is the n-site factor
    eps = spatial_residuals(y, chol[:n, :n], theta_hat.mu)
    draws = eps[_indices(n, plan, size=n + 1)]
    fields = theta_hat.mu + draws @ chol.T
    if return_residuals:
        return fields, eps
    return fields
