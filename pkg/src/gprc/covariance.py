"""Exponential covariance with a scaled nugget, and a checked Cholesky."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack
from scipy.spatial.distance import cdist

from .errors import FactorizationError, InvalidParameterError

__all__ = ["GPModel", "exp_correlation", "exp_covariance", "cholesky_lower"]


@dataclass(frozen=True)
class GPModel:
    """Constant-mean Gaussian process with covariance
    ``sigma2 * (exp(-|s - t| / phi_hat) + tau_hat * 1{s == t})``."""

    mu: float
    sigma2: float
    phi_hat: float
    tau_hat: float = 0.0

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise InvalidParameterError("sigma2 must be positive")
        if not self.phi_hat > 0:
            raise InvalidParameterError("phi_hat must be positive")
        if not self.tau_hat >= 0:
            raise InvalidParameterError("tau_hat must be nonnegative")

    def __iter__(self):
        return iter((self.mu, self.sigma2, self.phi_hat, self.tau_hat))


def exp_correlation(a, b, phi, tau=0.0):
    """Correlation part ``exp(-d/phi) + tau * 1{d == 0}`` between two point
    sets of shape ``(n, 2)`` and ``(m, 2)``."""
    d = cdist(np.atleast_2d(a), np.atleast_2d(b))
    r = np.exp(-d / phi)
    if tau:
        r = r + tau * (d == 0.0)
    return r


def exp_covariance(a, b, sigma2, phi, tau=0.0):
    return sigma2 * exp_correlation(a, b, phi, tau)


def cholesky_lower(cov):
    """Lower Cholesky factor; raises :class:`FactorizationError` naming the
    first leading minor that is not positive."""
    cov = np.asarray(cov, dtype=float)
    factor, info = lapack.dpotrf(cov, lower=1, clean=1)
    if info > 0:
        raise FactorizationError("covariance matrix is not positive definite", minor=int(info))
    if info < 0:
        raise FactorizationError(f"invalid argument {-info} to Cholesky routine")
    return factor
