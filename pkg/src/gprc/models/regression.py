"""Conjugate normal linear regression and its eta-generalized predictive."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .._normal import norm_ppf
from ..conjugate import StudentTLocationScale
from ..errors import InsufficientDataError, InvalidParameterError, ShapeError, SingularDesignError

__all__ = [
    "RegressionPosterior",
    "RegressionModel",
    "regression_generalized_predictive",
    "regression_plugin_limit",
    "ols_fit",
]


@dataclass(frozen=True)
class RegressionPosterior:
    """NIG posterior of ``(beta, sigma2)``; fields carry a leading replicate
    axis when several data sets were fitted at once."""

    beta_n: np.ndarray
    cov_n: np.ndarray  # posterior covariance of beta divided by sigma2
    a_n: float
    b_n: np.ndarray


def _as_design(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == y.ndim:
        X = X[..., None]
    if X.shape[:-1] != y.shape:
        raise ShapeError(f"design shape {X.shape} does not match response shape {y.shape}")
    return X, y


def _check_rank(xtx, q):
    if np.any(np.linalg.matrix_rank(xtx) < q):
        raise SingularDesignError("design matrix is rank deficient")


@dataclass(frozen=True)
class RegressionModel:
    """``y | x ~ N(x' beta, sigma2)`` with ``beta | sigma2 ~ N(prior_mean,
    sigma2 * inv(prior_precision))`` and ``1/sigma2 ~ Gamma(a, b)``.

    ``prior_precision`` may be a scalar (times the identity) or a ``(q, q)``
    matrix; ``prior_mean`` defaults to zero.
    """

    prior_precision: object = 0.01
    prior_mean: Optional[object] = None
    a: float = 2.0
    b: float = 1.0

    regime = "regression"

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise InvalidParameterError("prior shape and rate must be positive")

    def _prior(self, q):
        P0 = np.asarray(self.prior_precision, dtype=float)
        P0 = P0 * np.eye(q) if P0.ndim == 0 else P0
        if P0.shape != (q, q):
            raise ShapeError(f"prior precision must be {q}x{q}")
        if np.any(np.linalg.eigvalsh(P0) <= 0):
            raise InvalidParameterError("prior precision must be positive definite")
        m0 = np.zeros(q) if self.prior_mean is None else np.broadcast_to(
            np.asarray(self.prior_mean, dtype=float), (q,))
        return P0, m0

    def fit(self, data, weights=None):
        """``data`` is ``(X, y)`` with shapes ``(..., n, q)`` and ``(..., n)``.

        ``weights`` (0/1, same shape as ``y``) drops rows from the
        likelihood; the effective sample size is their sum.
        """
        X, y = _as_design(*data)
        n, q = X.shape[-2:]
        if weights is None:
            n_eff = n
        else:
            w = np.broadcast_to(np.asarray(weights, dtype=float), y.shape)
            X, y = X * w[..., None], y * w
            n_eff = w.sum(axis=-1)
        if np.any(np.asarray(n_eff) <= q):
            raise InsufficientDataError(f"need more observations ({n}) than coefficients ({q})")
        P0, m0 = self._prior(q)
        xtx = np.einsum("...ni,...nj->...ij", X, X)
        _check_rank(xtx, q)
        prec = P0 + xtx
        rhs = P0 @ m0 + np.einsum("...ni,...n->...i", X, y)
        beta = np.linalg.solve(prec, rhs[..., None])[..., 0]
        cov = np.linalg.inv(prec)
        resid = y - np.einsum("...ni,...i->...n", X, beta)
        dev = beta - m0
        quad = np.einsum("...i,ij,...j->...", dev, P0, dev)
        b_n = self.b + 0.5 * (np.einsum("...n,...n->...", resid, resid) + quad)
        return RegressionPosterior(beta_n=beta, cov_n=cov, a_n=self.a + 0.5 * n_eff, b_n=b_n)

    def predictive(self, state, eta, x_new):
        """Student-t predictive at covariate vector(s) ``x_new``.

        For a single fitted data set and one ``x_new`` the fields are
        scalars; otherwise they broadcast as ``(replicates, points)``.
        """
        if not np.all(np.asarray(eta) > 0):
            raise InvalidParameterError("learning rate must be positive")
        x = np.atleast_2d(np.asarray(x_new, dtype=float))
        loc = np.einsum("kq,...q->...k", x, state.beta_n)
        h = np.einsum("kq,...qr,kr->...k", x, state.cov_n, x)
        df = 2.0 * np.asarray(state.a_n) + eta - 1.0
        if not np.all(df > 0):
            raise InvalidParameterError("degrees of freedom must be positive")
        b_n = np.asarray(state.b_n)[..., None]
        if df.ndim:
            df = df[..., None]
        scale = np.sqrt((1.0 / eta + h) * 2.0 * b_n / df)
        if np.ndim(x_new) == 1 and np.ndim(state.b_n) == 0:
            loc, scale = loc[0], scale[0]
            df = df[0] if np.ndim(df) else df
        return StudentTLocationScale(df=df, location=loc, scale=scale)

    def quantile(self, state, eta, alpha, at=None):
        """``(B, k)`` quantiles at the ``k`` covariate rows of ``at``."""
        pred = self.predictive(state, eta, np.atleast_2d(at))
        return np.asarray(pred.ppf(1.0 - alpha))


def regression_generalized_predictive(pairs, x_new, eta, model=None):
    model = RegressionModel() if model is None else model
    return model.predictive(model.fit(pairs), eta, x_new)


def ols_fit(X, y):
    """Least-squares coefficients, fitted values and residuals."""
    X, y = _as_design(X, y)
    n, q = X.shape
    if n <= q:
        raise InsufficientDataError(f"need more observations ({n}) than coefficients ({q})")
    _check_rank(X.T @ X, q)
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    fitted = X @ beta
    return beta, fitted, y - fitted


def regression_plugin_limit(pairs, x_new, alpha):
    """``x_new' beta_hat + z_{1-alpha} sigma_hat`` with maximum-likelihood
    estimates (``sigma_hat`` uses the 1/n convention)."""
    beta, _, resid = ols_fit(*pairs)
    sigma = np.sqrt(np.mean(resid ** 2))
    return float(np.dot(np.atleast_1d(x_new), beta) + norm_ppf(1.0 - alpha) * sigma)
