"""Gaussian AR(1) model without intercept, fitted by the conditional
likelihood given the first observation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._normal import norm_ppf
from ..errors import InsufficientDataError, SingularDesignError
from .regression import RegressionModel

__all__ = ["AR1Model", "ar1_generalized_predictive", "ar1_plugin_limit", "lagged_pairs"]


def lagged_pairs(series):
    """Regressor/response pairs ``(Y_i, Y_{i+1})`` along the last axis."""
    series = np.asarray(series, dtype=float)
    if series.shape[-1] < 3:
        raise InsufficientDataError("AR(1) model needs at least 3 observations")
    x = series[..., :-1]
    if np.any(np.ptp(x, axis=-1) == 0):
        raise SingularDesignError("lagged regressor has zero variance")
    return x[..., None], series[..., 1:]


@dataclass(frozen=True)
class AR1Model:
    """``Y_{i+1} | Y_i = y ~ N(rho y, sigma2)`` with a conjugate NIG prior
    (defaults as in :class:`RegressionModel`)."""

    prior_precision: float = 0.01
    prior_mean: float = 0.0
    a: float = 2.0
    b: float = 1.0
    skip_block_joins: bool = True

    regime = "timeseries"

    @property
    def _regression(self):
        return RegressionModel(self.prior_precision, self.prior_mean, self.a, self.b)

    def fit(self, series, links=None):
        """Posterior from the transitions of ``series``.

        ``links`` marks which transitions ``i -> i + 1`` are genuine (see
        :func:`gprc.resampling.block_bootstrap`); the others are left out of
        the conditional likelihood.
        """
        return self._regression.fit(lagged_pairs(series), weights=links)

    def predictive(self, state, eta, y_prev):
        return self._regression.predictive(state, eta, np.atleast_1d(y_prev))

    def quantile(self, state, eta, alpha, at=None):
        """``(B, k)`` quantiles conditional on each previous value in ``at``."""
        at = np.asarray(at, dtype=float).reshape(-1, 1)
        return self._regression.quantile(state, eta, alpha, at=at)


def ar1_generalized_predictive(series, y_last, eta, model=None):
    model = AR1Model() if model is None else model
    return model.predictive(model.fit(series), eta, float(y_last))


def ar1_plugin_limit(series, y_last, alpha):
    """``rho_hat y_last + z_{1-alpha} sigma_hat`` from conditional least
    squares."""
    x, y = lagged_pairs(series)
    x = x[:, 0]
    rho = np.dot(x, y) / np.dot(x, x)
    sigma = np.sqrt(np.mean((y - rho * x) ** 2))
    return float(rho * y_last + norm_ppf(1.0 - alpha) * sigma)
