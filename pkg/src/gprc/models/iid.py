"""Model adapters for iid data built on the closed-form conjugate families.

Every adapter follows the same contract used by :mod:`gprc.calibrate`:
``fit(data)`` absorbs a ``(n,)`` sample or a ``(B, n)`` stack of them, and
``quantile(state, eta, alpha)`` returns the upper-``alpha`` quantile of the
eta-generalized predictive for each fitted data set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..conjugate import (
    ExpTransformed,
    gamma_generalized_predictive,
    gamma_posterior,
    nig_generalized_predictive,
    nig_posterior,
    normal_knownvar_generalized_predictive,
    normal_posterior,
)
from ..errors import DomainError

__all__ = ["GammaModel", "NormalKnownVarModel", "NIGNormalModel", "LogNormalModel"]


class _IIDAdapter:
    regime = "iid"

    def quantile(self, state, eta, alpha, at=None):
        return np.asarray(self.predictive(state, eta).ppf(1.0 - alpha))


@dataclass(frozen=True)
class GammaModel(_IIDAdapter):
    """Gamma(model_shape, theta) model with a Gamma(prior_shape, prior_rate)
    prior on the rate."""

    prior_shape: float = 1.0
    prior_rate: float = 1.0
    model_shape: float = 3.0

    def fit(self, data):
        return gamma_posterior(self.prior_shape, self.prior_rate, self.model_shape, data)

    def predictive(self, state, eta):
        return gamma_generalized_predictive(state, eta)


@dataclass(frozen=True)
class NormalKnownVarModel(_IIDAdapter):
    """N(theta, sigma2) with sigma2 fixed and a N(prior_mean, prior_var) prior."""

    sigma2: float = 1.0
    prior_mean: float = 0.0
    prior_var: float = 100.0

    def fit(self, data):
        return normal_posterior(self.prior_mean, self.prior_var, self.sigma2, data)

    def predictive(self, state, eta):
        return normal_knownvar_generalized_predictive(state.m_n, state.v_n, self.sigma2, eta)


@dataclass(frozen=True)
class NIGNormalModel(_IIDAdapter):
    """N(mu, sigma2) with mu | sigma2 ~ N(m, k sigma2), 1/sigma2 ~ Gamma(a, b)."""

    m: float = 0.0
    k: float = 100.0
    a: float = 2.0
    b: float = 1.0

    def fit(self, data):
        return nig_posterior(self.m, self.k, self.a, self.b, data)

    def predictive(self, state, eta):
        return nig_generalized_predictive(state, eta)


@dataclass(frozen=True)
class LogNormalModel(NIGNormalModel):
    """Log-normal model: the NIG normal model fitted to ``log(y)`` with its
    predictive mapped through ``exp``."""

    def fit(self, data):
        data = np.asarray(data, dtype=float)
        if not np.all(data > 0):
            raise DomainError("log-normal model data must be strictly positive")
        return nig_posterior(self.m, self.k, self.a, self.b, np.log(data))

    def predictive(self, state, eta):
        return ExpTransformed(nig_generalized_predictive(state, eta))

    def quantile(self, state, eta, alpha, at=None):
        return np.exp(nig_generalized_predictive(state, eta).ppf(1.0 - alpha))
