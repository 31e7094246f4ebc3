"""Model adapters and structured-data models.

Each adapter exposes ``fit(data) -> state`` and
``quantile(state, eta, alpha, at=None)``; ``regime`` names the coverage
estimator that applies to it.
"""

from .iid import GammaModel, LogNormalModel, NIGNormalModel, NormalKnownVarModel
from .regression import (
    RegressionModel,
    RegressionPosterior,
    ols_fit,
    regression_generalized_predictive,
    regression_plugin_limit,
)
from .spatial import (
    GPAdapter,
    GPModel,
    GPPrior,
    KrigingMoments,
    SpatialData,
    empirical_semivariogram,
    gp_generalized_predictive,
    kriging_moments,
    spatial_bootstrap_limit,
    spatial_plugin_limit,
    variogram_fit,
)
from .timeseries import AR1Model, ar1_generalized_predictive, ar1_plugin_limit, lagged_pairs

__all__ = [
    "GammaModel",
    "LogNormalModel",
    "NIGNormalModel",
    "NormalKnownVarModel",
    "RegressionModel",
    "RegressionPosterior",
    "ols_fit",
    "regression_generalized_predictive",
    "regression_plugin_limit",
    "AR1Model",
    "ar1_generalized_predictive",
    "ar1_plugin_limit",
    "lagged_pairs",
    "GPAdapter",
    "GPModel",
    "GPPrior",
    "KrigingMoments",
    "SpatialData",
    "empirical_semivariogram",
    "gp_generalized_predictive",
    "kriging_moments",
    "spatial_bootstrap_limit",
    "spatial_plugin_limit",
    "variogram_fit",
]
