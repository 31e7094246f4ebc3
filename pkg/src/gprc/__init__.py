"""Generalized predictive calibration.

Learning-rate-tempered Bayesian predictive distributions whose upper
quantiles are tuned by bootstrap and stochastic approximation to reach
their nominal frequentist coverage.
"""

from .calibrate import (
    CalibrationResult,
    StepSchedule,
    coverage_iid,
    coverage_regression,
    coverage_spatial,
    coverage_timeseries,
    gprc_calibrate,
    prepare_replicates,
    robbins_monro_step,
)
from .conjugate import (
    GammaPosterior,
    GeneralizedBetaPrime,
    NIGPosterior,
    NormalPredictive,
    StudentTLocationScale,
    gamma_generalized_predictive,
    gamma_posterior,
    laplace_ideal_eta,
    nig_generalized_predictive,
    nig_posterior,
    normal_knownvar_generalized_predictive,
    normal_posterior,
)
from .errors import GPrCError
from .predictive import PosteriorSampleSet, PredictiveCurve, mc_generalized_predictive, predictive_quantile
from .resampling import BootstrapPlan

__version__ = "0.1.0"

__all__ = [
    "BootstrapPlan",
    "CalibrationResult",
    "GPrCError",
    "GammaPosterior",
    "GeneralizedBetaPrime",
    "NIGPosterior",
    "NormalPredictive",
    "PosteriorSampleSet",
    "PredictiveCurve",
    "StepSchedule",
    "StudentTLocationScale",
    "coverage_iid",
    "coverage_regression",
    "coverage_spatial",
    "coverage_timeseries",
    "gamma_generalized_predictive",
    "gamma_posterior",
    "gprc_calibrate",
    "laplace_ideal_eta",
    "mc_generalized_predictive",
    "nig_generalized_predictive",
    "nig_posterior",
    "normal_knownvar_generalized_predictive",
    "normal_posterior",
    "predictive_quantile",
    "prepare_replicates",
    "robbins_monro_step",
]
