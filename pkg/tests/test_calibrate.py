import hashlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gprc import (
    BootstrapPlan,
    StepSchedule,
    coverage_iid,
    coverage_regression,
    coverage_spatial,
    coverage_timeseries,
    gprc_calibrate,
    prepare_replicates,
    robbins_monro_step,
)
from gprc.calibrate import ETA_FLOOR, tolerance_for
from gprc.errors import DomainError, InsufficientDataError, NonConvergenceError, ShapeError
from gprc.models import AR1Model, GammaModel, GPAdapter, NIGNormalModel, RegressionModel, SpatialData
from gprc.simgen import Scenario


class ConstantQuantile:
    """Adapter whose quantiles are fixed numbers, one per replicate."""

    regime = "iid"

    def __init__(self, q):
        self.q = np.asarray(q, dtype=float)

    def fit(self, data):
        return None

    def quantile(self, state, eta, alpha, at=None):
        if at is None:
            return self.q
        return np.broadcast_to(self.q.reshape(-1, 1), (self.q.size, np.size(at)))


class SyntheticCoverage:
    """Stand-in for the coverage map: quantile ``eta``-dependent so the
    fraction of ``data`` covered follows a known curve."""

    regime = "iid"

    def fit(self, data):
        return None

    def quantile(self, state, eta, alpha, at=None):
        # data are 0..999, quantile covers round(1000 * c(eta)) of them
        c = np.clip(1.3 - 0.4 * eta, 0.0, 1.0)
        return np.array([1000.0 * c - 0.5])


# coverage estimators -------------------------------------------------------


def test_coverage_iid_all_covered():
    data = np.array([1.0, 5.0, 2.0])
    assert coverage_iid(1.0, None, data, 0.1, ConstantQuantile([5.0, 9.0])) == 1.0


def test_coverage_iid_half():
    assert coverage_iid(1.0, None, np.array([1.0, 3.0]), 0.1, ConstantQuantile([2.0])) == 0.5


def test_coverage_iid_nan_quantile_names_replicate():
    with pytest.raises(NonConvergenceError) as info:
        coverage_iid(1.0, None, np.array([1.0, 3.0]), 0.1, ConstantQuantile([2.0, np.nan]))
    assert info.value.replicate == 1


def test_coverage_iid_well_specified_normal_is_nominal():
    rng = np.random.default_rng(0)
    data = rng.normal(size=400)
    model = NIGNormalModel()
    reps = prepare_replicates(data, BootstrapPlan("iid", 200, seed=1), model)
    c = coverage_iid(1.0, reps.state, data, 0.10, model)
    assert 0.87 <= c <= 0.93


def test_coverage_regression_intercept_only_equals_iid():
    rng = np.random.default_rng(1)
    y = rng.normal(2.0, 1.5, 60)
    X = np.ones((60, 1))
    nig = NIGNormalModel(m=0.0, k=4.0, a=2.0, b=1.0)
    reg = RegressionModel(prior_precision=0.25, prior_mean=0.0, a=2.0, b=1.0)
    idx = np.random.default_rng(2).integers(0, 60, (30, 60))
    c_iid = coverage_iid(0.7, nig.fit(y[idx]), y, 0.05, nig)
    c_reg = coverage_regression(0.7, reg.fit((X[idx], y[idx])), (X, y), 0.05, reg)
    assert c_reg == pytest.approx(c_iid, abs=1e-12)


def test_coverage_regression_perfect_fit_limit():
    class FittedPlusSpread:
        regime = "regression"

        def __init__(self, beta):
            self.beta = beta

        def quantile(self, state, eta, alpha, at=None):
            return (np.asarray(at) @ self.beta + 1.0 / eta)[None, :]

    X = np.column_stack([np.ones(5), np.arange(5.0)])
    beta = np.array([1.0, 2.0])
    resid = np.array([0.3, -0.2, 0.0, 0.1, -0.4])
    y = X @ beta + resid
    c = coverage_regression(1e12, None, (X, y), 0.1, FittedPlusSpread(beta))
    assert c == pytest.approx(np.mean(resid <= 0))


def test_coverage_timeseries_constant_series():
    series = np.full(10, 2.0)
    assert coverage_timeseries(1.0, None, series, 0.05, ConstantQuantile([2.5, 3.0])) == 1.0


def test_coverage_timeseries_straddle():
    series = np.array([0.0, 1.0, 3.0])
    assert coverage_timeseries(1.0, None, series, 0.05, ConstantQuantile([2.0])) == 0.5


def test_coverage_timeseries_too_short():
    with pytest.raises(InsufficientDataError):
        coverage_timeseries(1.0, None, np.array([1.0]), 0.05, ConstantQuantile([2.0]))


def test_coverage_spatial_infinite_quantile():
    fields = np.random.default_rng(0).normal(size=(4, 6))
    assert coverage_spatial(1.0, None, fields, 0.1, ConstantQuantile(np.full(4, np.inf))) == 1.0


def test_coverage_spatial_half():
    fields = np.array([[0.0, 1.0], [0.0, 3.0]])
    assert coverage_spatial(1.0, None, fields, 0.1, ConstantQuantile([2.0, 2.0])) == 0.5


def test_coverage_spatial_missing_target():
    with pytest.raises(ShapeError):
        coverage_spatial(1.0, None, np.zeros((3, 1)), 0.1, ConstantQuantile([0.0, 0.0, 0.0]))


@pytest.mark.slow
def test_coverage_spatial_well_specified_gp_is_nominal():
    draw = Scenario("sp1").simulate(100, np.random.default_rng(4))
    data = draw.data
    adapter = GPAdapter.from_data(data)
    reps = prepare_replicates(data, BootstrapPlan("spatial", 500, seed=2), adapter)
    c = coverage_spatial(1.0, reps.state, reps.reference, 0.10, adapter)
    assert 0.86 <= c <= 0.94


@settings(max_examples=30, deadline=None)
@given(eta=st.floats(0.01, 10.0), alpha=st.floats(0.005, 0.5))
def test_coverage_lies_in_unit_interval(eta, alpha):
    data = np.random.default_rng(0).gamma(3, 0.5, 40)
    model = GammaModel()
    reps = prepare_replicates(data, BootstrapPlan("iid", 20, seed=1), model)
    c = coverage_iid(eta, reps.state, data, alpha, model)
    assert 0.0 <= c <= 1.0
    assert c == coverage_iid(eta, reps.state, data, alpha, model)


# Robbins-Monro -------------------------------------------------------------


def test_step_fixed_point():
    assert robbins_monro_step(0.7, 0.95, 0.05, 3.0) == 0.7


def test_step_arithmetic():
    assert robbins_monro_step(0.5, 0.90, 0.05, 1.0) == pytest.approx(0.45, abs=1e-15)


def test_step_floor():
    assert robbins_monro_step(0.01, 0.0, 0.05, 10.0) == ETA_FLOOR


def test_decreasing_synthetic_root_plain_schedule():
    sched = StepSchedule(alpha_scaled=False)
    eta = 0.5
    for t in range(500):
        eta = robbins_monro_step(eta, 1.3 - 0.4 * eta, 0.1, sched(t))
    assert eta == pytest.approx(1.0, abs=1e-3)


def test_increasing_synthetic_root_is_repelling():
    # with c(eta) = 0.5 + 0.4 eta the update moves away from eta = 1
    eta_lo, eta_hi = 0.99, 1.01
    for t in range(50):
        k = (t + 1) ** -0.51
        eta_lo = robbins_monro_step(eta_lo, 0.5 + 0.4 * eta_lo, 0.1, k)
        eta_hi = robbins_monro_step(eta_hi, 0.5 + 0.4 * eta_hi, 0.1, k)
    assert eta_lo < 0.99 and eta_hi > 1.01
    assert robbins_monro_step(1.0, 0.5 + 0.4 * 1.0, 0.1, 1.0) == pytest.approx(1.0)


def test_schedule_validation_and_scaling():
    with pytest.raises(DomainError):
        StepSchedule(exponent=0.5)
    with pytest.raises(DomainError):
        StepSchedule(kappa0=0.0)
    s = StepSchedule()
    assert s.for_alpha(0.05)(0) == pytest.approx(10.0)
    assert s.for_alpha(0.05)(3) == pytest.approx(10.0 * 4 ** -0.51)
    assert StepSchedule(alpha_scaled=False).for_alpha(0.05)(0) == 1.0


def test_tolerance_rules():
    assert tolerance_for(0.05, "iid", 200) == pytest.approx(5e-4)
    assert tolerance_for(0.05, "spatial", 500) == pytest.approx(2e-3)
    assert tolerance_for(0.5, "spatial", 500) == pytest.approx(5e-3)


# calibration loop ----------------------------------------------------------


def test_calibrate_synthetic_converges_to_root():
    data = np.arange(1000.0)
    res = gprc_calibrate(data, 0.1, BootstrapPlan("iid", 1), model_adapter=SyntheticCoverage(),
                         schedule=StepSchedule(alpha_scaled=False))
    assert res.converged
    assert res.eta_hat == pytest.approx(1.0, abs=2.5e-3 / 0.4 + 1e-3)
    assert res.iterations == len(res.trace)
    assert abs(res.trace[-1][1] - 0.9) <= res.tolerance_used


def test_calibrate_fixed_point_stops_immediately():
    # c(0.5) = 1.1 - 0.4 = 0.9 exactly hits the target at the start value
    class AtTarget(SyntheticCoverage):
        def quantile(self, state, eta, alpha, at=None):
            return np.array([899.5])

    res = gprc_calibrate(np.arange(1000.0), 0.1, BootstrapPlan("iid", 1), model_adapter=AtTarget())
    assert res.eta_hat == 0.5 and res.iterations == 1 and res.converged


def test_calibrate_reuses_replicate_state():
    seen = []

    class Spy(GammaModel):
        def quantile(self, state, eta, alpha, at=None):
            digest = hashlib.sha256(np.asarray(state.a_n).tobytes() + state.b_n.tobytes()).hexdigest()
            seen.append((id(state), digest))
            return super().quantile(state, eta, alpha, at)

    data = np.random.default_rng(0).gamma(3, 0.5, 100)
    res = gprc_calibrate(data, 0.05, BootstrapPlan("iid", 50, seed=3), model_adapter=Spy())
    assert res.iterations > 1
    assert len(seen) == res.iterations
    assert len(set(seen)) == 1


def test_calibrate_nonconvergence_is_reported():
    class Flat(SyntheticCoverage):
        def quantile(self, state, eta, alpha, at=None):
            return np.array([499.5])

    res = gprc_calibrate(np.arange(1000.0), 0.1, BootstrapPlan("iid", 1), model_adapter=Flat(),
                         max_iter=25)
    assert not res.converged
    assert res.iterations == 26 == len(res.trace)
    assert res.eta_hat == ETA_FLOOR


def test_calibrate_eta_stays_positive():
    class NeverEnough(SyntheticCoverage):
        def quantile(self, state, eta, alpha, at=None):
            return np.array([-1.0])

    res = gprc_calibrate(np.arange(10.0), 0.1, BootstrapPlan("iid", 1), model_adapter=NeverEnough(),
                         max_iter=10)
    assert all(eta > 0 for eta, _ in res.trace)


def test_calibrate_validates_arguments():
    data = np.arange(10.0) + 1
    with pytest.raises(DomainError):
        gprc_calibrate(data, 1.2, BootstrapPlan("iid", 5), model_adapter=GammaModel())
    with pytest.raises(DomainError):
        gprc_calibrate(data, 0.1, BootstrapPlan("spatial", 5), model_adapter=GammaModel())
    with pytest.raises(InsufficientDataError):
        gprc_calibrate(np.array([1.0]), 0.1, BootstrapPlan("iid", 5), model_adapter=GammaModel())


def test_calibrate_trace_callback():
    calls = []
    data = np.random.default_rng(0).gamma(3, 0.5, 100)
    res = gprc_calibrate(data, 0.1, BootstrapPlan("iid", 30), model_adapter=GammaModel(),
                         on_iteration=lambda t, eta, c: calls.append((eta, c)))
    assert calls == res.trace


def test_calibrate_well_specified_gamma_near_one():
    data = np.random.default_rng(8).gamma(3, 0.5, 400)
    res = gprc_calibrate(data, 0.05, BootstrapPlan("iid", 200, seed=8), model_adapter=GammaModel())
    assert res.converged
    assert 0.7 <= res.eta_hat <= 1.4


def test_calibrate_timeseries_with_iid_model_via_block_bootstrap():
    data = np.random.default_rng(9).gamma(3, 0.5, 120)
    res = gprc_calibrate(data, 0.1, BootstrapPlan("block", 50, 5, seed=1), model_adapter=GammaModel())
    assert res.eta_hat > 0


def test_calibrate_ar1_misspecified_widens():
    rng = np.random.default_rng(10)
    y = np.zeros(300)
    for i in range(1, 300):
        y[i] = 0.9 * y[i - 1] + rng.laplace()
    res = gprc_calibrate(y, 0.01, BootstrapPlan("block", 200, seed=4), model_adapter=AR1Model())
    assert res.converged
    assert res.eta_hat < 1.0


@pytest.mark.slow
def test_regression_chisq_coverage_at_five_percent():
    from gprc.experiment import ExperimentConfig, run_experiment

    summary, _ = run_experiment(ExperimentConfig(scenario="regression_chisq", n=200, alphas=(0.05,),
                                                 R=200, B=200, seed=5, methods=("gprc",)), threads=1)
    assert summary[0]["coverage"] == pytest.approx(0.957, abs=0.03)


def test_spatial_calibration_uses_fields():
    draw = Scenario("sp1").simulate(60, np.random.default_rng(6))
    adapter = GPAdapter.from_data(draw.data)
    res = gprc_calibrate(draw.data, 0.1, BootstrapPlan("spatial", 100, seed=1), model_adapter=adapter)
    assert res.tolerance_used == pytest.approx(0.01)
    assert res.eta_hat > 0
    assert isinstance(draw.data, SpatialData)
