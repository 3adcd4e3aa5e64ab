import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import cumulative_trapezoid

from adrc_lagrangian.controller import ControllerConfig, ControllerMode, GainSet, PidGains
from adrc_lagrangian.errors import NumericError, ParameterError
from adrc_lagrangian.observer import (
    FeedbackSign,
    ObserverConfig,
    ObserverState,
    error_bound,
    initial_observer_state,
    observer_step,
    xi_derivative,
)
from adrc_lagrangian.reference import ReferenceParams
from adrc_lagrangian.surrogate import DisturbanceSpec, PlantState, simulate


def test_rest_is_equilibrium():
    s = observer_step(ObserverState(0.0, 0.0), ObserverConfig(1.0), x2=0.0, u=0.0, dt=0.01)
    assert s.xi == 0.0 and s.f_hat == 0.0


def test_estimate_identity():
    cfg = ObserverConfig(7.0)
    s = observer_step(ObserverState(0.3, 0.0), cfg, x2=1.7, u=0.4, dt=0.01)
    assert s.f_hat - s.xi == pytest.approx(7.0 * 1.7, abs=1e-12)


def test_sign_conventions():
    neg = ObserverConfig(2.0)
    pos = ObserverConfig(2.0, FeedbackSign.POSITIVE_INPUT)
    assert neg.feedback_sign is FeedbackSign.NEGATIVE_FEEDBACK
    assert xi_derivative(1.0, neg, 0.5, 3.0) == -2.0 - 4.0 * 0.5 + 2.0 * 3.0
    assert xi_derivative(1.0, pos, 0.5, 3.0) == -2.0 - 4.0 * 0.5 - 2.0 * 3.0
    assert ObserverConfig(1.0, "positive_input").feedback_sign is FeedbackSign.POSITIVE_INPUT


def test_initial_state_hits_requested_estimate():
    s = initial_observer_state(ObserverConfig(4.0), x2=2.0, f_hat0=1.5)
    assert s.xi + 4.0 * 2.0 == 1.5


def test_constant_disturbance_error_decays_exponentially():
    # open-loop channel x2' = c - u with u fixed: x2 is linear in time
    w, c, u, dt = 5.0, 3.0, 1.0, 1e-4
    cfg = ObserverConfig(w)
    state = initial_observer_state(cfg, 0.0)
    x2 = 0.0
    errs, ts = [], []
    for k in range(1, 20001):
        x2_mid = x2 + 0.5 * dt * (c - u)
        state = observer_step(state, cfg, x2_mid, u, dt, method="rk4")
        x2 = x2 + dt * (c - u)
        state = ObserverState(state.xi, state.xi + w * x2)
        errs.append(state.f_hat - c)
        ts.append(k * dt)
    errs, ts = np.array(errs), np.array(ts)
    expected = -c * np.exp(-w * ts)
    assert np.max(np.abs(errs - expected)) < 1e-6
    assert abs(errs[-1]) < 1e-3


@pytest.mark.parametrize("sign", list(FeedbackSign))
def test_error_dynamics_independent_of_sign(sign):
    w = 10.0
    dist = DisturbanceSpec.constant(2.0)
    ctrl = ControllerConfig.raw(ControllerMode.CLASSICAL_LAG, PidGains.classical(0.0), dt=0.01, lambda_init=0.7)
    tr = simulate(PlantState(0.0), dist, ctrl, ReferenceParams(1.0, 0.0, 0.0), ObserverConfig(w, sign), 2.0, 0.001)
    expected = -2.0 * np.exp(-w * (tr.t - tr.t[0]))
    assert np.max(np.abs(tr.e_f - expected)) < 1e-9


def test_sinusoid_asymptotic_error_within_bound():
    w = 10.0
    dist = DisturbanceSpec.sinusoid(1.0, 1.0)
    ctrl = ControllerConfig.raw(ControllerMode.ADRC_CONTINUOUS, GainSet(1.0, 2.0, w), dt=0.01, lambda_max=None)
    tr = simulate(PlantState(0.0), dist, ctrl, ReferenceParams(1.0, 0.0, 0.0), ObserverConfig(w), 30.0, 0.001)
    tail = np.abs(tr.e_f[tr.t > 10.0])
    assert tail.max() <= (1 / 10) * 1.02
    # the exact steady amplitude is nu / sqrt(nu^2 + w^2)
    assert tail.max() == pytest.approx(1 / math.sqrt(101), rel=1e-3)


def test_euler_guards():
    cfg = ObserverConfig(10.0)
    s = ObserverState(0.0, 0.0)
    with pytest.raises(ParameterError):
        observer_step(s, cfg, 0.0, 0.0, dt=0.2)
    with pytest.warns(RuntimeWarning):
        observer_step(s, cfg, 0.0, 0.0, dt=0.15)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        observer_step(s, cfg, 0.0, 0.0, dt=0.05)
    # RK4 has no Euler guard
    observer_step(s, cfg, 0.0, 0.0, dt=0.15, method="rk4")


@pytest.mark.parametrize("dt", [0.0, -0.1, math.nan])
def test_bad_dt(dt):
    with pytest.raises(ParameterError):
        observer_step(ObserverState(0.0, 0.0), ObserverConfig(1.0), 0.0, 0.0, dt)


@pytest.mark.parametrize("field", ["xi", "x2", "u"])
def test_nonfinite_inputs(field):
    vals = {"xi": 0.0, "x2": 0.0, "u": 0.0}
    vals[field] = math.nan
    with pytest.raises(NumericError):
        observer_step(ObserverState(vals["xi"], 0.0), ObserverConfig(1.0), vals["x2"], vals["u"], 0.01)


def test_unknown_method():
    with pytest.raises(ParameterError):
        observer_step(ObserverState(0.0, 0.0), ObserverConfig(1.0), 0.0, 0.0, 0.01, method="midpoint")


@pytest.mark.parametrize("w", [0.0, -1.0, math.inf])
def test_gain_must_be_positive(w):
    with pytest.raises(ParameterError):
        ObserverConfig(w)


def test_error_bound_examples():
    assert error_bound(10.0, 1.0, 0.0, 3.0) == pytest.approx(0.1)
    assert error_bound(2.0, 0.0, 4.0, math.log(2) / 2) == pytest.approx(2.0)
    assert error_bound(10.0, 1.0, 5.0, 0.5) == pytest.approx(5 * math.exp(-5) + 0.1)
    assert error_bound(10.0, 1.0, 5.0, 0.5) == pytest.approx(0.13369, abs=1e-5)


def test_error_bound_vectorized_and_validated():
    out = error_bound(1.0, 0.0, 1.0, np.array([0.0, 1.0]))
    assert np.allclose(out, [1.0, math.exp(-1)])
    with pytest.raises(ParameterError):
        error_bound(0.0, 1.0, 0.0, 1.0)
    with pytest.raises(ParameterError):
        error_bound(1.0, -1.0, 0.0, 1.0)
    with pytest.raises(ParameterError):
        error_bound(1.0, 1.0, 0.0, -1.0)


@given(st.floats(0.1, 1e3), st.floats(0.0, 1e3))
def test_doubling_gain_halves_asymptote(w, L_f):
    assert error_bound(2 * w, L_f, 0.0, 1.0) == pytest.approx(error_bound(w, L_f, 0.0, 1.0) / 2, rel=1e-15, abs=0)


@settings(max_examples=25, deadline=None)
@given(
    amp=st.floats(0.1, 3.0),
    nu=st.floats(0.1, 5.0),
    offset=st.floats(-3.0, 3.0),
    phase=st.floats(0.0, 2 * math.pi),
    w=st.sampled_from([5.0, 10.0, 20.0]),
)
def test_simulated_error_respects_bound(amp, nu, offset, phase, w):
    dist = DisturbanceSpec.sinusoid(amp, nu, offset=offset, phase=phase)
    dt = 0.01 / w
    ctrl = ControllerConfig.raw(ControllerMode.ADRC_CONTINUOUS, GainSet(1.0, 2.0, w), dt=10 * dt, lambda_max=None)
    tr = simulate(PlantState(0.0), dist, ctrl, ReferenceParams(1.0, 0.0, 0.0), ObserverConfig(w), 3.0, dt)
    t = tr.t - tr.t[0]
    bound = error_bound(w, dist.L_f, abs(tr.e_f[0]), t)
    assert np.all(np.abs(tr.e_f) <= 1.05 * bound)


def _integrated_gap(dt_update):
    w, g = 10.0, GainSet(1.0, 2.0, 10.0)
    dist = DisturbanceSpec.sinusoid(1.0, 0.7, offset=2.0)
    ctrl = ControllerConfig.raw(ControllerMode.ADRC_CONTINUOUS, g, dt=dt_update, lambda_max=None)
    tr = simulate(PlantState(25.0), dist, ctrl, ReferenceParams(0.5, 25.0, 25.0), ObserverConfig(w), 2.0, 1e-4)
    integral = cumulative_trapezoid(tr.e, tr.t, initial=0.0)
    f_int = w * g.k_ad * tr.e + w * tr.e_d + w * g.k_ap * integral
    return np.max(np.abs(f_int - tr.f_hat))


def test_integrated_estimate_matches_stepped_estimate():
    # the identity is exact for the continuous law; the hold adds an O(dt_update) gap
    coarse, fine = _integrated_gap(2e-3), _integrated_gap(1e-3)
    assert fine < 2e-2
    assert fine / coarse == pytest.approx(0.5, abs=0.1)
