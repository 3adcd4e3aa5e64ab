import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adrc_lagrangian.controller import ControllerConfig, ControllerMode, GainSet, PidGains
from adrc_lagrangian.errors import DisturbanceBoundError, DivergenceError, ParameterError
from adrc_lagrangian.observer import ObserverConfig
from adrc_lagrangian.reference import ReferenceParams
from adrc_lagrangian.surrogate import (
    DisturbanceKind,
    DisturbanceSpec,
    PlantState,
    TheoryInputs,
    avg_violation_check,
    envelope_coverage,
    finite_difference_proxy,
    first_violation_free_time,
    impulse_l1_norm,
    iss_tube_check,
    lf_envelope,
    simulate,
    tube_radius,
)
from oracles import impulse_l1_bruteforce, impulse_l1_series

D = 25.0
G = GainSet(1.0, 2.0, 10.0)
OBS = ObserverConfig(10.0)


def adrc(gains=G, dt=0.01, **kw):
    kw.setdefault("lambda_max", None)
    return ControllerConfig.raw(ControllerMode.ADRC_CONTINUOUS, gains, dt=dt, **kw)


def run(dist, ctrl=None, x1_0=30.0, d=D, horizon=40.0, dt=0.001, obs=OBS, c_r=0.5, **kw):
    ctrl = adrc() if ctrl is None else ctrl
    return simulate(PlantState(x1_0), dist, ctrl, ReferenceParams(c_r, d, x1_0), obs, horizon, dt, **kw)


# -- simulation -------------------------------------------------------------


@pytest.mark.parametrize(
    "ctrl",
    [adrc(), ControllerConfig.raw(ControllerMode.CLASSICAL_LAG, PidGains.classical(0.035), dt=0.01, lambda_init=0.0)],
    ids=["adrc", "lag"],
)
def test_equilibrium(ctrl):
    tr = run(DisturbanceSpec.constant(0.0), ctrl, x1_0=D, horizon=5.0)
    assert np.all(tr.x1 == D) and np.all(tr.x2 == 0.0)
    assert np.all(tr.lam == 0.0)


def test_constant_disturbance_converges():
    tr = run(DisturbanceSpec.constant(2.0), horizon=40.0)
    tail = tr.t > 30.0
    assert np.max(np.abs(tr.x1[tail] - D)) < 1e-3
    assert np.max(np.abs(tr.x2[tail])) < 1e-3
    assert tr.lam[-1] == pytest.approx(2.0, abs=1e-3)


def test_adrc_overshoots_less_than_lag_under_sinusoid():
    dist = DisturbanceSpec.sinusoid(1.0, 0.2)
    lag = ControllerConfig.raw(ControllerMode.CLASSICAL_LAG, PidGains.classical(0.035), dt=0.1)
    alg1 = ControllerConfig.raw(ControllerMode.ADRC_ALGORITHM1, G, dt=0.1)
    kw = dict(x1_0=D, horizon=100.0, dt=0.001)
    lag_peak = run(dist, lag, **kw).peak_overshoot()
    assert run(dist, adrc(dt=0.1), **kw).peak_overshoot() < lag_peak
    assert run(dist, alg1, **kw).peak_overshoot() < lag_peak


def test_lambda_is_held_between_updates():
    tr = run(DisturbanceSpec.sinusoid(1.0, 1.0, offset=3.0), adrc(dt=0.05), horizon=2.0, dt=0.001)
    blocks = tr.lam[:-1].reshape(-1, 50)
    assert np.all(blocks == blocks[:, :1])
    assert np.unique(blocks[:, 0]).size > 1


def test_trace_columns_and_csv():
    tr = run(DisturbanceSpec.constant(1.0), horizon=0.1)
    assert tr.t.size == 101 and tr.horizon == pytest.approx(0.1)
    assert np.allclose(tr.e, tr.x1 - tr.r) and np.allclose(tr.e_f, tr.f_hat - tr.f)
    buf = io.StringIO()
    tr.to_csv(buf, precision=6)
    lines = buf.getvalue().splitlines()
    assert lines[0] == ",".join(tr.columns) and len(lines) == 102
    assert tr.to_csv().startswith("t,x1,")
    assert tr.meta == {"mode": "adrc_continuous", "feedback_sign": "negative_feedback"}


def test_start_time_offsets_reference():
    tr = simulate(PlantState(30.0, 0.0, t=5.0), DisturbanceSpec.constant(1.0), adrc(), ReferenceParams(0.5, D, 30.0), OBS, 1.0, 0.001)
    assert tr.t[0] == 5.0 and tr.r[0] == 30.0


@pytest.mark.parametrize("dt", [0.002, 0.0015])
def test_step_guard(dt):
    # dt must satisfy dt <= 0.001 here and divide the update interval
    with pytest.raises(ParameterError):
        run(DisturbanceSpec.constant(0.0), horizon=1.0, dt=dt)


def test_step_must_divide_update_interval():
    with pytest.raises(ParameterError, match="divide"):
        run(DisturbanceSpec.constant(0.0), adrc(dt=0.01), horizon=1.0, dt=0.0003)


def test_horizon_must_be_positive():
    with pytest.raises(ParameterError):
        run(DisturbanceSpec.constant(0.0), horizon=0.0)


def test_audit_catches_understated_rate():
    bad = DisturbanceSpec(DisturbanceKind.SINUSOID, amplitude=1.0, frequency=1.0, L3=1.0, L_f=0.5)
    with pytest.raises(DisturbanceBoundError) as info:
        run(bad, horizon=2.0)
    assert info.value.step is not None and info.value.step >= 0
    run(bad, horizon=2.0, audit=False)


def test_audit_covers_state_dependent_rate():
    dist = DisturbanceSpec.linear_state(-0.5, -0.5, L_f=1e-6, offset=2.0)
    with pytest.raises(DisturbanceBoundError, match="f_dot"):
        run(dist, horizon=5.0)


def test_divergence_reports_step():
    dist = DisturbanceSpec.linear_state(1e4, 0.0, L_f=1.0)
    ctrl = ControllerConfig.raw(ControllerMode.CLASSICAL_LAG, PidGains.classical(0.0), dt=0.01)
    with pytest.raises(DivergenceError) as info:
        run(dist, ctrl, horizon=20.0, audit=False)
    assert info.value.step > 0


def test_disturbance_validation():
    with pytest.raises(ParameterError):
        DisturbanceSpec(DisturbanceKind.CONSTANT, amplitude=1.0)
    with pytest.raises(ParameterError):
        DisturbanceSpec(DisturbanceKind.LINEAR_STATE, a1=2.0, L1=1.0)
    with pytest.raises(ParameterError):
        DisturbanceSpec(DisturbanceKind.CONSTANT, L_f=-1.0)
    with pytest.raises(ParameterError):
        DisturbanceSpec(DisturbanceKind.CONSTANT, offset=math.nan)
    comp = DisturbanceSpec(DisturbanceKind.COMPOSITE, a1=0.1, L1=0.1, amplitude=1.0, frequency=1.0, step_height=1.0, step_rate=1.0)
    assert comp.asymptote is None


def test_disturbance_constructors():
    s = DisturbanceSpec.sinusoid(2.0, 3.0, offset=1.0, decay=4.0)
    assert s.L_f == pytest.approx(10.0) and s.asymptote == 1.0
    assert DisturbanceSpec.sinusoid(1.0, 1.0).asymptote is None
    step = DisturbanceSpec.smooth_step(-3.0, 2.0, offset=1.0)
    assert step.L_f == 6.0 and step.asymptote == -2.0
    assert step.w(0.0) == 1.0 and float(step.w(1e3)) == pytest.approx(-2.0)
    assert DisturbanceSpec.constant(-2.0).L3 == 2.0


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(0.1, 5), st.floats(0, 2), st.floats(0, 6.3), st.floats(-3, 3), st.floats(0.1, 3))
def test_disturbance_derivative_and_bounds(amp, nu, decay, phase, height, rate):
    dist = DisturbanceSpec(
        DisturbanceKind.COMPOSITE, amplitude=amp, frequency=nu, decay=decay, phase=phase, step_height=height, step_rate=rate
    )
    t = np.linspace(0.0, 10.0, 2001)
    h = 1e-6
    numeric = (dist.w(t + h) - dist.w(t - np.minimum(h, t))) / (h + np.minimum(h, t))
    assert np.allclose(dist.w_dot(t), numeric, atol=1e-4 * (1 + abs(amp) * nu + abs(height) * rate))
    f = dist.scalar_fn()
    assert f(1.3, 0.0, 0.0) == pytest.approx(float(dist.value(1.3, 0.0, 0.0)), abs=1e-14)
    s = DisturbanceSpec.sinusoid(amp, nu, decay=decay, phase=phase)
    assert np.all(np.abs(s.w_dot(t)) <= s.L_f * (1 + 1e-12))


# -- ISS tube ---------------------------------------------------------------


def test_tube_radius_critical_damping_example():
    assert tube_radius(GainSet(0.04, 0.4, 10.0), 0.1) == pytest.approx(0.25, abs=1e-12)
    assert impulse_l1_norm(0.04, 0.4) == pytest.approx(25.0)


def test_tube_radius_zero_rate():
    assert tube_radius(G, 0.0) == 0.0
    with pytest.raises(ParameterError):
        tube_radius(G, -1.0)


def test_l1_norm_needs_hurwitz():
    with pytest.raises(ParameterError):
        impulse_l1_norm(0.0, 1.0)
    with pytest.raises(ParameterError):
        impulse_l1_norm(1.0, 0.0)


@pytest.mark.parametrize("k_ap, k_ad", [(1.0, 0.5), (0.1, 0.01 * 10), (4.0, 1.0), (1.0, 3.0), (0.04, 0.4)])
def test_l1_norm_brute_force(k_ap, k_ad):
    assert impulse_l1_norm(k_ap, k_ad) == pytest.approx(impulse_l1_bruteforce(k_ap, k_ad), rel=1e-5)


@given(st.floats(0.01, 100.0), st.floats(0.01, 0.999))
def test_l1_norm_series_oracle(k_ap, zeta):
    k_ad = 2.0 * zeta * math.sqrt(k_ap)
    assert impulse_l1_norm(k_ap, k_ad) == pytest.approx(impulse_l1_series(k_ap, k_ad), rel=1e-8)
    # oscillation only increases the norm over the static gain
    assert impulse_l1_norm(k_ap, k_ad) >= 1.0 / k_ap * (1 - 1e-12)


def test_zero_rate_tube_tail_vanishes():
    short = iss_tube_check(run(DisturbanceSpec.constant(3.0), horizon=40.0), G, 0.0)
    long = iss_tube_check(run(DisturbanceSpec.constant(3.0), horizon=80.0), G, 0.0)
    assert short.radius == 0.0
    assert long.tail_max < 1e-9 and long.tail_max < 1e-3 * short.tail_max


def test_sinusoid_stays_in_tube():
    dist = DisturbanceSpec.sinusoid(1.0, 0.5, offset=4.0, phase=1.0)
    tr = run(dist, horizon=60.0)
    rep = iss_tube_check(tr, G, dist.L_f)
    assert not tr.saturated.any()
    assert rep.passed and rep.tail_max <= 1.05 * rep.radius
    assert rep.tail_start == pytest.approx(30.0)


def test_tube_check_rejects_short_trace():
    tr = run(DisturbanceSpec.constant(3.0), horizon=5.0)
    with pytest.raises(ParameterError, match="settles"):
        iss_tube_check(tr, G, 0.0)


def test_grid_refinement():
    dist = DisturbanceSpec.sinusoid(1.0, 0.5, offset=4.0)
    coarse = iss_tube_check(run(dist, horizon=40.0, dt=0.001), G, dist.L_f).tail_max
    fine = iss_tube_check(run(dist, horizon=40.0, dt=0.0005), G, dist.L_f).tail_max
    assert abs(fine - coarse) < 0.01 * fine


def test_error_equation_at_update_instants():
    dist = DisturbanceSpec.sinusoid(1.5, 0.8, offset=3.0)
    tr = run(dist, adrc(dt=0.01), horizon=10.0, dt=0.0001)
    k = np.arange(0, tr.t.size - 1, 100)
    # right-sided derivative of e_d; lambda is refreshed at these instants
    e_dd = (tr.e_d[k + 1] - tr.e_d[k]) / tr.dt
    resid = e_dd + G.k_ad * tr.e_d[k] + G.k_ap * tr.e[k] + tr.e_f[k]
    assert np.max(np.abs(resid)) < 1e-3


# -- average violation and margin ------------------------------------------


def test_no_violation_gives_zero_average():
    tr = run(DisturbanceSpec.constant(1.0), x1_0=10.0, horizon=20.0)
    assert np.all(tr.x1 <= D)
    rep = avg_violation_check(tr, D, 0.1)
    assert rep.tail_average == 0.0 and rep.passed
    assert rep.violation_free_from == tr.t[0] and rep.suffix_fraction == 1.0


def test_average_violation_within_radius():
    dist = DisturbanceSpec.sinusoid(2.0, 0.3, offset=5.0)
    tr = run(dist, horizon=80.0)
    radius = tube_radius(G, dist.L_f)
    rep = avg_violation_check(tr, D, radius)
    assert 0.0 < rep.tail_average <= 1.05 * radius and rep.passed


def test_margin_removes_violations():
    dist = DisturbanceSpec.sinusoid(2.0, 0.3, offset=5.0)
    radius = tube_radius(G, dist.L_f)
    eps = 1.5 * radius
    tr = run(dist, d=D - eps, horizon=80.0)
    rep = avg_violation_check(tr, D, radius)
    assert rep.violation_free_from is not None
    assert rep.tail_average == 0.0 and rep.suffix_fraction > 0.5
    unmargined = run(dist, horizon=80.0)
    assert avg_violation_check(unmargined, D, radius).tail_average > 0.0


def test_first_violation_free_time_cases():
    tr = run(DisturbanceSpec.constant(1.0), horizon=1.0)
    assert first_violation_free_time(tr, 100.0) == tr.t[0]
    assert first_violation_free_time(tr, 0.0) is None
    x1 = tr.x1
    i = int(np.argmax(x1 <= 29.9))
    assert first_violation_free_time(tr, 29.9) == tr.t[i]


# -- envelope ---------------------------------------------------------------


def inputs(**kw):
    base = dict(delta=0.02, N=200, dt_update=1.0, B_c=100.0, gamma=0.99, lambda_max=1.0, K=100, eta=0.05)
    base.update(kw)
    return TheoryInputs(**base)


def test_drift_example():
    assert lf_envelope(inputs()).D_TR == pytest.approx(4000.0, rel=1e-14)


def test_hoeffding_example():
    eps = lf_envelope(inputs(B_c=1.0)).eps_N
    assert eps == pytest.approx(math.sqrt(math.log(4000.0) / 400.0), rel=1e-14)
    assert eps == pytest.approx(0.14398, abs=5e-5)


def test_envelope_formula_and_limit():
    env = lf_envelope(inputs(dt_update=2.0))
    assert env.L_f_bound == pytest.approx(4.0 / 8.0 * (env.D_TR + 2 * env.eps_N) + 2.0 * 1.0 / 2.0)
    bounds = [lf_envelope(inputs(delta=0.0, N=10**p, lambda_max=0.0)).L_f_bound for p in (4, 8, 12, 16)]
    # only the sampling radius remains, shrinking like 1 / sqrt(N)
    assert bounds[1:] == pytest.approx([b / 100 for b in bounds[:-1]], rel=1e-12)


@pytest.mark.parametrize(
    "field, value", [("delta", -1.0), ("N", 0), ("N", 1.5), ("dt_update", 0.0), ("B_c", 0.0), ("gamma", 1.0), ("eta", 0.0), ("K", 0)]
)
def test_theory_inputs_validation(field, value):
    with pytest.raises(ParameterError):
        inputs(**{field: value})


def test_proxy_constant_series():
    proxy, var = finite_difference_proxy([3.0] * 6, [0.5] * 6, 1.0)
    assert np.all(proxy == 0.5) and var == 0.0


def test_proxy_quadratic_series():
    k = np.arange(10.0)
    proxy, var = finite_difference_proxy(0.7 * k ** 2, np.zeros(10), 1.0)
    assert np.allclose(proxy, 1.4, atol=1e-12) and var < 1e-12


def test_proxy_scaling_with_update_interval():
    k = np.arange(10.0)
    proxy, _ = finite_difference_proxy(0.7 * k ** 2, np.zeros(10), 0.5)
    assert np.allclose(proxy, 1.4 / 0.25)


def test_proxy_validation():
    with pytest.raises(ParameterError):
        finite_difference_proxy([1.0, 2.0], [0.0, 0.0], 1.0)
    with pytest.raises(ParameterError):
        finite_difference_proxy([1.0, 2.0, 3.0], [0.0, 0.0], 1.0)
    with pytest.raises(ParameterError):
        finite_difference_proxy([1.0, 2.0, 3.0], [0.0] * 3, 0.0)
    _, var = finite_difference_proxy([1.0, 5.0, 2.0], [0.0] * 3, 1.0)
    assert var == 0.0


def test_envelope_coverage():
    cfg = inputs(delta=1e-6, B_c=1.0)
    rep = envelope_coverage(cfg, trials=100, seed=3)
    assert rep.coverage >= 1.0 - cfg.eta
    assert rep.hoeffding_coverage >= 1.0 - cfg.eta
    assert rep.max_variation <= rep.envelope.L_f_bound
    assert envelope_coverage(cfg, trials=10, seed=3) == envelope_coverage(cfg, trials=10, seed=3)
