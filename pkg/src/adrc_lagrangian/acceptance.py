"""The twelve acceptance criteria as runnable checks.

Every check is deterministic (fixed seeds) and returns a
:class:`CriterionResult`; :func:`render_report` turns results into the
text printed by ``adrc-lag selftest``. Wall-clock time is compared with each
criterion's budget but never printed, so reports are byte-stable.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .controller import (
    ControllerConfig,
    ControllerMode,
    GainSet,
    replay_lambda,
    replay_lambda_batch,
)
from .freq import default_grid, ratio_and_phase_check, steady_state_ratio, step_ratio_time_domain
from .gains import DisturbanceBounds, max_real_root, omega_star
from .metrics import EpisodeCosts, average_cost, violation_magnitude, violation_rate
from .observer import ObserverConfig
from .reference import ReferenceParams, make_reference
from .surrogate import (
    DisturbanceSpec,
    PlantState,
    TheoryInputs,
    avg_violation_check,
    envelope_coverage,
    iss_tube_check,
    lf_envelope,
    simulate,
    tube_radius,
)
from .toycmdp import SoftmaxPolicy, reference_instance, train

__all__ = ["CriterionResult", "CRITERIA", "run_criterion", "run_all", "render_report", "check_determinism"]


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    elapsed: float
    budget: float

    @property
    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d} {self.name}: {self.detail}"


def _g(x: float) -> str:
    return f"{x:.6g}"


# -- 1 ----------------------------------------------------------------------


def _rk4_reference(c: np.ndarray, d: np.ndarray, r0: np.ndarray, v0: np.ndarray, t_end: np.ndarray, n: int):
    """Integrate r'' = -2c r' - c^2 (r - d) for a batch of parameter sets."""
    h = t_end / n
    r, v = r0.copy(), v0.copy()
    out_r = np.empty((n + 1, r.size))
    out_v = np.empty_like(out_r)
    out_r[0], out_v[0] = r, v

    def acc(r, v):
        return -2.0 * c * v - c * c * (r - d)

    for k in range(n):
        k1r, k1v = v, acc(r, v)
        k2r, k2v = v + 0.5 * h * k1v, acc(r + 0.5 * h * k1r, v + 0.5 * h * k1v)
        k3r, k3v = v + 0.5 * h * k2v, acc(r + 0.5 * h * k2r, v + 0.5 * h * k2v)
        k4r, k4v = v + h * k3v, acc(r + h * k3r, v + h * k3v)
        r = r + h / 6.0 * (k1r + 2 * k2r + 2 * k3r + k4r)
        v = v + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        out_r[k + 1], out_v[k + 1] = r, v
    return h, out_r, out_v


def criterion_reference() -> tuple[bool, str]:
    rng = np.random.default_rng(101)
    m = 50
    c = rng.uniform(0.05, 2.0, m)
    d = rng.uniform(0.0, 50.0, m)
    x1 = rng.uniform(0.0, 100.0, m)
    x2 = rng.uniform(-10.0, 10.0, m)
    n = 4000
    h, R, _ = _rk4_reference(c, d, x1, x2, 10.0 / c, n)
    worst = 0.0
    exact0 = True
    for i in range(m):
        traj = make_reference(ReferenceParams(c[i], d[i], x1[i], x2[i]))
        t = np.arange(n + 1) * h[i]
        r, _, _ = traj.eval(t)
        worst = max(worst, float(np.max(np.abs(r - R[:, i]))))
        r0, v0, _ = traj.eval(0.0)
        exact0 &= (r0 == x1[i]) and (v0 == x2[i])
    ok = worst < 1e-8 and exact0
    return ok, f"max |r - r_rk4| = {worst:.3e} over {m} draws (limit 1e-08), exact r(0), r'(0): {exact0}"


# -- 2 ----------------------------------------------------------------------


def _eso_disturbances() -> list[DisturbanceSpec]:
    rng = np.random.default_rng(202)
    out = []
    for _ in range(10):
        out.append(
            DisturbanceSpec.sinusoid(
                rng.uniform(0.5, 3.0), rng.uniform(0.2, 5.0), offset=rng.uniform(-2.0, 5.0), phase=rng.uniform(0, 2 * math.pi)
            )
        )
    for _ in range(10):
        out.append(DisturbanceSpec.smooth_step(rng.uniform(-4.0, 6.0), rng.uniform(0.5, 5.0), offset=rng.uniform(0.0, 3.0)))
    return out


def criterion_eso_bound() -> tuple[bool, str]:
    w = 10.0
    gains = GainSet(1.0, 2.0, w)
    dt = 0.005 / w
    ctrl = ControllerConfig.raw(ControllerMode.ADRC_CONTINUOUS, gains, dt=0.005, lambda_max=1e3)
    obs = ObserverConfig(w)
    worst = -math.inf
    for dist in _eso_disturbances():
        tr = simulate(PlantState(25.0), dist, ctrl, ReferenceParams(0.5, 25.0, 25.0), obs, 4.0, dt)
        t = tr.t - tr.t[0]
        bound = np.exp(-w * t) * abs(tr.e_f[0]) + 1.05 * dist.L_f / w
        worst = max(worst, float(np.max(np.abs(tr.e_f) / bound)))
    return worst <= 1.0, f"max |e_f| / bound = {worst:.4f} over 20 disturbances (limit 1)"


# -- 3 ----------------------------------------------------------------------


def criterion_pid_reduction() -> tuple[bool, str]:
    rng = np.random.default_rng(303)
    ref = (25.0, 0.0, 0.0)
    worst = 0.0
    groups, per = 10, 1000
    for _ in range(groups):
        g = GainSet(rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0), rng.uniform(0.5, 50.0))
        adrc = ControllerConfig.raw(ControllerMode.ADRC_ALGORITHM1, g)
        pid = ControllerConfig.raw(ControllerMode.PID_LAG, g.pid_equivalent())
        costs = rng.uniform(0.0, 60.0, (per, 100))
        a = replay_lambda_batch(adrc, costs, ref)
        b = replay_lambda_batch(pid, costs, ref)
        worst = max(worst, float(np.max(np.abs(a - b))))
        # spot-check the batch path against the scalar update
        for row in costs[:3]:
            s = np.array(replay_lambda(adrc, row, [ref] * row.size))
            worst = max(worst, float(np.max(np.abs(s - replay_lambda_batch(adrc, row[None, :], ref)[0]))))
    n = groups * per
    return worst <= 1e-12, f"max |lam_adrc - lam_pid| = {worst:.3e} over {n} streams of length 100 (limit 1e-12)"


# -- 4, 5 -------------------------------------------------------------------


def _ratio_gains() -> tuple[GainSet, float]:
    k_ap, k_ad = 0.1, 0.01
    w_star = omega_star(k_ap, k_ad, DisturbanceBounds(L1=0.2, L2=0.05))
    return GainSet(k_ap, k_ad, max(10.0, 2.0 * w_star)), w_star


def criterion_magnitude() -> tuple[bool, str]:
    g, w_star = _ratio_gains()
    rep = ratio_and_phase_check(default_grid(), g, omega_star=w_star)
    target = g.k_ap / (g.k_ap + g.omega_o * g.k_ad)
    _, e_f, e_fI = step_ratio_time_domain(g)
    ratio = float(e_f[-1] / e_fI[-1])
    rel = abs(ratio / target - 1.0)
    closed = steady_state_ratio(g)
    ok = rep.magnitude_ok and rel < 0.02 and abs(closed - target) < 1e-15
    return ok, (
        f"omega_o = {_g(g.omega_o)}, max ratio^2 = {rep.ratio_sq.max():.6f} on {rep.omega.size} points; "
        f"time-domain ratio {ratio:.6f} vs {target:.6f} (rel. err {rel:.2e}, limit 2e-02)"
    )


def criterion_phase() -> tuple[bool, str]:
    g, w_star = _ratio_gains()
    rep = ratio_and_phase_check(default_grid(), g, omega_star=w_star)
    n_adm = int(rep.phase_admissible.sum())
    ok = rep.phase_ok and n_adm > 0
    viol = int(rep.phase_violation.sum())
    return ok, f"{n_adm} admissible grid points, {viol} phase violations"


# -- 6 ----------------------------------------------------------------------


def _oracle_max_root(c: np.ndarray) -> float | None:
    """Companion-matrix eigenvalues, real ones polished by bisection."""
    z = np.roots(c)
    real = z[np.abs(z.imag) <= 1e-6 * (1.0 + np.abs(z))].real
    if real.size == 0:
        return None
    x = float(real.max())
    p = np.poly1d(c)
    lo, hi = x - 1e-6 * (1 + abs(x)), x + 1e-6 * (1 + abs(x))
    flo, fhi = p(lo), p(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0 or (flo < 0) == (fhi < 0):
        return x
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = p(mid)
        if fm == 0.0 or hi - lo < 1e-15 * max(1.0, abs(mid)):
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def criterion_quartic() -> tuple[bool, str]:
    rng = np.random.default_rng(606)
    n = 10_000
    coeffs = np.column_stack([np.ones(n), rng.uniform(-10.0, 10.0, (n, 4))])
    worst = 0.0
    disagree = 0
    for c in coeffs:
        got = max_real_root(c)
        want = _oracle_max_root(c)
        if (got is None) != (want is None):
            disagree += 1
        elif got is not None:
            worst = max(worst, abs(got - want))
    ok = disagree == 0 and worst < 1e-9
    return ok, f"{n} monic quartics: existence mismatches {disagree}, max root error {worst:.3e} (limit 1e-09)"


# -- 7, 8 -------------------------------------------------------------------

_ISS_GAINS = GainSet(1.0, 2.0, 10.0)
_ISS_D = 25.0
_ISS_HORIZON = 80.0


def _iss_disturbances() -> list[DisturbanceSpec]:
    rng = np.random.default_rng(707)
    return [
        DisturbanceSpec.sinusoid(
            rng.uniform(0.5, 2.0), rng.uniform(0.1, 1.0), offset=rng.uniform(2.0, 8.0), phase=rng.uniform(0, 2 * math.pi)
        )
        for _ in range(10)
    ]


def _iss_run(dist: DisturbanceSpec, d_target: float):
    ctrl = ControllerConfig.raw(ControllerMode.ADRC_CONTINUOUS, _ISS_GAINS, dt=0.01, lambda_max=100.0)
    ref = ReferenceParams(0.5, d_target, 30.0)
    return simulate(PlantState(30.0), dist, ctrl, ref, ObserverConfig(_ISS_GAINS.omega_o), _ISS_HORIZON, 0.001)


def criterion_iss() -> tuple[bool, str]:
    tube_worst = avg_worst = 0.0
    ok = True
    for dist in _iss_disturbances():
        tr = _iss_run(dist, _ISS_D)
        tube = iss_tube_check(tr, _ISS_GAINS, dist.L_f)
        avg = avg_violation_check(tr, _ISS_D, tube.radius)
        tube_worst = max(tube_worst, tube.tail_max / tube.radius)
        avg_worst = max(avg_worst, avg.tail_average / tube.radius)
        ok &= tube.passed and avg.passed and not tr.saturated.any()
    return ok, (
        f"10 draws: max tail|e| / radius = {tube_worst:.4f}, "
        f"max tail avg (x1-d)+ / radius = {avg_worst:.4f} (limit 1.05 each)"
    )


def criterion_margin() -> tuple[bool, str]:
    worst = 1.0
    ok = True
    for dist in _iss_disturbances():
        eps = 2.0 * tube_radius(_ISS_GAINS, dist.L_f)
        tr = _iss_run(dist, _ISS_D - eps)
        rep = avg_violation_check(tr, _ISS_D, eps / 2.0)
        frac = rep.suffix_fraction if rep.violation_free_from is not None else 0.0
        worst = min(worst, frac)
        ok &= rep.violation_free_from is not None and frac >= 0.5
    return ok, f"10 draws with eps = 2 x radius: min violation-free suffix = {worst:.4f} of horizon (limit 0.5)"


# -- 9 ----------------------------------------------------------------------


def criterion_envelope() -> tuple[bool, str]:
    a = lf_envelope(TheoryInputs(delta=0.02, N=1, dt_update=1.0, B_c=100.0, gamma=0.99, lambda_max=0.0, K=1, eta=0.5))
    b = lf_envelope(TheoryInputs(delta=0.0, N=200, dt_update=1.0, B_c=1.0, gamma=0.5, lambda_max=0.0, K=100, eta=0.05))
    eps_oracle = math.sqrt(math.log(4000.0) / 400.0)
    arith = abs(a.D_TR - 4000.0) < 1e-9 and abs(b.eps_N - eps_oracle) < 1e-9
    mc_inputs = TheoryInputs(delta=1e-6, N=200, dt_update=1.0, B_c=1.0, gamma=0.99, lambda_max=1.0, K=100, eta=0.05)
    cov = envelope_coverage(mc_inputs, trials=100, seed=909)
    ok = arith and cov.coverage >= 1.0 - mc_inputs.eta
    return ok, (
        f"D_TR = {a.D_TR:.10g}, eps_N = {b.eps_N:.10g}; "
        f"coverage {cov.coverage:.2f} over {cov.trials} resamples (limit {1 - mc_inputs.eta:.2f})"
    )


# -- 10 ---------------------------------------------------------------------


def toy_violation_rates(seeds=range(10), epochs: int = 150, episodes: int = 32) -> dict[str, list[float]]:
    cmdp = reference_instance()
    out: dict[str, list[float]] = {}
    for mode in (ControllerMode.CLASSICAL_LAG, ControllerMode.ADRC_ALGORITHM1):
        rates = []
        for seed in seeds:
            log = train(cmdp, SoftmaxPolicy.uniform(cmdp, seed=seed), ControllerConfig(mode=mode), epochs=epochs,
                        episodes_per_epoch=episodes)
            rates.append(violation_rate(log.all_episode_costs()))
        out[mode.value] = rates
    return out


def criterion_toy() -> tuple[bool, str]:
    rates = toy_violation_rates()
    lag = float(np.mean(rates["classical_lag"]))
    adrc = float(np.mean(rates["adrc_algorithm1"]))
    return adrc < lag, f"mean violation rate over 10 seeds: ADRC {adrc:.4f} vs classical Lag {lag:.4f}"


# -- 11 ---------------------------------------------------------------------


def criterion_metrics() -> tuple[bool, str]:
    cases = [
        (violation_rate(EpisodeCosts([20, 10, 25], 25)), 0.0),
        (violation_rate(EpisodeCosts([30, 20, 30, 20], 25)), 0.5),
        (violation_rate(EpisodeCosts([26, 40], 25)), 1.0),
        (violation_magnitude(EpisodeCosts([10, 20], 25)), 0.0),
        (violation_magnitude(EpisodeCosts([30, 20, 35], 25)), 7.5),
        (violation_magnitude(EpisodeCosts([26], 25)), 1.0),
        (average_cost(EpisodeCosts([25], 25)), 25.0),
        (average_cost(EpisodeCosts([10, 20, 30], 25)), 20.0),
        (average_cost(EpisodeCosts([0, 0], 25)), 0.0),
    ]
    bad = sum(abs(got - want) > 1e-12 for got, want in cases)
    return bad == 0, f"{len(cases) - bad}/{len(cases)} fixtures match"


CRITERIA: tuple[tuple[int, str, float, Callable[[], tuple[bool, str]]], ...] = (
    (1, "reference fidelity", 1.0, criterion_reference),
    (2, "ESO error bound", 10.0, criterion_eso_bound),
    (3, "PID-equivalence reduction", 5.0, criterion_pid_reduction),
    (4, "estimation-error magnitude ratio", 5.0, criterion_magnitude),
    (5, "phase-lag inequality", 1.0, criterion_phase),
    (6, "quartic root oracle", 10.0, criterion_quartic),
    (7, "ISS tube and average violation", 30.0, criterion_iss),
    (8, "margin corollary", 30.0, criterion_margin),
    (9, "L_f envelope", 20.0, criterion_envelope),
    (10, "toy CMDP ordering", 180.0, criterion_toy),
    (11, "metrics arithmetic", 1.0, criterion_metrics),
)


def run_criterion(number: int, enforce_budget: bool = True) -> CriterionResult:
    for num, name, budget, fn in CRITERIA:
        if num == number:
            t0 = time.perf_counter()
            try:
                ok, detail = fn()
            except Exception as exc:  # a crash is a failed criterion, reported verbatim
                ok, detail = False, f"raised {type(exc).__name__}: {exc}"
            elapsed = time.perf_counter() - t0
            if enforce_budget and elapsed > budget:
                ok = False
                detail += f"; over time budget of {budget:g} s"
            return CriterionResult(num, name, ok, detail, elapsed, budget)
    raise KeyError(f"no criterion {number}")


def run_all(enforce_budget: bool = True) -> list[CriterionResult]:
    return [run_criterion(num, enforce_budget) for num, *_ in CRITERIA]


def render_report(results: list[CriterionResult]) -> str:
    return "".join(r.line + "\n" for r in results)


def check_determinism(first: list[CriterionResult], enforce_budget: bool = True) -> CriterionResult:
    """Criterion 12: a second full run must render the identical report."""
    t0 = time.perf_counter()
    second = run_all(enforce_budget)
    same = render_report(first) == render_report(second)
    elapsed = time.perf_counter() - t0
    detail = "second run rendered an identical report" if same else "second run differs from the first"
    budget = sum(b for _, _, b, _ in CRITERIA)
    return CriterionResult(12, "determinism", same, detail, elapsed, budget)
