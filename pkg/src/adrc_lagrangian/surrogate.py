"""Surrogate closed-loop cost channel and checkers for its robustness bounds.

The channel is the relative-degree-two abstraction

    x1' = x2,    x2' = f(t, x1, x2) - lam(t)

(or ``+ lam`` under the positive-input convention), with the multiplier held
constant between controller updates. The plant and the observer state are
integrated jointly by RK4; the controller runs every ``ctrl.dt`` time units.

Checkers compare traces with the ISS tube radius ``||h||_1 L_f / w_o``, the
time-average violation bound and the margin corollary, and
:func:`lf_envelope` evaluates the disturbance-rate envelope implied by
trust-region step size, batch size and update interval.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence, TextIO

import numpy as np
from scipy import integrate

from .controller import (
    ControllerConfig,
    ControllerMode,
    GainSet,
    adrc_observer_law,
    initial_state,
    project,
    update_lambda,
)
from .errors import DisturbanceBoundError, DivergenceError, ParameterError
from .observer import ObserverConfig
from .reference import ReferenceParams, make_reference

__all__ = [
    "PlantState",
    "DisturbanceKind",
    "DisturbanceSpec",
    "TheoryInputs",
    "SimTrace",
    "simulate",
    "impulse_l1_norm",
    "tube_radius",
    "TubeReport",
    "iss_tube_check",
    "ViolationReport",
    "avg_violation_check",
    "first_violation_free_time",
    "EnvelopeBounds",
    "lf_envelope",
    "finite_difference_proxy",
    "CoverageReport",
    "envelope_coverage",
]

_AUDIT_RTOL = 1e-9
_AUDIT_ATOL = 1e-12


@dataclass(frozen=True)
class PlantState:
    x1: float
    x2: float = 0.0
    t: float = 0.0

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.x1, self.x2, self.t)):
            raise ParameterError("plant state must be finite")


class DisturbanceKind(str, enum.Enum):
    CONSTANT = "constant"
    SINUSOID = "sinusoid"
    SMOOTH_STEP = "smooth_step"
    LINEAR_STATE = "linear_state"
    COMPOSITE = "composite"


@dataclass(frozen=True)
class DisturbanceSpec:
    """Lumped disturbance ``f = h(x1, x2) + w(t)``.

    ``h = a1 x1 + a2 x2`` and
    ``w = offset + step_height (1 - exp(-step_rate t))
    + amplitude exp(-decay t) sin(frequency t + phase)``.
    Declared bounds ``L1, L2, L3, L_f`` are audited against every simulated
    step. Use the classmethod constructors; they derive the bounds that are
    known in closed form. ``asymptote`` records ``lim w(t)``.
    """

    kind: DisturbanceKind
    offset: float = 0.0
    amplitude: float = 0.0
    frequency: float = 0.0
    phase: float = 0.0
    decay: float = 0.0
    step_height: float = 0.0
    step_rate: float = 0.0
    a1: float = 0.0
    a2: float = 0.0
    L1: float = 0.0
    L2: float = 0.0
    L3: float = 0.0
    L_f: float = 0.0
    asymptote: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", DisturbanceKind(self.kind))
        names = ("offset", "amplitude", "frequency", "phase", "decay", "step_height",
                 "step_rate", "a1", "a2", "L1", "L2", "L3", "L_f")
        for name in names:
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"disturbance field {name} must be finite")
        for name in ("decay", "step_rate", "L1", "L2", "L3", "L_f"):
            if getattr(self, name) < 0.0:
                raise ParameterError(f"disturbance field {name} must be >= 0")
        kind = self.kind
        has_state = self.a1 != 0.0 or self.a2 != 0.0
        has_wave = self.amplitude != 0.0
        has_step = self.step_height != 0.0
        allowed = {
            DisturbanceKind.CONSTANT: (False, False, False),
            DisturbanceKind.SINUSOID: (False, True, False),
            DisturbanceKind.SMOOTH_STEP: (False, False, True),
            DisturbanceKind.LINEAR_STATE: (True, False, False),
            DisturbanceKind.COMPOSITE: (True, True, True),
        }[kind]
        for present, ok, what in zip((has_state, has_wave, has_step), allowed, ("state", "sinusoid", "step")):
            if present and not ok:
                raise ParameterError(f"{kind.value} disturbance cannot carry a {what} term")
        if abs(self.a1) > self.L1 * (1 + _AUDIT_RTOL) or abs(self.a2) > self.L2 * (1 + _AUDIT_RTOL):
            raise ParameterError("declared L1/L2 below the state sensitivities |a1|/|a2|")
        if self.asymptote is None:
            object.__setattr__(self, "asymptote", self._w_limit())

    # -- constructors -------------------------------------------------------

    @classmethod
    def constant(cls, value: float) -> "DisturbanceSpec":
        return cls(DisturbanceKind.CONSTANT, offset=value, L3=abs(value), L_f=0.0)

    @classmethod
    def sinusoid(
        cls,
        amplitude: float,
        frequency: float,
        offset: float = 0.0,
        phase: float = 0.0,
        decay: float = 0.0,
    ) -> "DisturbanceSpec":
        rate = abs(amplitude) * math.hypot(frequency, decay)
        return cls(
            DisturbanceKind.SINUSOID,
            offset=offset,
            amplitude=amplitude,
            frequency=frequency,
            phase=phase,
            decay=decay,
            L3=max(abs(offset) + abs(amplitude), rate),
            L_f=rate,
        )

    @classmethod
    def smooth_step(cls, height: float, rate: float, offset: float = 0.0) -> "DisturbanceSpec":
        """``offset + height (1 - exp(-rate t))``; ``|w'| <= |height| rate``."""
        slope = abs(height) * rate
        bound = max(abs(offset), abs(offset + height), abs(offset) + abs(height))
        return cls(
            DisturbanceKind.SMOOTH_STEP,
            offset=offset,
            step_height=height,
            step_rate=rate,
            L3=max(bound, slope),
            L_f=slope,
        )

    @classmethod
    def linear_state(cls, a1: float, a2: float, L_f: float, offset: float = 0.0) -> "DisturbanceSpec":
        """State-dependent ``a1 x1 + a2 x2 + offset``; ``L_f`` must be declared."""
        return cls(
            DisturbanceKind.LINEAR_STATE,
            offset=offset,
            a1=a1,
            a2=a2,
            L1=abs(a1),
            L2=abs(a2),
            L3=abs(offset),
            L_f=L_f,
        )

    # -- evaluation ---------------------------------------------------------

    def _w_limit(self) -> float | None:
        if self.amplitude != 0.0 and self.decay == 0.0:
            return None
        return self.offset + (self.step_height if self.step_rate > 0.0 else 0.0)

    def w(self, t):
        t = np.asarray(t, dtype=float)
        out = self.offset + self.step_height * (1.0 - np.exp(-self.step_rate * t))
        if self.amplitude:
            out = out + self.amplitude * np.exp(-self.decay * t) * np.sin(self.frequency * t + self.phase)
        return out

    def w_dot(self, t):
        t = np.asarray(t, dtype=float)
        out = self.step_height * self.step_rate * np.exp(-self.step_rate * t)
        if self.amplitude:
            arg = self.frequency * t + self.phase
            out = out + self.amplitude * np.exp(-self.decay * t) * (
                self.frequency * np.cos(arg) - self.decay * np.sin(arg)
            )
        return out

    def value(self, t, x1, x2):
        return self.a1 * np.asarray(x1) + self.a2 * np.asarray(x2) + self.w(t)

    def rate(self, t, x2, x2_dot):
        """Total derivative ``f' = a1 x2 + a2 x2' + w'`` along a trajectory."""
        return self.a1 * np.asarray(x2) + self.a2 * np.asarray(x2_dot) + self.w_dot(t)

    def scalar_fn(self):
        """Fast float-only ``f(t, x1, x2)`` for the integration loop."""
        a1, a2, off = self.a1, self.a2, self.offset
        sh, sr = self.step_height, self.step_rate
        amp, nu, ph, dec = self.amplitude, self.frequency, self.phase, self.decay
        exp, sin = math.exp, math.sin

        def f(t: float, x1: float, x2: float) -> float:
            v = a1 * x1 + a2 * x2 + off
            if sh:
                v += sh * (1.0 - exp(-sr * t))
            if amp:
                v += amp * exp(-dec * t) * sin(nu * t + ph)
            return v

        return f


@dataclass(frozen=True)
class TheoryInputs:
    """Hyperparameters of the disturbance-rate envelope."""

    delta: float
    N: int
    dt_update: float
    B_c: float
    gamma: float
    lambda_max: float
    K: int
    eta: float

    def __post_init__(self) -> None:
        if not self.delta >= 0.0:
            raise ParameterError("delta must be >= 0")
        if int(self.N) != self.N or self.N < 1:
            raise ParameterError("N must be a positive integer")
        if int(self.K) != self.K or self.K < 1:
            raise ParameterError("K must be a positive integer")
        if not self.dt_update > 0.0:
            raise ParameterError("dt_update must be positive")
        if not self.B_c > 0.0:
            raise ParameterError("B_c must be positive")
        if not 0.0 < self.gamma < 1.0:
            raise ParameterError("gamma must lie in (0, 1)")
        if not 0.0 < self.eta < 1.0:
            raise ParameterError("eta must lie in (0, 1)")
        if not self.lambda_max >= 0.0:
            raise ParameterError("lambda_max must be >= 0")


# --------------------------------------------------------------------------
# simulation


@dataclass
class SimTrace:
    """One row per integration step; ``lam`` is the value held over ``[t, t + dt)``."""

    t: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    lam: np.ndarray
    f: np.ndarray
    f_hat: np.ndarray
    e: np.ndarray
    e_d: np.ndarray
    e_f: np.ndarray
    r: np.ndarray
    r_dot: np.ndarray
    r_ddot: np.ndarray
    saturated: np.ndarray
    d: float
    dt: float
    dt_update: float
    omega_o: float
    meta: dict = field(default_factory=dict)

    columns = ("t", "x1", "x2", "lam", "f", "f_hat", "e", "e_f", "r", "r_dot", "r_ddot")

    @property
    def horizon(self) -> float:
        return float(self.t[-1] - self.t[0])

    def peak_overshoot(self, d: float | None = None) -> float:
        d = self.d if d is None else d
        return float(max(0.0, np.max(self.x1 - d)))

    def to_csv(self, out: TextIO | None = None, precision: int = 17) -> str | None:
        buf = io.StringIO() if out is None else out
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        cols = [getattr(self, c) for c in self.columns]
        fmt = f"%.{precision}g"
        for row in zip(*cols):
            w.writerow([fmt % v for v in row])
        return buf.getvalue() if out is None else None


def simulate(
    plant0: PlantState,
    dist: DisturbanceSpec,
    ctrl: ControllerConfig,
    ref: ReferenceParams,
    obs: ObserverConfig,
    horizon: float,
    dt: float,
    f_hat0: float = 0.0,
    audit: bool = True,
) -> SimTrace:
    """Integrate the surrogate channel under a multiplier controller.

    ``ctrl.dt`` is the controller update interval (zero-order hold);
    ``dt`` must satisfy ``dt <= min(0.01 / omega_o, 0.1 * ctrl.dt)`` and
    divide ``ctrl.dt``. ``ADRC_CONTINUOUS`` applies the observer-based law
    ``k_ap e + k_ad e_d + f_hat - r''``; the other modes feed ``x1`` samples
    through :func:`update_lambda` (ADRC modes track ``r(t)``, Lagrangian and
    PID modes the constant ``ref.d``). The observer starts at
    ``f_hat = f_hat0``.
    """
    if not (horizon > 0.0 and math.isfinite(horizon)):
        raise ParameterError("horizon must be positive")
    dt_update = ctrl.dt
    w = obs.omega_o
    limit = min(0.01 / w, 0.1 * dt_update)
    if not (dt > 0.0) or dt > limit * (1.0 + 1e-12):
        raise ParameterError(f"dt={dt} violates dt <= min(0.01/omega_o, 0.1*dt_update) = {limit}")
    n_sub = int(round(dt_update / dt))
    if abs(n_sub * dt - dt_update) > 1e-9 * dt_update:
        raise ParameterError(f"dt={dt} does not divide the update interval {dt_update}")
    n_steps = int(round(horizon / dt))

    traj = make_reference(ref)
    sign = obs.feedback_sign.channel_sign
    f = dist.scalar_fn()
    mode = ctrl.mode
    lam_max = ctrl.lambda_max
    x1, x2 = plant0.x1, plant0.x2
    xi = f_hat0 - w * x2
    t0 = plant0.t
    state = initial_state(ctrl, prev_cost=x1)
    lam = ctrl.lambda_init
    sat = False
    const_ref = (ref.d, 0.0, 0.0)

    T, X1, X2, XI, LAM, SAT = [], [], [], [], [], []
    h, h2, h6 = dt, 0.5 * dt, dt / 6.0
    ww = w * w
    for k in range(n_steps + 1):
        t = t0 + k * dt
        if k % n_sub == 0 and k < n_steps:
            if not (math.isfinite(x1) and math.isfinite(x2) and math.isfinite(xi)):
                raise DivergenceError("surrogate state became non-finite", step=k)
            rr = traj.eval(t - t0)
            if mode is ControllerMode.ADRC_CONTINUOUS:
                raw = adrc_observer_law(ctrl.gains, x1, x2, xi + w * x2, rr)
                lam = project(raw, lam_max)
                sat = lam != raw
            else:
                state, lam = update_lambda(state, ctrl, x1, rr if mode.is_adrc else const_ref)
                sat = False
        T.append(t)
        X1.append(x1)
        X2.append(x2)
        XI.append(xi)
        LAM.append(lam)
        SAT.append(sat)
        if k == n_steps:
            break
        u = sign * lam
        wl = sign * w * lam
        # RK4 on (x1, x2, xi) with lam held
        a2 = f(t, x1, x2) + u
        a3 = -w * xi - ww * x2 - wl
        p1, p2, p3 = x1 + h2 * x2, x2 + h2 * a2, xi + h2 * a3
        b2 = f(t + h2, p1, p2) + u
        b3 = -w * p3 - ww * p2 - wl
        q1, q2, q3 = x1 + h2 * p2, x2 + h2 * b2, xi + h2 * b3
        c2 = f(t + h2, q1, q2) + u
        c3 = -w * q3 - ww * q2 - wl
        s1, s2, s3 = x1 + h * q2, x2 + h * c2, xi + h * c3
        d2 = f(t + h, s1, s2) + u
        d3 = -w * s3 - ww * s2 - wl
        x1 = x1 + h6 * (x2 + 2.0 * p2 + 2.0 * q2 + s2)
        x2 = x2 + h6 * (a2 + 2.0 * b2 + 2.0 * c2 + d2)
        xi = xi + h6 * (a3 + 2.0 * b3 + 2.0 * c3 + d3)

    t_arr = np.asarray(T)
    x1_arr, x2_arr, xi_arr = np.asarray(X1), np.asarray(X2), np.asarray(XI)
    lam_arr = np.asarray(LAM)
    if not (np.all(np.isfinite(x1_arr)) and np.all(np.isfinite(x2_arr)) and np.all(np.isfinite(xi_arr))):
        bad = int(np.argmax(~(np.isfinite(x1_arr) & np.isfinite(x2_arr) & np.isfinite(xi_arr))))
        raise DivergenceError("surrogate state became non-finite", step=bad)
    r, r_dot, r_ddot = traj.eval(t_arr - t0)
    f_arr = dist.value(t_arr, x1_arr, x2_arr)
    f_hat = xi_arr + w * x2_arr
    if audit:
        _audit(dist, t_arr, x2_arr, f_arr + sign * lam_arr)
    return SimTrace(
        t=t_arr,
        x1=x1_arr,
        x2=x2_arr,
        lam=lam_arr,
        f=f_arr,
        f_hat=f_hat,
        e=x1_arr - r,
        e_d=x2_arr - r_dot,
        e_f=f_hat - f_arr,
        r=r,
        r_dot=r_dot,
        r_ddot=r_ddot,
        saturated=np.asarray(SAT, dtype=bool),
        d=ref.d,
        dt=dt,
        dt_update=dt_update,
        omega_o=w,
        meta={"mode": mode.value, "feedback_sign": obs.feedback_sign.value},
    )


def _audit(dist: DisturbanceSpec, t: np.ndarray, x2: np.ndarray, x2_dot: np.ndarray) -> None:
    """Abort when the realized disturbance leaves its declared class."""

    def check(name: str, values: np.ndarray, bound: float) -> None:
        over = np.abs(values) > bound * (1.0 + _AUDIT_RTOL) + _AUDIT_ATOL
        if over.any():
            i = int(np.argmax(over))
            raise DisturbanceBoundError(
                f"|{name}| = {abs(values[i]):.6g} exceeds declared bound {bound:.6g} at t={t[i]:.6g}",
                step=i,
            )

    check("w", dist.w(t), dist.L3)
    check("w_dot", dist.w_dot(t), dist.L3)
    check("f_dot", dist.rate(t, x2, x2_dot), dist.L_f)


# --------------------------------------------------------------------------
# ISS tube and violation checks


def impulse_l1_norm(k_ap: float, k_ad: float) -> float:
    """``int_0^inf |h|`` for ``H(s) = 1 / (s^2 + k_ad s + k_ap)``.

    Non-oscillatory case: ``1 / k_ap``. Otherwise the first half period of
    the damped sinusoid is integrated by quadrature and the rest summed as
    a geometric series (each half period scales by ``exp(-sigma pi / w_d)``).
    """
    if not (k_ap > 0.0 and k_ad > 0.0):
        raise ParameterError("need k_ap > 0 and k_ad > 0 for a Hurwitz tracking polynomial")
    if k_ad * k_ad >= 4.0 * k_ap:
        return 1.0 / k_ap
    sigma = 0.5 * k_ad
    wd = math.sqrt(k_ap - sigma * sigma)
    half = math.pi / wd
    first, _ = integrate.quad(lambda s: math.exp(-sigma * s) * math.sin(wd * s) / wd, 0.0, half,
                              epsabs=0.0, epsrel=1e-12)
    return first / (1.0 - math.exp(-sigma * half))


def tube_radius(gains: GainSet, L_f: float) -> float:
    if L_f < 0.0:
        raise ParameterError("L_f must be >= 0")
    return impulse_l1_norm(gains.k_ap, gains.k_ad) * L_f / gains.omega_o


def _slowest_pole(gains: GainSet) -> float:
    disc = gains.k_ad ** 2 - 4.0 * gains.k_ap
    if disc < 0.0:
        return 0.5 * gains.k_ad
    return 0.5 * (gains.k_ad - math.sqrt(disc))


@dataclass(frozen=True)
class TubeReport:
    radius: float
    h_l1: float
    tail_start: float
    tail_max: float
    slack: float
    passed: bool


def _tail_mask(trace: SimTrace, tail_start: float | None, min_settle: float) -> tuple[np.ndarray, float]:
    t0 = float(trace.t[0])
    settle = t0 + min_settle
    if trace.t[-1] <= settle:
        raise ParameterError(
            f"trace ends at t={trace.t[-1]:.6g}, before the transient settles (t={settle:.6g})"
        )
    if tail_start is None:
        tail_start = max(settle, t0 + 0.5 * trace.horizon)
    mask = trace.t >= tail_start
    if mask.sum() < 2:
        raise ParameterError("tail window holds fewer than two samples")
    return mask, float(tail_start)


def iss_tube_check(
    trace: SimTrace,
    gains: GainSet,
    L_f: float,
    tail_start: float | None = None,
    slack: float = 1.05,
) -> TubeReport:
    """Tail max of ``|e|`` against ``slack * ||h||_1 L_f / omega_o``.

    The tail starts at ``tail_start`` (default: the later of half the horizon
    and ``10 / min(omega_o, rho)``, ``rho`` the slowest tracking pole).
    """
    h_l1 = impulse_l1_norm(gains.k_ap, gains.k_ad)
    radius = h_l1 * L_f / gains.omega_o
    settle = 10.0 / min(gains.omega_o, _slowest_pole(gains))
    mask, start = _tail_mask(trace, tail_start, settle)
    tail_max = float(np.max(np.abs(trace.e[mask])))
    return TubeReport(radius, h_l1, start, tail_max, slack, tail_max <= slack * radius)


@dataclass(frozen=True)
class ViolationReport:
    tail_average: float
    bound: float
    tail_start: float
    violation_free_from: float | None
    suffix_fraction: float
    passed: bool


def first_violation_free_time(trace: SimTrace, d: float) -> float | None:
    """Earliest time after which ``x1 <= d`` for the rest of the trace.

    ``None`` when the final sample still violates.
    """
    viol = trace.x1 > d
    if not viol.any():
        return float(trace.t[0])
    last = int(np.nonzero(viol)[0][-1])
    if last == trace.t.size - 1:
        return None
    return float(trace.t[last + 1])


def avg_violation_check(
    trace: SimTrace,
    d: float,
    radius: float,
    tail_start: float | None = None,
    slack: float = 1.05,
) -> ViolationReport:
    """Tail time-average of ``(x1 - d)_+`` against ``slack * radius``.

    Also reports the first violation-free suffix (margin variant).
    """
    mask, start = _tail_mask(trace, tail_start, 0.0)
    tt = trace.t[mask]
    excess = np.clip(trace.x1[mask] - d, 0.0, None)
    avg = float(integrate.trapezoid(excess, tt) / (tt[-1] - tt[0]))
    free = first_violation_free_time(trace, d)
    frac = 0.0 if free is None else float((trace.t[-1] - free) / trace.horizon)
    return ViolationReport(avg, slack * radius, start, free, frac, avg <= slack * radius)


# --------------------------------------------------------------------------
# disturbance-rate envelope


class EnvelopeBounds(NamedTuple):
    D_TR: float
    eps_N: float
    L_f_bound: float


def lf_envelope(inputs: TheoryInputs) -> EnvelopeBounds:
    """Population drift, Hoeffding radius and the resulting ``L_f`` envelope.

    ``D_TR = 2 B_c / (1 - gamma) sqrt(2 delta)``,
    ``eps_N = B_c sqrt(log(2K / eta) / (2N))`` and
    ``L_f <= 4 (D_TR + 2 eps_N) / dt^3 + 2 lambda_max / dt``.
    """
    p = inputs
    d_tr = 2.0 * p.B_c / (1.0 - p.gamma) * math.sqrt(2.0 * p.delta)
    eps_n = p.B_c * math.sqrt(math.log(2.0 * p.K / p.eta) / (2.0 * p.N))
    dt = p.dt_update
    bound = 4.0 / dt ** 3 * (d_tr + 2.0 * eps_n) + 2.0 * p.lambda_max / dt
    return EnvelopeBounds(d_tr, eps_n, bound)


def finite_difference_proxy(
    costs: Sequence[float],
    lambdas: Sequence[float],
    dt_update: float,
) -> tuple[np.ndarray, float]:
    """Second-difference disturbance proxy and its largest scaled increment.

    ``f_k = (J_{k+1} - 2 J_k + J_{k-1}) / dt^2 + lam_k`` for interior ``k``;
    the variation is ``max |f_{k+1} - f_k| / dt`` (0 with a single proxy).
    """
    J = np.asarray(costs, dtype=float)
    lam = np.asarray(lambdas, dtype=float)
    if J.ndim != 1 or J.size < 3:
        raise ParameterError("need at least 3 cost estimates")
    if lam.shape != J.shape:
        raise ParameterError("costs and lambdas must have the same length")
    if not dt_update > 0.0:
        raise ParameterError("dt_update must be positive")
    proxy = (J[2:] - 2.0 * J[1:-1] + J[:-2]) / dt_update ** 2 + lam[1:-1]
    variation = float(np.max(np.abs(np.diff(proxy))) / dt_update) if proxy.size > 1 else 0.0
    return proxy, variation


@dataclass(frozen=True)
class CoverageReport:
    envelope: EnvelopeBounds
    trials: int
    coverage: float
    hoeffding_coverage: float
    max_variation: float


def envelope_coverage(inputs: TheoryInputs, trials: int = 100, seed: int = 0) -> CoverageReport:
    """Monte-Carlo coverage of the envelope on series meeting its premises.

    Each trial draws a population cost path with increments bounded by
    ``D_TR`` inside ``[0, B_c]``, estimates each point from ``N`` bounded
    returns (scaled Bernoulli, mean equal to the population value), draws
    multipliers in ``[0, lambda_max]`` and checks the proxy variation.
    """
    env = lf_envelope(inputs)
    rng = np.random.default_rng(seed)
    B, K, N = inputs.B_c, int(inputs.K), int(inputs.N)
    step = min(env.D_TR, B)
    hits = hoeff = 0
    worst = 0.0
    for _ in range(trials):
        J = np.empty(K)
        J[0] = 0.5 * B
        incr = rng.uniform(-step, step, size=K - 1)
        for k in range(1, K):
            v = J[k - 1] + incr[k - 1]
            # reflection keeps the increment bound and the range
            if v < 0.0:
                v = -v
            elif v > B:
                v = 2.0 * B - v
            J[k] = v
        J_hat = rng.binomial(N, J / B) * (B / N)
        lam = rng.uniform(0.0, inputs.lambda_max, size=K)
        _, var = finite_difference_proxy(J_hat, lam, inputs.dt_update)
        worst = max(worst, var)
        hits += var <= env.L_f_bound
        hoeff += float(np.max(np.abs(J_hat - J))) <= env.eps_N
    return CoverageReport(env, trials, hits / trials, hoeff / trials, worst)
