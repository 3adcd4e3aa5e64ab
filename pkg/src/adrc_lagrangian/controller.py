"""Dual-variable update laws behind one interface.

Four modes share :func:`update_lambda`:

``CLASSICAL_LAG``
    Gradient ascent on the multiplier, ``lam <- (lam + K_i (J_C - r) dt)_+``.
``PID_LAG``
    ``lam = (K_p D + K_i I + K_d dJ - r'')_+`` with clamped integral and
    derivative channels.
``ADRC_ALGORITHM1``
    The same clamped structure with gains derived from
    ``(k_ap, k_ad, omega_o)``: ``K_P = k_ap + w k_ad``, ``K_I = w k_ap``,
    ``K_D = k_ad + w``.
``ADRC_CONTINUOUS``
    The integrated ADRC law with raw (unclamped) integral and derivative
    channels; only the output is projected.

With ``dt = 1`` the discrete channels are per-iteration differences and sums.
States are immutable; every update returns a new state.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import NumericError, ParameterError

__all__ = [
    "ControllerMode",
    "GainSet",
    "PidGains",
    "ControllerConfig",
    "ControllerState",
    "initial_state",
    "update_lambda",
    "project",
    "rescaled_penalty",
    "adrc_observer_law",
    "replay_lambda",
    "replay_lambda_batch",
    "MultiplierController",
]


class ControllerMode(str, enum.Enum):
    CLASSICAL_LAG = "classical_lag"
    PID_LAG = "pid_lag"
    ADRC_CONTINUOUS = "adrc_continuous"
    ADRC_ALGORITHM1 = "adrc_algorithm1"

    @property
    def is_adrc(self) -> bool:
        return self in (ControllerMode.ADRC_CONTINUOUS, ControllerMode.ADRC_ALGORITHM1)


def _check_nonneg(name: str, value: float) -> None:
    if not (math.isfinite(value) and value >= 0.0):
        raise ParameterError(f"{name} must be finite and >= 0, got {value!r}")


@dataclass(frozen=True)
class GainSet:
    """ADRC gains: tracking ``k_ap``, ``k_ad`` and observer bandwidth ``omega_o``."""

    k_ap: float
    k_ad: float
    omega_o: float

    def __post_init__(self) -> None:
        _check_nonneg("k_ap", self.k_ap)
        _check_nonneg("k_ad", self.k_ad)
        if not (math.isfinite(self.omega_o) and self.omega_o > 0.0):
            raise ParameterError(f"omega_o must be positive, got {self.omega_o!r}")

    def pid_equivalent(self, strict_algorithm1_kd: bool = False) -> "PidGains":
        w = self.omega_o
        k_d = (w + self.k_ap) if strict_algorithm1_kd else (self.k_ad + w)
        return PidGains(K_p=self.k_ap + w * self.k_ad, K_i=w * self.k_ap, K_d=k_d)


@dataclass(frozen=True)
class PidGains:
    """PID multiplier gains.

    The continuous-time coefficients of the integrated PID dual dynamics map
    as ``alpha -> K_i`` (integral), ``beta -> K_p``, ``gamma -> K_d``.
    """

    K_p: float
    K_i: float
    K_d: float

    def __post_init__(self) -> None:
        _check_nonneg("K_p", self.K_p)
        _check_nonneg("K_i", self.K_i)
        _check_nonneg("K_d", self.K_d)

    @property
    def alpha(self) -> float:
        return self.K_i

    @property
    def beta(self) -> float:
        return self.K_p

    @property
    def gamma(self) -> float:
        return self.K_d

    @classmethod
    def classical(cls, alpha: float = 0.035) -> "PidGains":
        return cls(K_p=0.0, K_i=alpha, K_d=0.0)


_DEFAULT_GAINS = {
    ControllerMode.CLASSICAL_LAG: PidGains.classical(0.035),
    ControllerMode.PID_LAG: PidGains(K_p=0.1, K_i=0.01, K_d=0.01),
    ControllerMode.ADRC_CONTINUOUS: GainSet(k_ap=0.1, k_ad=0.01, omega_o=10.0),
    ControllerMode.ADRC_ALGORITHM1: GainSet(k_ap=0.1, k_ad=0.01, omega_o=10.0),
}


@dataclass(frozen=True)
class ControllerConfig:
    """Mode, gains and the implementation knobs of the multiplier update.

    Defaults follow the published hyperparameter table. ``delay`` holds the
    multiplier at ``lambda_init`` for the first ``delay`` observations.
    ``sum_normalization`` divides the integral channel by
    ``1 + sum |J_C - r| dt`` before it enters the output.
    ``derivative_normalization`` divides the derivative channel by
    ``1 + |J_C,prev|``. ``channels`` masks the (P, I, D) terms for ablations.
    The classical mode ignores ``delay`` and the EMA/normalization knobs.
    """

    mode: ControllerMode = ControllerMode.ADRC_ALGORITHM1
    gains: GainSet | PidGains | None = None
    lambda_max: float | None = 100.0
    lambda_init: float = 0.001
    cost_limit: float = 25.0
    delay: int = 10
    ema_alpha_p: float = 0.95
    ema_alpha_d: float = 0.95
    sum_normalization: bool = True
    derivative_normalization: bool = False
    dt: float = 1.0
    strict_algorithm1_kd: bool = False
    channels: tuple[bool, bool, bool] = (True, True, True)

    def __post_init__(self) -> None:
        mode = ControllerMode(self.mode)
        object.__setattr__(self, "mode", mode)
        gains = self.gains if self.gains is not None else _DEFAULT_GAINS[mode]
        if mode.is_adrc and not isinstance(gains, GainSet):
            raise ParameterError(f"{mode.value} needs a GainSet, got {type(gains).__name__}")
        if not mode.is_adrc and not isinstance(gains, PidGains):
            raise ParameterError(f"{mode.value} needs PidGains, got {type(gains).__name__}")
        object.__setattr__(self, "gains", gains)
        if self.lambda_max is not None:
            _check_nonneg("lambda_max", self.lambda_max)
        _check_nonneg("lambda_init", self.lambda_init)
        if self.lambda_max is not None and self.lambda_init > self.lambda_max:
            raise ParameterError(f"lambda_init={self.lambda_init} exceeds lambda_max={self.lambda_max}")
        if not math.isfinite(self.cost_limit):
            raise ParameterError("cost_limit must be finite")
        if int(self.delay) != self.delay or self.delay < 0:
            raise ParameterError(f"delay must be a non-negative integer, got {self.delay!r}")
        object.__setattr__(self, "delay", int(self.delay))
        for name in ("ema_alpha_p", "ema_alpha_d"):
            a = getattr(self, name)
            if not (0.0 <= a < 1.0):
                raise ParameterError(f"{name} must lie in [0, 1), got {a!r}")
        if not (self.dt > 0.0 and math.isfinite(self.dt)):
            raise ParameterError(f"dt must be positive, got {self.dt!r}")
        object.__setattr__(self, "channels", tuple(bool(c) for c in self.channels))
        if len(self.channels) != 3:
            raise ParameterError("channels must have three entries (P, I, D)")

    @classmethod
    def raw(cls, mode: ControllerMode | str, gains: GainSet | PidGains | None = None, **kw) -> "ControllerConfig":
        """Configuration without warmup, smoothing, normalization or cap."""
        base = dict(lambda_max=None, delay=0, ema_alpha_p=0.0, ema_alpha_d=0.0, sum_normalization=False)
        base.update(kw)
        return cls(mode=mode, gains=gains, **base)

    def effective_pid(self) -> PidGains:
        if isinstance(self.gains, GainSet):
            return self.gains.pid_equivalent(self.strict_algorithm1_kd)
        return self.gains


@dataclass(frozen=True)
class ControllerState:
    lam: float
    integral_acc: float = 0.0
    prev_cost: float = 0.0
    ema_p: float = 0.0
    ema_d: float = 0.0
    step_count: int = 0
    delay_buffer: tuple[float, ...] = field(default_factory=tuple)
    abs_sum: float = 0.0


def initial_state(cfg: ControllerConfig, prev_cost: float = 0.0) -> ControllerState:
    """Fresh state; ``prev_cost`` defaults to zero as in the reference pseudo-code."""
    return ControllerState(lam=cfg.lambda_init, prev_cost=float(prev_cost))


def project(value: float, lambda_max: float | None = None) -> float:
    """Projection onto ``[0, lambda_max]`` (or ``[0, inf)`` without a cap)."""
    out = value if value > 0.0 else 0.0
    if lambda_max is not None and out > lambda_max:
        out = lambda_max
    return out


def _ema(prev: float, x: float, alpha: float) -> float:
    return alpha * prev + (1.0 - alpha) * x


def update_lambda(
    state: ControllerState,
    cfg: ControllerConfig,
    cost: float,
    reference: Sequence[float] | None = None,
    cost_rate: float | None = None,
) -> tuple[ControllerState, float]:
    """Consume one observed cost and return ``(new_state, lam)``.

    ``reference`` is ``(r, r_dot, r_ddot)``; when omitted the constant
    set-point ``(cost_limit, 0, 0)`` is used, except in ``ADRC_CONTINUOUS``
    which requires it. ``cost_rate`` replaces the finite difference
    ``(cost - prev_cost) / dt`` when the rate is measured directly.
    """
    cost = float(cost)
    if not math.isfinite(cost):
        raise NumericError(f"observed cost is not finite: {cost!r}")
    mode = cfg.mode
    if reference is None:
        if mode is ControllerMode.ADRC_CONTINUOUS:
            raise ParameterError("adrc_continuous requires a reference (r, r_dot, r_ddot)")
        reference = (cfg.cost_limit, 0.0, 0.0)
    r, r_dot, r_ddot = (float(v) for v in reference)
    dt = cfg.dt
    step = state.step_count + 1

    if mode is ControllerMode.CLASSICAL_LAG:
        lam = project(state.lam + cfg.gains.K_i * (cost - r) * dt, cfg.lambda_max)
        new = replace(state, lam=lam, prev_cost=cost, step_count=step)
        return new, lam

    buffer = (state.delay_buffer + (cost,))[-cfg.delay:] if cfg.delay else ()
    if step <= cfg.delay:
        new = replace(state, prev_cost=cost, step_count=step, delay_buffer=buffer)
        return new, state.lam

    delta = cost - r
    rate = (cost - state.prev_cost) / dt if cost_rate is None else float(cost_rate)
    deriv = rate - r_dot
    integral = state.integral_acc + delta * dt
    if mode is not ControllerMode.ADRC_CONTINUOUS:
        integral = integral if integral > 0.0 else 0.0
        deriv = deriv if deriv > 0.0 else 0.0
    if cfg.derivative_normalization:
        deriv = deriv / (1.0 + abs(state.prev_cost))
    ema_p = _ema(state.ema_p, delta, cfg.ema_alpha_p)
    ema_d = _ema(state.ema_d, deriv, cfg.ema_alpha_d)
    abs_sum = state.abs_sum + abs(delta) * dt
    i_term = integral / (1.0 + abs_sum) if cfg.sum_normalization else integral

    pid = cfg.effective_pid()
    use_p, use_i, use_d = cfg.channels
    u = 0.0
    if use_p:
        u += pid.K_p * ema_p
    if use_i:
        u += pid.K_i * i_term
    if use_d:
        u += pid.K_d * ema_d
    u = u - r_ddot
    if not math.isfinite(u):
        raise NumericError("multiplier update produced a non-finite value")
    lam = project(u, cfg.lambda_max)
    new = ControllerState(
        lam=lam,
        integral_acc=integral,
        prev_cost=cost,
        ema_p=ema_p,
        ema_d=ema_d,
        step_count=step,
        delay_buffer=buffer,
        abs_sum=abs_sum,
    )
    return new, lam


def adrc_observer_law(gains: GainSet, x1: float, x2: float, f_hat: float, reference: Sequence[float]) -> float:
    """Unprojected ``k_ap (x1 - r) + k_ad (x2 - r') + f_hat - r''``."""
    r, r_dot, r_ddot = reference
    return gains.k_ap * (x1 - r) + gains.k_ad * (x2 - r_dot) + f_hat - r_ddot


def rescaled_penalty(lam: float, J: float, J_c: float) -> float:
    """``(J - lam J_c) / (1 + lam)``, the objective maximized by the policy."""
    if lam < 0.0:
        raise ParameterError(f"lambda must be >= 0, got {lam!r}")
    return (J - lam * J_c) / (1.0 + lam)


def replay_lambda(
    cfg: ControllerConfig,
    costs: Iterable[float],
    references: Iterable[Sequence[float]] | None = None,
    state: ControllerState | None = None,
) -> list[float]:
    """Run a recorded cost stream through :func:`update_lambda`."""
    state = initial_state(cfg) if state is None else state
    refs = iter(references) if references is not None else None
    out = []
    for c in costs:
        ref = next(refs) if refs is not None else None
        state, lam = update_lambda(state, cfg, c, ref)
        out.append(lam)
    return out


def replay_lambda_batch(
    cfg: ControllerConfig,
    costs,
    reference: Sequence[float] | None = None,
    prev_cost: float = 0.0,
) -> np.ndarray:
    """Vectorized :func:`replay_lambda` over many cost streams.

    ``costs`` has shape ``(streams, steps)``; ``reference`` is a constant
    ``(r, r_dot, r_ddot)`` shared by every step. Returns the ``lam`` array
    of the same shape, equal elementwise to the scalar path.
    """
    J = np.asarray(costs, dtype=float)
    if J.ndim != 2:
        raise ParameterError("costs must be a 2-D array (streams, steps)")
    if not np.all(np.isfinite(J)):
        raise NumericError("observed costs must be finite")
    mode = cfg.mode
    if reference is None:
        if mode is ControllerMode.ADRC_CONTINUOUS:
            raise ParameterError("adrc_continuous requires a reference (r, r_dot, r_ddot)")
        reference = (cfg.cost_limit, 0.0, 0.0)
    r, r_dot, r_ddot = (float(v) for v in reference)
    dt = cfg.dt
    M, n = J.shape
    out = np.empty_like(J)
    lam = np.full(M, cfg.lambda_init)
    hi = np.inf if cfg.lambda_max is None else cfg.lambda_max
    if mode is ControllerMode.CLASSICAL_LAG:
        k_i = cfg.gains.K_i
        for k in range(n):
            lam = np.minimum(np.maximum(lam + k_i * (J[:, k] - r) * dt, 0.0), hi)
            out[:, k] = lam
        return out
    pid = cfg.effective_pid()
    use_p, use_i, use_d = cfg.channels
    clamp = mode is not ControllerMode.ADRC_CONTINUOUS
    prev = np.full(M, float(prev_cost))
    integral = np.zeros(M)
    ema_p = np.zeros(M)
    ema_d = np.zeros(M)
    abs_sum = np.zeros(M)
    ap, ad = cfg.ema_alpha_p, cfg.ema_alpha_d
    for k in range(n):
        cost = J[:, k]
        if k < cfg.delay:
            out[:, k] = lam
            prev = cost
            continue
        delta = cost - r
        deriv = (cost - prev) / dt - r_dot
        integral = integral + delta * dt
        if clamp:
            integral = np.maximum(integral, 0.0)
            deriv = np.maximum(deriv, 0.0)
        if cfg.derivative_normalization:
            deriv = deriv / (1.0 + np.abs(prev))
        ema_p = ap * ema_p + (1.0 - ap) * delta
        ema_d = ad * ema_d + (1.0 - ad) * deriv
        abs_sum = abs_sum + np.abs(delta) * dt
        i_term = integral / (1.0 + abs_sum) if cfg.sum_normalization else integral
        u = np.zeros(M)
        if use_p:
            u = u + pid.K_p * ema_p
        if use_i:
            u = u + pid.K_i * i_term
        if use_d:
            u = u + pid.K_d * ema_d
        u = u - r_ddot
        if not np.all(np.isfinite(u)):
            raise NumericError("multiplier update produced a non-finite value")
        lam = np.minimum(np.maximum(u, 0.0), hi)
        out[:, k] = lam
        prev = cost
    return out


class MultiplierController:
    """Stateful wrapper around :func:`update_lambda` for training loops."""

    def __init__(self, cfg: ControllerConfig, prev_cost: float = 0.0) -> None:
        self.cfg = cfg
        self.state = initial_state(cfg, prev_cost)

    @property
    def lam(self) -> float:
        return self.state.lam

    def update(self, cost: float, reference: Sequence[float] | None = None, cost_rate: float | None = None) -> float:
        self.state, lam = update_lambda(self.state, self.cfg, cost, reference, cost_rate)
        return lam
