"""Reduced-order extended state observer (ESO) for the lumped disturbance.

The observer keeps an auxiliary state ``xi`` and reports
``f_hat = xi + omega_o * x2``. Its input sign depends on how the multiplier
enters the cost channel:

* ``NEGATIVE_FEEDBACK`` -- channel ``x2' = f - lam``, observer
  ``xi' = -w xi - w**2 x2 + w lam`` (the default).
* ``POSITIVE_INPUT`` -- channel ``x2' = f + u``, observer
  ``xi' = -w xi - w**2 x2 - w u``.

Either way the estimation error obeys ``e_f' = -w e_f - f'``.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ParameterError

__all__ = [
    "FeedbackSign",
    "ObserverConfig",
    "ObserverState",
    "initial_observer_state",
    "xi_derivative",
    "observer_step",
    "error_bound",
]


class FeedbackSign(str, enum.Enum):
    POSITIVE_INPUT = "positive_input"
    NEGATIVE_FEEDBACK = "negative_feedback"

    @property
    def channel_sign(self) -> float:
        """Sign with which the control enters ``x2'``."""
        return 1.0 if self is FeedbackSign.POSITIVE_INPUT else -1.0


@dataclass(frozen=True)
class ObserverConfig:
    omega_o: float
    feedback_sign: FeedbackSign = FeedbackSign.NEGATIVE_FEEDBACK

    def __post_init__(self) -> None:
        if not (math.isfinite(self.omega_o) and self.omega_o > 0.0):
            raise ParameterError(f"omega_o must be positive, got {self.omega_o!r}")
        object.__setattr__(self, "feedback_sign", FeedbackSign(self.feedback_sign))


@dataclass(frozen=True)
class ObserverState:
    xi: float
    f_hat: float


def initial_observer_state(cfg: ObserverConfig, x2: float, f_hat0: float = 0.0) -> ObserverState:
    """State whose estimate equals ``f_hat0`` at cost rate ``x2``."""
    return ObserverState(xi=f_hat0 - cfg.omega_o * x2, f_hat=f_hat0)


def xi_derivative(xi: float, cfg: ObserverConfig, x2: float, u: float) -> float:
    w = cfg.omega_o
    # the observer input carries the opposite sign of the channel input
    return -w * xi - w * w * x2 - cfg.feedback_sign.channel_sign * w * u


def observer_step(
    state: ObserverState,
    cfg: ObserverConfig,
    x2: float,
    u: float,
    dt: float,
    method: str = "euler",
) -> ObserverState:
    """Advance the observer by ``dt`` with ``x2`` and ``u`` held constant.

    ``method="euler"`` rejects ``dt >= 2/omega_o`` and warns for
    ``dt >= 1/omega_o``; ``method="rk4"`` is the classical four-stage rule.
    The returned estimate uses the supplied ``x2``.
    """
    if not (dt > 0.0 and math.isfinite(dt)):
        raise ParameterError(f"dt must be positive, got {dt!r}")
    for name, value in (("xi", state.xi), ("x2", x2), ("u", u)):
        if not math.isfinite(value):
            raise NumericError(f"observer input {name} is not finite: {value!r}")
    w = cfg.omega_o
    if method == "euler":
        if dt >= 2.0 / w:
            raise ParameterError(f"explicit Euler unstable: dt={dt} >= 2/omega_o={2.0 / w}")
        if dt >= 1.0 / w:
            warnings.warn(
                f"dt={dt} >= 1/omega_o; explicit Euler observer will oscillate",
                RuntimeWarning,
                stacklevel=2,
            )
        xi = state.xi + dt * xi_derivative(state.xi, cfg, x2, u)
    elif method == "rk4":
        k1 = xi_derivative(state.xi, cfg, x2, u)
        k2 = xi_derivative(state.xi + 0.5 * dt * k1, cfg, x2, u)
        k3 = xi_derivative(state.xi + 0.5 * dt * k2, cfg, x2, u)
        k4 = xi_derivative(state.xi + dt * k3, cfg, x2, u)
        xi = state.xi + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
    else:
        raise ParameterError(f"unknown integration method {method!r}")
    if not math.isfinite(xi):
        raise NumericError("observer state became non-finite")
    return ObserverState(xi=xi, f_hat=xi + w * x2)


def error_bound(omega_o: float, L_f: float, e_f0: float, t):
    """``exp(-omega_o t) |e_f0| + L_f / omega_o``; ``t`` may be an array."""
    if not (omega_o > 0.0):
        raise ParameterError(f"omega_o must be positive, got {omega_o!r}")
    if L_f < 0.0:
        raise ParameterError(f"L_f must be >= 0, got {L_f!r}")
    tt = np.asarray(t, dtype=float)
    if np.any(tt < 0.0):
        raise ParameterError("t must be >= 0")
    out = np.exp(-omega_o * tt) * abs(e_f0) + L_f / omega_o
    return float(out) if np.ndim(t) == 0 else out
