"""Critically damped reference schedule for the cost budget.

The reference ``r(t)`` starts at the current cost level ``x1_0`` with slope
``x2_0`` and relaxes toward the threshold ``d`` as the solution of

    r'' = -2 c_r r' - c_r**2 (r - d),

whose closed form is ``r(t) = d + (A + B t) exp(-c_r t)`` with
``A = x1_0 - d`` and ``B = x2_0 + c_r A``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError, ParameterError

__all__ = [
    "ReferenceParams",
    "ReferenceTrajectory",
    "make_reference",
    "constant_reference",
]


@dataclass(frozen=True)
class ReferenceParams:
    """Tightening rate, threshold and initial conditions of the schedule."""

    c_r: float
    d: float
    x1_0: float
    x2_0: float = 0.0

    def __post_init__(self) -> None:
        for name in ("c_r", "d", "x1_0", "x2_0"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value!r}")
        if self.c_r <= 0.0:
            raise ParameterError(f"c_r must be positive, got {self.c_r!r}")

    def with_margin(self, eps: float) -> "ReferenceParams":
        """Same schedule converging to ``d - eps`` instead of ``d``."""
        if not math.isfinite(eps) or eps < 0.0:
            raise ParameterError(f"margin must be finite and >= 0, got {eps!r}")
        return replace(self, d=self.d - eps)


@dataclass(frozen=True)
class ReferenceTrajectory:
    params: ReferenceParams
    A: float
    B: float

    def eval(self, t):
        """Return ``(r, r_dot, r_ddot)`` at time(s) ``t``.

        Scalars in give floats out; arrays give arrays. ``t = inf`` maps to
        the equilibrium ``(d, 0, 0)``. At ``t == 0`` the initial conditions
        are returned verbatim so that ``r(0) == x1_0`` holds bit for bit.
        """
        p = self.params
        scalar = np.ndim(t) == 0
        tt = np.asarray(t, dtype=float)
        if np.any(np.isnan(tt)) or np.any(tt < 0.0):
            raise DomainError("reference is only defined for t >= 0")
        c, A, B = p.c_r, self.A, self.B
        finite = np.isfinite(tt)
        ts = np.where(finite, tt, 0.0)
        decay = np.where(finite, np.exp(-c * ts), 0.0)
        poly = A + B * ts
        r = p.d + poly * decay
        r_dot = (B - c * poly) * decay
        r_ddot = (c * c * poly - 2.0 * c * B) * decay
        at_zero = tt == 0.0
        if np.any(at_zero):
            r = np.where(at_zero, p.x1_0, r)
            r_dot = np.where(at_zero, p.x2_0, r_dot)
            r_ddot = np.where(at_zero, -2.0 * c * p.x2_0 - c * c * (p.x1_0 - p.d), r_ddot)
        if scalar:
            return float(r), float(r_dot), float(r_ddot)
        return r, r_dot, r_ddot

    __call__ = eval

    def sample(self, k, dt: float = 1.0):
        """Evaluate at iteration index ``k`` with ``t = k * dt``."""
        if not (dt > 0.0 and math.isfinite(dt)):
            raise ParameterError(f"dt must be positive and finite, got {dt!r}")
        return self.eval(np.asarray(k, dtype=float) * dt if np.ndim(k) else float(k) * dt)

    def envelope(self, t):
        """Upper bound ``(|A| + |B| t) exp(-c_r t)`` on ``|r(t) - d|``."""
        tt = np.asarray(t, dtype=float)
        return (abs(self.A) + abs(self.B) * tt) * np.exp(-self.params.c_r * tt)

    @property
    def slope_zero_time(self) -> float | None:
        """Positive time at which ``r_dot`` crosses zero, if there is one."""
        c, B = self.params.c_r, self.B
        if B == 0.0:
            return None
        t_star = self.params.x2_0 / (c * B)
        return t_star if t_star > 0.0 else None


def make_reference(params: ReferenceParams) -> ReferenceTrajectory:
    A = params.x1_0 - params.d
    B = params.x2_0 + params.c_r * A
    return ReferenceTrajectory(params=params, A=A, B=B)


def constant_reference(d: float) -> tuple[float, float, float]:
    """The untransformed set-point ``r = d`` used by Lagrangian/PID updates."""
    return float(d), 0.0, 0.0
