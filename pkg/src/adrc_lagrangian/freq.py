"""Frequency-domain comparison of ADRC and integral-type disturbance estimates.

Transfer functions from the disturbance ``F`` to the estimation errors:

    G_ef(s)  = s / (s + w_o)
    G_efI(s) = (s^3 + K_d s^2 + K_p s) / ((s + w_o)(s^2 + k_ad s + k_ap))

The magnitude ratio ``|G_ef| / |G_efI|`` and the single-branch arctan phase
forms are swept over a frequency grid by :func:`ratio_and_phase_check`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .controller import GainSet, PidGains
from .errors import ParameterError, SingularityError

__all__ = [
    "TransferEval",
    "g_ef",
    "g_efI",
    "default_grid",
    "FrequencyReport",
    "ratio_and_phase_check",
    "steady_state_ratio",
    "step_ratio_time_domain",
]


@dataclass(frozen=True)
class TransferEval:
    omega: float
    value: complex
    magnitude: float
    phase: float


def _check_positive(name: str, v: float) -> None:
    if not (math.isfinite(v) and v > 0.0):
        raise ParameterError(f"{name} must be positive, got {v!r}")


def _eval(omega: float, value: complex) -> TransferEval:
    return TransferEval(omega=omega, value=value, magnitude=abs(value), phase=math.atan2(value.imag, value.real))


def g_ef(omega: float, omega_o: float) -> TransferEval:
    """``s / (s + omega_o)`` at ``s = i omega``; phase is ``atan(omega_o / omega)``."""
    _check_positive("omega", omega)
    _check_positive("omega_o", omega_o)
    s = 1j * omega
    return _eval(omega, s / (s + omega_o))


def g_efI(omega: float, pid: PidGains, adrc: GainSet) -> TransferEval:
    _check_positive("omega", omega)
    s = 1j * omega
    den = (s + adrc.omega_o) * (s * s + adrc.k_ad * s + adrc.k_ap)
    if abs(den) < 1e-14:
        raise SingularityError(f"G_efI denominator vanishes at omega={omega}")
    num = s ** 3 + pid.K_d * s * s + pid.K_p * s
    return _eval(omega, num / den)


def default_grid(n: int = 200, lo: float = 1e-3, hi: float = 1e3) -> np.ndarray:
    return np.logspace(math.log10(lo), math.log10(hi), n)


@dataclass(frozen=True)
class FrequencyReport:
    """Per-frequency comparison; the boolean arrays flag grid points."""

    omega: np.ndarray
    mag_ef: np.ndarray
    mag_efI: np.ndarray
    ratio_sq: np.ndarray
    ratio_sq_direct: np.ndarray
    phase_ef: np.ndarray
    phase_efI: np.ndarray
    lag_ef: np.ndarray
    lag_efI: np.ndarray
    branch: np.ndarray
    side_condition: np.ndarray
    magnitude_violation: np.ndarray
    phase_violation: np.ndarray

    @property
    def magnitude_ok(self) -> bool:
        return not bool(self.magnitude_violation.any())

    @property
    def phase_ok(self) -> bool:
        return not bool(self.phase_violation.any())

    @property
    def phase_admissible(self) -> np.ndarray:
        return self.branch & self.side_condition

    columns = (
        "omega",
        "mag_ef",
        "mag_efI",
        "ratio_sq",
        "phase_ef",
        "phase_efI",
        "lag_ef",
        "lag_efI",
        "branch",
        "side_condition",
        "magnitude_violation",
        "phase_violation",
    )

    def rows(self):
        for i in range(self.omega.size):
            yield tuple(getattr(self, c)[i] for c in self.columns)


def ratio_and_phase_check(
    grid,
    adrc: GainSet,
    pid: PidGains | None = None,
    omega_star: float | None = None,
) -> FrequencyReport:
    """Sweep the magnitude-ratio and phase inequalities over ``grid``.

    ``pid`` defaults to the ADRC-equivalent gains. The phase comparison
    ``atan(w / w_o) < atan(k_ad w / (k_ap - w^2))`` is only flagged on the
    branch ``w^2 < k_ap`` where ``w_o > (k_ap - w^2) / k_ad`` holds; elsewhere
    it is reported but not judged.
    """
    w = np.asarray(grid, dtype=float)
    if w.size == 0:
        raise ParameterError("frequency grid is empty")
    if np.any(~np.isfinite(w)) or np.any(w <= 0.0):
        raise ParameterError("grid frequencies must be positive and finite")
    if pid is None:
        pid = adrc.pid_equivalent()
    if omega_star is not None and not adrc.omega_o > omega_star:
        raise ParameterError(f"omega_o={adrc.omega_o} does not exceed omega_star={omega_star}")
    k_ap, k_ad, w_o = adrc.k_ap, adrc.k_ad, adrc.omega_o
    s = 1j * w
    ef = s / (s + w_o)
    den = (s + w_o) * (s * s + k_ad * s + k_ap)
    if np.any(np.abs(den) < 1e-14):
        raise SingularityError("G_efI denominator vanishes on the grid")
    efI = (s ** 3 + pid.K_d * s * s + pid.K_p * s) / den
    w2 = w * w
    num = (k_ap - w2) ** 2 + k_ad ** 2 * w2
    dd = (pid.K_p - w2) ** 2 + pid.K_d ** 2 * w2
    ratio_sq = num / dd
    mag_ef, mag_efI = np.abs(ef), np.abs(efI)
    lag_ef = np.arctan(w / w_o)
    with np.errstate(divide="ignore"):
        lag_efI = np.arctan(k_ad * w / (k_ap - w2))
    branch = w2 < k_ap
    if k_ad > 0.0:
        side = w_o > (k_ap - w2) / k_ad
    else:
        side = np.zeros_like(branch)
    admissible = branch & side
    return FrequencyReport(
        omega=w,
        mag_ef=mag_ef,
        mag_efI=mag_efI,
        ratio_sq=ratio_sq,
        ratio_sq_direct=(mag_ef / mag_efI) ** 2,
        phase_ef=np.angle(ef),
        phase_efI=np.angle(efI),
        lag_ef=lag_ef,
        lag_efI=lag_efI,
        branch=branch,
        side_condition=side,
        magnitude_violation=~(ratio_sq < 1.0),
        phase_violation=admissible & ~(lag_ef < lag_efI),
    )


def steady_state_ratio(adrc: GainSet, pid: PidGains | None = None) -> float:
    """Limit ``k_ap / K_p``, i.e. ``k_ap / (k_ap + w_o k_ad)`` for mapped gains."""
    pid = adrc.pid_equivalent() if pid is None else pid
    return adrc.k_ap / pid.K_p


def _slowest_rate(adrc: GainSet) -> float:
    disc = adrc.k_ad ** 2 - 4.0 * adrc.k_ap
    if disc < 0.0:
        rate = adrc.k_ad / 2.0
    else:
        rate = (adrc.k_ad - math.sqrt(disc)) / 2.0
    return min(rate, adrc.omega_o)


def step_ratio_time_domain(
    adrc: GainSet,
    pid: PidGains | None = None,
    horizon: float | None = None,
    n: int = 20001,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Simulate both error channels under a unit step in the disturbance rate.

    Both errors are driven by ``f'``: ``E_f = -1/(s + w_o) sF`` and
    ``E_fI = -(s^2 + K_d s + K_p) / ((s + w_o)(s^2 + k_ad s + k_ap)) sF``.
    Returns ``(t, e_f, e_fI)``; ``e_f / e_fI`` settles at
    :func:`steady_state_ratio`.
    """
    pid = adrc.pid_equivalent() if pid is None else pid
    rate = _slowest_rate(adrc)
    if rate <= 0.0:
        raise ParameterError("tracking polynomial is not Hurwitz; no steady state")
    if horizon is None:
        horizon = 50.0 / rate
    t = np.linspace(0.0, horizon, n)
    u = np.ones_like(t)
    den_ef = [1.0, adrc.omega_o]
    den_efI = np.polymul([1.0, adrc.omega_o], [1.0, adrc.k_ad, adrc.k_ap])
    _, e_f, _ = signal.lsim(signal.lti([-1.0], den_ef), u, t)
    _, e_fI, _ = signal.lsim(signal.lti([-1.0, -pid.K_d, -pid.K_p], den_efI), u, t)
    return t, e_f, e_fI
