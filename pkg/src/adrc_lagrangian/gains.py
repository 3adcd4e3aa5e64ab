"""Observer-gain lower bound and the PID <-> ADRC gain maps.

The stability floor for the observer bandwidth is

    omega_star = max(omega_bar, 0, (L1 - k_ap) / k_ad, L2 - k_ad)

where ``omega_bar`` is the largest real root of a caller-supplied quartic
(0 when there is none). ``L1`` and ``L2`` can be estimated online from a
cost trace with :func:`estimate_L1_L2`.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .controller import GainSet, PidGains
from .errors import EstimationError, ParameterError

logger = logging.getLogger(__name__)

__all__ = [
    "DisturbanceBounds",
    "QuarticCoefficients",
    "BoundsEstimate",
    "real_roots",
    "max_real_root",
    "estimate_L1_L2",
    "omega_star",
    "pid_equivalent_gains",
    "adrc_candidates_from_pid",
    "solve_adrc_from_pid",
    "AdaptiveObserverGain",
]

EPS_DEN = 1e-8


@dataclass(frozen=True)
class DisturbanceBounds:
    L1: float = 0.0
    L2: float = 0.0
    L3: float = 0.0

    def __post_init__(self) -> None:
        for name in ("L1", "L2", "L3"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0.0):
                raise ParameterError(f"{name} must be finite and >= 0, got {v!r}")


@dataclass(frozen=True)
class QuarticCoefficients:
    """Coefficients of ``n0 w^4 + n1 w^3 + n2 w^2 + n3 w + n4``."""

    n0: float
    n1: float
    n2: float
    n3: float
    n4: float

    def __post_init__(self) -> None:
        vals = self.as_tuple()
        if not all(math.isfinite(v) for v in vals):
            raise ParameterError("quartic coefficients must be finite")
        if all(v == 0.0 for v in vals):
            raise ParameterError("quartic coefficients are all zero")

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.n0, self.n1, self.n2, self.n3, self.n4)


# --------------------------------------------------------------------------
# real roots


def _horner(c: Sequence[float], x: float) -> float:
    acc = 0.0
    for a in c:
        acc = acc * x + a
    return acc


def _horner_abs(c: Sequence[float], x: float) -> float:
    ax = abs(x)
    acc = 0.0
    for a in c:
        acc = acc * ax + abs(a)
    return acc


def _refine(c: Sequence[float], dc: Sequence[float], lo: float, hi: float, flo: float) -> float:
    """Safeguarded Newton inside a sign-change bracket ``[lo, hi]``."""
    x = 0.5 * (lo + hi)
    for _ in range(200):
        fx = _horner(c, x)
        if fx == 0.0:
            return x
        if (fx < 0.0) == (flo < 0.0):
            lo, flo = x, fx
        else:
            hi = x
        if hi - lo <= 1e-15 * max(1.0, abs(x)):
            break
        d = _horner(dc, x)
        step_ok = False
        if d != 0.0:
            xn = x - fx / d
            if lo < xn < hi:
                step_ok = True
                if abs(xn - x) <= 1e-16 * max(1.0, abs(x)):
                    return xn
                x = xn
        if not step_ok:
            x = 0.5 * (lo + hi)
    return x


def _monic_real_roots(c: list[float]) -> list[float]:
    n = len(c) - 1
    if n <= 0:
        return []
    if n == 1:
        return [-c[1]]
    bound = 1.0 + max(abs(a) for a in c[1:])
    dc = [a * (n - i) for i, a in enumerate(c[:-1])]
    crit = _monic_real_roots([a / n for a in dc])
    pts = [-bound] + sorted(x for x in crit if -bound < x < bound) + [bound]
    roots: list[float] = []
    vals = [_horner(c, x) for x in pts]
    for i in range(len(pts) - 1):
        lo, hi, flo, fhi = pts[i], pts[i + 1], vals[i], vals[i + 1]
        if flo == 0.0:
            roots.append(lo)
        elif fhi != 0.0 and (flo < 0.0) != (fhi < 0.0):
            roots.append(_refine(c, dc, lo, hi, flo))
    if vals[-1] == 0.0:
        roots.append(pts[-1])
    # even-multiplicity roots touch zero at a critical point without a sign change
    for x, fx in zip(pts[1:-1], vals[1:-1]):
        if fx != 0.0 and abs(fx) <= 8.0 * np.finfo(float).eps * _horner_abs(c, x):
            roots.append(x)
    roots.sort()
    merged: list[float] = []
    for x in roots:
        if merged and abs(x - merged[-1]) <= 1e-12 * max(1.0, abs(x)):
            continue
        merged.append(x)
    return merged


def real_roots(coeffs: Sequence[float]) -> list[float]:
    """Sorted distinct real roots of a polynomial (highest degree first).

    Critical points from the recursively solved derivative split the real
    line into monotone pieces inside the Cauchy bound; each piece with a
    sign change holds exactly one root, found by safeguarded Newton.
    """
    c = [float(a) for a in coeffs]
    if not all(math.isfinite(a) for a in c):
        raise ParameterError("polynomial coefficients must be finite")
    while c and c[0] == 0.0:
        c.pop(0)
    if not c:
        raise ParameterError("zero polynomial has no well-defined roots")
    if len(c) == 1:
        raise ParameterError("polynomial must have degree >= 1")
    lead = c[0]
    return _monic_real_roots([a / lead for a in c])


def max_real_root(c: QuarticCoefficients | Sequence[float]) -> float | None:
    """Largest real root, or ``None`` when the polynomial has no real root."""
    coeffs = c.as_tuple() if isinstance(c, QuarticCoefficients) else c
    roots = real_roots(coeffs)
    return roots[-1] if roots else None


# --------------------------------------------------------------------------
# online sensitivity estimates


@dataclass(frozen=True)
class BoundsEstimate:
    L1: float
    L2: float
    used_L1: int
    used_L2: int
    skipped_L1: int
    skipped_L2: int

    def as_bounds(self, L3: float = 0.0) -> DisturbanceBounds:
        return DisturbanceBounds(L1=self.L1, L2=self.L2, L3=L3)


def estimate_L1_L2(x1: Sequence[float], dt: float = 1.0, eps_den: float = EPS_DEN) -> BoundsEstimate:
    """Finite-difference sensitivities of the cost acceleration.

    ``L1 = max |d(x1'')/d(x1)|`` and ``L2 = max |d(x1'')/d(x2)|`` over
    consecutive samples, with ``x2`` and ``x1''`` from central differences.
    Pairs whose denominator is below ``eps_den`` in magnitude are skipped;
    a channel with no admissible pair reports 0. Raises
    :class:`EstimationError` when both channels are empty.
    """
    x = np.asarray(x1, dtype=float)
    if x.ndim != 1 or x.size < 4:
        raise ParameterError("need at least 4 samples of x1")
    if not np.all(np.isfinite(x)):
        raise ParameterError("x1 samples must be finite")
    if not dt > 0.0:
        raise ParameterError("dt must be positive")
    x1c = x[1:-1]
    x2 = (x[2:] - x[:-2]) / (2.0 * dt)
    acc = (x[2:] - 2.0 * x[1:-1] + x[:-2]) / (dt * dt)
    d_acc = np.diff(acc)
    d_x1 = np.diff(x1c)
    d_x2 = np.diff(x2)
    ok1 = np.abs(d_x1) >= eps_den
    ok2 = np.abs(d_x2) >= eps_den
    n = d_acc.size
    if not ok1.any() and not ok2.any():
        raise EstimationError(
            f"all {n} difference pairs are degenerate (|dx1|, |dx2| < {eps_den}); "
            "the trace carries no sensitivity information"
        )
    L1 = float(np.max(np.abs(d_acc[ok1] / d_x1[ok1]))) if ok1.any() else 0.0
    L2 = float(np.max(np.abs(d_acc[ok2] / d_x2[ok2]))) if ok2.any() else 0.0
    return BoundsEstimate(
        L1=L1,
        L2=L2,
        used_L1=int(ok1.sum()),
        used_L2=int(ok2.sum()),
        skipped_L1=int(n - ok1.sum()),
        skipped_L2=int(n - ok2.sum()),
    )


def omega_star(
    k_ap: float,
    k_ad: float,
    bounds: DisturbanceBounds,
    manifold: QuarticCoefficients | None = None,
) -> float:
    if not (k_ad > 0.0):
        raise ParameterError(f"k_ad must be positive for the lower bound, got {k_ad!r}")
    if k_ap < 0.0:
        raise ParameterError(f"k_ap must be >= 0, got {k_ap!r}")
    omega_bar = 0.0
    if manifold is not None:
        root = max_real_root(manifold)
        omega_bar = root if root is not None else 0.0
    return max(omega_bar, 0.0, (bounds.L1 - k_ap) / k_ad, bounds.L2 - k_ad)


# --------------------------------------------------------------------------
# gain maps


def pid_equivalent_gains(adrc: GainSet) -> PidGains:
    """``K_p = k_ap + w k_ad``, ``K_i = w k_ap``, ``K_d = w + k_ad``."""
    return adrc.pid_equivalent()


def adrc_candidates_from_pid(pid: PidGains) -> list[float]:
    """Real roots of ``w^3 - K_d w^2 + K_p w - K_i`` (candidate observer gains)."""
    return real_roots([1.0, -pid.K_d, pid.K_p, -pid.K_i])


def solve_adrc_from_pid(pid: PidGains, tol: float = 1e-10) -> GainSet | None:
    """Invert the gain map; picks the admissible solution with the largest ``omega_o``.

    Returns ``None`` when no root gives ``omega_o > 0``, ``k_ap >= 0`` and
    ``k_ad >= 0`` with a forward image within ``tol``.
    """
    candidates = adrc_candidates_from_pid(pid)
    scale = max(1.0, pid.K_p, pid.K_i, pid.K_d)
    for w in sorted(candidates, reverse=True):
        if w <= 0.0:
            continue
        k_ad = pid.K_d - w
        k_ap = pid.K_i / w
        if k_ad < -tol * scale:
            continue
        gains = GainSet(k_ap=k_ap, k_ad=max(k_ad, 0.0), omega_o=w)
        img = gains.pid_equivalent()
        err = max(abs(img.K_p - pid.K_p), abs(img.K_i - pid.K_i), abs(img.K_d - pid.K_d))
        if err <= tol * scale:
            return gains
    logger.warning("no admissible ADRC gains for %s; cubic roots were %s", pid, candidates)
    return None


class AdaptiveObserverGain:
    """Observer bandwidth recomputed from a sliding window of observed costs.

    ``omega()`` returns ``max(floor, factor * omega_star)`` where
    ``omega_star`` uses the current window's ``L1``/``L2`` estimates; with
    ``factor > 1`` the result stays strictly above the bound.
    """

    def __init__(
        self,
        k_ap: float,
        k_ad: float,
        window: int = 32,
        floor: float = 10.0,
        factor: float = 2.0,
        dt: float = 1.0,
        manifold: QuarticCoefficients | None = None,
    ) -> None:
        if window < 4:
            raise ParameterError("window must hold at least 4 samples")
        if not (floor > 0.0 and factor > 1.0):
            raise ParameterError("need floor > 0 and factor > 1")
        self.k_ap, self.k_ad = k_ap, k_ad
        self.floor, self.factor, self.dt = floor, factor, dt
        self.manifold = manifold
        self._window: deque[float] = deque(maxlen=window)
        self.last_bound = 0.0

    def push(self, cost: float) -> None:
        self._window.append(float(cost))

    def omega(self) -> float:
        if len(self._window) >= 4:
            try:
                est = estimate_L1_L2(list(self._window), self.dt)
            except EstimationError:
                pass
            else:
                self.last_bound = omega_star(self.k_ap, self.k_ad, est.as_bounds(), self.manifold)
        return max(self.floor, self.factor * self.last_bound)
