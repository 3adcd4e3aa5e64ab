"""Episode-level safety metrics: violation rate, violation magnitude, average cost."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .errors import ParameterError

__all__ = [
    "EpisodeCosts",
    "SafetySummary",
    "violation_rate",
    "violation_magnitude",
    "average_cost",
    "summarize",
]


@dataclass(frozen=True)
class EpisodeCosts:
    returns: tuple[float, ...]
    d: float

    def __init__(self, returns: Iterable[float], d: float) -> None:
        vals = tuple(float(c) for c in returns)
        if not all(math.isfinite(c) for c in vals):
            raise ParameterError("episode cost returns must be finite")
        if not math.isfinite(d):
            raise ParameterError("threshold d must be finite")
        object.__setattr__(self, "returns", vals)
        object.__setattr__(self, "d", float(d))

    def array(self) -> np.ndarray:
        return np.asarray(self.returns, dtype=float)

    def _nonempty(self) -> np.ndarray:
        if not self.returns:
            raise ParameterError("no episodes recorded")
        return self.array()


def violation_rate(ep: EpisodeCosts) -> float:
    """Fraction of episodes with ``C_i > d`` (equality is compliant)."""
    c = ep._nonempty()
    return float(np.count_nonzero(c > ep.d) / c.size)


def violation_magnitude(ep: EpisodeCosts) -> float:
    """Mean excess ``C_i - d`` over violating episodes; 0 when none violate."""
    c = ep.array()
    excess = c[c > ep.d] - ep.d
    return float(excess.mean()) if excess.size else 0.0


def average_cost(ep: EpisodeCosts) -> float:
    return float(ep._nonempty().mean())


class SafetySummary(NamedTuple):
    violation_rate: float
    magnitude: float
    average_cost: float

    def as_row(self) -> dict[str, float]:
        """Summary-row layout: rate in percent, magnitude, average cost."""
        return {
            "vio_rate_pct": 100.0 * self.violation_rate,
            "magnitude": self.magnitude,
            "avg_cost": self.average_cost,
        }


def summarize(ep: EpisodeCosts) -> SafetySummary:
    return SafetySummary(violation_rate(ep), violation_magnitude(ep), average_cost(ep))
