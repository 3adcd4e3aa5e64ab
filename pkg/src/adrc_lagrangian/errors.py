"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class AdrcError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(AdrcError, ValueError):
    """An argument violates a documented precondition."""


class DomainError(ParameterError):
    """Evaluation requested outside the domain of a function (e.g. t < 0)."""


class NumericError(AdrcError, ArithmeticError):
    """Non-finite input or intermediate value."""


class SingularityError(NumericError):
    """A transfer-function denominator vanished at the evaluation point."""


class DivergenceError(NumericError):
    """A simulation or training loop left the finite regime.

    ``step`` holds the index of the step that failed, when known.
    """

    def __init__(self, message: str, step: int | None = None) -> None:
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


class EstimationError(AdrcError):
    """Online bound estimation had no admissible samples."""


class DisturbanceBoundError(AdrcError):
    """A simulated disturbance breached its declared class bounds."""

    def __init__(self, message: str, step: int | None = None) -> None:
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


class ConfigError(AdrcError):
    """A scenario configuration failed schema validation."""
