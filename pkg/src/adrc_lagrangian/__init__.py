"""ADRC-controlled Lagrange multipliers for constrained optimization."""

__version__ = "0.1.0"
