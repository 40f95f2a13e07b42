"""Rate functions and rare-event Monte Carlo for Weibull-like sums."""

from . import cli, dist, rate, simulate, verify
from .errors import ConvexityWarning, DomainError, NumericError

__version__ = "0.1.0"

__all__ = [
    "cli",
    "dist",
    "rate",
    "simulate",
    "verify",
    "DomainError",
    "NumericError",
    "ConvexityWarning",
    "__version__",
]
