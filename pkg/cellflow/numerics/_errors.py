"""Error hierarchy for the numerical kernels."""

from __future__ import annotations

from cellflow.exceptions import CellflowError


class NumericsError(CellflowError):
    """Raised when a numerical kernel cannot honour its contract."""


class ArgumentError(NumericsError):
    """Raised when a kernel receives arguments outside its domain."""


class KummerOverflowError(NumericsError):
    """Raised when the unscaled confluent hypergeometric value would overflow."""


class BracketError(NumericsError):
    """Raised when a root-finding bracket does not enclose a sign change."""


class QuadratureError(NumericsError):
    """Raised when a quadrature misses its tolerance.

    Attributes
    ----------
    estimate : float
        The achieved absolute error estimate.
    """

    def __init__(self, message: str, *, estimate: float) -> None:
        """Record ``estimate`` alongside the message."""
        super().__init__(f"{message} (achieved error estimate {estimate:.3e})")
        self.estimate = estimate
