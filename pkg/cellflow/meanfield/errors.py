"""Exception types shared by the mean-field solvers.

:class:`MeanFieldError` is the local root. The first-order solver raises
:class:`GridExhaustedError` when its scan range cannot account for every
root. The second-order solver raises :class:`UnstableRegimeError` when asked
to solve above the critical rate, :class:`FieldValueError` when an update
produces a non-finite or negative value, :class:`PointConvergenceError` when
the scalar equation at one grid point does not settle, and
:class:`SolverDivergenceError` when the outer residual keeps growing.

Examples
--------
>>> from cellflow.meanfield.errors import PointConvergenceError
>>> str(PointConvergenceError(3, iterations=50))
'gamma1 update did not converge at radial cell 3 after 50 iterations.'
"""

from __future__ import annotations

import typing as typ

from cellflow.exceptions import CellflowError


class MeanFieldError(CellflowError):
    """Raised when a mean-field solver cannot produce a trustworthy answer."""


class GridExhaustedError(MeanFieldError):
    """Raised when a root lies beyond the scanned ``nbar`` range."""


class UnstableRegimeError(MeanFieldError):
    """Raised when the second-order solver is asked to run at ``lambda >= lambda_c``."""


class FieldValueError(MeanFieldError):
    """Raised when an update produces NaN, infinite, or negative field values."""


class PointConvergenceError(MeanFieldError):
    """Raise when the per-point ``gamma1`` iteration fails to converge.

    Attributes
    ----------
    index : int
        Radial cell whose scalar equation did not settle.
    """

    def __init__(self, index: int, *, iterations: int) -> None:
        """Record the failing cell index."""
        super().__init__(
            f"gamma1 update did not converge at radial cell {index} "
            f"after {iterations} iterations."
        )
        self.index = index


class SolverDivergenceError(MeanFieldError):
    """Raise when the outer residual grows for too many consecutive iterations.

    Attributes
    ----------
    state : dict[str, typing.Any]
        Snapshot of the solver state at abort: the residual history and the
        last fields, suitable for writing as diagnostics.
    """

    def __init__(self, message: str, *, state: dict[str, typ.Any]) -> None:
        """Keep ``state`` for the caller to persist."""
        super().__init__(message)
        self.state = state
