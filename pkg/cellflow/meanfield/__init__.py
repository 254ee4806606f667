"""Mean-field approximations of the stationary regime.

:mod:`cellflow.meanfield.first_order` solves the Poisson closure and
locates the metastable window; :mod:`cellflow.meanfield.second_order`
iterates the coupled first- and second-moment equations on a polar grid.
"""

from __future__ import annotations

from cellflow.meanfield.errors import (
    FieldValueError,
    GridExhaustedError,
    MeanFieldError,
    PointConvergenceError,
    SolverDivergenceError,
    UnstableRegimeError,
)

__all__ = [
    "FieldValueError",
    "GridExhaustedError",
    "MeanFieldError",
    "PointConvergenceError",
    "SolverDivergenceError",
    "UnstableRegimeError",
]
