"""Package-level base exception for the cellflow suite.

`CellflowError` is the common root for expected domain failures raised by
`cellflow` itself. The model, numerics, mean-field, simulation,
configuration and output modules define their local root exceptions by
inheriting from this class, so callers (the CLI in particular) can catch a
single package-level type without also catching unrelated Python runtime
failures.

Examples include `ParameterError`, `QuadratureError`, `GridExhaustedError`,
`SolverDivergenceError`, `SimulationError`, and `ConfigurationError`.
Feature-specific subclasses inherit from their local root exception.
"""

from __future__ import annotations


class CellflowError(Exception):
    """Base class for all cellflow exceptions."""
