"""Cellflow package.

Mean-field solvers, a Monte Carlo simulator and first-passage analysis for
spatial birth-death uplink networks. This package initialises the Cyclopts
application and exposes the :func:`cellflow.cli.main` entry point for process
launchers.
"""

from __future__ import annotations

from .cli import app, main
from .exceptions import CellflowError

__all__ = ["CellflowError", "app", "main"]
