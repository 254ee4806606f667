"""Errors raised while writing run artefacts."""

from __future__ import annotations

from cellflow.exceptions import CellflowError


class OutputError(CellflowError):
    """Raised when an output file cannot be written or read back."""
