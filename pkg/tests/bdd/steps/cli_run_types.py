"""Shared typing contract for captured CLI run results.

This module imports no sibling step module, so both the fixture and the step
modules can import it at module scope without creating a cycle.
"""

from __future__ import annotations

import typing as typ
from pathlib import Path


class CliRunResult(typ.TypedDict):
    """Captured result of a ``cellflow`` CLI subprocess invocation."""

    returncode: int
    stdout: str
    stderr: str
    output_dir: Path
