"""Cyclopts argument declarations for the :mod:`cellflow` CLI.

Option declarations live apart from dispatch logic; ``cli`` re-imports every
public name. Physical parameters are never CLI arguments: they come from the
experiment file or ``--set`` overrides.
"""

from __future__ import annotations

import typing as typ
from pathlib import Path

from cyclopts import Parameter

from cellflow.config import MAX_SEED
from cellflow.presets import PRESETS

OUTPUT_DIR_ENV_VAR = "CELLFLOW_OUTPUT_DIR"
CONFIG_REQUIRED_MESSAGE = "--config requires a value"
SET_REQUIRED_MESSAGE = "--set requires a section.key=value argument"


def _validate_seed(_hint: object, seed: int) -> None:
    """Reject seeds outside the unsigned 64-bit range via cyclopts' validator hook."""
    if not 0 <= seed <= MAX_SEED:
        message = f"--seed must be an unsigned 64-bit integer; received {seed}."
        raise ValueError(message)


def _validate_threads(_hint: object, threads: int) -> None:
    """Reject a non-positive worker count."""
    if threads < 1:
        message = f"--threads must be at least 1; received {threads}."
        raise ValueError(message)


def _validate_preset(_hint: object, name: str) -> None:
    """Reject unknown preset names before any configuration work."""
    if name not in PRESETS:
        choices = ", ".join(PRESETS)
        message = f"unknown preset {name!r}; expected one of: {choices}."
        raise ValueError(message)


_OUT_PARAMETER = Parameter(
    name="out",
    env_var=OUTPUT_DIR_ENV_VAR,
    help="Directory receiving the outputs; overrides [output] directory.",
)
OutOption = typ.Annotated[Path, _OUT_PARAMETER]

_SEED_PARAMETER = Parameter(
    name="seed",
    validator=_validate_seed,
    help="Base random seed; overrides [run] seed.",
)
SeedOption = typ.Annotated[int, _SEED_PARAMETER]

_THREADS_PARAMETER = Parameter(
    name="threads",
    validator=_validate_threads,
    help="Worker processes for simulation replicas; overrides [run] threads.",
)
ThreadsOption = typ.Annotated[int, _THREADS_PARAMETER]

_PRESET_PARAMETER = Parameter(
    validator=_validate_preset,
    help="Figure preset to reproduce: fig1 to fig9.",
)
PresetArgument = typ.Annotated[str, _PRESET_PARAMETER]


__all__ = [
    "CONFIG_REQUIRED_MESSAGE",
    "OUTPUT_DIR_ENV_VAR",
    "SET_REQUIRED_MESSAGE",
    "OutOption",
    "PresetArgument",
    "SeedOption",
    "ThreadsOption",
]
