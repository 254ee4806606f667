"""Sequence coercion helpers for TOML arrays of numbers."""

from __future__ import annotations

import collections.abc as cabc
import math

from cellflow.toml_coerce._core import _ErrorType, _reject


def expect_sequence(
    value: object, field_name: str, *, error: _ErrorType
) -> cabc.Sequence[object]:
    """Ensure ``value`` is a non-string sequence.

    Parameters
    ----------
    value : object
        The value to coerce.
    field_name : str
        Name of the field, used in error messages.
    error : _ErrorType
        Exception factory called when ``value`` is not an accepted sequence.

    Returns
    -------
    cabc.Sequence[object]
        The sequence itself.

    Raises
    ------
    CellflowError
        The configured ``error`` subclass when ``value`` is string-like or
        otherwise not a sequence.

    Examples
    --------
    >>> from cellflow.exceptions import CellflowError
    >>> expect_sequence([1, 2], "field", error=CellflowError)
    [1, 2]
    """
    match value:
        case str() | bytes() | bytearray():
            raise _reject(value, field_name, "an array", error)
        case cabc.Sequence():
            return value
        case _:
            raise _reject(value, field_name, "an array", error)


def real_tuple(
    value: object,
    field_name: str,
    default: tuple[float, ...] = (),
    *,
    error: _ErrorType,
) -> tuple[float, ...]:
    """Return a tuple of finite floats parsed from the TOML array ``value``.

    Parameters
    ----------
    value : object
        The value to coerce. ``None`` selects ``default``.
    field_name : str
        Name of the field, used in error messages.
    default : tuple[float, ...], optional
        Value returned when ``value`` is ``None``.
    error : _ErrorType
        Exception factory called when validation fails.

    Returns
    -------
    tuple[float, ...]
        The parsed numbers in input order.

    Raises
    ------
    CellflowError
        The configured ``error`` subclass when ``value`` is not an array or
        an entry is not a finite number; the message names the entry index.

    Examples
    --------
    >>> from cellflow.exceptions import CellflowError
    >>> real_tuple([0, 0.5], "field", error=CellflowError)
    (0.0, 0.5)
    """
    if value is None:
        return default
    numbers: list[float] = []
    for index, entry in enumerate(expect_sequence(value, field_name, error=error)):
        match entry:
            case bool():
                raise _reject(entry, f"{field_name}[{index}]", "a number", error)
            case int() | float() if math.isfinite(entry):
                numbers.append(float(entry))
            case _:
                raise _reject(entry, f"{field_name}[{index}]", "a finite number", error)
    return tuple(numbers)
