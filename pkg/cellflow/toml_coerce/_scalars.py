"""Scalar coercion helpers for TOML values (numbers, booleans, choices)."""

from __future__ import annotations

import collections.abc as cabc
import math
import typing as typ

from cellflow.toml_coerce._core import _ErrorType, _out_of_range, _reject

type Bound = typ.Literal["any", "non-negative", "positive", "unit-interval"]

_BOUND_CHECKS: dict[str, tuple[str, cabc.Callable[[float], bool]]] = {
    "any": ("a finite number", lambda _value: True),
    "non-negative": ("a non-negative number", lambda value: value >= 0.0),
    "positive": ("a positive number", lambda value: value > 0.0),
    "unit-interval": ("a number in [0, 1]", lambda value: 0.0 <= value <= 1.0),
}


def boolean(
    value: object, field_name: str, *, error: _ErrorType, default: bool = False
) -> bool:
    """Return a boolean parsed from ``value`` or ``default`` when ``None``.

    Parameters
    ----------
    value : object
        The value to coerce.
    field_name : str
        Name of the field, used in error messages.
    error : _ErrorType
        Exception factory called when ``value`` is neither ``None`` nor a bool.
    default : bool, optional
        Value returned when ``value`` is ``None`` (default ``False``).

    Returns
    -------
    bool
        The boolean, or ``default`` when ``value`` is ``None``.

    Raises
    ------
    CellflowError
        The configured ``error`` subclass when ``value`` is neither ``None``
        nor a :class:`bool`.

    Examples
    --------
    >>> from cellflow.exceptions import CellflowError
    >>> boolean(None, "field", error=CellflowError, default=True)
    True
    """
    match value:
        case None:
            return default
        case bool():
            return value
        case _:
            raise _reject(value, field_name, "a boolean", error)


def real_number(
    value: object,
    field_name: str,
    default: float,
    *,
    error: _ErrorType,
    bound: Bound = "any",
) -> float:
    """Return a finite float parsed from ``value`` or ``default`` when ``None``.

    TOML integers are accepted and widened; booleans are rejected even though
    ``bool`` subclasses ``int``.

    Parameters
    ----------
    value : object
        The value to coerce. ``None`` selects ``default``.
    field_name : str
        Name of the field, used in error messages.
    default : float
        Value returned when ``value`` is ``None``.
    error : _ErrorType
        Exception factory called when validation fails.
    bound : Bound, optional
        Range the parsed number must fall in (default ``"any"``).

    Returns
    -------
    float
        The parsed number.

    Raises
    ------
    CellflowError
        The configured ``error`` subclass when ``value`` is not a number, is
        not finite, or falls outside ``bound``.

    Examples
    --------
    >>> from cellflow.exceptions import CellflowError
    >>> real_number(3, "field", 1.0, error=CellflowError)
    3.0
    >>> real_number(None, "field", 0.5, error=CellflowError, bound="unit-interval")
    0.5
    """
    match value:
        case None:
            number = float(default)
        case bool():
            raise _reject(value, field_name, "a number", error)
        case int() | float():
            number = float(value)
        case _:
            raise _reject(value, field_name, "a number", error)
    expected, check = _BOUND_CHECKS[bound]
    if not math.isfinite(number) or not check(number):
        raise _out_of_range(field_name, expected, error)
    return number


def _integer(value: object, field_name: str, default: int, error: _ErrorType) -> int:
    """Return ``value`` as an ``int`` (``None`` selects ``default``)."""
    match value:
        case None:
            return default
        case bool():
            raise _reject(value, field_name, "an integer", error)
        case int():
            return value
        case float() if value.is_integer():
            return int(value)
        case _:
            raise _reject(value, field_name, "an integer", error)


def non_negative_int(
    value: object, field_name: str, default: int, *, error: _ErrorType
) -> int:
    """Return a non-negative integer parsed from ``value`` or ``default``.

    Integral floats such as ``1e6`` are accepted so large horizons can be
    written in exponent form.

    Parameters
    ----------
    value : object
        The value to coerce. ``None`` selects ``default``.
    field_name : str
        Name of the field, used in error messages.
    default : int
        Value returned when ``value`` is ``None``.
    error : _ErrorType
        Exception factory called when validation fails.

    Returns
    -------
    int
        A non-negative integer parsed from ``value``, or ``default``.

    Raises
    ------
    CellflowError
        The configured ``error`` subclass when ``value`` is not integral or
        is negative.

    Examples
    --------
    >>> from cellflow.exceptions import CellflowError
    >>> non_negative_int(1e6, "field", 5, error=CellflowError)
    1000000
    """
    integer = _integer(value, field_name, default, error)
    if integer < 0:
        raise _out_of_range(field_name, "non-negative", error)
    return integer


def positive_int(
    value: object, field_name: str, default: int, *, error: _ErrorType
) -> int:
    """Return a strictly positive integer parsed from ``value`` or ``default``.

    Parameters
    ----------
    value : object
        The value to coerce. ``None`` selects ``default``.
    field_name : str
        Name of the field, used in error messages.
    default : int
        Value returned when ``value`` is ``None``.
    error : _ErrorType
        Exception factory called when validation fails.

    Returns
    -------
    int
        A positive integer parsed from ``value``, or ``default``.

    Raises
    ------
    CellflowError
        The configured ``error`` subclass when ``value`` is not integral or
        is below one.

    Examples
    --------
    >>> from cellflow.exceptions import CellflowError
    >>> positive_int(None, "field", 3, error=CellflowError)
    3
    """
    integer = _integer(value, field_name, default, error)
    if integer < 1:
        raise _out_of_range(field_name, "at least 1", error)
    return integer


def choice(
    value: object,
    field_name: str,
    choices: cabc.Collection[str],
    *,
    error: _ErrorType,
) -> str | None:
    """Return ``value`` when it is one of ``choices``; ``None`` passes through.

    Parameters
    ----------
    value : object
        The value to coerce.
    field_name : str
        Name of the field, used in error messages.
    choices : cabc.Collection[str]
        Accepted spellings.
    error : _ErrorType
        Exception factory called when validation fails.

    Returns
    -------
    str | None
        The accepted choice, or ``None`` when ``value`` is ``None``.

    Raises
    ------
    CellflowError
        The configured ``error`` subclass when ``value`` is not a string or
        not one of ``choices``.

    Examples
    --------
    >>> from cellflow.exceptions import CellflowError
    >>> choice("exact", "mode", ("exact", "discrete"), error=CellflowError)
    'exact'
    """
    match value:
        case None:
            return None
        case str() if value in choices:
            return value
        case str():
            joined = ", ".join(repr(item) for item in sorted(choices))
            raise _out_of_range(field_name, f"one of {joined}", error)
        case _:
            raise _reject(value, field_name, "a string", error)


def optional_string(value: object, field_name: str, *, error: _ErrorType) -> str:
    """Return ``value`` as a string, mapping ``None`` to the empty string.

    Examples
    --------
    >>> from cellflow.exceptions import CellflowError
    >>> optional_string(None, "field", error=CellflowError)
    ''
    """
    match value:
        case None:
            return ""
        case str():
            return value
        case _:
            raise _reject(value, field_name, "a string", error)
