"""Table helpers for the sections of an experiment file."""

from __future__ import annotations

import collections.abc as cabc
import typing as typ

from cellflow.toml_coerce._core import _ErrorType, _reject


def optional_table(
    value: object, field_name: str, *, error: _ErrorType
) -> cabc.Mapping[str, typ.Any] | None:
    """Return the TOML table ``value``, or ``None`` when the table is absent.

    Parameters
    ----------
    value : object
        The parsed value of a section such as ``[network]``.
    field_name : str
        Section name, used in error messages.
    error : _ErrorType
        Exception type raised when ``value`` is present but not a table.

    Returns
    -------
    collections.abc.Mapping[str, typing.Any] | None
        The table unchanged, or ``None`` for a missing section.

    Raises
    ------
    CellflowError
        The configured ``error`` subclass for a scalar or array section.

    Examples
    --------
    >>> from cellflow.exceptions import CellflowError
    >>> optional_table({"seed": 3}, "run", error=CellflowError)
    {'seed': 3}
    >>> optional_table(None, "run", error=CellflowError) is None
    True
    """
    match value:
        case None:
            return None
        case cabc.Mapping():
            return typ.cast("cabc.Mapping[str, typ.Any]", value)
        case _:
            raise _reject(value, field_name, "a TOML table", error)


def reject_unknown_keys(
    table: cabc.Mapping[str, typ.Any] | None,
    allowed_keys: cabc.Set[str],
    context: str,
    *,
    error: _ErrorType,
) -> None:
    """Raise ``error`` naming every key of ``table`` outside ``allowed_keys``.

    ``context`` ending in ``" section"`` names root-level tables; any other
    context names the options of one section.

    Raises
    ------
    CellflowError
        The configured ``error`` subclass listing the unknown keys, sorted.

    Examples
    --------
    >>> from cellflow.exceptions import CellflowError
    >>> reject_unknown_keys({"seed": 1}, {"seed"}, "run", error=CellflowError)
    """
    if table is None:
        return
    unknown = sorted(set(table) - allowed_keys)
    if not unknown:
        return
    joined = ", ".join(unknown)
    if context.endswith(" section"):
        message = f"Unknown {context}(s): {joined}."
    else:
        message = f"Unknown {context} option(s): {joined}."
    raise error(message)
