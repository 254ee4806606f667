"""CSV tables with self-describing, unit-carrying headers."""

from __future__ import annotations

import csv
import logging
import math
import typing as typ

from cellflow.outputs.errors import OutputError

if typ.TYPE_CHECKING:
    import collections.abc as cabc
    from pathlib import Path

LOGGER = logging.getLogger(__name__)

type Cell = float | int | str | None


def _format(value: Cell) -> str:
    """Render one cell; floats use ``repr`` so values survive a reload."""
    match value:
        case None:
            return ""
        case bool():
            return "true" if value else "false"
        case float() if math.isnan(value):
            return "nan"
        case float():
            return repr(value)
        case _:
            return str(value)


def write_csv(
    path: Path,
    header: cabc.Sequence[str],
    rows: cabc.Iterable[cabc.Sequence[Cell]],
) -> Path:
    """Write ``rows`` under ``header`` to ``path`` as UTF-8 CSV.

    Parameters
    ----------
    path : Path
        Destination file; parent directories are created.
    header : cabc.Sequence[str]
        Column names, each carrying its unit (for example ``r_m``).
    rows : cabc.Iterable[cabc.Sequence[Cell]]
        Data rows; every row must match the header width.

    Returns
    -------
    Path
        ``path``, for chaining into the manifest.

    Raises
    ------
    OutputError
        If a row width differs from the header or the file cannot be written.
    """
    width = len(header)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            for index, row in enumerate(rows):
                if len(row) != width:
                    message = (
                        f"row {index} of {path.name} has {len(row)} cells; "
                        f"expected {width}."
                    )
                    raise OutputError(message)
                writer.writerow([_format(cell) for cell in row])
    except OSError as exc:
        message = f"cannot write {path}: {exc}"
        raise OutputError(message) from exc
    LOGGER.debug("wrote %s", path)
    return path


def read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    """Return the header and raw rows of a CSV written by :func:`write_csv`."""
    with path.open(encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, [])
        return header, list(reader)
