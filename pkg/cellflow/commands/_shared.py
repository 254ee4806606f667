"""Helpers shared by the command implementations."""

from __future__ import annotations

import contextlib
import logging
import typing as typ

from cellflow import config as config_module
from cellflow.meanfield import MeanFieldError
from cellflow.meanfield.first_order import solve_fixed_point
from cellflow.outputs import recording
from cellflow.utils import metrics

if typ.TYPE_CHECKING:  # pragma: no cover - typing helper only
    import collections.abc as cabc
    from pathlib import Path

    from cellflow.config import CellflowConfig
    from cellflow.model import NetworkParams
    from cellflow.outputs import ManifestRecorder

LOGGER = logging.getLogger(__name__)


@contextlib.contextmanager
def command_run(
    command: str,
    configuration: CellflowConfig,
    output_dir: Path,
    seeds: cabc.Sequence[int] = (),
) -> cabc.Iterator[ManifestRecorder]:
    """Time ``command`` and wrap its body in a run manifest.

    The effective configuration is written next to the outputs so the
    manifest's ``config_sha256`` can be checked against it.

    Yields
    ------
    ManifestRecorder
        Recorder the command registers its outputs with.
    """
    output_dir.mkdir(parents=True, exist_ok=True)
    LOGGER.info("%s: writing outputs to %s", command, output_dir)
    dumped = config_module.dump_configuration(configuration)
    digest = config_module.configuration_digest(configuration)
    with (
        metrics.timed("command.duration", command=command),
        recording(output_dir, command, digest, seeds) as recorder,
    ):
        config_path = output_dir / "config.toml"
        config_path.write_text(dumped, encoding="utf-8")
        recorder.register(config_path)
        yield recorder


def lower_fo_nbar(params: NetworkParams) -> float | None:
    """Return the lower-branch first-order ``nbar``, or ``None`` if it is absent."""
    try:
        solutions = solve_fixed_point(params.arrival_rate, params)
    except MeanFieldError as exc:
        LOGGER.warning("first-order nbar unavailable: %s", exc)
        return None
    return solutions[0].nbar if solutions else None


def format_rows(
    header: cabc.Sequence[str], rows: cabc.Iterable[cabc.Sequence[object]]
) -> str:
    """Return ``rows`` as a left-aligned text table under ``header``.

    Examples
    --------
    >>> print(format_rows(("a", "bb"), [(1, 2)]))
    a  bb
    1  2
    """
    text_rows = [list(header)] + [[_cell(value) for value in row] for row in rows]
    widths = [
        max(len(row[column]) for row in text_rows) for column in range(len(header))
    ]
    return "\n".join(
        "  ".join(cell.ljust(width) for cell, width in zip(row, widths, strict=True))
        .rstrip()
        for row in text_rows
    )


def _cell(value: object) -> str:
    """Render one human-table cell; ``None`` is blank."""
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)
