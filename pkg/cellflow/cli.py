"""Command-line interface for the :mod:`cellflow` toolkit.

This module is the driving adapter between shell invocations and the command
implementations under :mod:`cellflow.commands`. It owns argument
declarations, environment-variable defaults, logging setup, and loading the
experiment file before dispatching to a command module.

``--config PATH`` and ``--set section.key=value`` are global: they are split
from the tokens before Cyclopts sees them, the configuration is loaded once,
and it is installed as the active configuration for the command. Command
flags (``--out``, ``--seed``, ``--threads``) are applied on top of it.
"""

from __future__ import annotations

import collections.abc as cabc
import dataclasses as dc
import logging
import os
import sys
import typing as typ
from contextlib import AbstractContextManager, nullcontext
from pathlib import Path

from cyclopts import App

from . import commands, config, presets
from .cli_options import (
    CONFIG_REQUIRED_MESSAGE,
    SET_REQUIRED_MESSAGE,
    OutOption,
    PresetArgument,
    SeedOption,
    ThreadsOption,
)
from .exceptions import CellflowError
from .utils import metrics

LOG_LEVEL_ENV_VAR = "CELLFLOW_LOG_LEVEL"
_DEFAULT_LOG_LEVEL = logging.INFO
_LOG_FORMAT = "%(levelname)s: %(message)s"
_CELLFLOW_HANDLER_NAME = "cellflow-cli-handler"
#: Level names accepted by ``CELLFLOW_LOG_LEVEL`` (``WARN`` and ``FATAL`` included).
_LOG_LEVELS: typ.Final[dict[str, int]] = {
    name: level
    for name, level in logging.getLevelNamesMapping().items()
    if level > logging.NOTSET
}

app = App(
    help=(
        "Analyse and simulate spatial birth-death uplink networks. Global "
        "options: --config PATH (experiment file, default ./cellflow.toml) and "
        "--set section.key=value (repeatable override)."
    )
)
LOGGER = logging.getLogger(__name__)

type CommandRunner = cabc.Callable[[config.CellflowConfig, Path], str]


@dc.dataclass(slots=True)
class GlobalOptions:
    """Options split from the command line before dispatch."""

    config_path: Path | None = None
    overrides: list[str] = dc.field(default_factory=list)
    remaining: list[str] = dc.field(default_factory=list)


def _require_value(value: str, message: str) -> str:
    """Ensure ``value`` is usable as an option argument."""
    if not value or value.startswith("-"):
        raise SystemExit(message)
    return value


def _option_value(
    tokens: cabc.Sequence[str], index: int, flag: str, message: str
) -> tuple[str, int]:
    """Parse ``flag <value>`` or ``flag=<value>`` starting at ``index``."""
    argument = tokens[index]
    if argument.startswith(f"{flag}="):
        return _require_value(argument.partition("=")[2], message), index + 1
    try:
        candidate = tokens[index + 1]
    except IndexError as err:
        raise SystemExit(message) from err
    return _require_value(candidate, message), index + 2


def _extract_global_options(tokens: cabc.Sequence[str]) -> GlobalOptions:
    """Split ``--config`` and every ``--set`` from CLI tokens."""
    options = GlobalOptions()
    index = 0
    while index < len(tokens):
        current_argument = tokens[index]
        if current_argument == "--config" or current_argument.startswith(
            "--config="
        ):
            value, index = _option_value(
                tokens, index, "--config", CONFIG_REQUIRED_MESSAGE
            )
            options.config_path = Path(value)
            continue
        if current_argument == "--set" or current_argument.startswith("--set="):
            value, index = _option_value(tokens, index, "--set", SET_REQUIRED_MESSAGE)
            options.overrides.append(value)
            continue
        options.remaining.append(current_argument)
        index += 1
    return options


def _resolve_log_level(value: str | None) -> int:
    """Map ``CELLFLOW_LOG_LEVEL`` to a level; unset or blank means INFO."""
    candidate = (value or "").strip().upper()
    if not candidate:
        return _DEFAULT_LOG_LEVEL
    try:
        return _LOG_LEVELS[candidate]
    except KeyError:
        choices = ", ".join(sorted(_LOG_LEVELS))
        message = (
            f"Invalid {LOG_LEVEL_ENV_VAR} value {value!r}; expected one of: {choices}"
        )
        raise SystemExit(message) from None


def _cli_handler(root_logger: logging.Logger) -> logging.Handler:
    """Return the named CLI handler on ``root_logger``, installing it once."""
    for handler in root_logger.handlers:
        if handler.name == _CELLFLOW_HANDLER_NAME:
            return handler
    handler = logging.StreamHandler()
    handler.name = _CELLFLOW_HANDLER_NAME
    handler.setFormatter(logging.Formatter(_LOG_FORMAT))
    root_logger.addHandler(handler)
    return handler


def _configure_logging(stream: typ.TextIO | None = None) -> None:
    """Route solver and simulation logs to stderr, or to ``stream`` if given."""
    level = _resolve_log_level(os.environ.get(LOG_LEVEL_ENV_VAR))
    root_logger = logging.getLogger()
    root_logger.setLevel(level)
    handler = _cli_handler(root_logger)
    if stream is not None and isinstance(handler, logging.StreamHandler):
        handler.setStream(stream)
    handler.setLevel(level)


def _dispatch_and_print(tokens: cabc.Sequence[str]) -> int:
    """Execute the Cyclopts app and print command results."""
    try:
        result = app(tokens)
    except SystemExit as err:
        code = err.code
        if code is None:
            return 0
        if isinstance(code, int):
            return code
        print(code, file=sys.stderr)
        return 1
    if isinstance(result, int):
        return result
    if result is not None:
        print(result)
    return 0


def _dispatch_with_configuration(
    configuration: config.CellflowConfig, tokens: cabc.Sequence[str]
) -> int:
    """Dispatch ``tokens`` with ``configuration`` active, mapping domain errors."""
    with config.use_configuration(configuration):
        try:
            return _dispatch_and_print(tokens)
        except config.ConfigurationError as exc:
            print(f"Configuration error: {exc}", file=sys.stderr)
            return 1
        except CellflowError as exc:
            print(f"Error: {exc}", file=sys.stderr)
            return 1


def main(argv: cabc.Sequence[str] | None = None) -> int:
    """Entry point for ``python -m cellflow.cli``.

    Parameters
    ----------
    argv : cabc.Sequence[str] | None
        Command-line arguments to parse; defaults to :data:`sys.argv`
        without the program name when :data:`None`.

    Returns
    -------
    int
        The process exit code.

    Examples
    --------
    >>> from cellflow.cli import main
    >>> main(["critical", "--out", "results"])  # doctest: +SKIP
    0
    """
    try:
        if argv is None:
            argv = sys.argv[1:]
        _configure_logging()
        # Flush the accumulated metrics summary when this CLI process exits.
        metrics.register_summary_atexit()
        options = _extract_global_options(list(argv))
        if not options.remaining:
            _dispatch_and_print(options.remaining)  # Print usage message
            return 2  # Standard exit code for missing subcommand
        try:
            configuration = config.load_configuration(
                options.config_path, options.overrides
            )
        except config.ConfigurationError as exc:
            print(f"Configuration error: {exc}", file=sys.stderr)
            return 1
        return _dispatch_with_configuration(configuration, options.remaining)
    except KeyboardInterrupt:
        print("\nOperation cancelled by user.", file=sys.stderr)
        return 130
    except Exception as exc:  # noqa: BLE001 - fallback guard for CLI entry point
        print(f"Unexpected error: {exc}", file=sys.stderr)
        return 1


def _run_with_context(
    runner: CommandRunner,
    *,
    out: Path | None,
    seed: int | None = None,
    threads: int | None = None,
) -> str:
    """Execute ``runner`` with the active configuration and command flags."""
    configuration_scope: AbstractContextManager[object] = nullcontext()
    try:
        configuration = config.current_configuration()
    except config.ConfigurationNotLoadedError:
        # Direct calls outside main() load the default experiment file.
        configuration = config.load_configuration()
        configuration_scope = config.use_configuration(configuration)
    run = configuration.run
    if seed is not None or threads is not None:
        run = dc.replace(
            run,
            seed=run.seed if seed is None else seed,
            threads=run.threads if threads is None else threads,
        )
        configuration = dc.replace(configuration, run=run)
    output_dir = out if out is not None else Path(configuration.output.directory)
    LOGGER.debug("output directory resolved to %s", output_dir)
    with configuration_scope:
        return runner(configuration, output_dir)


@app.command(name="critical")
def critical(*, out: OutOption | None = None) -> str:
    """Report the critical arrival rate and the regime map.

    Parameters
    ----------
    out : OutOption | None
        Output directory; falls back to ``CELLFLOW_OUTPUT_DIR`` and then to
        ``[output] directory``.

    Returns
    -------
    str
        The rendered regime table.
    """
    return _run_with_context(commands.critical.run, out=out)


@app.command(name="sweep-fo")
def sweep_fo(*, out: OutOption | None = None) -> str:
    """Write the first-order ``lambda(nbar)`` curves of the ``[sweep]`` section."""
    return _run_with_context(commands.sweep_fo.run, out=out)


@app.command(name="solve-fo")
def solve_fo(*, out: OutOption | None = None) -> str:
    """Solve the first-order fixed point at the configured arrival rate."""
    return _run_with_context(commands.solve_fo.run, out=out)


@app.command(name="solve-so")
def solve_so(*, out: OutOption | None = None) -> str:
    """Solve the second-order equations and compare with FO and simulation.

    Exits nonzero, after writing ``so_diagnostics.json``, when the solver
    does not converge.
    """
    return _run_with_context(commands.solve_so.run, out=out)


@app.command(name="simulate")
def simulate(
    *,
    out: OutOption | None = None,
    seed: SeedOption | None = None,
    threads: ThreadsOption | None = None,
) -> str:
    """Simulate the configured network over independent replicas.

    Parameters
    ----------
    out : OutOption | None
        Output directory.
    seed : SeedOption | None
        Base seed; replica ``i`` uses ``seed + i``.
    threads : ThreadsOption | None
        Worker processes; results do not depend on it.

    Returns
    -------
    str
        Per-replica summary table.
    """
    return _run_with_context(
        commands.simulate.run, out=out, seed=seed, threads=threads
    )


@app.command(name="passage")
def passage(*, out: OutOption | None = None) -> str:
    """Tabulate mean first-passage times and the noise sweep."""
    return _run_with_context(commands.passage.run, out=out)


@app.command(name="preset")
def preset(
    name: PresetArgument,
    *,
    out: OutOption | None = None,
    seed: SeedOption | None = None,
    threads: ThreadsOption | None = None,
) -> str:
    """Reproduce the data behind one figure under ``<out>/<name>/``.

    Examples
    --------
    >>> from cellflow.cli import preset
    >>> "tau_cum" in preset("fig7", out=Path("results"))  # doctest: +SKIP
    True
    """
    return _run_with_context(
        lambda configuration, output_dir: presets.run_preset(
            name, configuration, output_dir
        ),
        out=out,
        seed=seed,
        threads=threads,
    )


if __name__ == "__main__":  # pragma: no cover - convenience entry point
    raise SystemExit(main())
