"""Step implementations for the command-line scenarios."""

from __future__ import annotations

import shlex
import subprocess
import sys
import typing as typ
from pathlib import Path

from pytest_bdd import parsers, scenarios, then, when

from cellflow import config as config_module
from cellflow.outputs import MANIFEST_FILENAME, RunManifest, read_json

if typ.TYPE_CHECKING:  # pragma: no cover - typing helpers
    from .cli_run_types import CliRunResult

_FEATURES_DIR = Path(__file__).resolve().parent.parent / "features"

scenarios(str(_FEATURES_DIR / "cli.feature"))


def _run_cli(
    repo_root: Path, experiment_directory: Path, *command_args: str
) -> CliRunResult:
    output_dir = experiment_directory / "out"
    command = [
        sys.executable,
        "-m",
        "cellflow.cli",
        "--config",
        str(experiment_directory / config_module.CONFIG_FILENAME),
        *command_args,
        "--out",
        str(output_dir),
    ]
    completed = subprocess.run(  # noqa: S603
        command,
        check=False,
        cwd=str(repo_root),
        capture_output=True,
        text=True,
    )
    return {
        "returncode": completed.returncode,
        "stdout": completed.stdout,
        "stderr": completed.stderr,
        "output_dir": output_dir,
    }


@when(
    parsers.re(r'I run cellflow "(?P<arguments>[^"]+)"'),
    target_fixture="cli_run",
)
def when_run_cli(
    repo_root: Path, experiment_directory: Path, arguments: str
) -> CliRunResult:
    """Run the CLI as a subprocess against the experiment file."""
    return _run_cli(repo_root, experiment_directory, *shlex.split(arguments))


@when(
    parsers.re(
        r'I run cellflow "(?P<arguments>[^"]+)" with override "(?P<override>[^"]+)"'
    ),
    target_fixture="cli_run",
)
def when_run_cli_with_override(
    repo_root: Path, experiment_directory: Path, arguments: str, override: str
) -> CliRunResult:
    """Run the CLI with one ``--set`` override placed before the command."""
    return _run_cli(
        repo_root, experiment_directory, "--set", override, *shlex.split(arguments)
    )


@then(parsers.parse("the CLI exits with code {expected:d}"))
def then_cli_exit_code(cli_run: CliRunResult, expected: int) -> None:
    """Assert that the CLI terminated with ``expected`` exit code."""
    assert cli_run["returncode"] == expected, cli_run["stderr"]


@then(parsers.parse('the stdout contains "{expected}"'))
def then_stdout_contains(cli_run: CliRunResult, expected: str) -> None:
    """Assert that ``expected`` appears in the captured stdout."""
    assert expected in cli_run["stdout"]


@then(parsers.parse('the stderr contains "{expected}"'))
def then_stderr_contains(cli_run: CliRunResult, expected: str) -> None:
    """Assert that ``expected`` appears in the captured stderr."""
    assert expected in cli_run["stderr"]


@then(parsers.parse('the output directory contains "{relative}"'))
def then_output_contains(cli_run: CliRunResult, relative: str) -> None:
    """Assert that the command wrote ``relative`` under ``--out``."""
    assert (cli_run["output_dir"] / relative).is_file()


@then(parsers.parse('the manifest of the run is "{status}"'))
def then_manifest_status(cli_run: CliRunResult, status: str) -> None:
    """Assert the final status recorded in ``manifest.json``."""
    manifest = read_json(cli_run["output_dir"] / MANIFEST_FILENAME, RunManifest)
    assert manifest.status == status


@then(parsers.parse("the manifest lists seeds {first:d} and {second:d}"))
def then_manifest_seeds(cli_run: CliRunResult, first: int, second: int) -> None:
    """Assert the replica seeds recorded for a simulation."""
    manifest = read_json(cli_run["output_dir"] / MANIFEST_FILENAME, RunManifest)
    assert manifest.seeds == (first, second)
