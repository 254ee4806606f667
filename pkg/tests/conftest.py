"""Pytest configuration for the cellflow test-suite."""

from __future__ import annotations

import collections.abc as cabc
import os
import textwrap
import typing as typ
from pathlib import Path

import pytest

if typ.TYPE_CHECKING:
    from cellflow.config import CellflowConfig

pytest_plugins = (
    "tests.bdd.steps.experiment_fixtures",
    "tests.bdd.steps.test_cli_steps",
    "tests.bdd.steps.test_solver_steps",
)

#: Small horizons and grids that keep command-level tests fast.
FAST_EXPERIMENT = """
[network]
arrival_rate_per_m2_s = 0.3

[run]
seed = 11

[first_order]
grid_points = 120

[sweep]
nbar_min_users = 0.1
nbar_max_users = 100.0
points = 12

[second_order]
radial_cells = 16
angular_cells = 8
max_outer = 120
tolerance = 1e-4

[simulation]
events = 4000
replicas = 2
snapshot_every = 200
annuli = 10

[passage]
max_users = 200
noise_levels = [0.01, 11.0]
sweep_users = 150
sweep_points = 6
"""


#: Per-test limit in seconds for ``slow`` tests; the default comes from pyproject.
SLOW_TIMEOUT_S = 3600


def pytest_collection_modifyitems(items: list[pytest.Item]) -> None:
    """Lift the per-test timeout for ``slow`` tests without their own limit."""
    for item in items:
        if item.get_closest_marker("slow") and not item.get_closest_marker("timeout"):
            item.add_marker(pytest.mark.timeout(SLOW_TIMEOUT_S))


@pytest.fixture
def repo_root() -> Path:
    """Return the repository root directory.

    Returns
    -------
    Path
        Absolute path to the repository root.

    Examples
    --------
    >>> def test_reads_project(repo_root):  # doctest: +SKIP
    ...     assert (repo_root / "pyproject.toml").exists()
    """
    return Path(__file__).resolve().parent.parent


@pytest.fixture(autouse=True)
def _restore_output_env() -> cabc.Iterator[None]:
    """Ensure tests do not leak ``CELLFLOW_OUTPUT_DIR`` between runs."""
    from cellflow.cli_options import OUTPUT_DIR_ENV_VAR

    original = os.environ.get(OUTPUT_DIR_ENV_VAR)
    try:
        yield
    finally:
        if original is None:
            os.environ.pop(OUTPUT_DIR_ENV_VAR, None)
        else:
            os.environ[OUTPUT_DIR_ENV_VAR] = original


@pytest.fixture(autouse=True)
def _reset_metrics() -> cabc.Iterator[None]:
    """Give every test an empty metrics registry."""
    from cellflow.utils import metrics

    metrics.reset()
    yield
    metrics.reset()


@pytest.fixture
def write_config(tmp_path: Path) -> cabc.Callable[[str], Path]:
    """Return a helper that writes ``cellflow.toml`` into ``tmp_path``.

    Parameters
    ----------
    tmp_path : Path
        Per-test temporary directory provided by pytest.

    Returns
    -------
    cabc.Callable[[str], Path]
        Callable that writes the given body and returns the config path.

    Examples
    --------
    >>> def test_writes_config(write_config):  # doctest: +SKIP
    ...     path = write_config("[run]")
    ...     assert path.read_text().startswith("[run]")
    """
    from cellflow import config as config_module

    def _write(body: str) -> Path:
        config_path = tmp_path / config_module.CONFIG_FILENAME
        config_path.write_text(textwrap.dedent(body).lstrip(), encoding="utf-8")
        return config_path

    return _write


@pytest.fixture
def fast_config(write_config: cabc.Callable[[str], Path]) -> Path:
    """Persist the fast experiment used by command and CLI tests."""
    return write_config(FAST_EXPERIMENT)


@pytest.fixture
def fast_configuration(fast_config: Path) -> CellflowConfig:
    """Return the loaded fast experiment as a ``CellflowConfig``."""
    from cellflow import config as config_module

    return config_module.load_configuration(fast_config)
