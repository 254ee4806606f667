"""Experiment-file fixtures for CLI scenarios."""

from __future__ import annotations

import textwrap
import typing as typ

import tomlkit
from pytest_bdd import given, parsers

from cellflow import config as config_module

if typ.TYPE_CHECKING:
    from pathlib import Path

#: Horizons and grids small enough for subprocess scenarios.
SCENARIO_EXPERIMENT = """
[network]
arrival_rate_per_m2_s = 0.3

[run]
seed = 5

[first_order]
grid_points = 120

[sweep]
nbar_min_users = 0.1
nbar_max_users = 100.0
points = 10

[simulation]
events = 3000
replicas = 2
snapshot_every = 250
annuli = 8

[passage]
max_users = 120
noise_levels = [0.01, 11.0]
sweep_users = 80
sweep_points = 5
"""


def _set_key(config_path: Path, dotted: str, literal: str) -> None:
    """Set ``section.key`` to the TOML ``literal`` in ``config_path``."""
    section, _, key = dotted.partition(".")
    document = tomlkit.parse(config_path.read_text(encoding="utf-8"))
    table = document.get(section)
    if table is None:
        table = tomlkit.table()
        document.add(section, table)
    table[key] = tomlkit.parse(f"value = {literal}")["value"]
    config_path.write_text(tomlkit.dumps(document), encoding="utf-8")


@given("an experiment directory", target_fixture="experiment_directory")
def given_experiment_directory(tmp_path: Path) -> Path:
    """Provide a directory holding the scenario experiment file.

    Returns
    -------
    Path
        Directory containing ``cellflow.toml``.
    """
    config_path = tmp_path / config_module.CONFIG_FILENAME
    config_path.write_text(
        textwrap.dedent(SCENARIO_EXPERIMENT).lstrip(), encoding="utf-8"
    )
    return tmp_path


@given(parsers.parse("the experiment sets {dotted} to {literal}"))
def given_experiment_sets(
    experiment_directory: Path, dotted: str, literal: str
) -> None:
    """Overwrite one key of the experiment file."""
    _set_key(experiment_directory / config_module.CONFIG_FILENAME, dotted, literal)


@given("the experiment file is removed")
def given_experiment_removed(experiment_directory: Path) -> None:
    """Delete the experiment file so only defaults or ``--config`` remain."""
    (experiment_directory / config_module.CONFIG_FILENAME).unlink()
