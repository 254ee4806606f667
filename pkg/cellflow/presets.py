"""Named experiments producing the plot-ready data of each published figure.

A preset derives one or more configurations from the loaded one, runs the
matching commands into ``<out>/figN/`` sub-directories, and, where a figure
combines several runs, writes a collated CSV next to them. Only the keys a
figure fixes are overridden; horizons, replica counts, grids and seeds come
from the loaded configuration.
"""

from __future__ import annotations

import dataclasses as dc
import logging
import typing as typ

from cellflow.commands import critical, passage, simulate, solve_so, sweep_fo
from cellflow.commands._shared import command_run, format_rows, lower_fo_nbar
from cellflow.exceptions import CellflowError
from cellflow.meanfield import MeanFieldError
from cellflow.outputs import read_json, records, write_csv

if typ.TYPE_CHECKING:  # pragma: no cover - typing helper only
    import collections.abc as cabc
    from pathlib import Path

    from cellflow.config import CellflowConfig

LOGGER = logging.getLogger(__name__)

#: Arrival rates of the FO/SO/simulation comparisons.
COMPARISON_RATES: typ.Final[tuple[float, ...]] = (0.1, 0.2, 0.3, 0.4, 0.425)
COMPARISON_EXPONENTS: typ.Final[tuple[float, ...]] = (4.0, 5.0)
METASTABLE_RATE = 0.8
CONDITIONAL_RATE = 0.425
PASSAGE_NOISE_LEVELS: typ.Final[tuple[float, ...]] = (0.01, 11.0)


class PresetError(CellflowError):
    """Raised when an unknown preset is requested."""


def _with(
    configuration: CellflowConfig, section: str, **changes: typ.Any
) -> CellflowConfig:
    """Return ``configuration`` with keys of one section replaced."""
    updated = dc.replace(getattr(configuration, section), **changes)
    return dc.replace(configuration, **{section: updated})


def _point_dir(output_dir: Path, eta: float, rate: float) -> Path:
    return output_dir / f"eta{eta:g}_lambda{rate:g}"


def fig1(configuration: CellflowConfig, output_dir: Path) -> str:
    """First-order ``lambda(nbar)`` curves.

    One panel varies ``eta`` at ``l = 0``, the other varies ``l`` at ``eta = 5``.
    """
    by_exponent = _with(
        _with(configuration, "network", inversion_factor=0.0),
        "sweep",
        path_loss_exponents=(3.0, 4.0, 5.0),
        inversion_factors=(),
    )
    by_inversion = _with(
        _with(configuration, "network", path_loss_exponent=5.0),
        "sweep",
        path_loss_exponents=(),
        inversion_factors=(0.0, 0.5, 1.0),
    )
    return "\n\n".join(
        (
            sweep_fo.run(by_exponent, output_dir / "path_loss"),
            sweep_fo.run(by_inversion, output_dir / "inversion"),
        )
    )


def _simulated_point(
    configuration: CellflowConfig, point_dir: Path
) -> records.SimulationReport:
    simulate.run(configuration, point_dir)
    return read_json(point_dir / simulate.SUMMARY_FILENAME, records.SimulationReport)


def fig2(configuration: CellflowConfig, output_dir: Path) -> str:
    """First-order against simulated ``nbar`` for ``eta`` in {4, 5}."""
    header = (
        "path_loss_exponent",
        "lambda_per_m2_s",
        "nbar_fo_users",
        "nbar_sim_users",
        "nbar_sim_ci_low",
        "nbar_sim_ci_high",
    )
    rows: list[
        tuple[float, float, float | None, float | None, float | None, float | None]
    ]
    rows = []
    with command_run("preset-fig2", configuration, output_dir) as recorder:
        for eta in COMPARISON_EXPONENTS:
            for rate in COMPARISON_RATES:
                point = _with(
                    configuration,
                    "network",
                    path_loss_exponent=eta,
                    inversion_factor=0.0,
                    arrival_rate_per_m2_s=rate,
                )
                report = _simulated_point(point, _point_dir(output_dir, eta, rate))
                rows.append(
                    (
                        eta,
                        rate,
                        lower_fo_nbar(point.network.to_params()),
                        report.nbar_users,
                        report.nbar_ci_low,
                        report.nbar_ci_high,
                    )
                )
        recorder.register(write_csv(output_dir / "fig2.csv", header, rows))
    return format_rows(header[:4], (row[:4] for row in rows))


def _so_report(
    configuration: CellflowConfig, point_dir: Path
) -> records.SecondOrderReport | None:
    """Run the second-order solver for one point; ``None`` when it fails."""
    try:
        solve_so.run(configuration, point_dir)
    except MeanFieldError as exc:
        LOGGER.warning("second-order point %s failed: %s", point_dir.name, exc)
        return None
    return read_json(point_dir / "so_report.json", records.SecondOrderReport)


def fig3(configuration: CellflowConfig, output_dir: Path) -> str:
    """FO, SO and simulated ``nbar`` side by side."""
    header = (
        "path_loss_exponent",
        "lambda_per_m2_s",
        "nbar_fo_users",
        "nbar_so_users",
        "nbar_sim_users",
    )
    rows: list[tuple[float, float, float | None, float | None, float | None]] = []
    with command_run("preset-fig3", configuration, output_dir) as recorder:
        for eta in COMPARISON_EXPONENTS:
            for rate in COMPARISON_RATES:
                point = _with(
                    configuration,
                    "network",
                    path_loss_exponent=eta,
                    inversion_factor=0.0,
                    arrival_rate_per_m2_s=rate,
                )
                point_dir = _point_dir(output_dir, eta, rate)
                simulated = _simulated_point(point, point_dir / "simulation")
                summary = point_dir / "simulation" / simulate.SUMMARY_FILENAME
                point = _with(point, "second_order", simulation_summary=str(summary))
                report = _so_report(point, point_dir / "second_order")
                rows.append(
                    (
                        eta,
                        rate,
                        simulated.nbar_fo_users,
                        None if report is None else report.nbar_so_users,
                        simulated.nbar_users,
                    )
                )
        recorder.register(write_csv(output_dir / "fig3.csv", header, rows))
    return format_rows(header, rows)


def fig4(configuration: CellflowConfig, output_dir: Path) -> str:
    """Conditional intensity seen from the origin and from the cell edge."""
    point = _with(
        configuration,
        "network",
        path_loss_exponent=4.0,
        inversion_factor=0.0,
        arrival_rate_per_m2_s=CONDITIONAL_RATE,
    )
    return solve_so.run(point, output_dir)


def fig5(configuration: CellflowConfig, output_dir: Path) -> str:
    """User-count trace of a network in the metastable window."""
    point = _with(
        configuration,
        "network",
        path_loss_exponent=4.0,
        inversion_factor=0.0,
        arrival_rate_per_m2_s=METASTABLE_RATE,
    )
    return simulate.run(point, output_dir)


def fig6(configuration: CellflowConfig, output_dir: Path) -> str:
    """FO ``lambda(nbar)`` at ``eta = 4``, marking the solutions at ``lambda = 0.8``."""
    point = _with(
        _with(
            configuration,
            "network",
            path_loss_exponent=4.0,
            inversion_factor=0.0,
            arrival_rate_per_m2_s=METASTABLE_RATE,
        ),
        "sweep",
        path_loss_exponents=(),
        inversion_factors=(),
    )
    curve = sweep_fo.run(point, output_dir / "sweep")
    regime = critical.run(point, output_dir / "critical")
    return f"{curve}\n\n{regime}"


def _passage_tables(configuration: CellflowConfig, output_dir: Path) -> str:
    point = _with(configuration, "passage", noise_levels=PASSAGE_NOISE_LEVELS)
    return passage.run(point, output_dir)


def fig9(configuration: CellflowConfig, output_dir: Path) -> str:
    """Mean passage time against ``1 / sigma2``."""
    return passage.run(configuration, output_dir)


type PresetRunner = cabc.Callable[[CellflowConfig, Path], str]

#: Mean one-step (fig7) and cumulative (fig8) passage times come from the same
#: tables, in the ``tau_step_units`` and ``tau_cum_units`` columns.
PRESETS: typ.Final[dict[str, PresetRunner]] = {
    "fig1": fig1,
    "fig2": fig2,
    "fig3": fig3,
    "fig4": fig4,
    "fig5": fig5,
    "fig6": fig6,
    "fig7": _passage_tables,
    "fig8": _passage_tables,
    "fig9": fig9,
}


def run_preset(name: str, configuration: CellflowConfig, output_dir: Path) -> str:
    """Run the preset ``name`` into ``output_dir / name``.

    Raises
    ------
    PresetError
        If ``name`` is not a known preset.
    """
    try:
        runner = PRESETS[name]
    except KeyError:
        choices = ", ".join(PRESETS)
        message = f"unknown preset {name!r}; choose one of {choices}."
        raise PresetError(message) from None
    LOGGER.info("preset %s", name)
    return runner(configuration, output_dir / name)
