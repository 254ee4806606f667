"""``cellflow passage``: first-passage tables and the noise sweep."""

from __future__ import annotations

import logging
import math
import typing as typ

from cellflow import passage as passage_times
from cellflow.commands._shared import command_run, format_rows
from cellflow.outputs import finite_or_none, records, write_csv, write_json

if typ.TYPE_CHECKING:  # pragma: no cover - typing helper only
    import collections.abc as cabc
    from pathlib import Path

    from cellflow.config import CellflowConfig
    from cellflow.passage import PassageTable

LOGGER = logging.getLogger(__name__)

TABLE_HEADER: typ.Final[tuple[str, ...]] = (
    "n_users",
    "tau_step_units",
    "tau_cum_units",
    "tau_cum_s",
    "growth_slope",
)
SWEEP_HEADER: typ.Final[tuple[str, ...]] = (
    "noise_normalized",
    "inverse_noise",
    "tau_cum_units",
    "fitted_tau_cum_units",
)


def table_filename(sigma2: float) -> str:
    """Return the CSV name of the table for ``sigma2``.

    Examples
    --------
    >>> table_filename(0.01)
    'passage_sigma2_0.01.csv'
    """
    return f"passage_sigma2_{sigma2:g}.csv"


def _table_rows(
    table: PassageTable,
) -> cabc.Iterator[tuple[int, float, float, float, float]]:
    """Yield table rows ending at ``n_max`` with the local growth slope."""
    slopes = passage_times.growth_slopes(table)
    scale = table.seconds_scale
    n_max = table.tau_step.size
    for n in range(n_max + 1):
        step = float(table.tau_step[n]) if n < n_max else math.nan
        cumulative = float(table.tau_cum[n])
        slope = float(slopes[n - 1]) if 1 <= n <= slopes.size else math.nan
        yield n, step, cumulative, cumulative * scale, slope


def run(configuration: CellflowConfig, output_dir: Path) -> str:
    """Tabulate mean passage times and fit the ``1 / sigma2`` sweep.

    Writes one ``passage_sigma2_<level>.csv`` per ``passage.noise_levels``
    entry, ``passage_sweep.csv`` and ``passage.json``. Times are in chain
    units with a seconds column derived from the ``[network]`` bandwidth and
    file size.

    Raises
    ------
    ParameterError
        If ``epsilon`` or a noise level is invalid.
    """  # noqa: DOC502 -- raised by cellflow.passage
    section = configuration.passage
    method = passage_times.PassageMethod(section.method)
    scale = passage_times.seconds_per_unit(configuration.network.to_params())
    curves: list[records.PassageCurveRecord] = []
    with command_run("passage", configuration, output_dir) as recorder:
        for sigma2 in section.noise_levels:
            table = passage_times.build_table(
                section.max_users,
                epsilon=section.epsilon,
                sigma2=sigma2,
                method=method,
                seconds_scale=scale,
            )
            recorder.register(
                write_csv(
                    output_dir / table_filename(sigma2),
                    TABLE_HEADER,
                    _table_rows(table),
                )
            )
            slopes = passage_times.growth_slopes(table)
            final = float(table.tau_cum[-1])
            curves.append(
                records.PassageCurveRecord(
                    noise_normalized=sigma2,
                    max_users=section.max_users,
                    tau_cum_final=final,
                    tau_cum_final_s=final * scale,
                    final_growth_slope=finite_or_none(float(slopes[-1]))
                    if slopes.size
                    else None,
                )
            )
        sweep = passage_times.tau_sigma_sweep(
            section.sweep_users, section.epsilon, section.sweep_grid()
        )
        fitted = sweep.slope * sweep.inverse_sigma2 + sweep.intercept
        recorder.register(
            write_csv(
                output_dir / "passage_sweep.csv",
                SWEEP_HEADER,
                zip(
                    (1.0 / sweep.inverse_sigma2).tolist(),
                    sweep.inverse_sigma2.tolist(),
                    sweep.tau_cum.tolist(),
                    fitted.tolist(),
                    strict=True,
                ),
            )
        )
        report = records.PassageReport(
            epsilon=section.epsilon,
            method=str(method),
            seconds_per_unit=scale,
            curves=tuple(curves),
            sweep=records.NoiseSweepRecord(
                users=sweep.n,
                epsilon=sweep.epsilon,
                slope=sweep.slope,
                intercept=sweep.intercept,
                r_squared=sweep.r_squared,
            ),
        )
        recorder.register(write_json(output_dir / "passage.json", report))
    LOGGER.info(
        "passage: %d table(s); sweep slope %.6g, R^2 %.6f",
        len(curves),
        sweep.slope,
        sweep.r_squared,
    )
    table_text = format_rows(
        ("noise_normalized", "max_users", "tau_cum_units", "tau_cum_s"),
        (
            (c.noise_normalized, c.max_users, c.tau_cum_final, c.tau_cum_final_s)
            for c in curves
        ),
    )
    return (
        f"{table_text}\n\nSweep at n={sweep.n}: slope {sweep.slope:.6g}, "
        f"intercept {sweep.intercept:.6g}, R^2 {sweep.r_squared:.6f}"
    )
