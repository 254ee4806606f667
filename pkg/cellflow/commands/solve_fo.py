"""``cellflow solve-fo``: first-order solutions and their radial profiles."""

from __future__ import annotations

import logging
import typing as typ

import numpy as np

from cellflow.commands._shared import command_run, format_rows
from cellflow.meanfield.first_order import (
    intensity_fo,
    metastable_window,
    solve_fixed_point,
)
from cellflow.model import classify_regime
from cellflow.outputs import records, write_csv, write_json

if typ.TYPE_CHECKING:  # pragma: no cover - typing helper only
    from pathlib import Path

    from cellflow.config import CellflowConfig

LOGGER = logging.getLogger(__name__)

PROFILE_POINTS = 101
PROFILE_HEADER: typ.Final[tuple[str, ...]] = ("branch", "r_m", "intensity_per_m2")


def run(configuration: CellflowConfig, output_dir: Path) -> str:
    """Solve the first-order fixed point at the configured arrival rate.

    Writes ``fo_solutions.json`` (regime, ``lambda_c``, window edge and every
    solution) and ``fo_profile.csv`` holding ``Z / G(r)`` on a uniform radius
    grid for each branch.

    Raises
    ------
    MeanFieldError
        If the scan range is exhausted or the regime cannot be classified.
    """  # noqa: DOC502 -- propagated from the first-order solver
    params = configuration.network.to_params()
    options = configuration.first_order.to_options(
        configuration.quadrature.to_spec()
    )
    with command_run("solve-fo", configuration, output_dir) as recorder:
        solutions = solve_fixed_point(params.arrival_rate, params, options)
        window = metastable_window(params, options)
        regime = classify_regime(params)
        radii = np.linspace(0.0, params.radius, PROFILE_POINTS)
        profile = [
            (str(solution.branch), float(r), float(value))
            for solution in solutions
            for r, value in zip(
                radii, np.atleast_1d(intensity_fo(radii, solution, params)), strict=True
            )
        ]
        report = records.FirstOrderReport(
            network=records.NetworkRecord.from_params(params),
            critical_rate_per_m2_s=window.critical_rate,
            metastable_upper_edge_per_m2_s=window.upper_edge,
            regime=str(regime.kind),
            solutions=tuple(
                records.FoSolutionRecord(
                    branch=str(solution.branch),
                    z_star=solution.z_star,
                    nbar_users=solution.nbar,
                    arrival_rate_per_m2_s=solution.arrival_rate,
                    residual=solution.residual,
                    degenerate=solution.degenerate,
                )
                for solution in solutions
            ),
        )
        recorder.register(write_json(output_dir / "fo_solutions.json", report))
        recorder.register(
            write_csv(output_dir / "fo_profile.csv", PROFILE_HEADER, profile)
        )
    LOGGER.info(
        "solve-fo: lambda=%g has %d solution(s)", params.arrival_rate, len(solutions)
    )
    if not solutions:
        return (
            f"No first-order solution at lambda={params.arrival_rate:g} "
            f"({regime.kind})."
        )
    table = format_rows(
        ("branch", "nbar_users", "z_star", "residual"),
        ((str(s.branch), s.nbar, s.z_star, s.residual) for s in solutions),
    )
    return f"Regime: {regime.kind}\n\n{table}"
