"""``cellflow sweep-fo``: the first-order ``lambda(nbar)`` curves."""

from __future__ import annotations

import dataclasses as dc
import itertools
import logging
import math
import typing as typ

from cellflow.commands._shared import command_run, format_rows
from cellflow.meanfield import MeanFieldError
from cellflow.meanfield.first_order import lambda_of_nbar, solve_fixed_point
from cellflow.model import critical_rate
from cellflow.numerics import NumericsError
from cellflow.outputs import write_csv
from cellflow.utils import metrics

if typ.TYPE_CHECKING:  # pragma: no cover - typing helper only
    import collections.abc as cabc
    from pathlib import Path

    import numpy as np
    import numpy.typing as npt

    from cellflow.config import CellflowConfig
    from cellflow.meanfield.first_order import FirstOrderOptions
    from cellflow.model import NetworkParams
    from cellflow.numerics import QuadratureSpec

LOGGER = logging.getLogger(__name__)

CURVE_HEADER: typ.Final[tuple[str, ...]] = (
    "path_loss_exponent",
    "inversion_factor",
    "nbar_users",
    "lambda_per_m2_s",
    "critical_rate_per_m2_s",
)
SOLUTION_HEADER: typ.Final[tuple[str, ...]] = (
    "path_loss_exponent",
    "inversion_factor",
    "branch",
    "nbar_users",
    "lambda_per_m2_s",
    "z_star_per_m2",
    "degenerate",
)


@dc.dataclass(frozen=True, slots=True)
class CurveSweep:
    """Rows of one sweep across every requested curve."""

    curves: list[tuple[float, float, float, float, float]]
    solutions: list[tuple[float, float, str, float, float, float, bool]]
    failed_points: int = 0


def curve_params(
    params: NetworkParams,
    path_loss_exponents: cabc.Sequence[float],
    inversion_factors: cabc.Sequence[float],
) -> list[NetworkParams]:
    """Return one parameter set per ``(eta, l)`` combination.

    Empty sequences keep the value already in ``params``.
    """
    exponents = path_loss_exponents or (params.eta,)
    inversions = inversion_factors or (params.inversion,)
    return [
        dc.replace(params, eta=eta, inversion=inversion)
        for eta, inversion in itertools.product(exponents, inversions)
    ]


def _curve_point(nbar: float, params: NetworkParams, spec: QuadratureSpec) -> float:
    """Return ``lambda(nbar)`` or ``nan`` when the quadrature fails."""
    try:
        return lambda_of_nbar(nbar, params, spec)
    except NumericsError as exc:
        metrics.increment_counter("quadrature.warnings", kind=type(exc).__name__)
        LOGGER.warning(
            "lambda(nbar=%g) at eta=%g l=%g failed: %s",
            nbar,
            params.eta,
            params.inversion,
            exc,
        )
        return math.nan


def sweep_curves(
    networks: cabc.Iterable[NetworkParams],
    nbar_grid: npt.NDArray[np.float64],
    options: FirstOrderOptions,
) -> CurveSweep:
    """Evaluate ``lambda(nbar)`` per network and annotate its solutions.

    Quadrature failures leave a ``nan`` in the curve and the sweep goes on.
    Solutions are those at each network's own arrival rate.
    """
    curves: list[tuple[float, float, float, float, float]] = []
    solutions: list[tuple[float, float, str, float, float, float, bool]] = []
    failed = 0
    for params in networks:
        threshold = critical_rate(params)
        for nbar in nbar_grid:
            value = _curve_point(float(nbar), params, options.quadrature)
            if math.isnan(value):
                failed += 1
            curves.append((params.eta, params.inversion, float(nbar), value, threshold))
        try:
            found = solve_fixed_point(params.arrival_rate, params, options)
        except MeanFieldError as exc:
            LOGGER.warning(
                "no solution annotation for eta=%g l=%g: %s",
                params.eta,
                params.inversion,
                exc,
            )
            continue
        solutions.extend(
            (
                params.eta,
                params.inversion,
                str(solution.branch),
                solution.nbar,
                solution.arrival_rate,
                solution.z_star,
                solution.degenerate,
            )
            for solution in found
        )
    return CurveSweep(curves, solutions, failed)


def run(configuration: CellflowConfig, output_dir: Path) -> str:
    """Write ``sweep_fo.csv`` and ``sweep_fo_solutions.csv``.

    One curve is produced for every combination of the ``[sweep]`` path loss
    exponents and inversion factors. Each curve carries ``lambda_c`` as its
    asymptote column.

    Raises
    ------
    MeanFieldError
        If the first-order options are invalid.
    """  # noqa: DOC502 -- raised by FirstOrderOptions
    params = configuration.network.to_params()
    sweep = configuration.sweep
    options = configuration.first_order.to_options(
        configuration.quadrature.to_spec()
    )
    networks = curve_params(params, sweep.path_loss_exponents, sweep.inversion_factors)
    with command_run("sweep-fo", configuration, output_dir) as recorder:
        result = sweep_curves(networks, sweep.grid(), options)
        recorder.register(
            write_csv(output_dir / "sweep_fo.csv", CURVE_HEADER, result.curves)
        )
        recorder.register(
            write_csv(
                output_dir / "sweep_fo_solutions.csv",
                SOLUTION_HEADER,
                result.solutions,
            )
        )
    LOGGER.info(
        "sweep-fo: %d curve(s), %d point(s), %d failed",
        len(networks),
        len(result.curves),
        result.failed_points,
    )
    summary = format_rows(
        ("eta", "l", "branch", "nbar_users", "lambda_per_m2_s"),
        (row[:5] for row in result.solutions),
    )
    return (
        f"Wrote {len(result.curves)} point(s) over {len(networks)} curve(s) "
        f"to {output_dir / 'sweep_fo.csv'}\n\n{summary}"
    )
