"""``cellflow solve-so``: second-order fields and the FO/SO/simulation comparison."""

from __future__ import annotations

import logging
import math
import typing as typ
from pathlib import Path

import numpy as np

from cellflow.commands._shared import command_run, format_rows
from cellflow.meanfield import MeanFieldError, SolverDivergenceError
from cellflow.meanfield.first_order import intensity_fo, solve_fixed_point
from cellflow.meanfield.second_order import (
    center_edge_ratio,
    conditional_intensity,
    solve_so,
)
from cellflow.outputs import finite_or_none, read_json, records, write_csv, write_json

if typ.TYPE_CHECKING:  # pragma: no cover - typing helper only
    import numpy.typing as npt

    from cellflow.config import CellflowConfig
    from cellflow.meanfield.second_order import (
        IntensityField,
        SecondMoment,
        SecondOrderSolution,
    )
    from cellflow.model import NetworkParams
    from cellflow.outputs import ManifestRecorder

LOGGER = logging.getLogger(__name__)

DIAGNOSTICS_FILENAME = "so_diagnostics.json"
GAMMA1_HEADER: typ.Final[tuple[str, ...]] = (
    "r_m",
    "gamma1_per_m2",
    "fo_intensity_per_m2",
)
CONDITIONAL_HEADER: typ.Final[tuple[str, ...]] = (
    "r_m",
    "fo_intensity_per_m2",
    "origin_observer_per_m2",
    "edge_observer_per_m2",
)
COMPARISON_HEADER: typ.Final[tuple[str, ...]] = (
    "lambda_per_m2_s",
    "nbar_fo_users",
    "nbar_so_users",
    "nbar_sim_users",
)


def _fo_reference(
    params: NetworkParams, radii: npt.NDArray[np.float64]
) -> tuple[float | None, npt.NDArray[np.float64]]:
    """Return the lower-branch FO ``nbar`` and its intensity at ``radii``."""
    try:
        solutions = solve_fixed_point(params.arrival_rate, params)
    except MeanFieldError as exc:
        LOGGER.warning("no first-order reference: %s", exc)
        solutions = []
    if not solutions:
        return None, np.full(radii.shape, math.nan)
    lower = solutions[0]
    return lower.nbar, np.asarray(intensity_fo(radii, lower, params))


def _observer_profile(
    gamma1: IntensityField, gamma2: SecondMoment, observer_radius: float
) -> npt.NDArray[np.float64]:
    """Return the conditional profile, or ``nan`` where it is undefined."""
    try:
        return conditional_intensity(gamma1, gamma2, observer_radius)
    except MeanFieldError as exc:
        LOGGER.warning(
            "conditional intensity at r=%g undefined: %s", observer_radius, exc
        )
        return np.full(gamma1.grid.radial_cells, math.nan)


def _or_nan(value: float | None) -> float:
    return math.nan if value is None else value


def _simulated_nbar(summary_path: str) -> float | None:
    """Return ``nbar`` from a simulate summary, when one is configured."""
    if not summary_path:
        return None
    report = read_json(Path(summary_path), records.SimulationReport)
    return finite_or_none(report.nbar_users)


def _write_diagnostics(
    recorder: ManifestRecorder, path: Path, diagnostics: records.SolverDiagnosticsRecord
) -> None:
    """Write and register the diagnostics file."""
    recorder.register(write_json(path, diagnostics))
    LOGGER.error("second-order diagnostics written to %s", path)


def _divergence_record(exc: SolverDivergenceError) -> records.SolverDiagnosticsRecord:
    """Convert the state carried by ``exc`` into a diagnostics record."""
    state = exc.state
    return records.SolverDiagnosticsRecord(
        reason=str(exc),
        iterations=int(state.get("iterations", 0)),
        residual_history=tuple(state.get("residual_history", ())),
        gamma1_residual=finite_or_none(state.get("gamma1_residual")),
        gamma2_residual=finite_or_none(state.get("gamma2_residual")),
        radii_m=tuple(state.get("radii", ())),
        gamma1_per_m2=tuple(state.get("gamma1", ())),
    )


def _stall_record(solution: SecondOrderSolution) -> records.SolverDiagnosticsRecord:
    """Describe a run that hit ``max_outer`` before converging."""
    diagnostics = solution.diagnostics
    return records.SolverDiagnosticsRecord(
        reason=f"no convergence after {diagnostics.iterations} outer iterations.",
        iterations=diagnostics.iterations,
        residual_history=tuple(diagnostics.residual_history),
        gamma1_residual=finite_or_none(diagnostics.gamma1_residual),
        gamma2_residual=finite_or_none(diagnostics.gamma2_residual),
        radii_m=tuple(solution.gamma1.grid.centers.tolist()),
        gamma1_per_m2=tuple(solution.gamma1.values.tolist()),
    )


def run(configuration: CellflowConfig, output_dir: Path) -> str:
    """Solve the second-order equations and compare against FO and simulation.

    Outputs are ``so_gamma1.csv``, ``so_conditional.csv`` (FO intensity and
    the profiles seen from the cell centre and the cell edge),
    ``so_comparison.csv`` and ``so_report.json``. The simulated ``nbar`` is
    read from ``second_order.simulation_summary`` when set.

    Raises
    ------
    UnstableRegimeError
        If ``lambda >= lambda_c`` without ``allow_unstable``.
    SolverDivergenceError
        If the outer residual keeps growing; the state is written to
        ``so_diagnostics.json`` first.
    MeanFieldError
        If the solver stops at ``max_outer`` without converging, after the
        diagnostics file is written.
    """  # noqa: DOC502 -- UnstableRegimeError is raised by solve_so
    params = configuration.network.to_params()
    section = configuration.second_order
    grid = section.to_grid(params.radius)
    diagnostics_path = output_dir / DIAGNOSTICS_FILENAME
    with command_run("solve-so", configuration, output_dir) as recorder:
        nbar_sim = _simulated_nbar(section.simulation_summary)
        try:
            solution = solve_so(params, grid, section.weights, section.to_options())
        except SolverDivergenceError as exc:
            _write_diagnostics(recorder, diagnostics_path, _divergence_record(exc))
            raise
        gamma1, gamma2 = solution.gamma1, solution.gamma2
        radii = grid.centers
        nbar_fo, fo_profile = _fo_reference(params, radii)
        origin = _observer_profile(gamma1, gamma2, 0.0)
        edge = _observer_profile(gamma1, gamma2, params.radius)
        nbar_so = gamma1.mean_users()
        try:
            ratio = finite_or_none(center_edge_ratio(gamma1, gamma2))
        except MeanFieldError:
            ratio = None
        recorder.register(
            write_csv(
                output_dir / "so_gamma1.csv",
                GAMMA1_HEADER,
                zip(
                    radii.tolist(),
                    gamma1.values.tolist(),
                    fo_profile.tolist(),
                    strict=True,
                ),
            )
        )
        recorder.register(
            write_csv(
                output_dir / "so_conditional.csv",
                CONDITIONAL_HEADER,
                zip(
                    radii.tolist(),
                    fo_profile.tolist(),
                    origin.tolist(),
                    edge.tolist(),
                    strict=True,
                ),
            )
        )
        recorder.register(
            write_csv(
                output_dir / "so_comparison.csv",
                COMPARISON_HEADER,
                [(params.arrival_rate, nbar_fo, nbar_so, nbar_sim)],
            )
        )
        diagnostics = solution.diagnostics
        report = records.SecondOrderReport(
            network=records.NetworkRecord.from_params(params),
            weights=tuple(section.weights),
            converged=diagnostics.converged,
            iterations=diagnostics.iterations,
            residual_history=tuple(diagnostics.residual_history),
            gamma1_residual=finite_or_none(diagnostics.gamma1_residual),
            gamma2_residual=finite_or_none(diagnostics.gamma2_residual),
            nbar_fo_users=nbar_fo,
            nbar_so_users=nbar_so,
            nbar_sim_users=nbar_sim,
            center_edge_ratio=ratio,
        )
        recorder.register(write_json(output_dir / "so_report.json", report))
        if not diagnostics.converged:
            _write_diagnostics(recorder, diagnostics_path, _stall_record(solution))
            message = (
                f"second-order solver did not converge in {diagnostics.iterations} "
                f"iterations; see {diagnostics_path}."
            )
            raise MeanFieldError(message)
    LOGGER.info(
        "solve-so: nbar_so=%.6g nbar_fo=%s after %d iteration(s)",
        nbar_so,
        nbar_fo,
        diagnostics.iterations,
    )
    return format_rows(
        COMPARISON_HEADER,
        [(params.arrival_rate, _or_nan(nbar_fo), nbar_so, _or_nan(nbar_sim))],
    )
