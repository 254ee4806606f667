"""``cellflow simulate``: replica traces, summary, intensity and conservation."""

from __future__ import annotations

import logging
import typing as typ

from cellflow import simulation
from cellflow.commands._shared import command_run, format_rows, lower_fo_nbar
from cellflow.outputs import finite_or_none, records, write_csv, write_json

if typ.TYPE_CHECKING:  # pragma: no cover - typing helper only
    from pathlib import Path

    from cellflow.config import CellflowConfig
    from cellflow.model import NetworkParams
    from cellflow.outputs import ManifestRecorder
    from cellflow.simulation import (
        ConservationReport,
        HittingTimes,
        SimOptions,
        SimulationResult,
        TraceSummary,
    )

LOGGER = logging.getLogger(__name__)

SUMMARY_FILENAME = "summary.json"
TRACE_HEADER: typ.Final[tuple[str, ...]] = ("t_s", "users")
INTENSITY_HEADER: typ.Final[tuple[str, ...]] = (
    "replica",
    "r_m",
    "intensity_per_m2",
    "origin_observer_per_m2",
    "edge_observer_per_m2",
)
CONSERVATION_HEADER: typ.Final[tuple[str, ...]] = (
    "replica",
    "r_m",
    "relative_error",
)


def _write_trace(
    recorder: ManifestRecorder, output_dir: Path, trace: TraceSummary
) -> None:
    """Write the ``(t, N_t)`` snapshots of one replica."""
    path = output_dir / "traces" / f"replica_{trace.replica:03d}.csv"
    rows = zip(
        trace.snapshot_times.tolist(), trace.snapshot_counts.tolist(), strict=True
    )
    recorder.register(write_csv(path, TRACE_HEADER, rows))


def _intensity_rows(
    traces: tuple[TraceSummary, ...],
) -> list[tuple[int, float, float, float, float]]:
    return [
        (trace.replica, *values)
        for trace in traces
        for values in zip(
            trace.annulus_midpoints.tolist(),
            trace.intensity.tolist(),
            trace.origin_intensity.tolist(),
            trace.edge_intensity.tolist(),
            strict=True,
        )
    ]


def _conservation_rows(
    checks: list[tuple[TraceSummary, ConservationReport]],
) -> list[tuple[int, float, float]]:
    return [
        (trace.replica, radius, error)
        for trace, report in checks
        for radius, error in zip(
            trace.annulus_midpoints.tolist(),
            report.annulus_errors.tolist(),
            strict=True,
        )
    ]


def _hitting_record(hits: HittingTimes) -> records.HittingRecord:
    """Summarise the first-passage sample, tolerating an empty one."""
    if hits.times.size == 0:
        return records.HittingRecord(
            target_users=hits.target,
            samples=0,
            censored=hits.censored,
            mean_s=None,
            variance_s2=None,
            ci_low_s=None,
            ci_high_s=None,
        )
    interval = hits.interval
    return records.HittingRecord(
        target_users=hits.target,
        samples=interval.samples,
        censored=hits.censored,
        mean_s=finite_or_none(interval.mean),
        variance_s2=finite_or_none(hits.variance),
        ci_low_s=finite_or_none(interval.low),
        ci_high_s=finite_or_none(interval.high),
    )


def build_report(
    result: SimulationResult,
    checks: list[tuple[TraceSummary, ConservationReport]],
    *,
    nbar_fo: float | None,
    hitting: records.HittingRecord | None = None,
) -> records.SimulationReport:
    """Assemble the summary record of a finished simulation."""
    options = result.options
    replicas = tuple(
        records.ReplicaRecord(
            replica=trace.replica,
            seed=trace.seed,
            events=trace.events,
            clock_s=trace.clock,
            nbar_users=finite_or_none(trace.nbar),
            departures=trace.departures,
            diverged=trace.diverged,
            escape_time_s=trace.escape_time,
            conservation_error=finite_or_none(report.aggregate_error),
            conservation_low_confidence=report.low_confidence,
        )
        for trace, report in checks
    )
    return records.SimulationReport(
        network=records.NetworkRecord.from_params(result.params),
        mode=str(options.mode),
        bands=options.bands,
        seeds=tuple(options.seed + index for index in range(options.replicas)),
        n_effective=result.n_effective,
        failed_replicas=result.failed,
        nbar_users=finite_or_none(result.nbar.mean),
        nbar_stderr=finite_or_none(result.nbar.stderr),
        nbar_ci_low=finite_or_none(result.nbar.low),
        nbar_ci_high=finite_or_none(result.nbar.high),
        nbar_fo_users=nbar_fo,
        diverged=result.diverged,
        replicas=replicas,
        hitting=hitting,
    )


def _simulate(params: NetworkParams, options: SimOptions) -> SimulationResult:
    if options.bands > 1:
        return simulation.multi_band_run(params, options)
    return simulation.run(params, options)


def run(configuration: CellflowConfig, output_dir: Path) -> str:
    """Simulate the configured network and write its artefacts.

    Writes one ``traces/replica_NNN.csv`` per successful replica,
    ``summary.json``, ``intensity.csv`` and ``conservation.csv``. When
    ``simulation.hitting_target_users`` is set, first-passage times from an
    empty cell are sampled first and added to the summary.

    Raises
    ------
    SimulationError
        If the options are invalid, hitting times are requested outside the
        exact mode, or every replica failed.
    """  # noqa: DOC502 -- raised by the simulation package
    params = configuration.network.to_params()
    section = configuration.simulation
    options = section.to_options(configuration.run)
    seeds = [options.seed + index for index in range(options.replicas)]
    with command_run("simulate", configuration, output_dir, seeds) as recorder:
        hitting = None
        if section.hitting_target_users:
            hits = simulation.hitting_time(
                params,
                section.hitting_target_users,
                options,
                replicas=section.hitting_replicas,
            )
            hitting = _hitting_record(hits)
        result = _simulate(params, options)
        checks = [
            (trace, simulation.rate_conservation_check(trace, params))
            for trace in result.replicas
        ]
        for trace in result.replicas:
            _write_trace(recorder, output_dir, trace)
        report = build_report(
            result, checks, nbar_fo=lower_fo_nbar(params), hitting=hitting
        )
        recorder.register(write_json(output_dir / SUMMARY_FILENAME, report))
        recorder.register(
            write_csv(
                output_dir / "intensity.csv",
                INTENSITY_HEADER,
                _intensity_rows(result.replicas),
            )
        )
        recorder.register(
            write_csv(
                output_dir / "conservation.csv",
                CONSERVATION_HEADER,
                _conservation_rows(checks),
            )
        )
    table = format_rows(
        ("replica", "nbar_users", "clock_s", "diverged", "escape_time_s"),
        (
            (r.replica, r.nbar_users, r.clock_s, r.diverged, r.escape_time_s)
            for r in report.replicas
        ),
    )
    nbar = "undefined" if report.nbar_users is None else f"{report.nbar_users:.6g}"
    return (
        f"nbar = {nbar} users over {report.n_effective} "
        f"replica(s); diverged: {report.diverged}\n\n{table}"
    )
