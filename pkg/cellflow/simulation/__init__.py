"""Monte Carlo simulation of the spatial birth-death uplink process."""

from __future__ import annotations

from cellflow.simulation.conservation import (
    MIN_DEPARTURES,
    ConservationReport,
    rate_conservation_check,
)
from cellflow.simulation.engine import (
    SimMode,
    SimOptions,
    divergence_threshold,
    replica_rng,
    run_replica,
    step_rule_epsilon,
)
from cellflow.simulation.runner import (
    HittingTimes,
    Interval,
    SimulationResult,
    hitting_time,
    mean_interval,
    multi_band_run,
    run,
)
from cellflow.simulation.state import SimState, SimulationError, sample_disk
from cellflow.simulation.summary import TraceSummary

__all__ = [
    "MIN_DEPARTURES",
    "ConservationReport",
    "HittingTimes",
    "Interval",
    "SimMode",
    "SimOptions",
    "SimState",
    "SimulationError",
    "SimulationResult",
    "TraceSummary",
    "divergence_threshold",
    "hitting_time",
    "mean_interval",
    "multi_band_run",
    "rate_conservation_check",
    "replica_rng",
    "run",
    "run_replica",
    "sample_disk",
    "step_rule_epsilon",
]
