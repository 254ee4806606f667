"""Replica orchestration, aggregation and hitting-time experiments."""

from __future__ import annotations

import concurrent.futures as cf
import dataclasses as dc
import functools
import logging
import math
import typing as typ

import numpy as np
import scipy as sp

from cellflow.exceptions import CellflowError
from cellflow.simulation.engine import (
    SimMode,
    SimOptions,
    apply_exact_event,
    next_exact_event,
    replica_rng,
    run_replica,
)
from cellflow.simulation.state import SimState, SimulationError
from cellflow.utils import metrics

if typ.TYPE_CHECKING:
    import collections.abc as cabc

    from cellflow.model import NetworkParams
    from cellflow.simulation.state import FloatArray
    from cellflow.simulation.summary import TraceSummary

LOGGER = logging.getLogger(__name__)

CONFIDENCE_LEVEL = 0.95


@dc.dataclass(frozen=True, slots=True)
class Interval:
    """Replica mean with its standard error and Student-t interval."""

    mean: float
    stderr: float
    low: float
    high: float
    samples: int

    @property
    def half_width(self) -> float:
        """Half the width of the confidence interval."""
        return 0.5 * (self.high - self.low)

    def contains(self, value: float) -> bool:
        """Return whether ``value`` lies inside the interval."""
        return self.low <= value <= self.high


def mean_interval(
    values: cabc.Sequence[float] | FloatArray, level: float = CONFIDENCE_LEVEL
) -> Interval:
    """Return the mean of ``values`` and its two-sided Student-t interval.

    A single sample has no spread estimate; its standard error and bounds
    are ``nan``.

    Raises
    ------
    SimulationError
        If ``values`` is empty.

    Examples
    --------
    >>> mean_interval([1.0, 2.0, 3.0]).mean
    2.0
    """
    data = np.asarray(values, dtype=np.float64)
    if data.size == 0:
        message = "cannot summarise an empty sample."
        raise SimulationError(message)
    mean = float(data.mean())
    if data.size == 1:
        return Interval(mean, math.nan, math.nan, math.nan, 1)
    stderr = float(data.std(ddof=1) / math.sqrt(data.size))
    quantile = float(sp.stats.t.ppf(0.5 + 0.5 * level, data.size - 1))
    return Interval(
        mean, stderr, mean - quantile * stderr, mean + quantile * stderr, data.size
    )


@dc.dataclass(frozen=True, slots=True)
class SimulationResult:
    """Replica summaries of one run and their aggregate.

    Attributes
    ----------
    params : NetworkParams
        Simulated network.
    options : SimOptions
        Options the replicas ran with.
    replicas : tuple[TraceSummary, ...]
        Successful replicas ordered by index.
    failed : tuple[int, ...]
        Indices of replicas that raised.
    nbar : Interval
        Across-replica interval of the time-averaged user count per band,
        over the replicas that observed post-warm-up time.
    """

    params: NetworkParams
    options: SimOptions
    replicas: tuple[TraceSummary, ...]
    failed: tuple[int, ...]
    nbar: Interval

    @property
    def n_effective(self) -> int:
        """Number of replicas that completed."""
        return len(self.replicas)

    @property
    def diverged(self) -> bool:
        """Whether any replica tripped the divergence rule."""
        return any(summary.diverged for summary in self.replicas)


def _guarded_replica(
    params: NetworkParams, options: SimOptions, replica: int
) -> TraceSummary | str:
    """Run a replica, returning the failure text instead of raising."""
    try:
        return run_replica(params, options, replica)
    except CellflowError as exc:
        return f"{type(exc).__name__}: {exc}"


def _collect(
    params: NetworkParams, options: SimOptions
) -> list[tuple[int, TraceSummary | str]]:
    """Run every replica serially or in worker processes."""
    indices = range(options.replicas)
    task = functools.partial(_guarded_replica, params, options)
    if options.threads == 1 or options.replicas == 1:
        return [(index, task(index)) for index in indices]
    workers = min(options.threads, options.replicas)
    with cf.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(zip(indices, pool.map(task, indices), strict=True))


def run(params: NetworkParams, options: SimOptions) -> SimulationResult:
    """Run ``options.replicas`` independent replicas and aggregate them.

    Replicas are deterministic given their seeds, so the result does not
    depend on ``options.threads``. A replica that raises a domain error is
    logged and left out of the aggregate.

    Parameters
    ----------
    params : NetworkParams
        Network to simulate.
    options : SimOptions
        Simulation controls.

    Returns
    -------
    SimulationResult
        Per-replica summaries, failed indices, and the ``nbar`` interval.

    Raises
    ------
    SimulationError
        If every replica failed.
    """
    LOGGER.info(
        "simulating %d replica(s) of %d %s events at lambda=%g",
        options.replicas,
        options.events,
        options.mode,
        params.arrival_rate,
    )
    summaries: list[TraceSummary] = []
    failed: list[int] = []
    for index, outcome in _collect(params, options):
        if isinstance(outcome, str):
            LOGGER.warning("replica %d failed: %s", index, outcome)
            metrics.increment_counter("sim.replicas", status="failed")
            failed.append(index)
            continue
        _record(outcome)
        summaries.append(outcome)
    if not summaries:
        message = f"all {options.replicas} simulation replicas failed."
        raise SimulationError(message)
    observed = [summary.nbar for summary in summaries if math.isfinite(summary.nbar)]
    if len(observed) < len(summaries):
        LOGGER.warning(
            "%d replica(s) stopped before warm-up ended; excluded from nbar",
            len(summaries) - len(observed),
        )
    nbar = (
        mean_interval(observed)
        if observed
        else Interval(math.nan, math.nan, math.nan, math.nan, 0)
    )
    LOGGER.info(
        "nbar=%.6g (stderr %.3g) over %d replica(s)",
        nbar.mean,
        nbar.stderr,
        len(summaries),
    )
    return SimulationResult(params, options, tuple(summaries), tuple(failed), nbar)


def _record(summary: TraceSummary) -> None:
    """Record the metrics of one finished replica in this process."""
    metrics.increment_counter("sim.replicas", status="ok")
    metrics.increment_counter("sim.events", amount=summary.events, mode=summary.mode)
    metrics.observe_duration("sim.replica.duration", summary.wall_seconds)
    if summary.diverged:
        metrics.increment_counter("sim.divergences")


def multi_band_run(params: NetworkParams, options: SimOptions) -> SimulationResult:
    """Run the discretised dynamics with ``options.bands`` frequency bands.

    Users arrive at ``N_f lambda`` per unit area, re-draw their band every
    step, and interfere only within their band. The reported ``nbar`` is per
    band.

    Raises
    ------
    SimulationError
        If ``options`` is not in the discrete mode.
    """  # noqa: DOC502 -- run() failures propagate
    if options.mode is not SimMode.DISCRETE:
        message = "the multi-band simulation runs in the discrete mode only."
        raise SimulationError(message)
    return run(params, options)


@dc.dataclass(frozen=True, slots=True)
class HittingTimes:
    """First-passage observations of the user count.

    Attributes
    ----------
    target : int
        User count whose first passage is timed.
    times : FloatArray
        Hitting times in seconds of the replicas that reached ``target``.
    censored : int
        Replicas that exhausted ``max_events`` first.
    """

    target: int
    times: FloatArray
    censored: int

    @property
    def interval(self) -> Interval:
        """Interval for the mean hitting time of the uncensored replicas."""
        return mean_interval(self.times)

    @property
    def variance(self) -> float:
        """Sample variance of the uncensored hitting times."""
        if self.times.size < 2:
            return math.nan
        return float(self.times.var(ddof=1))


def first_passage(
    params: NetworkParams, target: int, rng: np.random.Generator, max_events: int
) -> float | None:
    """Return the first time an empty cell holds ``target`` users, or ``None``."""
    state = SimState(params)
    for _ in range(max_events):
        event = next_exact_event(state, rng)
        if event is None:
            return None
        apply_exact_event(state, rng, event)
        if state.count == target:
            return state.clock
    return None


def hitting_time(
    params: NetworkParams,
    n_target: int,
    options: SimOptions,
    *,
    replicas: int = 10_000,
    max_events: int = 1_000_000,
) -> HittingTimes:
    """Sample the first passage time from an empty cell to ``n_target`` users.

    Parameters
    ----------
    params : NetworkParams
        Network to simulate; full inversion matches the one-dimensional chain
        of :mod:`cellflow.passage`.
    n_target : int
        Target user count.
    options : SimOptions
        Must select the exact mode; ``options.seed`` seeds replica 0.
    replicas : int, optional
        Number of independent first passages.
    max_events : int, optional
        Events after which a replica is censored.

    Returns
    -------
    HittingTimes
        Observed hitting times and the censored count.

    Raises
    ------
    SimulationError
        If the mode is not exact, or ``n_target``, ``replicas`` or
        ``max_events`` is not positive.
    """
    if options.mode is not SimMode.EXACT:
        message = "hitting times are measured in the exact mode only."
        raise SimulationError(message)
    if n_target < 1 or replicas < 1 or max_events < 1:
        message = (
            "n_target, replicas and max_events must be positive; received "
            f"{n_target}, {replicas}, {max_events}."
        )
        raise SimulationError(message)
    times: list[float] = []
    censored = 0
    for replica in range(replicas):
        rng = replica_rng(options.seed + replica)
        hit = first_passage(params, n_target, rng, max_events)
        if hit is None:
            censored += 1
        else:
            times.append(hit)
    if censored:
        LOGGER.warning(
            "%d of %d first passages to %d users were censored",
            censored,
            replicas,
            n_target,
        )
    return HittingTimes(n_target, np.asarray(times, dtype=np.float64), censored)
