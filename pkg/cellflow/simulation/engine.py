"""Event-driven and time-stepped dynamics of the spatial birth-death process.

Two modes share one state and one recorder:

``exact``
    A continuous-time Markov chain simulation. The holding time is
    exponential with rate ``lambda |D| + mu sum_i R_i``; the event is an
    arrival with probability ``lambda |D| / total`` and otherwise the
    departure of user ``i`` with probability ``mu R_i / total``. File sizes
    are memoryless here, so residual bits are not tracked.
``discrete``
    Fixed steps of ``eps_t`` seconds. Each step adds ``Poisson(N_f lambda
    |D| eps_t)`` arrivals with exponential file sizes, serves every user for
    ``R_i eps_t`` bits, and removes users whose residual is exhausted. With
    ``N_f > 1`` bands every user re-draws its band uniformly at each step.

Each replica draws from one Philox stream seeded with ``seed + replica``.
"""

from __future__ import annotations

import dataclasses as dc
import enum
import logging
import math
import time
import typing as typ

import numpy as np

from cellflow.meanfield import MeanFieldError
from cellflow.meanfield.first_order import solve_fixed_point
from cellflow.simulation.state import SimState, SimulationError, sample_disk
from cellflow.simulation.summary import TraceRecorder, TraceSummary

if typ.TYPE_CHECKING:
    from cellflow.model import NetworkParams
    from cellflow.simulation.state import FloatArray

LOGGER = logging.getLogger(__name__)

_DIVERGENCE_FACTOR = 50.0
_FALLBACK_DIVERGENCE_USERS = 1000.0
_MAX_SEED = 2**64


class SimMode(enum.StrEnum):
    """How simulated time advances."""

    EXACT = "exact"
    DISCRETE = "discrete"


@dc.dataclass(frozen=True, slots=True)
class SimOptions:
    """Simulation controls.

    Attributes
    ----------
    mode : SimMode
        Exact event-driven or discretised dynamics.
    events : int
        Horizon in events (exact) or steps (discrete) per replica.
    replicas : int
        Number of independent replicas.
    seed : int
        Base seed; replica ``i`` uses ``seed + i``.
    warmup_fraction : float
        Leading fraction of the horizon excluded from averages.
    bands : int
        Number of frequency bands ``N_f``; more than one needs ``discrete``.
    divergence_users : float
        Count above which a growing trace is declared divergent; ``0``
        selects 50 times the lower first-order solution (1000 without one).
    snapshot_every : int
        Events between ``(t, N_t)`` snapshots.
    annuli : int
        Number of equal-width radial bins.
    step_divisor : float
        Expected arrivals per step are ``1 / step_divisor``.
    threads : int
        Worker processes for replicas.
    drift_window : int
        Events over which growth is measured by the divergence rule.
    recompute_every : int
        Updates between full recomputations of the interference sums.
    """

    mode: SimMode = SimMode.EXACT
    events: int = 1_000_000
    replicas: int = 3
    seed: int = 1
    warmup_fraction: float = 0.2
    bands: int = 1
    divergence_users: float = 0.0
    snapshot_every: int = 1000
    annuli: int = 20
    step_divisor: float = 100.0
    threads: int = 1
    drift_window: int = 10_000
    recompute_every: int = 10_000

    def __post_init__(self) -> None:
        """Reject option combinations the engine cannot run."""
        checks = (
            (self.events > 0, "events must be positive"),
            (self.replicas > 0, "replicas must be positive"),
            (0 <= self.seed < _MAX_SEED, "seed must be an unsigned 64-bit integer"),
            (0.0 <= self.warmup_fraction < 1.0, "warmup fraction must lie in [0, 1)"),
            (self.bands >= 1, "bands must be at least one"),
            (
                self.bands == 1 or self.mode is SimMode.DISCRETE,
                "several bands need the discrete mode",
            ),
            (self.divergence_users >= 0.0, "divergence users must be non-negative"),
            (self.snapshot_every > 0, "snapshot cadence must be positive"),
            (self.annuli > 0, "annuli must be positive"),
            (self.step_divisor > 0.0, "step divisor must be positive"),
            (self.threads > 0, "threads must be positive"),
            (self.drift_window > 0, "drift window must be positive"),
            (self.recompute_every > 0, "recompute cadence must be positive"),
        )
        for ok, detail in checks:
            if not ok:
                message = f"{detail}; received {self!r}."
                raise SimulationError(message)

    @property
    def warmup_events(self) -> int:
        """Number of leading events excluded from averages."""
        return int(self.events * self.warmup_fraction)


def replica_rng(seed: int) -> np.random.Generator:
    """Return the counter-based generator of one replica."""
    return np.random.Generator(np.random.Philox(seed))


def step_rule_epsilon(params: NetworkParams, divisor: float = 100.0) -> float:
    """Return the step ``eps_t = 1 / (divisor lambda |D|)`` in seconds.

    Parameters
    ----------
    params : NetworkParams
        Network whose total arrival rate sets the step.
    divisor : float, optional
        Expected arrivals per step are ``1 / divisor`` over the whole cell.

    Returns
    -------
    float
        The step length in seconds.

    Raises
    ------
    SimulationError
        If the arrival rate is zero.

    Examples
    --------
    >>> from cellflow.model import baseline_params
    >>> f"{step_rule_epsilon(baseline_params()):.3e}"
    '1.061e-06'
    """
    total = params.arrivals_per_second
    if total <= 0.0:
        message = "the discrete step rule needs a positive arrival rate."
        raise SimulationError(message)
    return 1.0 / (divisor * total)


def divergence_threshold(params: NetworkParams, options: SimOptions) -> float:
    """Return the total user count above which growth counts as divergence."""
    if options.divergence_users > 0.0:
        return options.divergence_users
    try:
        solutions = solve_fixed_point(params.arrival_rate, params)
    except MeanFieldError as exc:
        LOGGER.debug("divergence_threshold: no first-order reference (%s)", exc)
        solutions = []
    lower = solutions[0].nbar if solutions else 0.0
    per_band = (
        _DIVERGENCE_FACTOR * lower if lower > 0.0 else _FALLBACK_DIVERGENCE_USERS
    )
    return per_band * options.bands


@dc.dataclass(frozen=True, slots=True)
class ExactEvent:
    """Holding time, service rates and outcome of one exact event."""

    dt: float
    rates: FloatArray
    departing: int | None


def next_exact_event(state: SimState, rng: np.random.Generator) -> ExactEvent | None:
    """Draw the next event of the chain, or ``None`` when nothing can happen."""
    params = state.params
    rates = state.rates()
    arrival_total = params.arrivals_per_second
    service_total = params.mu * float(rates.sum())
    total = arrival_total + service_total
    if total <= 0.0:
        return None
    dt = float(rng.exponential(1.0 / total))
    if rng.random() * total < arrival_total:
        return ExactEvent(dt, rates, None)
    cumulative = np.cumsum(rates)
    pick = int(np.searchsorted(cumulative, rng.random() * cumulative[-1], "right"))
    return ExactEvent(dt, rates, min(pick, state.count - 1))


def apply_exact_event(
    state: SimState, rng: np.random.Generator, event: ExactEvent
) -> None:
    """Advance the clock and apply the arrival or departure of ``event``."""
    state.clock += event.dt
    if event.departing is None:
        radii, angles = sample_disk(rng, state.params.radius, 1)
        state.add_user(float(radii[0]), float(angles[0]), math.inf)
    else:
        state.remove_user(event.departing)


def begin_step(
    state: SimState, rng: np.random.Generator, epsilon: float
) -> FloatArray:
    """Admit the step's arrivals and serve every user for ``epsilon`` seconds.

    Returns the bits served to each active user, capped by its residual.
    Finished users stay in place until :func:`end_step`.
    """
    params = state.params
    if state.bands > 1:
        state.redraw_bands(rng)
    arrivals = int(rng.poisson(state.bands * params.arrivals_per_second * epsilon))
    if arrivals:
        radii, angles = sample_disk(rng, params.radius, arrivals)
        files = rng.exponential(1.0 / params.mu, arrivals)
        bands = (
            rng.integers(0, state.bands, arrivals)
            if state.bands > 1
            else np.zeros(arrivals, dtype=np.int64)
        )
        for radius, angle, size, band in zip(
            radii, angles, files, bands, strict=True
        ):
            state.add_user(float(radius), float(angle), float(size), int(band))
    live = slice(0, state.count)
    served = np.minimum(state.rates() * epsilon, state.residual[live])
    state.residual[live] -= served
    return served


def end_step(state: SimState, epsilon: float) -> int:
    """Advance the clock and remove exhausted users; return how many left."""
    state.clock += epsilon
    return state.remove_many(state.residual[: state.count] <= 0.0)


def run_replica(
    params: NetworkParams, options: SimOptions, replica: int = 0
) -> TraceSummary:
    """Simulate one replica from an empty cell.

    Parameters
    ----------
    params : NetworkParams
        Network to simulate.
    options : SimOptions
        Horizon, mode and recording controls.
    replica : int, optional
        Replica index; the stream is seeded with ``options.seed + replica``.

    Returns
    -------
    TraceSummary
        Time averages, snapshots, and the divergence flag of the replica.

    Raises
    ------
    SimulationError
        If the discrete mode is requested with a zero arrival rate.
    """  # noqa: DOC502 -- raised by step_rule_epsilon
    started = time.perf_counter()
    seed = options.seed + replica
    rng = replica_rng(seed)
    state = SimState(
        params,
        bands=options.bands,
        annuli=options.annuli,
        recompute_every=options.recompute_every,
    )
    recorder = TraceRecorder(
        state,
        warmup_events=options.warmup_events,
        snapshot_every=options.snapshot_every,
        drift_window=options.drift_window,
    )
    threshold = divergence_threshold(params, options)
    if options.mode is SimMode.DISCRETE:
        epsilon = step_rule_epsilon(params, options.step_divisor)
        _run_discrete(state, rng, recorder, options.events, epsilon, threshold)
    else:
        _run_exact(state, rng, recorder, options.events, threshold)
    summary = recorder.summary(
        state, replica=replica, seed=seed, mode=str(options.mode)
    )
    summary = dc.replace(summary, wall_seconds=time.perf_counter() - started)
    LOGGER.debug(
        "replica %d (seed %d): %d events, clock=%.6g s, nbar=%.6g, diverged=%s",
        replica,
        seed,
        summary.events,
        summary.clock,
        summary.nbar,
        summary.diverged,
    )
    return summary


def _run_exact(
    state: SimState,
    rng: np.random.Generator,
    recorder: TraceRecorder,
    events: int,
    threshold: float,
) -> None:
    """Run the event-driven loop until the horizon or divergence."""
    for _ in range(events):
        event = next_exact_event(state, rng)
        if event is None:
            LOGGER.debug("exact run: no arrivals and no users; trace is constant")
            break
        recorder.observe(state, event.rates * event.dt, event.dt)
        if event.departing is not None:
            recorder.record_departure()
        apply_exact_event(state, rng, event)
        if recorder.diverging(state, threshold):
            LOGGER.info(
                "divergence at t=%.6g s with %d users", state.clock, state.count
            )
            break


def _run_discrete(  # noqa: PLR0913 -- loop inputs are all distinct
    state: SimState,
    rng: np.random.Generator,
    recorder: TraceRecorder,
    events: int,
    epsilon: float,
    threshold: float,
) -> None:
    """Run the time-stepped loop until the horizon or divergence."""
    for _ in range(events):
        served = begin_step(state, rng, epsilon)
        recorder.observe(state, served, epsilon)
        recorder.record_departures(end_step(state, epsilon))
        if recorder.diverging(state, threshold):
            LOGGER.info(
                "divergence at t=%.6g s with %d users", state.clock, state.count
            )
            break
