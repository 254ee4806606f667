"""Trace recording and per-replica summaries.

The recorder sees the state once per event, before the event is applied,
together with the holding time ``dt`` until the event. Time averages are
therefore exact integrals of piecewise-constant trajectories. Statistics are
accumulated only after the warm-up events; snapshots of ``(t, N_t)`` cover
the whole run.
"""

from __future__ import annotations

import collections
import dataclasses as dc
import logging
import math
import typing as typ

import numpy as np

if typ.TYPE_CHECKING:
    import numpy.typing as npt

    from cellflow.simulation.state import SimState

LOGGER = logging.getLogger(__name__)

type FloatArray = npt.NDArray[np.float64]

#: Observers closer than this fraction of ``R`` count as "near the origin".
ORIGIN_ZONE = 0.1
#: Observers farther than this fraction of ``R`` count as "near the edge".
EDGE_ZONE = 0.9


@dc.dataclass(frozen=True, slots=True)
class TraceSummary:
    """Everything one replica reports.

    Attributes
    ----------
    replica : int
        Replica index within the run.
    seed : int
        Seed of the replica's random stream.
    mode : str
        Simulation mode that produced the trace.
    bands : int
        Number of frequency bands ``N_f``.
    events : int
        Events (or steps) actually simulated.
    clock : float
        Simulated time at the end of the run in seconds.
    observed_time : float
        Post-warm-up simulated time in seconds.
    nbar : float
        Time-averaged number of active users per band after warm-up; ``nan``
        when the run stopped before any post-warm-up time was observed.
    annulus_edges : FloatArray
        Radial bin edges in metres.
    intensity : FloatArray
        Empirical user intensity per annulus in users per square metre.
    origin_intensity : FloatArray
        Intensity seen by an observer near the origin (``nan`` if none).
    edge_intensity : FloatArray
        Intensity seen by an observer near the cell edge (``nan`` if none).
    served_bits : float
        Bits served after warm-up, summed over the cell.
    annulus_served_bits : FloatArray
        Bits served after warm-up per annulus.
    departures : int
        Departures after warm-up.
    snapshot_times : FloatArray
        Times of the ``(t, N_t)`` snapshots in seconds.
    snapshot_counts : npt.NDArray[np.int64]
        Total user counts at the snapshots.
    diverged : bool
        True when the divergence rule ended the run early.
    escape_time : float | None
        Time at which the divergence rule fired.
    wall_seconds : float
        Wall-clock duration of the replica.
    """

    replica: int
    seed: int
    mode: str
    bands: int
    events: int
    clock: float
    observed_time: float
    nbar: float
    annulus_edges: FloatArray
    intensity: FloatArray
    origin_intensity: FloatArray
    edge_intensity: FloatArray
    served_bits: float
    annulus_served_bits: FloatArray
    departures: int
    snapshot_times: FloatArray
    snapshot_counts: npt.NDArray[np.int64]
    diverged: bool = False
    escape_time: float | None = None
    wall_seconds: float = 0.0

    @property
    def annulus_midpoints(self) -> FloatArray:
        """Midpoints of the radial bins in metres."""
        return 0.5 * (self.annulus_edges[:-1] + self.annulus_edges[1:])

    @property
    def annulus_areas(self) -> FloatArray:
        """Areas of the radial bins in square metres."""
        return math.pi * np.diff(self.annulus_edges**2)


class TraceRecorder:
    """Accumulate time averages, departures, snapshots and drift."""

    def __init__(
        self,
        state: SimState,
        *,
        warmup_events: int,
        snapshot_every: int,
        drift_window: int,
    ) -> None:
        self._annuli = state.annuli
        self._edges = np.linspace(0.0, state.params.radius, state.annuli + 1)
        self._origin_limit = ORIGIN_ZONE * state.params.radius
        self._edge_limit = EDGE_ZONE * state.params.radius
        self.warmup_events = warmup_events
        self.snapshot_every = snapshot_every
        self.events = 0
        self.observed_time = 0.0
        self.user_time = 0.0
        self.occupancy = np.zeros(state.annuli)
        self.served = np.zeros(state.annuli)
        self.departures = 0
        # Rows: observers near the origin, observers near the edge.
        self.conditional = np.zeros((2, state.annuli))
        self.observer_time = np.zeros(2)
        self.times: list[float] = []
        self.counts: list[int] = []
        self._recent: collections.deque[int] = collections.deque(
            maxlen=drift_window + 1
        )
        self.escape_time: float | None = None

    @property
    def warm(self) -> bool:
        """Whether the warm-up period is over."""
        return self.events >= self.warmup_events

    def observe(self, state: SimState, served_bits: FloatArray, dt: float) -> None:
        """Record the state held for ``dt`` seconds before the next event."""
        if self.events % self.snapshot_every == 0:
            self.times.append(state.clock)
            self.counts.append(state.count)
        self._recent.append(state.count)
        if self.warm and state.count and dt > 0.0:
            annulus = state.annulus[: state.count]
            histogram = np.bincount(annulus, minlength=self._annuli)
            self.observed_time += dt
            self.user_time += state.count * dt
            self.occupancy += histogram * dt
            self.served += np.bincount(
                annulus, weights=served_bits, minlength=self._annuli
            )
            self._observe_conditional(state, histogram, dt)
        elif self.warm:
            self.observed_time += dt
        self.events += 1

    def _observe_conditional(
        self, state: SimState, histogram: npt.NDArray[np.int64], dt: float
    ) -> None:
        """Accumulate the other users seen by observers in each zone."""
        radius = state.radius[: state.count]
        annulus = state.annulus[: state.count]
        zones = (radius < self._origin_limit, radius > self._edge_limit)
        for row, inside in enumerate(zones):
            observers = int(np.count_nonzero(inside))
            if observers:
                own = np.bincount(annulus[inside], minlength=self._annuli)
                self.conditional[row] += (observers * histogram - own) * dt
                self.observer_time[row] += observers * dt

    def record_departure(self) -> None:
        """Count one departure after warm-up."""
        if self.warm:
            self.departures += 1

    def record_departures(self, count: int) -> None:
        """Count ``count`` departures after warm-up."""
        if self.warm:
            self.departures += count

    def diverging(self, state: SimState, threshold: float) -> bool:
        """Return whether the count exceeds ``threshold`` while still growing."""
        if state.count <= threshold or len(self._recent) < 2:
            return False
        if state.count > self._recent[0]:
            self.escape_time = state.clock
            return True
        return False

    def summary(
        self,
        state: SimState,
        *,
        replica: int,
        seed: int,
        mode: str,
    ) -> TraceSummary:
        """Freeze the accumulated statistics into a :class:`TraceSummary`."""
        areas = math.pi * np.diff(self._edges**2)
        self.times.append(state.clock)
        self.counts.append(state.count)
        horizon = self.observed_time
        if horizon > 0.0:
            nbar = self.user_time / horizon / state.bands
            intensity = self.occupancy / horizon / areas / state.bands
        else:
            # An idle cell is known to be empty; a run stopped in warm-up is not.
            nbar = 0.0 if self.events == 0 else math.nan
            intensity = np.zeros(self._annuli)
        return TraceSummary(
            replica=replica,
            seed=seed,
            mode=mode,
            bands=state.bands,
            events=self.events,
            clock=state.clock,
            observed_time=horizon,
            nbar=nbar,
            annulus_edges=self._edges,
            intensity=intensity,
            origin_intensity=_conditional(
                self.conditional[0], float(self.observer_time[0]), areas
            ),
            edge_intensity=_conditional(
                self.conditional[1], float(self.observer_time[1]), areas
            ),
            served_bits=float(self.served.sum()),
            annulus_served_bits=self.served.copy(),
            departures=self.departures,
            snapshot_times=np.asarray(self.times, dtype=np.float64),
            snapshot_counts=np.asarray(self.counts, dtype=np.int64),
            diverged=self.escape_time is not None,
            escape_time=self.escape_time,
        )


def _conditional(seen: FloatArray, weight: float, areas: FloatArray) -> FloatArray:
    """Normalise observer-weighted counts into an intensity."""
    if weight <= 0.0:
        return np.full(areas.size, np.nan)
    return seen / weight / areas
