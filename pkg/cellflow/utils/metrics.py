"""In-process metrics accumulation for :mod:`cellflow`.

A cellflow invocation is a batch process: a solver run or a simulation that
ends when its outputs are written. Metrics are therefore accumulated in the
process and flushed as one structured log line at interpreter exit, next to
the run manifest, instead of being exported to a scraper.

Series are keyed by metric name plus a sorted tuple of label pairs. The
series in use are ``sim.events{mode}``, ``sim.replicas{status}``,
``sim.divergences``, ``solver.iterations{solver}``,
``quadrature.warnings{kind}``, ``command.duration{command}`` and
``sim.replica.duration``. Simulation workers in other processes report
their counts back to the parent, which records them here.

Examples
--------
>>> from cellflow.utils import metrics
>>> metrics.reset()
>>> metrics.increment_counter("sim.events", mode="exact")
>>> metrics.counter_value("sim.events", mode="exact")
1
"""

from __future__ import annotations

import atexit
import collections
import contextlib
import dataclasses as dc
import logging
import threading
import time
import typing as typ

import msgspec.json as msjson

if typ.TYPE_CHECKING:
    import collections.abc as cabc

_LOGGER = logging.getLogger(__name__)
type SeriesKey = tuple[str, tuple[tuple[str, str], ...]]


@dc.dataclass(slots=True)
class DurationStats:
    """Aggregated wall-clock observations for one series."""

    count: int = 0
    total_seconds: float = 0.0
    max_seconds: float = 0.0

    @property
    def mean_seconds(self) -> float:
        """Mean duration, zero before the first observation."""
        return self.total_seconds / self.count if self.count else 0.0

    def add(self, seconds: float) -> None:
        """Fold one observation into the aggregate."""
        self.count += 1
        self.total_seconds += seconds
        self.max_seconds = max(self.max_seconds, seconds)


def series_key(name: str, labels: cabc.Mapping[str, str]) -> SeriesKey:
    """Return the registry key for ``name`` with its labels sorted."""
    return (name, tuple(sorted(labels.items())))


@dc.dataclass(slots=True)
class MetricsRegistry:
    """Thread-safe store of counters and duration aggregates."""

    counters: collections.Counter[SeriesKey] = dc.field(
        default_factory=collections.Counter
    )
    durations: dict[SeriesKey, DurationStats] = dc.field(default_factory=dict)
    lock: threading.Lock = dc.field(default_factory=threading.Lock)

    def increment(self, key: SeriesKey, amount: int) -> None:
        """Add ``amount`` to the counter ``key``; zero records nothing."""
        if amount == 0:
            return
        with self.lock:
            self.counters[key] += amount

    def observe(self, key: SeriesKey, seconds: float) -> None:
        """Record one duration under ``key``."""
        with self.lock:
            self.durations.setdefault(key, DurationStats()).add(seconds)

    def counter(self, key: SeriesKey) -> int:
        """Return the counter ``key``, zero when unset."""
        with self.lock:
            return self.counters.get(key, 0)

    def duration(self, key: SeriesKey) -> DurationStats:
        """Return a copy of the durations under ``key``."""
        with self.lock:
            stats = self.durations.get(key)
            return DurationStats() if stats is None else dc.replace(stats)

    def counter_copy(self) -> dict[SeriesKey, int]:
        """Return a detached copy of every counter."""
        with self.lock:
            return dict(self.counters)

    def clear(self) -> None:
        """Drop every series."""
        with self.lock:
            self.counters.clear()
            self.durations.clear()

    def render(self) -> list[dict[str, object]]:
        """Return the summary rows: counters first, then durations, each sorted."""
        with self.lock:
            rows: list[dict[str, object]] = [
                {"metric": name, "labels": dict(labels), "value": value}
                for (name, labels), value in sorted(self.counters.items())
            ]
            rows.extend(
                {
                    "metric": name,
                    "labels": dict(labels),
                    "count": stats.count,
                    "total_seconds": round(stats.total_seconds, 6),
                    "max_seconds": round(stats.max_seconds, 6),
                }
                for (name, labels), stats in sorted(self.durations.items())
            )
        return rows


_REGISTRY = MetricsRegistry()
_summary_hook_registered = threading.Event()


def increment_counter(name: str, *, amount: int = 1, **labels: str) -> None:
    """Increment the counter ``name`` for the supplied label values.

    A zero ``amount`` is a no-op, so a counter surfaces in the exit summary
    only when it actually changed.

    Examples
    --------
    >>> increment_counter("solver.iterations", solver="fo-scan")
    """
    _REGISTRY.increment(series_key(name, labels), amount)


def counter_value(name: str, **labels: str) -> int:
    """Return the current value of ``name`` for the supplied labels.

    Parameters
    ----------
    name : str
        Metric name whose counter value is returned.
    **labels : str
        Label values identifying the counter series.

    Returns
    -------
    int
        The counter value, or ``0`` when the counter is unset.

    Examples
    --------
    >>> reset()
    >>> counter_value("sim.divergences")
    0
    """
    return _REGISTRY.counter(series_key(name, labels))


def observe_duration(name: str, seconds: float, **labels: str) -> None:
    """Record one duration observation for ``name``.

    Examples
    --------
    >>> observe_duration("command.duration", 0.25, command="critical")
    """
    _REGISTRY.observe(series_key(name, labels), seconds)


@contextlib.contextmanager
def timed(name: str, **labels: str) -> cabc.Iterator[None]:
    """Observe the wall-clock duration of the ``with`` body under ``name``.

    The observation is recorded even when the body raises.

    Examples
    --------
    >>> reset()
    >>> with timed("command.duration", command="demo"):
    ...     pass
    >>> duration_stats("command.duration", command="demo").count
    1
    """
    started = time.perf_counter()
    try:
        yield
    finally:
        observe_duration(name, time.perf_counter() - started, **labels)


def duration_stats(name: str, **labels: str) -> DurationStats:
    """Return the aggregated durations recorded for ``name``.

    Returns
    -------
    DurationStats
        A copy of the statistics; empty when the series is unrecorded.
    """
    return _REGISTRY.duration(series_key(name, labels))


def snapshot() -> dict[SeriesKey, int]:
    """Return a copy of the counters for assertions."""
    return _REGISTRY.counter_copy()


def reset() -> None:
    """Clear all recorded metrics; intended for test isolation."""
    _REGISTRY.clear()


def emit_summary() -> None:
    """Log the accumulated metrics as one structured summary line.

    Emits nothing when no metrics were recorded.
    """
    rows = _REGISTRY.render()
    if rows:
        _LOGGER.info("cellflow metrics summary: %s", msjson.encode(rows).decode())


def register_summary_atexit() -> None:
    """Register :func:`emit_summary` to run at interpreter exit.

    Called once from the CLI entry point; repeated calls register the hook
    at most once. The flag is set only after ``atexit.register`` returns.
    """
    with _REGISTRY.lock:
        if _summary_hook_registered.is_set():
            return
        atexit.register(emit_summary)
        _summary_hook_registered.set()


__all__ = [
    "DurationStats",
    "MetricsRegistry",
    "counter_value",
    "duration_stats",
    "emit_summary",
    "increment_counter",
    "observe_duration",
    "register_summary_atexit",
    "reset",
    "series_key",
    "snapshot",
    "timed",
]
