"""Hypothesis property tests for the in-process metrics accumulator.

Each property resets the process-global registry at the start of the body
rather than via a function-scoped fixture, which Hypothesis discourages when
combined with ``@given``.
"""

from __future__ import annotations

import collections
import math

from hypothesis import given, settings
from hypothesis import strategies as st

from cellflow.utils import metrics

_modes = st.sampled_from(["exact", "discrete"])
_statuses = st.sampled_from(["complete", "failed", "diverged"])


@given(
    batches=st.lists(
        st.tuples(_modes, st.integers(min_value=0, max_value=10_000)),
        min_size=1,
        max_size=30,
    )
)
@settings(max_examples=100, deadline=None)
def test_event_batches_sum_per_mode(batches: list[tuple[str, int]]) -> None:
    """Worker event counts reported in batches sum per simulation mode."""
    metrics.reset()
    expected: collections.Counter[str] = collections.Counter()
    for mode, amount in batches:
        metrics.increment_counter("sim.events", amount=amount, mode=mode)
        expected[mode] += amount

    for mode in ("exact", "discrete"):
        assert metrics.counter_value("sim.events", mode=mode) == expected[mode]
    assert all(value > 0 for value in metrics.snapshot().values())


@given(statuses=st.lists(_statuses, max_size=40))
@settings(max_examples=100, deadline=None)
def test_replica_statuses_partition_the_replicas(statuses: list[str]) -> None:
    """Every replica lands in exactly one status series."""
    metrics.reset()
    for status in statuses:
        metrics.increment_counter("sim.replicas", status=status)

    total = sum(
        metrics.counter_value("sim.replicas", status=status)
        for status in ("complete", "failed", "diverged")
    )
    assert total == len(statuses)


@given(
    durations=st.lists(
        st.floats(min_value=0.0, max_value=1e4, allow_nan=False), max_size=25
    )
)
@settings(max_examples=100, deadline=None)
def test_durations_aggregate_count_and_total(durations: list[float]) -> None:
    """Duration stats hold the observation count and the summed seconds."""
    metrics.reset()
    for seconds in durations:
        metrics.observe_duration("sim.replica.duration", seconds)

    stats = metrics.duration_stats("sim.replica.duration")
    assert stats.count == len(durations)
    assert math.isclose(stats.total_seconds, math.fsum(durations), abs_tol=1e-6)


@given(solver=st.sampled_from(["fo-scan", "so"]), iterations=st.integers(1, 500))
@settings(max_examples=50, deadline=None)
def test_snapshot_is_an_isolated_copy(solver: str, iterations: int) -> None:
    """A snapshot is unaffected by later increments and registry resets."""
    metrics.reset()
    metrics.increment_counter("solver.iterations", amount=iterations, solver=solver)
    captured = metrics.snapshot()

    metrics.increment_counter("solver.iterations", solver=solver)
    metrics.reset()

    assert captured == {
        ("solver.iterations", (("solver", solver),)): iterations,
    }
