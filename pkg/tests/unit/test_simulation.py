"""Tests for ``cellflow.simulation`` engine, runner and conservation check."""

from __future__ import annotations

import dataclasses as dc
import math
import typing as typ

import numpy as np
import pytest

from cellflow.model import baseline_params
from cellflow.passage import tau_cum
from cellflow.simulation import (
    MIN_DEPARTURES,
    SimMode,
    SimOptions,
    SimulationError,
    TraceSummary,
    divergence_threshold,
    hitting_time,
    mean_interval,
    multi_band_run,
    rate_conservation_check,
    replica_rng,
    run,
    run_replica,
    step_rule_epsilon,
)

if typ.TYPE_CHECKING:
    from cellflow.meanfield.first_order import FoSolution
    from cellflow.model import NetworkParams

_SHORT = SimOptions(events=3000, replicas=2, seed=17, snapshot_every=100, annuli=10)


def _trace(**overrides: typ.Any) -> TraceSummary:  # noqa: ANN401
    """Return a synthetic two-annulus trace of a unit-area cell."""
    edges = np.array([0.0, math.sqrt(0.5 / math.pi), math.sqrt(1.0 / math.pi)])
    fields: dict[str, typ.Any] = {
        "replica": 0,
        "seed": 1,
        "mode": "exact",
        "bands": 1,
        "events": 1000,
        "clock": 12.0,
        "observed_time": 10.0,
        "nbar": 3.0,
        "annulus_edges": edges,
        "intensity": np.zeros(2),
        "origin_intensity": np.full(2, np.nan),
        "edge_intensity": np.full(2, np.nan),
        "served_bits": 300.0,
        "annulus_served_bits": np.array([150.0, 150.0]),
        "departures": 250,
        "snapshot_times": np.array([0.0, 12.0]),
        "snapshot_counts": np.array([0, 3]),
    }
    return TraceSummary(**(fields | overrides))


@pytest.mark.parametrize(
    ("kwargs", "fragment"),
    [
        pytest.param({"events": 0}, "events must be positive", id="events"),
        pytest.param({"replicas": 0}, "replicas must be positive", id="replicas"),
        pytest.param({"seed": -1}, "unsigned 64-bit", id="seed"),
        pytest.param({"warmup_fraction": 1.0}, "warmup fraction", id="warmup"),
        pytest.param({"bands": 3}, "discrete mode", id="bands-exact"),
        pytest.param({"step_divisor": 0.0}, "step divisor", id="step"),
        pytest.param({"threads": 0}, "threads must be positive", id="threads"),
    ],
)
def test_sim_options_validation(kwargs: dict[str, typ.Any], fragment: str) -> None:
    """Option combinations the engine cannot run are refused."""
    with pytest.raises(SimulationError, match=fragment):
        SimOptions(**kwargs)


def test_sim_options_warmup_events() -> None:
    """Warm-up is a fraction of the horizon."""
    assert SimOptions(events=1000, warmup_fraction=0.25).warmup_events == 250
    assert SimOptions(mode=SimMode.DISCRETE, bands=4).bands == 4


def test_replica_streams_are_reproducible() -> None:
    """Equal seeds give equal streams; distinct seeds do not."""
    first = replica_rng(42).random(5)
    np.testing.assert_array_equal(first, replica_rng(42).random(5))
    assert not np.array_equal(first, replica_rng(43).random(5))


def test_step_rule_epsilon(baseline: NetworkParams) -> None:
    """One arrival per hundred steps over the whole cell."""
    assert step_rule_epsilon(baseline) == pytest.approx(1.061e-6, rel=1e-3)
    assert step_rule_epsilon(baseline, 10.0) == pytest.approx(
        10.0 * step_rule_epsilon(baseline)
    )
    with pytest.raises(SimulationError, match="positive arrival rate"):
        step_rule_epsilon(baseline.with_arrival_rate(0.0))


def test_divergence_threshold(
    baseline: NetworkParams, lower_solution: FoSolution
) -> None:
    """The rule scales the first-order count unless an explicit one is set."""
    assert divergence_threshold(baseline, SimOptions()) == pytest.approx(
        50.0 * lower_solution.nbar
    )
    assert divergence_threshold(baseline, SimOptions(divergence_users=12.0)) == 12.0
    unstable = baseline_params(arrival_rate=0.8, sigma2=2.0, inversion=1.0)
    discrete = SimOptions(mode=SimMode.DISCRETE, bands=2)
    assert divergence_threshold(unstable, discrete) == 2000.0


def test_exact_replica_summary(baseline: NetworkParams) -> None:
    """An exact replica records averages, snapshots and departures."""
    summary = run_replica(baseline, _SHORT)
    assert summary.mode == "exact"
    assert summary.events == 3000
    assert summary.seed == 17
    assert not summary.diverged
    assert summary.nbar > 0.0
    assert summary.observed_time > 0.0
    assert summary.clock >= summary.observed_time
    assert summary.snapshot_times[0] == 0.0
    assert summary.snapshot_counts[0] == 0
    assert np.all(np.diff(summary.snapshot_times) >= 0.0)
    assert summary.intensity.shape == (10,)
    assert summary.annulus_edges[-1] == 100.0
    assert summary.departures > 0
    assert summary.wall_seconds > 0.0


def test_replicas_are_deterministic(baseline: NetworkParams) -> None:
    """A replica depends only on its seed."""
    first = run_replica(baseline, _SHORT, replica=1)
    again = run_replica(baseline, _SHORT, replica=1)
    other = run_replica(baseline, _SHORT, replica=0)
    assert first.nbar == again.nbar
    np.testing.assert_array_equal(first.snapshot_counts, again.snapshot_counts)
    assert first.seed == 18
    assert first.nbar != other.nbar


def test_discrete_replica_summary(baseline: NetworkParams) -> None:
    """The time-stepped mode advances by the step rule."""
    options = dc.replace(_SHORT, mode=SimMode.DISCRETE, events=2000, step_divisor=1.0)
    summary = run_replica(baseline, options)
    assert summary.mode == "discrete"
    assert summary.clock == pytest.approx(2000 * step_rule_epsilon(baseline, 1.0))
    assert summary.served_bits > 0.0


def test_idle_network_stays_empty(baseline: NetworkParams) -> None:
    """Without arrivals the exact loop stops at once."""
    summary = run_replica(baseline.with_arrival_rate(0.0), _SHORT)
    assert summary.events == 0
    assert summary.nbar == 0.0


def test_divergence_rule_stops_growing_traces() -> None:
    """Above the critical rate with no stable set the count escapes."""
    params = baseline_params(arrival_rate=0.8, sigma2=2.0, inversion=1.0)
    options = SimOptions(
        events=50_000, replicas=1, divergence_users=20.0, drift_window=100
    )
    summary = run_replica(params, options)
    assert summary.diverged
    assert summary.escape_time is not None
    assert summary.events < 50_000
    assert summary.snapshot_counts[-1] > 20


def test_run_aggregates_replicas(baseline: NetworkParams) -> None:
    """The across-replica interval summarises the replica means."""
    result = run(baseline, _SHORT)
    assert result.n_effective == 2
    assert result.failed == ()
    assert not result.diverged
    means = [summary.nbar for summary in result.replicas]
    assert result.nbar.mean == pytest.approx(sum(means) / 2.0)
    assert [summary.replica for summary in result.replicas] == [0, 1]


def test_multi_band_run_requires_discrete_mode(baseline: NetworkParams) -> None:
    """Band re-drawing is a per-step operation."""
    with pytest.raises(SimulationError, match="discrete mode only"):
        multi_band_run(baseline, _SHORT)


def test_multi_band_run_reports_per_band_counts(baseline: NetworkParams) -> None:
    """``nbar`` is normalised by the number of bands."""
    options = dc.replace(
        _SHORT, mode=SimMode.DISCRETE, bands=2, events=1500, step_divisor=1.0
    )
    result = multi_band_run(baseline, options)
    assert result.n_effective == 2
    assert all(summary.bands == 2 for summary in result.replicas)


def test_mean_interval() -> None:
    """Student-t intervals widen around the sample mean."""
    interval = mean_interval([1.0, 2.0, 3.0])
    assert interval.mean == 2.0
    assert interval.stderr == pytest.approx(1.0 / math.sqrt(3.0))
    assert interval.contains(2.0)
    assert interval.half_width == pytest.approx(4.302653 / math.sqrt(3.0), rel=1e-6)
    single = mean_interval([5.0])
    assert single.mean == 5.0
    assert math.isnan(single.stderr)
    with pytest.raises(SimulationError, match="empty sample"):
        mean_interval([])


def test_hitting_time_matches_the_chain(chain_network: NetworkParams) -> None:
    """Sampled first passages agree with the mean-passage recursion."""
    options = SimOptions(seed=101)
    times = hitting_time(chain_network, 3, options, replicas=2000, max_events=10_000)
    assert times.censored == 0
    expected = tau_cum(3, 1.0, 1.0)
    assert expected == pytest.approx(2.125)
    interval = times.interval
    assert abs(interval.mean - expected) < 4.0 * interval.stderr
    assert times.variance > 0.0


def test_hitting_time_counts_censored_replicas(chain_network: NetworkParams) -> None:
    """Replicas that run out of events are censored, not timed."""
    times = hitting_time(chain_network, 5, SimOptions(), replicas=4, max_events=1)
    assert times.censored == 4
    assert times.times.size == 0
    assert math.isnan(times.variance)


@pytest.mark.parametrize(
    ("options", "target", "fragment"),
    [
        pytest.param(
            SimOptions(mode=SimMode.DISCRETE), 3, "exact mode only", id="mode"
        ),
        pytest.param(SimOptions(), 0, "must be positive", id="target"),
    ],
)
def test_hitting_time_validation(
    chain_network: NetworkParams, options: SimOptions, target: int, fragment: str
) -> None:
    """Only exact-mode passages to positive counts are measured."""
    with pytest.raises(SimulationError, match=fragment):
        hitting_time(chain_network, target, options, replicas=1)


def test_conservation_of_a_balanced_trace() -> None:
    """Serving exactly ``rho`` per unit area gives zero error."""
    params = baseline_params(arrival_rate=3.0, mu=0.1, radius=math.sqrt(1.0 / math.pi))
    report = rate_conservation_check(_trace(), params)
    assert report.defined
    assert report.stationary
    assert not report.low_confidence
    assert report.offered_load == pytest.approx(30.0)
    assert report.aggregate_error == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(report.annulus_errors, 0.0, atol=1e-12)


def test_conservation_flags_thin_and_diverged_traces() -> None:
    """Few departures or a diverged run lower the report's standing."""
    params = baseline_params(arrival_rate=3.0, mu=0.1, radius=math.sqrt(1.0 / math.pi))
    report = rate_conservation_check(
        _trace(departures=MIN_DEPARTURES - 1, diverged=True), params
    )
    assert report.low_confidence
    assert not report.stationary
    assert report.defined


def test_conservation_is_undefined_without_observation() -> None:
    """No post-warm-up time means no estimate."""
    params = baseline_params(arrival_rate=3.0, mu=0.1)
    report = rate_conservation_check(_trace(observed_time=0.0), params)
    assert not report.defined
    assert math.isnan(report.aggregate_error)


@pytest.mark.slow
def test_conservation_of_a_simulated_trace(baseline: NetworkParams) -> None:
    """A long stable trace serves the offered load within a few percent."""
    options = SimOptions(events=200_000, replicas=1, seed=3, annuli=5)
    summary = run_replica(baseline, options)
    report = rate_conservation_check(summary, baseline)
    assert report.aggregate_error < 0.05


@pytest.mark.slow
def test_process_pool_matches_serial_run(baseline: NetworkParams) -> None:
    """Worker processes reproduce the serial replicas."""
    serial = run(baseline, _SHORT)
    pooled = run(baseline, dc.replace(_SHORT, threads=2))
    assert [s.nbar for s in serial.replicas] == [s.nbar for s in pooled.replicas]


def test_divergence_during_warmup_leaves_nbar_undefined() -> None:
    """A trace that escapes before warm-up ends has no time average."""
    params = baseline_params(arrival_rate=0.8, sigma2=2.0, inversion=1.0)
    options = SimOptions(
        events=50_000,
        replicas=2,
        warmup_fraction=0.9,
        divergence_users=20.0,
        drift_window=100,
    )
    summary = run_replica(params, options)
    assert summary.diverged
    assert summary.observed_time == 0.0
    assert math.isnan(summary.nbar)
    result = run(params, options)
    assert result.n_effective == 2
    assert result.nbar.samples == 0
    assert math.isnan(result.nbar.mean)
