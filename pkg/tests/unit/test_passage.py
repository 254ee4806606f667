"""Tests for ``cellflow.passage``."""

from __future__ import annotations

import math

import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given, settings

from cellflow.model import ParameterError, baseline_params
from cellflow.passage import (
    PassageMethod,
    build_table,
    departure_rate,
    drift_bound,
    growth_slopes,
    seconds_per_unit,
    tau_cum,
    tau_first_variance,
    tau_sigma_sweep,
    tau_step,
    tau_step_closed,
    tau_steps,
)


@pytest.mark.parametrize(
    ("n", "sigma2", "expected"),
    [
        pytest.param(0, 0.5, 0.0, id="empty"),
        pytest.param(1, 0.5, 2.0, id="lone-user"),
        pytest.param(4, 1.0, 1.0, id="unit-noise"),
        pytest.param(3, 0.01, 3.0 / 2.01, id="low-noise"),
    ],
)
def test_departure_rate(n: int, sigma2: float, expected: float) -> None:
    """``n / (n - 1 + sigma2)`` with no departures from the empty state."""
    assert departure_rate(n, sigma2) == pytest.approx(expected)


@pytest.mark.parametrize(
    ("epsilon", "sigma2", "expected"),
    [
        pytest.param(0.01, 1e-8, 100, id="reference"),
        pytest.param(1.0, 0.5, 1, id="half-noise"),
        pytest.param(0.01, 1.0, None, id="unit-noise"),
        pytest.param(1.0, 0.6, None, id="above-inverse-load"),
    ],
)
def test_drift_bound(epsilon: float, sigma2: float, expected: int | None) -> None:
    """The locally stable set ends where the drift turns positive."""
    assert drift_bound(epsilon, sigma2) == expected


@pytest.mark.parametrize(
    ("n", "expected"),
    [pytest.param(0, 0.5, id="first-arrival"), pytest.param(1, 0.75, id="second")],
)
def test_tau_step_reference_values(n: int, expected: float) -> None:
    """Hand-computed steps at ``lambda |D| = 2`` and ``sigma2 = 1``."""
    assert tau_step(n, 2.0, 1.0) == pytest.approx(expected)
    assert tau_step_closed(n, 1.0, 1.0) == pytest.approx(expected)


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(min_value=0, max_value=300),
    epsilon=st.floats(min_value=0.005, max_value=2.0),
    sigma2=st.floats(min_value=1e-6, max_value=5.0),
)
def test_closed_form_matches_recursion(n: int, epsilon: float, sigma2: float) -> None:
    """The series and the recursion agree step by step."""
    recursion = tau_step(n, 1.0 + epsilon, sigma2)
    assert tau_step_closed(n, epsilon, sigma2) == pytest.approx(recursion, rel=1e-9)


def test_tau_cum_reference_value() -> None:
    """``E[tau_{0,2}] = 0.5 + 0.75`` by both methods."""
    assert tau_cum(2, 1.0, 1.0) == pytest.approx(1.25)
    assert tau_cum(2, 1.0, 1.0, PassageMethod.CLOSED) == pytest.approx(1.25)
    assert tau_cum(0, 1.0, 1.0) == 0.0


@pytest.mark.parametrize("n", [1, 10, 100])
def test_unit_noise_closed_form(n: int) -> None:
    """At ``sigma2 = 1`` the passage time has an elementary closed form."""
    epsilon = 0.1
    assert tau_cum(n, epsilon, 1.0, PassageMethod.CLOSED) == pytest.approx(
        tau_cum(n, epsilon, 1.0), rel=1e-10
    )


def test_tau_cum_rejects_negative_targets() -> None:
    """User counts are non-negative."""
    with pytest.raises(ParameterError, match="non-negative"):
        tau_cum(-1, 1.0, 1.0)


@pytest.mark.parametrize(
    ("arguments", "fragment"),
    [
        pytest.param((3, 0.0, 1.0), "arrival rate", id="arrival-rate"),
        pytest.param((3, 1.0, 0.0), "normalised noise", id="noise"),
        pytest.param((-1, 1.0, 1.0), "table size", id="size"),
    ],
)
def test_tau_steps_validation(
    arguments: tuple[int, float, float], fragment: str
) -> None:
    """The recursion needs positive rates."""
    with pytest.raises(ParameterError, match=fragment):
        tau_steps(*arguments)


def test_first_passage_variance() -> None:
    """The first arrival is exponential."""
    assert tau_first_variance(2.0) == 0.25


def test_seconds_per_unit_of_reference_network() -> None:
    """One chain unit is ``ln 2 / (B mu)`` seconds."""
    assert seconds_per_unit(baseline_params()) == pytest.approx(math.log(2.0) / 1e4)


def test_build_table() -> None:
    """The table accumulates the step times from zero."""
    table = build_table(3, epsilon=1.0, sigma2=1.0, seconds_scale=2.0)
    np.testing.assert_allclose(table.tau_step, [0.5, 0.75, 0.875])
    np.testing.assert_allclose(table.tau_cum, [0.0, 0.5, 1.25, 2.125])
    assert table.arrival_rate == 2.0
    seconds = table.in_seconds()
    np.testing.assert_allclose(seconds.tau_cum, [0.0, 1.0, 2.5, 4.25])
    assert seconds.seconds_scale == 1.0
    assert list(table.rows()) == [(0, 0.5, 0.0), (1, 0.75, 0.5), (2, 0.875, 1.25)]


def test_build_table_methods_agree() -> None:
    """Recursion and closed-form tables match."""
    recursion = build_table(80, epsilon=0.05, sigma2=0.2)
    closed = build_table(80, epsilon=0.05, sigma2=0.2, method=PassageMethod.CLOSED)
    np.testing.assert_allclose(closed.tau_cum, recursion.tau_cum, rtol=1e-9)


def test_build_table_rejects_non_positive_epsilon() -> None:
    """Tables live above the critical rate."""
    with pytest.raises(ParameterError, match="epsilon must be positive"):
        build_table(3, epsilon=0.0, sigma2=1.0)


def test_low_noise_delays_escape() -> None:
    """Less noise means a longer climb past the drift bound."""
    quiet = tau_cum(150, 0.01, 0.01)
    loud = tau_cum(150, 0.01, 11.0)
    assert quiet > loud


def test_tau_sigma_sweep_is_linear_in_inverse_noise() -> None:
    """``E[tau_{0,n}]`` grows with ``1 / sigma2``."""
    sweep = tau_sigma_sweep(50, 0.01, np.geomspace(0.05, 5.0, 6))
    assert sweep.slope > 0.0
    assert 0.0 <= sweep.r_squared <= 1.0
    assert sweep.inverse_sigma2.size == 6
    assert np.all(np.diff(sweep.tau_cum) < 0.0)


def test_tau_sigma_sweep_needs_two_levels() -> None:
    """A single point has no fit."""
    with pytest.raises(ParameterError, match="two noise levels"):
        tau_sigma_sweep(10, 0.1, [1.0])


def test_growth_slopes() -> None:
    """Slopes are reported for every positive count."""
    table = build_table(200, epsilon=0.01, sigma2=11.0)
    slopes = growth_slopes(table)
    assert slopes.shape == (200,)
    assert np.all(np.isfinite(slopes))
    assert np.all(slopes > 0.0)
    assert growth_slopes(build_table(1, epsilon=1.0, sigma2=1.0)).tolist() == [0.0]
