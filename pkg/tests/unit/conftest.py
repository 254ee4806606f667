"""Shared fixtures for the model, solver and simulation unit tests.

Parameter fixtures return the reference network and the variants the test
modules reuse; solver fixtures keep grids at their minimum size so
the second-order tests stay fast.
"""

from __future__ import annotations

import math
import typing as typ

import pytest

from cellflow.meanfield.first_order import solve_fixed_point
from cellflow.meanfield.second_order import RadialGrid
from cellflow.model import baseline_params

if typ.TYPE_CHECKING:
    from cellflow.meanfield.first_order import FoSolution
    from cellflow.model import NetworkParams


@pytest.fixture
def baseline() -> NetworkParams:
    """Return the reference network at ``lambda = 0.3``."""
    return baseline_params()


@pytest.fixture
def full_inversion() -> NetworkParams:
    """Return the reference network under full channel inversion."""
    return baseline_params(inversion=1.0)


@pytest.fixture
def chain_network() -> NetworkParams:
    """Return a full-inversion network whose chain has ``lambda |D| = 2``.

    ``B mu / ln 2`` is set to one, so one chain time unit is one second and
    the critical total arrival rate is one user per second.
    """
    radius = 1.0
    area = math.pi * radius**2
    return baseline_params(
        arrival_rate=2.0 / area,
        mu=1.0,
        bandwidth=math.log(2.0),
        sigma2=1.0,
        inversion=1.0,
        radius=radius,
    )


@pytest.fixture
def small_grid(baseline: NetworkParams) -> RadialGrid:
    """Return the coarsest grid the second-order solver accepts."""
    return RadialGrid(baseline.radius, radial_cells=16, angular_cells=8)


@pytest.fixture
def lower_solution(baseline: NetworkParams) -> FoSolution:
    """Return the first-order solution of the reference network."""
    return solve_fixed_point(baseline.arrival_rate, baseline)[0]
