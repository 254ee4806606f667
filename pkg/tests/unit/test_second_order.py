"""Tests for ``cellflow.meanfield.second_order``."""

from __future__ import annotations

import dataclasses as dc
import math
import typing as typ

import numpy as np
import pytest

from cellflow.meanfield import (
    FieldValueError,
    MeanFieldError,
    PointConvergenceError,
    UnstableRegimeError,
)
from cellflow.meanfield.first_order import intensity_fo, solve_fixed_point
from cellflow.meanfield.second_order import (
    DEFAULT_WEIGHTS,
    IntensityField,
    RadialGrid,
    SecondMoment,
    SecondOrderOptions,
    center_edge_ratio,
    conditional_intensity,
    equation_residuals,
    init_from_fo,
    interference_field,
    mean_interference_pair,
    solve_so,
    update_gamma1,
    update_gamma2,
    validate_weights,
)
from cellflow.model import baseline_params

if typ.TYPE_CHECKING:
    from cellflow.meanfield.first_order import FoSolution
    from cellflow.meanfield.second_order import SecondOrderSolution
    from cellflow.model import NetworkParams

#: Arrival rate at which the first order visibly underestimates the load.
LOADED_RATE = 0.425


@pytest.fixture
def ppp_fields(
    small_grid: RadialGrid, lower_solution: FoSolution, baseline: NetworkParams
) -> tuple[IntensityField, SecondMoment]:
    """Return first-order fields with Poisson pair moments."""
    return init_from_fo(lower_solution, small_grid, baseline)


@pytest.fixture
def flat_fields(
    small_grid: RadialGrid, full_inversion: NetworkParams
) -> tuple[IntensityField, SecondMoment, FoSolution]:
    """Return Poisson fields of the full-inversion network with its solution."""
    (solution,) = solve_fixed_point(full_inversion.arrival_rate, full_inversion)
    gamma1, gamma2 = init_from_fo(solution, small_grid, full_inversion)
    return gamma1, gamma2, solution


@pytest.fixture(scope="module")
def loaded_solution() -> SecondOrderSolution:
    """Return the converged fields of the reference network at ``lambda = 0.425``."""
    loaded = baseline_params(arrival_rate=LOADED_RATE)
    grid = RadialGrid(loaded.radius, radial_cells=32, angular_cells=16)
    return solve_so(loaded, grid)


def _correlated_moment(
    gamma1: IntensityField, weights: tuple[float, float, float, float]
) -> SecondMoment:
    """Return a strictly positive, non-Poisson second moment on ``gamma1``'s grid."""
    grid = gamma1.grid
    rng = np.random.default_rng(7)
    noise = rng.uniform(0.5, 1.5, (grid.radial_cells, grid.radial_cells, 1))
    base = np.multiply.outer(gamma1.values, gamma1.values)[:, :, None]
    angular = 1.0 + 0.3 * np.cos(grid.angles)[None, None, :]
    return SecondMoment(grid, base * noise * angular, weights)


def test_grid_geometry(small_grid: RadialGrid) -> None:
    """Annuli tile the disk with equal widths."""
    assert small_grid.edges[0] == 0.0
    assert small_grid.edges[-1] == 100.0
    assert small_grid.areas.sum() == pytest.approx(math.pi * 1e4)
    np.testing.assert_allclose(np.diff(small_grid.edges), 6.25)
    assert small_grid.angles.size == 8
    assert small_grid.centers[0] == pytest.approx(3.125)


@pytest.mark.parametrize(
    ("radius", "expected"),
    [
        pytest.param(0.0, 0, id="origin"),
        pytest.param(7.0, 1, id="second-annulus"),
        pytest.param(100.0, 15, id="edge"),
        pytest.param(150.0, 15, id="clamped"),
    ],
)
def test_grid_cell_of(small_grid: RadialGrid, radius: float, expected: int) -> None:
    """Radii map to their annulus and clamp at the edge."""
    assert small_grid.cell_of(radius) == expected


@pytest.mark.parametrize(
    ("kwargs", "fragment"),
    [
        pytest.param({"radial_cells": 8}, "n_r >= 16", id="radial"),
        pytest.param({"angular_cells": 4}, "n_theta >= 8", id="angular"),
        pytest.param({"radius": 0.0}, "radius must be positive", id="radius"),
    ],
)
def test_grid_validation(kwargs: dict[str, float], fragment: str) -> None:
    """Grids coarser than the minimum resolution are refused."""
    arguments = {"radius": 100.0} | kwargs
    with pytest.raises(MeanFieldError, match=fragment):
        RadialGrid(**arguments)


@pytest.mark.parametrize(
    "weights",
    [
        pytest.param([0.5, 0.5, 0.5], id="three-weights"),
        pytest.param([1.2, -0.2, 0.0, 0.0], id="negative"),
        pytest.param([0.2, 0.2, 0.2, 0.2], id="not-normalised"),
    ],
)
def test_validate_weights_rejects_invalid_combinations(weights: list[float]) -> None:
    """Factorization weights form a convex combination of four terms."""
    with pytest.raises(MeanFieldError, match="factorization weights"):
        validate_weights(weights)


def test_validate_weights_returns_tuple() -> None:
    """Valid weights come back as floats."""
    assert validate_weights([0, 0.5, 0.5, 0]) == DEFAULT_WEIGHTS


def test_second_order_options_validation() -> None:
    """Tolerance and damping are range checked."""
    with pytest.raises(MeanFieldError, match="tolerance"):
        SecondOrderOptions(tolerance=0.0)
    with pytest.raises(MeanFieldError, match="damping must lie"):
        SecondOrderOptions(damping=1.5)
    with pytest.raises(MeanFieldError, match="gamma1_damping"):
        SecondOrderOptions(gamma1_damping=0.0)


def test_init_from_fo_is_poisson(
    ppp_fields: tuple[IntensityField, SecondMoment], lower_solution: FoSolution
) -> None:
    """The starting point has unit pair correlation everywhere."""
    gamma1, gamma2 = ppp_fields
    np.testing.assert_allclose(gamma2.pair_correlation(gamma1), 1.0)
    assert gamma2.weights == DEFAULT_WEIGHTS
    assert gamma1.mean_users() == pytest.approx(lower_solution.nbar, rel=0.1)


def test_decoupled_factorization_is_the_mean_interference(
    ppp_fields: tuple[IntensityField, SecondMoment], baseline: NetworkParams
) -> None:
    """With all weight on the first term ``J`` is ``int gamma1 G``."""
    gamma1, gamma2 = ppp_fields
    decoupled = dc.replace(gamma2, weights=(1.0, 0.0, 0.0, 0.0))
    grid = gamma1.grid
    expected = float(np.sum(gamma1.values * grid.gains(baseline) * grid.areas))
    field = interference_field(gamma1, decoupled, baseline)
    np.testing.assert_allclose(field, expected)
    direct = mean_interference_pair((2, 5, 3), gamma1, decoupled, baseline)
    assert direct == pytest.approx(expected)


@pytest.mark.parametrize(
    "weights",
    [
        pytest.param((0.0, 1.0, 0.0, 0.0), id="first-pair"),
        pytest.param((0.0, 0.0, 1.0, 0.0), id="second-pair"),
        pytest.param((0.0, 0.0, 0.0, 1.0), id="triple"),
    ],
)
def test_factorizations_agree_on_poisson_fields(
    ppp_fields: tuple[IntensityField, SecondMoment],
    baseline: NetworkParams,
    weights: tuple[float, float, float, float],
) -> None:
    """Every factorization reduces to the decoupled term for Poisson fields."""
    gamma1, gamma2 = ppp_fields
    grid = gamma1.grid
    expected = float(np.sum(gamma1.values * grid.gains(baseline) * grid.areas))
    field = interference_field(gamma1, dc.replace(gamma2, weights=weights), baseline)
    np.testing.assert_allclose(field, expected, rtol=1e-10)


@pytest.mark.parametrize("index", [(0, 0, 0), (3, 11, 2), (15, 4, 7)])
def test_interference_field_matches_direct_summation(
    ppp_fields: tuple[IntensityField, SecondMoment],
    baseline: NetworkParams,
    index: tuple[int, int, int],
) -> None:
    """The vectorised and FFT paths agree with the pointwise sum."""
    gamma1, _ = ppp_fields
    gamma2 = _correlated_moment(gamma1, (0.1, 0.2, 0.3, 0.4))
    field = interference_field(gamma1, gamma2, baseline)
    assert field[index] == pytest.approx(
        mean_interference_pair(index, gamma1, gamma2, baseline), rel=1e-9
    )


def test_interference_field_needs_positive_pairs(
    ppp_fields: tuple[IntensityField, SecondMoment], baseline: NetworkParams
) -> None:
    """The ratio terms divide by ``gamma2``."""
    gamma1, gamma2 = ppp_fields
    values = gamma2.values.copy()
    values[0, 0, 0] = 0.0
    with pytest.raises(FieldValueError, match="strictly positive"):
        interference_field(gamma1, dc.replace(gamma2, values=values), baseline)


def test_update_gamma2_is_symmetric(
    ppp_fields: tuple[IntensityField, SecondMoment], baseline: NetworkParams
) -> None:
    """The pair update is invariant under swapping and mirroring."""
    gamma1, _ = ppp_fields
    gamma2 = _correlated_moment(gamma1, DEFAULT_WEIGHTS)
    updated = update_gamma2(gamma1, gamma2, baseline).values
    np.testing.assert_allclose(updated, updated.transpose(1, 0, 2), rtol=1e-12)
    mirrored = np.roll(updated[:, :, ::-1], 1, axis=2)
    np.testing.assert_allclose(updated, mirrored, rtol=1e-12)
    assert np.all(updated > 0.0)


def test_updates_vanish_without_arrivals(
    ppp_fields: tuple[IntensityField, SecondMoment], baseline: NetworkParams
) -> None:
    """An idle network has empty fields and zero residuals."""
    gamma1, gamma2 = ppp_fields
    idle = baseline.with_arrival_rate(0.0)
    assert not np.any(update_gamma2(gamma1, gamma2, idle).values)
    assert not np.any(update_gamma1(gamma1, gamma2, idle).values)
    assert equation_residuals(gamma1, gamma2, idle) == (0.0, 0.0)


def test_update_gamma1_requires_positive_intensity(
    ppp_fields: tuple[IntensityField, SecondMoment], baseline: NetworkParams
) -> None:
    """The point iteration divides by ``gamma1``."""
    gamma1, gamma2 = ppp_fields
    values = gamma1.values.copy()
    values[3] = 0.0
    with pytest.raises(FieldValueError, match="gamma1 must be strictly positive"):
        update_gamma1(dc.replace(gamma1, values=values), gamma2, baseline)


def test_update_gamma1_reproduces_first_order_under_poisson_closure(
    flat_fields: tuple[IntensityField, SecondMoment, FoSolution],
    full_inversion: NetworkParams,
) -> None:
    """Poisson pairs turn the single-user equation into the first-order one."""
    gamma1, gamma2, solution = flat_fields
    updated = update_gamma1(gamma1, gamma2, full_inversion)
    np.testing.assert_allclose(updated.values, solution.z_star, rtol=1e-5)
    single, _ = equation_residuals(gamma1, gamma2, full_inversion)
    assert single < 1e-5


def test_update_gamma1_reports_unsettled_cells(
    ppp_fields: tuple[IntensityField, SecondMoment], baseline: NetworkParams
) -> None:
    """A starved point iteration names the cell it gave up on."""
    gamma1, gamma2 = ppp_fields
    options = SecondOrderOptions(max_point_iterations=1)
    with pytest.raises(PointConvergenceError, match="radial cell") as excinfo:
        update_gamma1(gamma1, gamma2, baseline, options)
    assert 0 <= excinfo.value.index < gamma1.grid.radial_cells


def test_solve_so_refuses_unstable_rates(small_grid: RadialGrid) -> None:
    """At or above ``lambda_c`` the stationary regime does not exist."""
    params = baseline_params(arrival_rate=0.5)
    with pytest.raises(UnstableRegimeError, match="critical rate"):
        solve_so(params, small_grid)


def test_solve_so_without_arrivals(
    small_grid: RadialGrid, baseline: NetworkParams
) -> None:
    """The idle network converges immediately to empty fields."""
    solution = solve_so(baseline.with_arrival_rate(0.0), small_grid)
    assert solution.diagnostics.converged
    assert solution.diagnostics.iterations == 1
    assert solution.gamma1.mean_users() == 0.0
    assert solution.gamma2.values.shape == (16, 16, 8)


def test_solve_so_with_poisson_closure_matches_first_order(
    small_grid: RadialGrid,
    flat_fields: tuple[IntensityField, SecondMoment, FoSolution],
    full_inversion: NetworkParams,
) -> None:
    """Forcing Poisson pairs makes the solver a first-order solver."""
    _, _, solution = flat_fields
    options = SecondOrderOptions(ppp_closure=True, tolerance=1e-6)
    result = solve_so(full_inversion, small_grid, options=options)
    assert result.diagnostics.converged
    assert math.isnan(result.diagnostics.gamma2_residual)
    np.testing.assert_allclose(result.gamma1.values, solution.z_star, rtol=1e-4)
    np.testing.assert_allclose(result.gamma2.pair_correlation(result.gamma1), 1.0)
    report = result.diagnostics.as_dict()
    assert report["iterations"] == result.diagnostics.iterations
    assert len(report["residual_history"]) == report["iterations"]


def test_conditional_intensity_of_poisson_fields(
    ppp_fields: tuple[IntensityField, SecondMoment],
) -> None:
    """Without correlation an observer sees the unconditional intensity."""
    gamma1, gamma2 = ppp_fields
    for radius in (0.0, 50.0, 100.0):
        np.testing.assert_allclose(
            conditional_intensity(gamma1, gamma2, radius), gamma1.values
        )
    assert center_edge_ratio(gamma1, gamma2) == pytest.approx(1.0)


def test_conditional_intensity_validates_observer(
    ppp_fields: tuple[IntensityField, SecondMoment],
) -> None:
    """Observers live on the disk and in an occupied annulus."""
    gamma1, gamma2 = ppp_fields
    with pytest.raises(MeanFieldError, match="observer radius"):
        conditional_intensity(gamma1, gamma2, 120.0)
    values = gamma1.values.copy()
    values[0] = 0.0
    with pytest.raises(MeanFieldError, match="zero intensity"):
        conditional_intensity(dc.replace(gamma1, values=values), gamma2, 1.0)




def test_pair_update_raises_near_origin_pair_mass(small_grid: RadialGrid) -> None:
    """One pair sweep from Poisson pairs correlates users with the centre."""
    loaded = baseline_params(arrival_rate=LOADED_RATE)
    lower = solve_fixed_point(loaded.arrival_rate, loaded)[0]
    gamma1, gamma2 = init_from_fo(lower, small_grid, loaded)
    updated = update_gamma2(gamma1, gamma2, loaded)
    before = gamma2.values[0].mean(axis=1) @ small_grid.areas
    after = updated.values[0].mean(axis=1) @ small_grid.areas
    assert after > before


@pytest.mark.slow
def test_solve_so_converges_on_the_reference_network(
    small_grid: RadialGrid, baseline: NetworkParams, lower_solution: FoSolution
) -> None:
    """The coupled iteration settles below ``lambda_c`` near the first order."""
    result = solve_so(baseline, small_grid)
    diagnostics = result.diagnostics
    assert diagnostics.converged
    assert diagnostics.gamma1_residual < 1e-5
    assert diagnostics.gamma2_residual < 1e-5
    assert np.all(result.gamma1.values > 0.0)
    assert result.gamma1.mean_users() == pytest.approx(lower_solution.nbar, rel=0.5)


@pytest.mark.slow
def test_loaded_solution_meets_both_equations(
    loaded_solution: SecondOrderSolution,
) -> None:
    """Convergence means both conservation equations hold, not only a small step."""
    diagnostics = loaded_solution.diagnostics
    assert diagnostics.converged
    assert diagnostics.gamma1_residual < 1e-5
    assert diagnostics.gamma2_residual < 1e-5


@pytest.mark.slow
def test_second_order_exceeds_first_order_when_loaded(
    loaded_solution: SecondOrderSolution,
) -> None:
    """Pair correlation raises the mean user count above the first order."""
    loaded = baseline_params(arrival_rate=LOADED_RATE)
    lower = solve_fixed_point(loaded.arrival_rate, loaded)[0]
    assert loaded_solution.gamma1.mean_users() > lower.nbar


@pytest.mark.slow
def test_centre_observer_sees_more_edge_users(
    loaded_solution: SecondOrderSolution,
) -> None:
    """Near the edge: centre observer >= edge observer >= first-order intensity."""
    loaded = baseline_params(arrival_rate=LOADED_RATE)
    lower = solve_fixed_point(loaded.arrival_rate, loaded)[0]
    gamma1, gamma2 = loaded_solution.gamma1, loaded_solution.gamma2
    grid = gamma1.grid
    origin = conditional_intensity(gamma1, gamma2, 0.0)[-1]
    edge = conditional_intensity(gamma1, gamma2, grid.radius)[-1]
    first_order = float(intensity_fo(grid.centers[-1], lower, loaded))
    assert origin >= edge >= first_order
    assert 2.0 <= center_edge_ratio(gamma1, gamma2) <= 6.0


@pytest.mark.slow
def test_grid_refinement_barely_moves_the_mean(
    loaded_solution: SecondOrderSolution,
) -> None:
    """Doubling both resolutions changes the mean user count by under 2%."""
    loaded = baseline_params(arrival_rate=LOADED_RATE)
    fine = RadialGrid(loaded.radius, radial_cells=64, angular_cells=32)
    refined = solve_so(loaded, fine)
    assert refined.diagnostics.converged
    assert refined.gamma1.mean_users() == pytest.approx(
        loaded_solution.gamma1.mean_users(), rel=0.02
    )
