"""Second-order mean-field approximation on a polar grid.

The stationary law is rotation invariant, so the intensity ``gamma1`` is a
function of the radius alone and the second moment ``gamma2`` a function of
two radii and the angle between them. The disk is split into ``n_r``
equal-width annuli, each cut into ``n_theta`` sectors; fields are piecewise
constant per annulus (``gamma1``) and per (annulus, annulus, angle) triple
(``gamma2``).

Two coupled equations are iterated to a joint fixed point:

* pair rate conservation, solved pointwise for ``gamma2`` given the mean
  interference ``J`` seen by a pair, where the third moment inside ``J`` is
  replaced by a convex combination of four factorizations;
* single-user rate conservation, solved per annulus for ``gamma1`` with the
  other users seen from ``x`` modelled as a Poisson process of intensity
  ``gamma2(x, .) / gamma1(x)``.

The solver starts from the first-order solution and alternates a damped
``gamma2`` loop with one ``gamma1`` update per outer iteration.
"""

from __future__ import annotations

import dataclasses as dc
import logging
import math
import typing as typ

import numpy as np

from cellflow.meanfield.errors import (
    FieldValueError,
    MeanFieldError,
    PointConvergenceError,
    SolverDivergenceError,
    UnstableRegimeError,
)
from cellflow.meanfield.first_order import intensity_fo, solve_fixed_point
from cellflow.model import NetworkParams, critical_rate, effective_gain
from cellflow.numerics import t_rule
from cellflow.utils import metrics

if typ.TYPE_CHECKING:
    import collections.abc as cabc

    import numpy.typing as npt

    from cellflow.meanfield.first_order import FoSolution

LOGGER = logging.getLogger(__name__)

type FloatArray = npt.NDArray[np.float64]
type Weights = tuple[float, float, float, float]

DEFAULT_WEIGHTS: Weights = (0.0, 0.5, 0.5, 0.0)
_MIN_RADIAL = 16
_MIN_ANGULAR = 8
_DIVERGENCE_STREAK = 10
_LN2 = math.log(2.0)


@dc.dataclass(frozen=True, slots=True)
class RadialGrid:
    """Equal-width annuli over ``[0, R]`` with ``n_theta`` angular sectors.

    Attributes
    ----------
    radius : float
        Cell radius ``R`` in metres.
    radial_cells : int
        Number of annuli ``n_r`` (at least 16).
    angular_cells : int
        Number of angular offsets ``n_theta`` (at least 8).
    """

    radius: float
    radial_cells: int = 32
    angular_cells: int = 16

    def __post_init__(self) -> None:
        """Enforce the minimum resolution."""
        if self.radial_cells < _MIN_RADIAL or self.angular_cells < _MIN_ANGULAR:
            message = (
                f"grid needs n_r >= {_MIN_RADIAL} and n_theta >= {_MIN_ANGULAR}; "
                f"received ({self.radial_cells}, {self.angular_cells})."
            )
            raise MeanFieldError(message)
        if not self.radius > 0.0:
            message = f"grid radius must be positive; received {self.radius}."
            raise MeanFieldError(message)

    @property
    def edges(self) -> FloatArray:
        """Annulus boundaries, ``n_r + 1`` values from 0 to ``R``."""
        return np.linspace(0.0, self.radius, self.radial_cells + 1)

    @property
    def centers(self) -> FloatArray:
        """Mid-radius of each annulus."""
        edges = self.edges
        return 0.5 * (edges[:-1] + edges[1:])

    @property
    def areas(self) -> FloatArray:
        """Area of each annulus; the areas sum to ``pi R^2``."""
        return math.pi * np.diff(self.edges**2)

    @property
    def angles(self) -> FloatArray:
        """Angular offsets ``2 pi k / n_theta`` between pair members."""
        return 2.0 * math.pi * np.arange(self.angular_cells) / self.angular_cells

    def cell_of(self, radius: float) -> int:
        """Return the annulus containing ``radius``, clamped to the disk."""
        index = int(np.searchsorted(self.edges, radius, side="right")) - 1
        return min(max(index, 0), self.radial_cells - 1)

    def gains(self, params: NetworkParams) -> FloatArray:
        """Return the effective gain at every annulus centre."""
        return np.asarray(effective_gain(self.centers, params), dtype=np.float64)


@dc.dataclass(frozen=True, slots=True)
class IntensityField:
    """Piecewise-constant intensity ``gamma1`` in users per square metre."""

    grid: RadialGrid
    values: FloatArray

    def mean_users(self) -> float:
        """Return ``int_D gamma1 dy``, the mean number of active users."""
        return float(self.values @ self.grid.areas)


@dc.dataclass(frozen=True, slots=True)
class SecondMoment:
    """Second moment ``gamma2[i, j, k]`` in users squared per metre to the fourth.

    Index ``k`` is the angular offset between the two points. ``weights``
    are the convex-combination weights of the third-moment factorizations.
    """

    grid: RadialGrid
    values: FloatArray
    weights: Weights = DEFAULT_WEIGHTS

    def pair_correlation(self, gamma1: IntensityField) -> FloatArray:
        """Return ``gamma2 / (gamma1 x gamma1)``; one for a Poisson process."""
        outer = np.multiply.outer(gamma1.values, gamma1.values)[:, :, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(outer > 0.0, self.values / outer, np.nan)


@dc.dataclass(frozen=True, slots=True)
class SecondOrderOptions:
    """Iteration controls for :func:`solve_so`."""

    tolerance: float = 1e-5
    max_outer: int = 200
    damping: float = 0.5
    max_inner: int = 50
    gamma1_damping: float = 0.5
    max_point_iterations: int = 2000
    allow_unstable: bool = False
    ppp_closure: bool = False

    def __post_init__(self) -> None:
        """Reject non-positive tolerances and damping outside ``(0, 1]``."""
        if not self.tolerance > 0.0:
            message = "second-order tolerance must be positive."
            raise MeanFieldError(message)
        for name in ("damping", "gamma1_damping"):
            if not 0.0 < getattr(self, name) <= 1.0:
                message = f"{name} must lie in (0, 1]."
                raise MeanFieldError(message)


@dc.dataclass(slots=True)
class SolverDiagnostics:
    """Convergence record of one :func:`solve_so` run."""

    iterations: int = 0
    converged: bool = False
    residual_history: list[float] = dc.field(default_factory=list)
    gamma1_residual: float = math.nan
    gamma2_residual: float = math.nan

    def as_dict(self) -> dict[str, typ.Any]:
        """Return a JSON-friendly mapping."""
        return dc.asdict(self)


@dc.dataclass(frozen=True, slots=True)
class SecondOrderSolution:
    """Converged (or last) fields with the convergence record."""

    gamma1: IntensityField
    gamma2: SecondMoment
    diagnostics: SolverDiagnostics


def validate_weights(weights: cabc.Sequence[float]) -> Weights:
    """Return ``weights`` as a 4-tuple after checking it is a convex combination.

    Raises
    ------
    MeanFieldError
        If there are not four non-negative weights summing to one.

    Examples
    --------
    >>> validate_weights([0, 0.5, 0.5, 0])
    (0.0, 0.5, 0.5, 0.0)
    """
    values = tuple(float(weight) for weight in weights)
    if len(values) != 4 or min(values) < 0.0 or not math.isclose(sum(values), 1.0):
        message = (
            f"factorization weights must be four non-negative values summing to "
            f"one; received {list(values)}."
        )
        raise MeanFieldError(message)
    return typ.cast("Weights", values)


def init_from_fo(
    solution: FoSolution,
    grid: RadialGrid,
    params: NetworkParams,
    weights: Weights = DEFAULT_WEIGHTS,
) -> tuple[IntensityField, SecondMoment]:
    """Return first-order fields sampled on ``grid`` with Poisson pair moments.

    Parameters
    ----------
    solution : FoSolution
        First-order solution providing ``Z``.
    grid : RadialGrid
        Target grid.
    params : NetworkParams
        Network constants.
    weights : Weights, optional
        Factorization weights carried by the second moment.

    Returns
    -------
    tuple[IntensityField, SecondMoment]
        ``gamma1(r_i) = Z / G(r_i)`` and ``gamma2[i, j, k] = gamma1_i gamma1_j``.
    """
    gamma1 = np.asarray(intensity_fo(grid.centers, solution, params))
    gamma2 = np.repeat(
        np.multiply.outer(gamma1, gamma1)[:, :, None], grid.angular_cells, axis=2
    )
    return IntensityField(grid, gamma1), SecondMoment(grid, gamma2, weights)


def _pair_mass(gamma2: SecondMoment, gains: FloatArray) -> FloatArray:
    """Return ``P_i = sum_{m,s} gamma2[i, m, s] G_m w_m / n_theta``."""
    grid = gamma2.grid
    per_sector = gains * grid.areas / grid.angular_cells
    return np.einsum("ims,m->i", gamma2.values, per_sector)


def _triple_term(
    gamma1: IntensityField, gamma2: SecondMoment, gains: FloatArray
) -> FloatArray:
    """Return ``D[i, j, k] = sum_{m,s} gamma2[i,m,s] gamma2[j,m,s-k] c_m``.

    The sum over ``s`` is a circular cross-correlation evaluated by FFT.
    Annuli with zero intensity are dropped.
    """
    grid = gamma2.grid
    positive = gamma1.values > 0.0
    if not np.all(positive):
        LOGGER.warning(
            "dropping %d annuli with zero intensity from the fourth "
            "factorization",
            int(np.count_nonzero(~positive)),
        )
    coefficients = np.zeros_like(gamma1.values)
    coefficients[positive] = (
        gains[positive] * grid.areas[positive]
        / (grid.angular_cells * gamma1.values[positive])
    )
    spectrum = np.fft.rfft(gamma2.values, axis=2)
    combined = np.einsum("imf,jmf,m->ijf", spectrum, spectrum.conj(), coefficients)
    return np.fft.irfft(combined, n=grid.angular_cells, axis=2)


def interference_field(
    gamma1: IntensityField, gamma2: SecondMoment, params: NetworkParams
) -> FloatArray:
    """Return ``J[i, j, k]``, the mean interference seen by every grid pair.

    Raises
    ------
    FieldValueError
        If ``gamma2`` has non-positive entries where a term divides by it.
    """
    w_a, w_b, w_c, w_d = gamma2.weights
    gains = gamma2.grid.gains(params)
    values = gamma2.values
    if (w_b or w_c or w_d) and np.any(values <= 0.0):
        message = "gamma2 must be strictly positive to evaluate J."
        raise FieldValueError(message)
    decoupled = float(gamma1.values @ (gains * gamma1.grid.areas))
    field = np.full(values.shape, w_a * decoupled)
    if w_b or w_c:
        mass = _pair_mass(gamma2, gains)
        cross = np.multiply.outer(mass, gamma1.values)
        field += (w_b * cross[:, :, None] + w_c * cross.T[:, :, None]) / values
    if w_d:
        field += w_d * _triple_term(gamma1, gamma2, gains) / values
    return field


def mean_interference_pair(
    index: tuple[int, int, int],
    gamma1: IntensityField,
    gamma2: SecondMoment,
    params: NetworkParams,
) -> float:
    """Return ``J`` for one pair by direct summation over the grid.

    Parameters
    ----------
    index : tuple[int, int, int]
        ``(i, j, k)``: the annuli of ``x`` and ``y`` and their angular offset.
    gamma1 : IntensityField
        Current intensity.
    gamma2 : SecondMoment
        Current second moment and factorization weights.
    params : NetworkParams
        Network constants.

    Returns
    -------
    float
        ``int gamma3(x, y, u) / gamma2(x, y) G(u) du`` under the weighted
        factorization.
    """
    i, j, k = index
    grid = gamma2.grid
    n_theta = grid.angular_cells
    gains = grid.gains(params)
    per_sector = gains * grid.areas / n_theta
    g2 = gamma2.values
    g1 = gamma1.values
    w_a, w_b, w_c, w_d = gamma2.weights
    total = w_a * float(np.sum(g1 * gains * grid.areas))
    pair = g2[i, j, k]
    if w_b:
        total += w_b * g1[j] * float(np.sum(g2[i] * per_sector[:, None])) / pair
    if w_c:
        total += w_c * g1[i] * float(np.sum(g2[j] * per_sector[:, None])) / pair
    if w_d:
        shifted = np.roll(g2[j], k, axis=1)
        live = g1 > 0.0
        products = (g2[i] * shifted)[live] * (per_sector[live] / g1[live])[:, None]
        total += w_d * float(np.sum(products)) / pair
    return total


def _symmetrize(values: FloatArray) -> FloatArray:
    """Average over ``i <-> j`` and ``k <-> -k``."""
    swapped = 0.5 * (values + values.transpose(1, 0, 2))
    mirrored = np.roll(swapped[:, :, ::-1], 1, axis=2)
    return 0.5 * (swapped + mirrored)


def _check_finite(values: FloatArray, label: str) -> None:
    """Raise when ``values`` holds NaN, infinities, or negative entries."""
    if not np.all(np.isfinite(values)) or np.any(values < 0.0):
        message = f"{label} update produced non-finite or negative values."
        raise FieldValueError(message)


def update_gamma2(
    gamma1: IntensityField, gamma2: SecondMoment, params: NetworkParams
) -> SecondMoment:
    """Return one sweep of the pair rate-conservation equation.

    ``gamma2(x, y) = c (gamma1(x) + gamma1(y)) / [G(x) / (J + G(y) + sigma2)
    + G(y) / (J + G(x) + sigma2)]`` with ``c = rho ln 2 / B`` and ``J``
    computed from the incoming ``gamma2``. The output is symmetrized.

    Parameters
    ----------
    gamma1 : IntensityField
        Current intensity.
    gamma2 : SecondMoment
        Current second moment.
    params : NetworkParams
        Network constants.

    Returns
    -------
    SecondMoment
        The updated second moment with the same weights.

    Raises
    ------
    FieldValueError
        If the update produces NaN or negative values.
    """  # noqa: DOC502 -- also propagated from interference_field
    grid = gamma2.grid
    if params.arrival_rate == 0.0:
        return dc.replace(gamma2, values=np.zeros_like(gamma2.values))
    gains = grid.gains(params)
    interference = interference_field(gamma1, gamma2, params)
    g_x = gains[:, None, None]
    g_y = gains[None, :, None]
    sigma2 = params.sigma2
    service = g_x / (interference + g_y + sigma2) + g_y / (interference + g_x + sigma2)
    births = np.add.outer(gamma1.values, gamma1.values)[:, :, None]
    scale = params.rho * _LN2 / params.bandwidth
    with np.errstate(divide="ignore", invalid="ignore"):
        updated = _symmetrize(scale * births / service)
    _check_finite(updated, "gamma2")
    return dc.replace(gamma2, values=updated)


@dc.dataclass(frozen=True, slots=True)
class _PointKernel:
    """``t``-rule data for the per-annulus ``gamma1`` equation."""

    nodes: FloatArray
    weights: FloatArray
    cutoff: float
    exponents: FloatArray
    saturated: FloatArray
    sigma2: float

    def integral(self, gamma1: FloatArray) -> FloatArray:
        """Return ``int exp(-sigma2 t - E_i(t) / gamma1_i) dt`` per annulus."""
        with np.errstate(divide="ignore"):
            inverse = np.where(gamma1 > 0.0, 1.0 / gamma1, np.inf)
        damped = np.exp(
            -self.sigma2 * self.nodes[:, None] - self.exponents * inverse[None, :]
        )
        body = self.weights @ np.nan_to_num(damped)
        tail = np.exp(-self.saturated * inverse - self.cutoff * self.sigma2)
        return body + np.nan_to_num(tail) / self.sigma2


def _point_kernel(gamma2: SecondMoment, params: NetworkParams) -> _PointKernel:
    """Tabulate ``E_i(t) = int (1 - e^(-t G(y))) gamma2(y, x_i) dy`` on the t rule."""
    grid = gamma2.grid
    gains = grid.gains(params)
    rule = t_rule(params.min_gain)
    coupling = gamma2.values.mean(axis=2) * grid.areas[None, :]
    saturation = -np.expm1(-np.multiply.outer(rule.nodes, gains))
    return _PointKernel(
        nodes=rule.nodes,
        weights=rule.weights,
        cutoff=rule.cutoff,
        exponents=saturation @ coupling.T,
        saturated=coupling.sum(axis=1),
        sigma2=params.sigma2,
    )


def update_gamma1(
    gamma1: IntensityField,
    gamma2: SecondMoment,
    params: NetworkParams,
    options: SecondOrderOptions | None = None,
) -> IntensityField:
    """Solve the single-user rate-conservation equation at every annulus.

    ``rho ln 2 / B = gamma1(x) G(x) H_x(gamma1(x))``, where ``H_x`` is the
    outer ``t`` integral with exponent
    ``int (1 - e^(-t G(y))) gamma2(y, x) / gamma1(x) dy``. ``gamma1(x)``
    appears on both sides, so each annulus runs the damped iteration
    ``g <- (1 - a) g + a c / (G(x) H_x(g))``; ``a`` halves whenever the
    step changes direction.

    Parameters
    ----------
    gamma1 : IntensityField
        Starting intensity, strictly positive.
    gamma2 : SecondMoment
        Second moment held fixed during the update.
    params : NetworkParams
        Network constants.
    options : SecondOrderOptions | None, optional
        Damping and iteration limits.

    Returns
    -------
    IntensityField
        The updated intensity.

    Raises
    ------
    FieldValueError
        If the starting intensity is not strictly positive.
    PointConvergenceError
        If an annulus fails to settle within the iteration limit.
    """
    options = options or SecondOrderOptions()
    if params.arrival_rate == 0.0:
        return dc.replace(gamma1, values=np.zeros_like(gamma1.values))
    if np.any(gamma1.values <= 0.0) or not np.all(np.isfinite(gamma1.values)):
        message = "gamma1 must be strictly positive and finite before its update."
        raise FieldValueError(message)
    gains = gamma1.grid.gains(params)
    kernel = _point_kernel(gamma2, params)
    target = params.rho * _LN2 / params.bandwidth
    current = gamma1.values.copy()
    step = np.full_like(current, options.gamma1_damping)
    previous_change = np.zeros_like(current)
    tolerance = 1e-3 * options.tolerance
    settled = np.zeros(current.shape, dtype=bool)
    for _ in range(options.max_point_iterations):
        proposal = target / (gains * kernel.integral(current))
        change = proposal - current
        settled = np.abs(change) <= tolerance * current
        if np.all(settled):
            return dc.replace(gamma1, values=proposal)
        step = np.where(change * previous_change < 0.0, 0.5 * step, step)
        current += step * change
        previous_change = change
    unsettled = int(np.flatnonzero(~settled)[0])
    raise PointConvergenceError(unsettled, iterations=options.max_point_iterations)


def equation_residuals(
    gamma1: IntensityField, gamma2: SecondMoment, params: NetworkParams
) -> tuple[float, float]:
    """Return the largest relative residual of each rate-conservation equation.

    Returns
    -------
    tuple[float, float]
        Residuals of the single-user and pair equations.
    """
    if params.arrival_rate == 0.0:
        return 0.0, 0.0
    target = params.rho * _LN2 / params.bandwidth
    kernel = _point_kernel(gamma2, params)
    balance = gamma1.values * gamma1.grid.gains(params) * kernel.integral(gamma1.values)
    single = float(np.max(np.abs(balance - target)) / target)
    updated = update_gamma2(gamma1, gamma2, params).values
    pair = float(np.max(np.abs(updated - gamma2.values) / gamma2.values))
    return single, pair


def _relative_change(new: FloatArray, old: FloatArray) -> float:
    """Return the sup-norm change of ``new`` relative to the sup-norm of ``old``."""
    scale = float(np.max(np.abs(old)))
    if scale == 0.0:
        return float(np.max(np.abs(new)))
    return float(np.max(np.abs(new - old))) / scale


def _ppp_moment(gamma1: IntensityField, template: SecondMoment) -> SecondMoment:
    """Return the Poisson second moment ``gamma1 x gamma1`` on ``template``'s grid."""
    product = np.multiply.outer(gamma1.values, gamma1.values)[:, :, None]
    values = np.repeat(product, template.grid.angular_cells, axis=2)
    return dc.replace(template, values=values)


def _relax_gamma2(
    gamma1: IntensityField,
    gamma2: SecondMoment,
    params: NetworkParams,
    options: SecondOrderOptions,
) -> SecondMoment:
    """Iterate the damped pair update until it settles or the inner cap is hit."""
    if options.ppp_closure:
        return _ppp_moment(gamma1, gamma2)
    for _ in range(options.max_inner):
        updated = update_gamma2(gamma1, gamma2, params)
        metrics.increment_counter("solver.iterations", solver="so-gamma2")
        blended = (1.0 - options.damping) * gamma2.values
        blended += options.damping * updated.values
        change = _relative_change(blended, gamma2.values)
        gamma2 = dc.replace(gamma2, values=blended)
        if change < options.tolerance:
            break
    return gamma2


def _check_regime(
    arrival_rate: float, params: NetworkParams, options: SecondOrderOptions
) -> None:
    """Refuse ``lambda >= lambda_c`` unless explicitly allowed."""
    threshold = critical_rate(params)
    if arrival_rate >= threshold and not options.allow_unstable:
        message = (
            f"lambda={arrival_rate:g} is not below the critical rate "
            f"{threshold:g}; the second-order solver needs a stable regime "
            "(set allow_unstable to override)."
        )
        raise UnstableRegimeError(message)


def _initial_fields(
    params: NetworkParams, grid: RadialGrid, weights: Weights
) -> tuple[IntensityField, SecondMoment]:
    """Return first-order fields on the lower branch."""
    solutions = solve_fixed_point(params.arrival_rate, params)
    if not solutions:
        message = (
            f"no first-order solution exists at lambda={params.arrival_rate:g} "
            "to initialise the second-order solver."
        )
        raise MeanFieldError(message)
    return init_from_fo(solutions[0], grid, params, weights)


def solve_so(
    params: NetworkParams,
    grid: RadialGrid,
    weights: Weights = DEFAULT_WEIGHTS,
    options: SecondOrderOptions | None = None,
) -> SecondOrderSolution:
    """Solve the coupled second-order equations at ``params.arrival_rate``.

    The outer loop stops once the joint relative change of both fields and
    the residuals of both conservation equations are all below
    ``options.tolerance``.

    Parameters
    ----------
    params : NetworkParams
        Network constants including the arrival rate.
    grid : RadialGrid
        Polar discretisation of the cell.
    weights : Weights, optional
        Third-moment factorization weights.
    options : SecondOrderOptions | None, optional
        Tolerance, iteration limits, damping, and regime override.

    Returns
    -------
    SecondOrderSolution
        The last fields and diagnostics; ``diagnostics.converged`` is false
        when ``max_outer`` was reached first.

    Raises
    ------
    UnstableRegimeError
        If ``lambda >= lambda_c`` and ``allow_unstable`` is not set.
    SolverDivergenceError
        If the outer residual grows for ten consecutive iterations.
    """  # noqa: DOC502 -- UnstableRegimeError is raised by _check_regime
    options = options or SecondOrderOptions()
    weights = validate_weights(weights)
    _check_regime(params.arrival_rate, params, options)
    diagnostics = SolverDiagnostics()
    if params.arrival_rate == 0.0:
        zeros = np.zeros(grid.radial_cells)
        gamma1 = IntensityField(grid, zeros)
        pairs = np.zeros((grid.radial_cells, grid.radial_cells, grid.angular_cells))
        diagnostics.iterations = 1
        diagnostics.converged = True
        diagnostics.residual_history.append(0.0)
        diagnostics.gamma1_residual = diagnostics.gamma2_residual = 0.0
        gamma2 = SecondMoment(grid, pairs, weights)
        return SecondOrderSolution(gamma1, gamma2, diagnostics)
    gamma1, gamma2 = _initial_fields(params, grid, weights)
    streak = 0
    for iteration in range(1, options.max_outer + 1):
        next_gamma2 = _relax_gamma2(gamma1, gamma2, params, options)
        next_gamma1 = update_gamma1(gamma1, next_gamma2, params, options)
        metrics.increment_counter("solver.iterations", solver="so-outer")
        metrics.increment_counter("solver.iterations", solver="so-gamma1")
        residual = max(
            _relative_change(next_gamma1.values, gamma1.values),
            _relative_change(next_gamma2.values, gamma2.values),
        )
        history = diagnostics.residual_history
        streak = streak + 1 if history and residual > history[-1] else 0
        history.append(residual)
        gamma1, gamma2 = next_gamma1, next_gamma2
        diagnostics.iterations = iteration
        LOGGER.debug("solve_so: iteration %d residual %.3e", iteration, residual)
        if streak >= _DIVERGENCE_STREAK:
            raise _divergence(diagnostics, gamma1)
        if residual < options.tolerance and _equations_hold(
            gamma1, gamma2, params, options
        ):
            diagnostics.converged = True
            break
    if options.ppp_closure:
        gamma2 = _ppp_moment(gamma1, gamma2)
    single, pair = equation_residuals(gamma1, gamma2, params)
    diagnostics.gamma1_residual = single
    diagnostics.gamma2_residual = math.nan if options.ppp_closure else pair
    if not diagnostics.converged:
        LOGGER.warning(
            "second-order solver stopped after %d iterations with residual %.3e",
            diagnostics.iterations,
            diagnostics.residual_history[-1],
        )
    return SecondOrderSolution(gamma1, gamma2, diagnostics)


def _equations_hold(
    gamma1: IntensityField,
    gamma2: SecondMoment,
    params: NetworkParams,
    options: SecondOrderOptions,
) -> bool:
    """Return whether both conservation equations hold to ``options.tolerance``.

    Under the Poisson closure only the single-user equation is checked.
    """
    if options.ppp_closure:
        single, _ = equation_residuals(gamma1, _ppp_moment(gamma1, gamma2), params)
        return single < options.tolerance
    single, pair = equation_residuals(gamma1, gamma2, params)
    return max(single, pair) < options.tolerance


def _divergence(
    diagnostics: SolverDiagnostics, gamma1: IntensityField
) -> SolverDivergenceError:
    """Build the divergence error with a state dump."""
    state = diagnostics.as_dict() | {
        "radii": gamma1.grid.centers.tolist(),
        "gamma1": gamma1.values.tolist(),
    }
    message = (
        f"second-order residual grew for {_DIVERGENCE_STREAK} consecutive "
        f"iterations (last {diagnostics.residual_history[-1]:.3e})."
    )
    return SolverDivergenceError(message, state=state)


def conditional_intensity(
    gamma1: IntensityField, gamma2: SecondMoment, observer_radius: float
) -> FloatArray:
    """Return the intensity profile seen by a user at ``observer_radius``.

    The profile at annulus ``j`` is the azimuthal average of
    ``gamma2(x, y) / gamma1(x)`` over ``|y| = r_j``; for Poisson fields it
    equals ``gamma1``.

    Parameters
    ----------
    gamma1 : IntensityField
        Converged intensity.
    gamma2 : SecondMoment
        Converged second moment.
    observer_radius : float
        Distance of the observer from the base station, in ``[0, R]``.

    Returns
    -------
    numpy.ndarray
        One value per annulus, in users per square metre.

    Raises
    ------
    MeanFieldError
        If the observer lies outside the disk or in an empty annulus.
    """
    grid = gamma1.grid
    if not 0.0 <= observer_radius <= grid.radius:
        message = f"observer radius must lie in [0, {grid.radius}]."
        raise MeanFieldError(message)
    index = grid.cell_of(observer_radius)
    density = gamma1.values[index]
    if density <= 0.0:
        message = f"observer annulus {index} has zero intensity."
        raise MeanFieldError(message)
    return gamma2.values[index].mean(axis=1) / density


def center_edge_ratio(gamma1: IntensityField, gamma2: SecondMoment) -> float:
    """Return the centre-to-edge over edge-to-edge conditional intensity ratio.

    Compares the intensity at the outermost annulus as seen by an observer
    at the base station with the same intensity as seen by an observer on
    the cell edge. Values above one mean a centre user is more likely than
    an edge user to share the cell with edge users.
    """
    centre = conditional_intensity(gamma1, gamma2, 0.0)[-1]
    edge = conditional_intensity(gamma1, gamma2, gamma1.grid.radius)[-1]
    return float(centre / edge)
