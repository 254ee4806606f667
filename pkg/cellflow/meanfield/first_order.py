"""First-order (Poisson) mean-field approximation of the stationary regime.

Under the first-order closure the active users form a Poisson process with
intensity ``gamma_p(r) = Z / G(r)``, where ``G`` is the effective gain and
``Z`` is a constant fixed by rate conservation:

``rho ln 2 / B = Z I(Z)``, with ``I(Z) = int_0^inf exp(-t sigma2 - Z A(t)) dt``.

The mean user count is ``nbar = Z A_inf``. Rather than solving for ``Z`` at
fixed ``lambda``, the solver sweeps ``nbar`` and evaluates the arrival rate
that sustains it, ``lambda(nbar)``. Every sign change of
``lambda(nbar) - lambda`` on the scan grid is one solution. Above the
critical rate the curve may cross twice (lower and upper branch) or not at
all.

Under full channel inversion the curve reduces to
``C = f(nbar) = (nbar e^(-nbar) / sigma2) 1F1(sigma2; sigma2 + 1; nbar)``
with ``C = rho ln 2 |D| / B``, which the counting helpers use directly.

Only the low-SINR rate enters the closure; the general Shannon rate is
available in the simulator.
"""

from __future__ import annotations

import dataclasses as dc
import enum
import logging
import math
import typing as typ

import numpy as np
import scipy as sp

from cellflow.meanfield.errors import GridExhaustedError, MeanFieldError
from cellflow.model import NetworkParams, critical_rate, effective_gain
from cellflow.numerics import (
    DEFAULT_SPEC,
    QuadratureSpec,
    adaptive_quad,
    bracketed_root,
    outer_kernel,
    outer_t_integral,
    scaled_kummer,
)
from cellflow.utils import metrics

if typ.TYPE_CHECKING:
    import numpy.typing as npt

LOGGER = logging.getLogger(__name__)

_LN2 = math.log(2.0)
_TANGENCY_RTOL = 1e-6
_F_TRUNCATION = 40.0


class Branch(enum.StrEnum):
    """Position of a first-order solution on the ``lambda(nbar)`` curve."""

    LOWER = "lower"
    UPPER = "upper"


@dc.dataclass(frozen=True, slots=True)
class FirstOrderOptions:
    """Scan grid and root tolerance for :func:`solve_fixed_point`."""

    grid_points: int = 400
    nbar_min: float = 1e-4
    nbar_max: float = 1e4
    bracket_tol: float = 1e-8
    quadrature: QuadratureSpec = DEFAULT_SPEC

    def __post_init__(self) -> None:
        """Reject empty or inverted scan ranges."""
        if self.grid_points < 2:
            message = "the nbar scan needs at least two grid points."
            raise MeanFieldError(message)
        if not 0.0 < self.nbar_min < self.nbar_max:
            message = (
                f"nbar range must satisfy 0 < min < max; received "
                f"[{self.nbar_min}, {self.nbar_max}]."
            )
            raise MeanFieldError(message)
        if not self.bracket_tol > 0.0:
            message = "bracket tolerance must be positive."
            raise MeanFieldError(message)

    def grid(self) -> npt.NDArray[np.float64]:
        """Return the geometric scan grid with ``nbar = 0`` prepended."""
        return np.concatenate(
            ([0.0], np.geomspace(self.nbar_min, self.nbar_max, self.grid_points))
        )


DEFAULT_OPTIONS = FirstOrderOptions()


@dc.dataclass(frozen=True, slots=True)
class FoSolution:
    """One solution of the first-order fixed point.

    Attributes
    ----------
    z_star : float
        The constant ``Z`` of the intensity ``Z / G(r)``.
    nbar : float
        Mean number of active users, ``z_star * A_inf``.
    arrival_rate : float
        The arrival rate ``lambda`` this solution satisfies.
    branch : Branch
        Lower or upper branch by ``nbar`` order.
    residual : float
        ``|rho ln 2 / B - Z I(Z)|`` at the solution.
    degenerate : bool
        True when two roots merged at a tangency.
    """

    z_star: float
    nbar: float
    arrival_rate: float
    branch: Branch
    residual: float
    degenerate: bool = False


@dc.dataclass(frozen=True, slots=True)
class SolutionCount:
    """Number of full-inversion solutions for a given ``C``.

    Attributes
    ----------
    count : int
        0, 1 or 2.
    c_value : float
        ``C = rho ln 2 |D| / B``.
    c1 : float | None
        Numerically located maximum of ``f``; ``None`` when ``sigma2 >= 1``.
    c1_bounds : tuple[float, float] | None
        Analytic bracket around ``c1``; ``None`` when ``sigma2 >= 1``.
    at_unit_boundary : bool
        ``C`` equals one to within ``1e-12``.
    at_peak_boundary : bool
        ``C`` equals ``c1`` to within ``1e-9``.
    """

    count: int
    c_value: float
    c1: float | None = None
    c1_bounds: tuple[float, float] | None = None
    at_unit_boundary: bool = False
    at_peak_boundary: bool = False


@dc.dataclass(frozen=True, slots=True)
class MetastableWindow:
    """Arrival-rate interval in which two first-order solutions exist."""

    critical_rate: float
    upper_edge: float | None
    peak_nbar: float | None = None


def _conservation_constant(arrival_rate: float, params: NetworkParams) -> float:
    """Return ``rho ln 2 / B`` for ``arrival_rate``."""
    return arrival_rate / params.mu * _LN2 / params.bandwidth


def lambda_of_nbar(
    nbar: float, params: NetworkParams, spec: QuadratureSpec = DEFAULT_SPEC
) -> float:
    """Return the arrival rate that sustains a mean of ``nbar`` users.

    Parameters
    ----------
    nbar : float
        Non-negative mean user count.
    params : NetworkParams
        Network geometry, noise and traffic constants; ``arrival_rate`` is
        ignored.
    spec : QuadratureSpec, optional
        Tolerances for the outer integral.

    Returns
    -------
    float
        ``(B mu / ln 2) Z I(Z)`` with ``Z = nbar / A_inf``.

    Raises
    ------
    MeanFieldError
        If ``nbar`` is negative.

    Examples
    --------
    >>> from cellflow.model import baseline_params
    >>> lambda_of_nbar(0.0, baseline_params())
    0.0
    """
    if nbar < 0.0:
        message = f"nbar must be non-negative; received {nbar}."
        raise MeanFieldError(message)
    if nbar == 0.0:
        return 0.0
    z_value = nbar / outer_kernel(params).saturation
    scale = params.bandwidth * params.mu / _LN2
    return scale * z_value * outer_t_integral(z_value, params, spec)


def lambda_curve(
    nbar_values: npt.ArrayLike, params: NetworkParams
) -> npt.NDArray[np.float64]:
    """Return :func:`lambda_of_nbar` over an array on the fixed ``t`` rule."""
    nbar = np.asarray(nbar_values, dtype=np.float64)
    kernel = outer_kernel(params)
    z_values = nbar / kernel.saturation
    scale = params.bandwidth * params.mu / _LN2
    return scale * z_values * kernel.evaluate_many(z_values)


def _residual(z_value: float, arrival_rate: float, params: NetworkParams) -> float:
    """Return ``|rho ln 2 / B - Z I(Z)|``."""
    target = _conservation_constant(arrival_rate, params)
    return abs(target - z_value * outer_t_integral(z_value, params))


def _solution(
    nbar: float, arrival_rate: float, params: NetworkParams, *, degenerate: bool
) -> FoSolution:
    """Package ``nbar`` as a lower-branch solution; callers relabel later."""
    z_value = nbar / outer_kernel(params).saturation
    return FoSolution(
        z_star=z_value,
        nbar=nbar,
        arrival_rate=arrival_rate,
        branch=Branch.LOWER,
        residual=_residual(z_value, arrival_rate, params),
        degenerate=degenerate,
    )


def _merge_tangent(roots: list[float]) -> tuple[list[float], bool]:
    """Merge roots closer than the tangency tolerance into one."""
    if len(roots) == 2 and math.isclose(roots[0], roots[1], rel_tol=_TANGENCY_RTOL):
        return [0.5 * (roots[0] + roots[1])], True
    return roots, False


def _check_tail(
    last_value: float, arrival_rate: float, params: NetworkParams, nbar_max: float
) -> None:
    """Raise when the curve has not yet turned toward ``lambda_c`` at ``nbar_max``."""
    threshold = critical_rate(params)
    expected = math.copysign(1.0, threshold - arrival_rate)
    if math.isclose(threshold, arrival_rate, rel_tol=1e-12):
        return
    if math.copysign(1.0, last_value) != expected:
        message = (
            f"a first-order root lies beyond nbar_max={nbar_max:g} at "
            f"lambda={arrival_rate:g}; widen the scan range."
        )
        raise GridExhaustedError(message)


def solve_fixed_point(
    arrival_rate: float,
    params: NetworkParams,
    options: FirstOrderOptions = DEFAULT_OPTIONS,
) -> list[FoSolution]:
    """Return every first-order solution at ``arrival_rate``.

    Parameters
    ----------
    arrival_rate : float
        Arrival rate ``lambda`` in users per square metre per second.
    params : NetworkParams
        Network constants; ``params.arrival_rate`` is ignored.
    options : FirstOrderOptions, optional
        Scan grid and root tolerance.

    Returns
    -------
    list[FoSolution]
        Zero, one or two solutions ordered by ``nbar`` and labelled
        lower/upper. A tangency yields one solution flagged degenerate.

    Raises
    ------
    MeanFieldError
        If ``arrival_rate`` is negative.
    GridExhaustedError
        If a root lies outside ``[0, nbar_max]``.

    Examples
    --------
    >>> from cellflow.model import baseline_params
    >>> len(solve_fixed_point(0.8, baseline_params()))
    2
    """
    if arrival_rate < 0.0:
        message = f"arrival rate must be non-negative; received {arrival_rate}."
        raise MeanFieldError(message)
    if arrival_rate == 0.0:
        return [_solution(0.0, 0.0, params, degenerate=False)]
    grid = options.grid()
    excess = lambda_curve(grid, params) - arrival_rate
    metrics.increment_counter("solver.iterations", solver="fo-scan")
    _check_tail(float(excess[-1]), arrival_rate, params, options.nbar_max)

    def shifted(nbar: float) -> float:
        return lambda_of_nbar(nbar, params, options.quadrature) - arrival_rate

    crossings = np.flatnonzero(np.signbit(excess[:-1]) != np.signbit(excess[1:]))
    roots = [
        bracketed_root(shifted, grid[i], grid[i + 1], options.bracket_tol)
        for i in crossings
    ]
    roots, degenerate = _merge_tangent(roots)
    if not roots and arrival_rate > critical_rate(params):
        roots, degenerate = _tangent_root(arrival_rate, params, options)
    solutions = [
        _solution(nbar, arrival_rate, params, degenerate=degenerate) for nbar in roots
    ]
    if len(solutions) == 2:
        solutions[1] = dc.replace(solutions[1], branch=Branch.UPPER)
    LOGGER.debug(
        "solve_fixed_point: lambda=%g -> nbar=%s",
        arrival_rate,
        [round(s.nbar, 6) for s in solutions],
    )
    return solutions


def _tangent_root(
    arrival_rate: float, params: NetworkParams, options: FirstOrderOptions
) -> tuple[list[float], bool]:
    """Return the peak as a degenerate root when ``lambda`` touches it."""
    window = metastable_window(params, options)
    if window.upper_edge is None or window.peak_nbar is None:
        return [], False
    if math.isclose(window.upper_edge, arrival_rate, rel_tol=1e-9):
        return [window.peak_nbar], True
    return [], False


def intensity_fo(
    radius: float | npt.ArrayLike, solution: FoSolution, params: NetworkParams
) -> float | npt.NDArray[np.float64]:
    """Return the first-order intensity ``Z / G(r)`` in users per square metre.

    Examples
    --------
    >>> from cellflow.model import baseline_params
    >>> params = baseline_params(inversion=1.0)
    >>> solution = solve_fixed_point(0.3, params)[0]
    >>> intensity_fo(0.0, solution, params) == intensity_fo(100.0, solution, params)
    True
    """
    gains = effective_gain(np.asarray(radius, dtype=np.float64), params)
    values = solution.z_star / np.asarray(gains)
    return float(values) if values.ndim == 0 else values


def f_meanfield(nbar: float, sigma2: float) -> float:
    """Return ``f(nbar) = nbar e^(-nbar) 1F1(sigma2; sigma2 + 1; nbar) / sigma2``.

    Parameters
    ----------
    nbar : float
        Non-negative mean user count.
    sigma2 : float
        Positive normalised noise.

    Returns
    -------
    float
        ``f(nbar)``; zero at the origin and tending to one at infinity.

    Raises
    ------
    MeanFieldError
        If ``nbar`` is negative or ``sigma2`` is not positive.

    Examples
    --------
    >>> f_meanfield(0.0, 0.5)
    0.0
    >>> round(f_meanfield(1.0, 1.0), 6)
    0.632121
    """
    _check_f_arguments(nbar, sigma2)
    return nbar / sigma2 * scaled_kummer(sigma2, nbar)


def _check_f_arguments(nbar: float, sigma2: float) -> None:
    """Reject ``nbar < 0`` and ``sigma2 <= 0``."""
    if nbar < 0.0 or not sigma2 > 0.0:
        message = f"f requires nbar >= 0 and sigma2 > 0; received ({nbar}, {sigma2})."
        raise MeanFieldError(message)


def f_meanfield_quadrature(nbar: float, sigma2: float) -> float:
    """Return ``f(nbar)`` from its ``t``-integral form by adaptive quadrature.

    ``f(nbar) = nbar int_0^inf exp(-sigma2 t - nbar (1 - e^(-t))) dt``; the
    range past ``t = 40`` contributes ``e^(-nbar - 40 sigma2) / sigma2``.
    """
    _check_f_arguments(nbar, sigma2)
    if nbar == 0.0:
        return 0.0

    def integrand(t: float) -> float:
        return math.exp(-sigma2 * t + nbar * math.expm1(-t))

    spec = QuadratureSpec(rel_tol=1e-10, abs_tol=1e-300)
    knee = 1.0 / nbar
    points = (knee,) if knee < _F_TRUNCATION else None
    body, _ = adaptive_quad(integrand, 0.0, _F_TRUNCATION, spec, points=points)
    tail = math.exp(-nbar - _F_TRUNCATION * sigma2) / sigma2
    return nbar * (body + tail)


def f_derivative(nbar: float, sigma2: float) -> float:
    """Return ``f'(nbar) = 1 - f + (1 - sigma2) f / nbar``.

    The ratio ``f / nbar`` is evaluated as
    ``e^(-nbar) 1F1(sigma2; sigma2 + 1; nbar) / sigma2``, so the origin needs
    no special case: ``f'(0) = 1 / sigma2``.

    Parameters
    ----------
    nbar : float
        Non-negative mean user count.
    sigma2 : float
        Positive normalised noise.

    Returns
    -------
    float
        The derivative.

    Examples
    --------
    >>> f_derivative(0.0, 1.0)
    1.0
    """
    _check_f_arguments(nbar, sigma2)
    ratio = scaled_kummer(sigma2, nbar) / sigma2
    return 1.0 - nbar * ratio + (1.0 - sigma2) * ratio


def f_bounds(nbar: float, sigma2: float) -> tuple[float, float]:
    """Return analytic lower and upper bounds on ``f(nbar)``.

    The lower bound is ``max(1 - e^(-nbar), nbar e^(-nbar) / sigma2)`` and
    the upper bound ``3 * 0.5^(sigma2 - 1)`` for ``sigma2 < 1``. For
    ``sigma2 >= 1`` the bounds are ``nbar e^(-nbar) / sigma2`` and one.

    Examples
    --------
    >>> tuple(round(bound, 6) for bound in f_bounds(0.0, 0.5))
    (0.0, 4.242641)
    """
    _check_f_arguments(nbar, sigma2)
    power_term = nbar * math.exp(-nbar) / sigma2
    if sigma2 >= 1.0:
        return power_term, 1.0
    lower = max(power_term, -math.expm1(-nbar))
    return lower, 3.0 * 0.5 ** (sigma2 - 1.0)


def c1_bounds(sigma2: float) -> tuple[float, float]:
    """Return the analytic bracket around the peak value of ``f``.

    The bracket is ``max(e^-1 / sigma2, 1) <= C1 <= 0.5^(sigma2-1) (1 + 1/sigma2)``,
    meaningful for ``sigma2 < 1``.

    Examples
    --------
    >>> low, high = c1_bounds(0.01)
    >>> round(low, 2), round(high, 1)
    (36.79, 200.6)
    """
    lower = max(math.exp(-1.0) / sigma2, 1.0)
    upper = 0.5 ** (sigma2 - 1.0) * (1.0 + 1.0 / sigma2)
    return lower, upper


def f_peak(sigma2: float) -> tuple[float, float]:
    """Return ``(nbar_peak, C1)``, the interior maximum of ``f`` for ``sigma2 < 1``.

    The peak lies in ``(1, (1 + sigma2) / (1 - sigma2))``, where
    :func:`f_derivative` changes sign once.

    Raises
    ------
    MeanFieldError
        If ``sigma2 >= 1``, where ``f`` is increasing and has no peak.
    """
    if not 0.0 < sigma2 < 1.0:
        message = f"f has an interior maximum only for 0 < sigma2 < 1; got {sigma2}."
        raise MeanFieldError(message)
    upper = (1.0 + sigma2) / (1.0 - sigma2)
    nbar_peak = bracketed_root(lambda n: f_derivative(n, sigma2), 1.0, upper, 1e-13)
    return nbar_peak, f_meanfield(nbar_peak, sigma2)


def count_solutions_full_inversion(c_value: float, sigma2: float) -> SolutionCount:
    """Count solutions of ``f(nbar) = C`` under full channel inversion.

    Parameters
    ----------
    c_value : float
        ``C = rho ln 2 |D| / B``.
    sigma2 : float
        Positive normalised noise.

    Returns
    -------
    SolutionCount
        The count with boundary flags, and for ``sigma2 < 1`` the located
        peak ``C1`` with its analytic bracket.

    Raises
    ------
    MeanFieldError
        If ``c_value`` is negative or ``sigma2`` is not positive.

    Examples
    --------
    >>> count_solutions_full_inversion(0.5, 2.0).count
    1
    >>> count_solutions_full_inversion(1.2, 0.01).count
    2
    """
    if c_value < 0.0 or not sigma2 > 0.0:
        message = f"C must be >= 0 and sigma2 > 0; received ({c_value}, {sigma2})."
        raise MeanFieldError(message)
    at_unit = math.isclose(c_value, 1.0, rel_tol=1e-12)
    if sigma2 >= 1.0:
        count = 1 if c_value <= 1.0 else 0
        return SolutionCount(count, c_value, at_unit_boundary=at_unit)
    _, peak = f_peak(sigma2)
    at_peak = math.isclose(c_value, peak, rel_tol=1e-9)
    if c_value < 1.0 or at_unit or at_peak:
        count = 1
    elif c_value < peak:
        count = 2
    else:
        count = 0
    return SolutionCount(
        count,
        c_value,
        c1=peak,
        c1_bounds=c1_bounds(sigma2),
        at_unit_boundary=at_unit,
        at_peak_boundary=at_peak,
    )


def metastable_window(
    params: NetworkParams, options: FirstOrderOptions = DEFAULT_OPTIONS
) -> MetastableWindow:
    """Return ``lambda_c`` and the largest rate admitting two solutions.

    The upper edge is the interior peak of ``lambda(nbar)``: the scan grid
    locates the highest interior sample, and a golden-section search in
    ``log nbar`` refines it.

    Parameters
    ----------
    params : NetworkParams
        Network constants.
    options : FirstOrderOptions, optional
        Scan grid.

    Returns
    -------
    MetastableWindow
        ``upper_edge`` is ``None`` when the curve has no interior peak above
        ``lambda_c`` (always the case for full inversion with ``sigma2 >= 1``).

    Examples
    --------
    >>> from cellflow.model import baseline_params
    >>> metastable_window(baseline_params()).upper_edge > 0.8
    True
    """
    threshold = critical_rate(params)
    if params.inversion == 1.0 and params.sigma2 >= 1.0:
        return MetastableWindow(threshold, None)
    grid = options.grid()
    curve = lambda_curve(grid, params)
    peak = int(np.argmax(curve[1:-1])) + 1
    if curve[peak] <= threshold or curve[peak] < curve[peak + 1]:
        return MetastableWindow(threshold, None)
    if peak == 1:
        return MetastableWindow(threshold, float(curve[peak]), float(grid[peak]))
    log_bracket = tuple(math.log(grid[i]) for i in (peak - 1, peak, peak + 1))

    def negative_rate(log_nbar: float) -> float:
        return -lambda_of_nbar(math.exp(log_nbar), params, options.quadrature)

    result = sp.optimize.minimize_scalar(
        negative_rate, bracket=log_bracket, method="golden", tol=1e-10
    )
    nbar_peak = math.exp(float(result.x))
    LOGGER.debug(
        "metastable_window: lambda_c=%g peak lambda=%g at nbar=%g",
        threshold,
        -float(result.fun),
        nbar_peak,
    )
    return MetastableWindow(threshold, -float(result.fun), nbar_peak)
