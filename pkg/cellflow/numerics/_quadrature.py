"""Quadrature over the disk and over the semi-infinite ``t`` axis.

The mean-field equations share two integrals:

``A(t) = int_D (1 - exp(-t G(y))) / G(y) dy``
    the inner disk integral, with ``G = L^(1-l)`` the effective gain. It is
    non-decreasing in ``t``, vanishes at zero and saturates at
    ``A_inf = int_D 1 / G dy``.

``I(Z) = int_0^inf exp(-t sigma2) exp(-Z A(t)) dt``
    the outer integral.

Both are evaluated on fixed Gauss-Legendre rules built once per geometry.
The disk rule is composite in ``w = ln(1 + r)``, where the gain is a plain
exponential. The ``t`` rule is composite on logarithmic panels from a tiny
``t_lo`` up to a cutoff ``T`` where ``A(T)`` is within ``1e-12`` of its
limit. Past ``T`` the integrand equals ``exp(-Z A_inf - t sigma2)``, whose
integral is added in closed form. Each evaluation is repeated with a
half-order rule; when the two disagree by more than the requested
tolerance the integral is recomputed by adaptive quadrature in ``ln t``.
"""

from __future__ import annotations

import dataclasses as dc
import functools
import logging
import math
import typing as typ

import numpy as np
import scipy as sp

from cellflow.model import NetworkParams, effective_gain
from cellflow.numerics._errors import ArgumentError, QuadratureError

if typ.TYPE_CHECKING:
    import collections.abc as cabc

    import numpy.typing as npt

LOGGER = logging.getLogger(__name__)

type FloatArray = npt.NDArray[np.float64]

_DISK_PANELS = 32
_DISK_ORDER = 16
_T_ORDER = 16
_T_PANELS_PER_DECADE = 8
_T_LOWER = 1e-8
_SATURATION_EXPONENT = 28.0
_TINY_NOISE = 1e-12


@dc.dataclass(frozen=True, slots=True)
class QuadratureSpec:
    """Tolerances shared by the adaptive quadratures."""

    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_subdivisions: int = 200

    def __post_init__(self) -> None:
        """Reject non-positive tolerances and subdivision limits."""
        if not (self.rel_tol > 0.0 and self.abs_tol > 0.0):
            message = "quadrature tolerances must be positive."
            raise ArgumentError(message)
        if self.max_subdivisions < 1:
            message = "quadrature needs at least one subdivision."
            raise ArgumentError(message)

    def tolerance(self, value: float) -> float:
        """Return the absolute error allowed for a result of size ``value``."""
        return max(self.abs_tol, self.rel_tol * abs(value))


DEFAULT_SPEC = QuadratureSpec()


def adaptive_quad(
    integrand: cabc.Callable[[float], float],
    lower: float,
    upper: float,
    spec: QuadratureSpec,
    *,
    points: cabc.Sequence[float] | None = None,
) -> tuple[float, float]:
    """Integrate with QUADPACK and fail loudly on non-convergence.

    Parameters
    ----------
    integrand : cabc.Callable[[float], float]
        Scalar integrand.
    lower : float
        Lower limit.
    upper : float
        Upper limit (may be ``numpy.inf``).
    spec : QuadratureSpec
        Tolerances and subdivision limit.
    points : cabc.Sequence[float] | None, optional
        Interior breakpoints for finite intervals.

    Returns
    -------
    tuple[float, float]
        The value and QUADPACK's absolute error estimate.

    Raises
    ------
    QuadratureError
        If QUADPACK reports a failure or the estimate exceeds the tolerance.
    """
    result = sp.integrate.quad(
        integrand,
        lower,
        upper,
        epsabs=spec.abs_tol,
        epsrel=spec.rel_tol,
        limit=spec.max_subdivisions,
        points=points,
        full_output=1,
    )
    value, estimate = float(result[0]), float(result[1])
    # QUADPACK appends a message to the full output only when it fails.
    if len(result) > 3 or estimate > 10.0 * spec.tolerance(value):
        message = f"adaptive quadrature on [{lower}, {upper}] did not converge"
        raise QuadratureError(message, estimate=estimate)
    return value, estimate


def disk_integral(
    integrand: cabc.Callable[[float], float],
    radius: float,
    spec: QuadratureSpec = DEFAULT_SPEC,
) -> float:
    """Return ``int_D g(|y|) dy = 2 pi int_0^R g(r) r dr`` for a radial ``g``.

    Parameters
    ----------
    integrand : cabc.Callable[[float], float]
        Radial integrand ``g``, finite on ``[0, R]``.
    radius : float
        Disk radius ``R``.
    spec : QuadratureSpec, optional
        Tolerances.

    Returns
    -------
    float
        The integral.

    Raises
    ------
    QuadratureError
        If the adaptive quadrature misses its tolerance.

    Examples
    --------
    >>> round(disk_integral(lambda r: 1.0, 100.0), 1)
    31415.9
    """  # noqa: DOC502 -- propagated from adaptive_quad
    value, estimate = adaptive_quad(
        lambda r: integrand(r) * r, 0.0, radius, spec
    )
    LOGGER.debug("disk_integral: R=%g value=%.12g error=%.3e", radius, value, estimate)
    return 2.0 * math.pi * value


@functools.lru_cache(maxsize=16)
def _gauss_legendre(order: int) -> tuple[FloatArray, FloatArray]:
    """Return Gauss-Legendre nodes and weights on ``[-1, 1]``."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return nodes, weights


def _composite_rule(
    edges: FloatArray, order: int
) -> tuple[FloatArray, FloatArray]:
    """Return a composite Gauss-Legendre rule over consecutive ``edges``."""
    nodes, weights = _gauss_legendre(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    points = (lo + hi) * 0.5 + half * nodes[None, :]
    return points.ravel(), (half * weights[None, :]).ravel()


@dc.dataclass(frozen=True, slots=True)
class DiskRule:
    """Nodes ``r_k`` and weights ``w_k`` with ``sum w_k g(r_k) ~ int_D g dy``."""

    radii: FloatArray
    weights: FloatArray


@functools.lru_cache(maxsize=32)
def disk_rule(
    radius: float, *, panels: int = _DISK_PANELS, order: int = _DISK_ORDER
) -> DiskRule:
    """Return the composite Gauss-Legendre disk rule in ``w = ln(1 + r)``.

    Examples
    --------
    >>> rule = disk_rule(100.0)
    >>> math.isclose(rule.weights.sum(), math.pi * 1e4, rel_tol=1e-12)
    True
    """
    edges = np.linspace(0.0, math.log1p(radius), panels + 1)
    w_nodes, w_weights = _composite_rule(edges, order)
    radii = np.expm1(w_nodes)
    # dy = 2 pi r dr and dr = (1 + r) dw.
    weights = 2.0 * math.pi * radii * (1.0 + radii) * w_weights
    return DiskRule(radii=radii, weights=weights)


def g_inner(
    t: float | FloatArray,
    params: NetworkParams,
    density: cabc.Callable[[FloatArray], FloatArray] | None = None,
) -> float | FloatArray:
    """Return ``int_D (1 - exp(-t G(y))) h(y) dy`` for ``t >= 0``.

    With the default density ``h = 1 / G`` this is the first-order inner
    integral ``A(t)``, which the caller scales by ``Z``. Passing a radial
    intensity ``h`` gives the field-weighted form.

    Parameters
    ----------
    t : float | numpy.ndarray
        Non-negative value(s) of the integration variable.
    params : NetworkParams
        Network geometry.
    density : cabc.Callable[[numpy.ndarray], numpy.ndarray] | None, optional
        Radial density ``h(r)``; defaults to ``1 / G(r)``.

    Returns
    -------
    float | numpy.ndarray
        The integral for each ``t``.

    Raises
    ------
    ArgumentError
        If any ``t`` is negative.

    Examples
    --------
    >>> from cellflow.model import baseline_params
    >>> g_inner(0.0, baseline_params())
    0.0
    """
    t_values = np.asarray(t, dtype=np.float64)
    if np.any(t_values < 0.0):
        message = "g_inner requires t >= 0."
        raise ArgumentError(message)
    rule = disk_rule(params.radius)
    gains = np.asarray(effective_gain(rule.radii, params))
    heights = 1.0 / gains if density is None else density(rule.radii)
    weighted = rule.weights * heights
    saturation = -np.expm1(-np.multiply.outer(t_values, gains))
    values = saturation @ weighted
    return float(values) if values.ndim == 0 else values


@dc.dataclass(frozen=True, slots=True)
class QuadratureEstimate:
    """Integral value with its absolute error estimate."""

    value: float
    error: float


@dc.dataclass(frozen=True, slots=True)
class TRule:
    """Composite rule on the ``t`` axis with a half-order companion."""

    nodes: FloatArray
    weights: FloatArray
    coarse_nodes: FloatArray
    coarse_weights: FloatArray
    cutoff: float
    edges: FloatArray


@functools.lru_cache(maxsize=32)
def t_rule(min_gain: float) -> TRule:
    """Return the ``t`` rule for a geometry whose smallest gain is ``min_gain``.

    The cutoff ``T = 28 / min_gain`` makes ``1 - exp(-T G)`` exceed
    ``1 - 1e-12`` everywhere on the disk.
    """
    cutoff = _SATURATION_EXPONENT / min_gain
    decades = math.log10(cutoff / _T_LOWER)
    panels = max(1, math.ceil(decades * _T_PANELS_PER_DECADE))
    edges = np.concatenate(([0.0], np.geomspace(_T_LOWER, cutoff, panels + 1)))
    nodes, weights = _composite_rule(edges, _T_ORDER)
    coarse_nodes, coarse_weights = _composite_rule(edges, _T_ORDER // 2)
    return TRule(
        nodes=nodes,
        weights=weights,
        coarse_nodes=coarse_nodes,
        coarse_weights=coarse_weights,
        cutoff=cutoff,
        edges=edges,
    )


@dc.dataclass(frozen=True, slots=True)
class OuterKernel:
    """Precomputed ``A(t)`` on the ``t`` rule for one geometry and noise level.

    ``evaluate`` reduces ``I(Z)`` to a dot product, so sweeping ``Z`` over a
    grid costs one matrix-vector product per point.
    """

    sigma2: float
    rule: TRule
    inner: FloatArray
    coarse_inner: FloatArray
    saturation: float
    params: NetworkParams

    def _integral(self, z_value: float, *, coarse: bool) -> float:
        """Return ``I(Z)`` on the fine or coarse rule plus the analytic tail."""
        nodes = self.rule.coarse_nodes if coarse else self.rule.nodes
        weights = self.rule.coarse_weights if coarse else self.rule.weights
        inner = self.coarse_inner if coarse else self.inner
        body = weights @ np.exp(-self.sigma2 * nodes - z_value * inner)
        tail = math.exp(-z_value * self.saturation - self.rule.cutoff * self.sigma2)
        return float(body + tail / self.sigma2)

    def evaluate(self, z_value: float) -> QuadratureEstimate:
        """Return ``I(Z)`` with the fine-versus-coarse error estimate."""
        fine = self._integral(z_value, coarse=False)
        coarse = self._integral(z_value, coarse=True)
        return QuadratureEstimate(fine, abs(fine - coarse))

    def evaluate_many(self, z_values: FloatArray) -> FloatArray:
        """Return ``I(Z)`` for every entry of ``z_values`` on the fine rule."""
        z_column = np.asarray(z_values, dtype=np.float64)[:, None]
        body = np.exp(-self.sigma2 * self.rule.nodes[None, :] - z_column * self.inner)
        tails = np.exp(
            -z_column[:, 0] * self.saturation - self.rule.cutoff * self.sigma2
        )
        return body @ self.rule.weights + tails / self.sigma2

    def adaptive(self, z_value: float, spec: QuadratureSpec) -> QuadratureEstimate:
        """Return ``I(Z)`` by adaptive quadrature in ``x = ln t``."""

        def integrand(x: float) -> float:
            t_value = math.exp(x)
            inner = float(g_inner(t_value, self.params))
            return t_value * math.exp(-self.sigma2 * t_value - z_value * inner)

        value, error = adaptive_quad(
            integrand, math.log(_T_LOWER), math.log(self.rule.cutoff), spec
        )
        # The integrand is one to within 1e-8 on [0, t_lo].
        tail = math.exp(-z_value * self.saturation - self.rule.cutoff * self.sigma2)
        return QuadratureEstimate(_T_LOWER + value + tail / self.sigma2, error)


@functools.lru_cache(maxsize=64)
def _build_kernel(params: NetworkParams) -> OuterKernel:
    """Build the kernel for a parameter set whose arrival rate is zero."""
    rule = t_rule(params.min_gain)
    disk = disk_rule(params.radius)
    gains = np.asarray(effective_gain(disk.radii, params))
    weighted = disk.weights / gains

    def inner_on(nodes: FloatArray) -> FloatArray:
        return -np.expm1(-np.multiply.outer(nodes, gains)) @ weighted

    LOGGER.debug(
        "outer kernel built: eta=%g l=%g R=%g sigma2=%g nodes=%d",
        params.eta,
        params.inversion,
        params.radius,
        params.sigma2,
        rule.nodes.size,
    )
    return OuterKernel(
        sigma2=params.sigma2,
        rule=rule,
        inner=inner_on(rule.nodes),
        coarse_inner=inner_on(rule.coarse_nodes),
        saturation=float(weighted.sum()),
        params=params,
    )


def outer_kernel(params: NetworkParams) -> OuterKernel:
    """Return the (cached) outer-integral kernel for ``params``' geometry.

    The arrival rate does not enter the kernel, so it is normalised away
    before caching.
    """
    canonical = dc.replace(params, arrival_rate=0.0)
    if params.sigma2 < _TINY_NOISE:
        LOGGER.warning(
            "normalised noise %g is below %g; the analytic tail dominates the "
            "outer t-integral",
            params.sigma2,
            _TINY_NOISE,
        )
    return _build_kernel(canonical)


def saturation_area(params: NetworkParams) -> float:
    """Return ``A_inf = int_D L^(l-1) dy``, the limit of the inner integral."""
    return outer_kernel(params).saturation


def outer_t_integral(
    z_value: float, params: NetworkParams, spec: QuadratureSpec = DEFAULT_SPEC
) -> float:
    """Return ``int_0^inf exp(-t sigma2) exp(-Z A(t)) dt``.

    The semi-infinite axis is integrated in ``log t`` with a fixed
    Gauss-Legendre rule on panels, not by mapping it to ``(0, 1]`` through
    ``s = exp(-t)`` and ``s = u^(1/sigma2)``. The log-panel rule resolves the
    near-origin growth of ``A(t)`` and the slow ``exp(-t sigma2)`` tail of small
    noise levels with the same nodes; the adaptive fallback covers the rest.

    Parameters
    ----------
    z_value : float
        The non-negative constant ``Z``.
    params : NetworkParams
        Network geometry and noise.
    spec : QuadratureSpec, optional
        Tolerances; the fixed rule is accepted when its fine-versus-coarse
        estimate is within them, otherwise the adaptive path runs.

    Returns
    -------
    float
        The integral; ``1 / sigma2`` at ``Z = 0`` and decreasing in ``Z``.

    Raises
    ------
    ArgumentError
        If ``Z`` is negative.
    QuadratureError
        If the adaptive fallback misses its tolerance.

    Examples
    --------
    >>> from cellflow.model import baseline_params
    >>> params = baseline_params(sigma2=0.5)
    >>> round(outer_t_integral(0.0, params), 9)
    2.0
    """  # noqa: DOC502 -- QuadratureError propagates from the adaptive path
    if z_value < 0.0:
        message = f"Z must be non-negative; received {z_value}."
        raise ArgumentError(message)
    kernel = outer_kernel(params)
    estimate = kernel.evaluate(z_value)
    if estimate.error <= spec.tolerance(estimate.value):
        return estimate.value
    LOGGER.debug(
        "outer_t_integral: fixed rule error %.3e above tolerance at Z=%g; "
        "switching to adaptive quadrature",
        estimate.error,
        z_value,
    )
    return kernel.adaptive(z_value, spec).value
