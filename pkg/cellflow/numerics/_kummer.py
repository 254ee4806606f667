"""Confluent hypergeometric function ``1F1(a; b; z)`` for real arguments.

Only the non-negative real axis with ``a, b > 0`` is needed. There every
series term is positive, so direct summation loses no accuracy to
cancellation and is limited only by overflow of ``exp(z)``. Callers that
need ``1F1(a; a + 1; z)`` for large ``z`` use :func:`scaled_kummer`, which
evaluates ``exp(-z) 1F1(a; a + 1; z)`` without forming the large value.
"""

from __future__ import annotations

import math

import scipy as sp

from cellflow.numerics._errors import ArgumentError, KummerOverflowError

SERIES_LIMIT = 30.0
OVERFLOW_LIMIT = 700.0
_MAX_TERMS = 20_000
_SERIES_RTOL = 1e-17
_TRUNCATION = 40.0


def _check_arguments(a: float, b: float, z: float) -> None:
    """Reject arguments outside ``a > 0, b > 0, z >= 0``."""
    if not (a > 0.0 and b > 0.0 and z >= 0.0):
        message = f"1F1 requires a > 0, b > 0, z >= 0; received ({a}, {b}, {z})."
        raise ArgumentError(message)


def _series(a: float, b: float, z: float) -> float:
    """Sum the Kummer series until the terms stop contributing."""
    term = 1.0
    total = 1.0
    for k in range(1, _MAX_TERMS):
        term *= (a + k - 1) / (b + k - 1) * z / k
        total += term
        if k > z and term <= _SERIES_RTOL * total:
            break
    return total


def kummer_1f1(a: float, b: float, z: float) -> float:
    """Return ``1F1(a; b; z)`` for ``a, b > 0`` and ``z >= 0``.

    Parameters
    ----------
    a : float
        Positive numerator parameter.
    b : float
        Positive denominator parameter.
    z : float
        Non-negative argument.

    Returns
    -------
    float
        The function value to near machine precision.

    Raises
    ------
    ArgumentError
        If an argument is outside the supported domain.
    KummerOverflowError
        If ``z`` exceeds :data:`OVERFLOW_LIMIT`; use :func:`scaled_kummer`.

    Examples
    --------
    >>> kummer_1f1(0.5, 1.5, 0.0)
    1.0
    >>> round(kummer_1f1(1.0, 2.0, 1.0), 10)
    1.7182818285
    """
    _check_arguments(a, b, z)
    if z > OVERFLOW_LIMIT:
        message = (
            f"1F1({a}, {b}, {z}) overflows double precision; "
            "evaluate the exponentially scaled form instead."
        )
        raise KummerOverflowError(message)
    return _series(a, b, z)


def kummer_derivative(a: float, b: float, z: float) -> float:
    """Return ``d/dz 1F1(a; b; z) = (a / b) 1F1(a + 1; b + 1; z)``.

    Parameters
    ----------
    a : float
        Positive numerator parameter.
    b : float
        Positive denominator parameter.
    z : float
        Non-negative argument.

    Returns
    -------
    float
        The derivative value.

    Raises
    ------
    ArgumentError
        If an argument is outside the supported domain.
    KummerOverflowError
        If ``z`` exceeds :data:`OVERFLOW_LIMIT`.

    Examples
    --------
    >>> kummer_derivative(0.5, 1.5, 0.0) == 0.5 / 1.5
    True
    """  # noqa: DOC502 -- propagated from kummer_1f1
    return a / b * kummer_1f1(a + 1.0, b + 1.0, z)


def scaled_kummer(a: float, z: float) -> float:
    """Return ``exp(-z) 1F1(a; a + 1; z)``, bounded by one for all ``z >= 0``.

    Uses the series for ``z <= SERIES_LIMIT``. Beyond it the finite-interval
    integral form ``(a / z) int_0^z exp(-v) (1 - v/z)^(a-1) dv`` is
    evaluated by adaptive quadrature with the algebraic endpoint weight
    handled exactly; for ``z`` well past the truncation point the interval
    is cut where ``exp(-v)`` is negligible.

    The integrand is evaluated directly rather than through its logarithm:
    with the endpoint weight left to QAWS, ``exp(-v)`` stays within range on
    the truncated interval and no log-domain accumulation is needed.

    Parameters
    ----------
    a : float
        Positive parameter.
    z : float
        Non-negative argument.

    Returns
    -------
    float
        The scaled value.

    Raises
    ------
    ArgumentError
        If ``a <= 0`` or ``z < 0``.

    Examples
    --------
    >>> round(scaled_kummer(1.0, 100.0), 12)
    0.01
    """
    _check_arguments(a, a + 1.0, z)
    if z <= SERIES_LIMIT:
        return math.exp(-z) * _series(a, a + 1.0, z)
    if z <= _TRUNCATION + 10.0:
        # (1 - v/z)^(a-1) = z^(1-a) (z - v)^(a-1): QAWS integrates the weight.
        value, _ = sp.integrate.quad(
            lambda v: math.exp(-v),
            0.0,
            z,
            weight="alg",
            wvar=(0.0, a - 1.0),
            epsabs=0.0,
            epsrel=1e-13,
        )
        return a / z * z ** (1.0 - a) * value
    value, _ = sp.integrate.quad(
        lambda v: math.exp(-v) * (1.0 - v / z) ** (a - 1.0),
        0.0,
        _TRUNCATION,
        epsabs=0.0,
        epsrel=1e-13,
        limit=200,
    )
    return a / z * value
