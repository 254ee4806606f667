"""Bracketed scalar root finding."""

from __future__ import annotations

import logging
import math
import typing as typ

import scipy as sp

from cellflow.numerics._errors import BracketError

if typ.TYPE_CHECKING:
    import collections.abc as cabc

LOGGER = logging.getLogger(__name__)


def bracketed_root(
    function: cabc.Callable[[float], float],
    lower: float,
    upper: float,
    tol: float = 1e-12,
) -> float:
    """Return a root of ``function`` inside ``[lower, upper]``.

    Parameters
    ----------
    function : cabc.Callable[[float], float]
        Continuous scalar function.
    lower : float
        Left end of the bracket.
    upper : float
        Right end of the bracket.
    tol : float, optional
        Absolute tolerance on the root location.

    Returns
    -------
    float
        The root; an endpoint when ``function`` vanishes there.

    Raises
    ------
    BracketError
        If the endpoint values share a sign or are not finite.

    Examples
    --------
    >>> round(bracketed_root(lambda x: x * x - 2.0, 0.0, 2.0), 9)
    1.414213562
    """
    f_lower = function(lower)
    f_upper = function(upper)
    if not (math.isfinite(f_lower) and math.isfinite(f_upper)):
        message = f"bracket [{lower}, {upper}] has non-finite endpoint values."
        raise BracketError(message)
    if f_lower == 0.0:
        return lower
    if f_upper == 0.0:
        return upper
    if math.copysign(1.0, f_lower) == math.copysign(1.0, f_upper):
        message = (
            f"bracket [{lower}, {upper}] does not enclose a sign change "
            f"(f = {f_lower:.3e}, {f_upper:.3e})."
        )
        raise BracketError(message)
    root, result = sp.optimize.brentq(
        function, lower, upper, xtol=tol, full_output=True
    )
    LOGGER.debug(
        "bracketed_root: [%g, %g] -> %.12g in %d iterations",
        lower,
        upper,
        root,
        result.iterations,
    )
    return float(root)
