"""First-passage times of the full-inversion user-count chain.

Under full channel inversion every user sees the same gain, so the number of
active users is a one-dimensional birth-death chain. Time is measured in the
chain's unit, in which ``B mu / ln 2 = 1``: a state with ``n`` users
departs at rate ``n / (n - 1 + sigma2)`` and arrivals occur at rate
``lambda |D|``, written ``1 + epsilon`` just above the critical rate.

The mean time to climb from ``n`` to ``n + 1`` users follows the forward
recursion ``tau_n = (1 + d_n tau_{n-1}) / (lambda |D|)``; the mean time to
reach ``n`` from an empty cell is the running sum of those steps. A closed
form as a series of falling-factorial ratios gives an independent check.

Examples
--------
>>> table = build_table(3, epsilon=1.0, sigma2=1.0)
>>> table.tau_cum.tolist()
[0.0, 0.5, 1.25, 2.125]
"""

from __future__ import annotations

import dataclasses as dc
import enum
import logging
import math
import typing as typ

import numpy as np
import scipy as sp

from cellflow.model import NetworkParams, ParameterError

if typ.TYPE_CHECKING:
    import collections.abc as cabc

    import numpy.typing as npt

LOGGER = logging.getLogger(__name__)

type FloatArray = npt.NDArray[np.float64]

_SERIES_RTOL = 1e-18


class PassageMethod(enum.StrEnum):
    """How mean passage times are computed."""

    RECURSION = "recursion"
    CLOSED = "closed"


def _require(condition: bool, detail: str) -> None:  # noqa: FBT001
    """Raise :class:`ParameterError` with ``detail`` unless ``condition``."""
    if not condition:
        raise ParameterError(detail)


def departure_rate(n: int, sigma2: float) -> float:
    """Return the normalised departure rate ``n / (n - 1 + sigma2)`` of state ``n``.

    Examples
    --------
    >>> departure_rate(0, 0.5), departure_rate(1, 0.5), departure_rate(2, 1.0)
    (0.0, 2.0, 1.0)
    """
    _require(n >= 0, f"user count must be non-negative; received {n}.")
    _require(sigma2 > 0.0, f"normalised noise must be positive; received {sigma2}.")
    if n == 0:
        return 0.0
    return n / (n - 1 + sigma2)


def drift_bound(epsilon: float, sigma2: float) -> int | None:
    """Return the largest ``n`` with non-positive drift, or ``None``.

    The drift at ``n`` is non-positive while ``n <= ((1 + eps) / eps)(1 -
    sigma2)``. No such locally stable set exists when ``sigma2 >= 1`` or
    when ``sigma2 > 1 / (1 + eps)``.

    Examples
    --------
    >>> drift_bound(0.01, 1e-8), drift_bound(1.0, 0.5), drift_bound(0.01, 1.0)
    (100, 1, None)
    """
    _require(epsilon > 0.0, f"epsilon must be positive; received {epsilon}.")
    _require(sigma2 > 0.0, f"normalised noise must be positive; received {sigma2}.")
    if sigma2 >= 1.0 or sigma2 > 1.0 / (1.0 + epsilon):
        return None
    return math.floor((1.0 + epsilon) / epsilon * (1.0 - sigma2))


def tau_steps(n_max: int, arrival_rate: float, sigma2: float) -> FloatArray:
    """Return ``E[tau_{n,n+1}]`` for ``n = 0 .. n_max - 1`` by forward recursion.

    The recursion runs in extended precision and is returned as float64.

    Parameters
    ----------
    n_max : int
        Number of steps to tabulate.
    arrival_rate : float
        Arrival rate ``lambda |D|`` in chain units.
    sigma2 : float
        Normalised noise.

    Returns
    -------
    numpy.ndarray
        Mean step times in chain units.

    Raises
    ------
    ParameterError
        If ``arrival_rate`` or ``sigma2`` is not positive, or ``n_max`` is
        negative.
    """  # noqa: DOC502 -- raised through _require
    _require(n_max >= 0, f"table size must be non-negative; received {n_max}.")
    _require(arrival_rate > 0.0, "arrival rate must be positive.")
    _require(sigma2 > 0.0, f"normalised noise must be positive; received {sigma2}.")
    steps = np.empty(n_max, dtype=np.longdouble)
    rate = np.longdouble(arrival_rate)
    noise = np.longdouble(sigma2)
    previous = np.longdouble(0.0)
    for n in range(n_max):
        departures = n / (n - 1 + noise) if n else np.longdouble(0.0)
        previous = (1 + departures * previous) / rate
        steps[n] = previous
    return steps.astype(np.float64)


def tau_step(n: int, arrival_rate: float, sigma2: float) -> float:
    """Return ``E[tau_{n,n+1}]`` by recursion.

    Examples
    --------
    >>> tau_step(0, 2.0, 1.0), tau_step(1, 2.0, 1.0)
    (0.5, 0.75)
    """
    _require(n >= 0, f"user count must be non-negative; received {n}.")
    return float(tau_steps(n + 1, arrival_rate, sigma2)[n])


def _series_length(n: int, epsilon: float, sigma2: float) -> int:
    """Return how many closed-form terms are needed for ``1e-18`` relative error.

    Every partial product of the ratios is bounded by
    ``Gamma(n + 1) Gamma(sigma2) / Gamma(n + sigma2)`` when ``sigma2 < 1``
    and by one otherwise.
    """
    log_bound = 0.0
    if sigma2 < 1.0:
        log_bound = float(
            sp.special.gammaln(n + 1.0)
            + sp.special.gammaln(sigma2)
            - sp.special.gammaln(n + sigma2)
        )
    log_growth = math.log1p(epsilon)
    needed = (log_bound - math.log(epsilon) - math.log(_SERIES_RTOL)) / log_growth
    return min(n, max(1, math.ceil(needed)))


def tau_step_closed(n: int, epsilon: float, sigma2: float) -> float:
    """Return ``E[tau_{n,n+1}]`` at ``lambda |D| = 1 + epsilon`` from the series.

    ``1/(1+eps) + sum_{i=1..n} (1+eps)^-(i+1) prod_{j<i} (n-j)/(n-1+sigma2-j)``,
    with the product built term by term and the sum truncated once the
    remaining terms are below ``1e-18`` of the total.

    Parameters
    ----------
    n : int
        Starting user count.
    epsilon : float
        Excess of the arrival rate over the critical rate, in chain units.
    sigma2 : float
        Normalised noise.

    Returns
    -------
    float
        The mean step time in chain units.

    Raises
    ------
    ParameterError
        If ``n`` is negative or ``epsilon``/``sigma2`` not positive.

    Examples
    --------
    >>> tau_step_closed(0, 1.0, 1.0), tau_step_closed(1, 1.0, 1.0)
    (0.5, 0.75)
    """  # noqa: DOC502 -- raised through _require
    _require(n >= 0, f"user count must be non-negative; received {n}.")
    _require(epsilon > 0.0, f"epsilon must be positive; received {epsilon}.")
    _require(sigma2 > 0.0, f"normalised noise must be positive; received {sigma2}.")
    first = 1.0 / (1.0 + epsilon)
    if n == 0:
        return first
    count = _series_length(n, epsilon, sigma2)
    index = np.arange(1, count + 1, dtype=np.float64)
    ratios = (n - index + 1.0) / (n + sigma2 - index) * first
    return first + first * float(np.sum(np.cumprod(ratios)))


def tau_cum(
    n: int,
    epsilon: float,
    sigma2: float,
    method: PassageMethod = PassageMethod.RECURSION,
) -> float:
    """Return ``E[tau_{0,n}]`` at ``lambda |D| = 1 + epsilon``.

    Parameters
    ----------
    n : int
        Target user count.
    epsilon : float
        Excess of the arrival rate over the critical rate, in chain units.
    sigma2 : float
        Normalised noise.
    method : PassageMethod, optional
        Sum of recursion steps or of closed-form steps. At ``sigma2 = 1``
        the closed method uses ``(eps n - 1) / eps^2 + 1 / (eps^2 (1+eps)^n)``.

    Returns
    -------
    float
        The mean passage time in chain units.

    Raises
    ------
    ParameterError
        If ``n`` is negative.

    Examples
    --------
    >>> tau_cum(2, 1.0, 1.0), tau_cum(2, 1.0, 1.0, PassageMethod.CLOSED)
    (1.25, 1.25)
    """  # noqa: DOC502 -- raised through _require
    _require(n >= 0, f"user count must be non-negative; received {n}.")
    if method is PassageMethod.RECURSION:
        return float(np.sum(tau_steps(n, 1.0 + epsilon, sigma2)))
    if sigma2 == 1.0:
        _require(epsilon > 0.0, f"epsilon must be positive; received {epsilon}.")
        return (epsilon * n - 1.0) / epsilon**2 + 1.0 / (
            epsilon**2 * (1.0 + epsilon) ** n
        )
    return math.fsum(tau_step_closed(k, epsilon, sigma2) for k in range(n))


def tau_first_variance(arrival_rate: float) -> float:
    """Return ``var(tau_{0,1}) = 1 / (lambda |D|)^2`` for the exponential first arrival.

    Examples
    --------
    >>> tau_first_variance(2.0)
    0.25
    """
    _require(arrival_rate > 0.0, "arrival rate must be positive.")
    return 1.0 / arrival_rate**2


def seconds_per_unit(params: NetworkParams) -> float:
    """Return the length of one chain time unit in seconds, ``ln 2 / (B mu)``."""
    return math.log(2.0) / (params.bandwidth * params.mu)


@dc.dataclass(frozen=True, slots=True)
class PassageTable:
    """Mean step and cumulative passage times for one ``(epsilon, sigma2)``.

    Attributes
    ----------
    epsilon : float
        Excess arrival rate; ``arrival_rate = 1 + epsilon``.
    sigma2 : float
        Normalised noise.
    arrival_rate : float
        ``lambda |D|`` in chain units.
    tau_step : numpy.ndarray
        ``E[tau_{n,n+1}]`` for ``n = 0 .. n_max - 1``.
    tau_cum : numpy.ndarray
        ``E[tau_{0,n}]`` for ``n = 0 .. n_max``, starting at zero.
    seconds_scale : float
        Seconds per chain time unit.
    """

    epsilon: float
    sigma2: float
    arrival_rate: float
    tau_step: FloatArray
    tau_cum: FloatArray
    seconds_scale: float = 1.0

    def in_seconds(self) -> PassageTable:
        """Return a copy with both arrays converted to seconds."""
        return dc.replace(
            self,
            tau_step=self.tau_step * self.seconds_scale,
            tau_cum=self.tau_cum * self.seconds_scale,
            seconds_scale=1.0,
        )

    def rows(self) -> cabc.Iterator[tuple[int, float, float]]:
        """Yield ``(n, E[tau_{n,n+1}], E[tau_{0,n}])`` rows."""
        for n, step in enumerate(self.tau_step):
            yield n, float(step), float(self.tau_cum[n])


def build_table(
    n_max: int,
    *,
    epsilon: float,
    sigma2: float,
    method: PassageMethod = PassageMethod.RECURSION,
    seconds_scale: float = 1.0,
) -> PassageTable:
    """Tabulate passage times up to ``n_max`` users.

    Parameters
    ----------
    n_max : int
        Largest target user count.
    epsilon : float
        Excess arrival rate in chain units.
    sigma2 : float
        Normalised noise.
    method : PassageMethod, optional
        Recursion or closed-form series for the step times.
    seconds_scale : float, optional
        Seconds per chain time unit, see :func:`seconds_per_unit`.

    Returns
    -------
    PassageTable
        The table; ``tau_cum`` is the running sum of ``tau_step``.

    Raises
    ------
    ParameterError
        If ``epsilon`` is not positive.
    """  # noqa: DOC502 -- raised through _require
    _require(epsilon > 0.0, f"epsilon must be positive; received {epsilon}.")
    if method is PassageMethod.RECURSION:
        steps = tau_steps(n_max, 1.0 + epsilon, sigma2)
    else:
        steps = np.array([tau_step_closed(n, epsilon, sigma2) for n in range(n_max)])
    cumulative = np.concatenate(([0.0], np.cumsum(steps)))
    LOGGER.debug(
        "passage table: n_max=%d epsilon=%g sigma2=%g method=%s",
        n_max,
        epsilon,
        sigma2,
        method,
    )
    return PassageTable(
        epsilon=epsilon,
        sigma2=sigma2,
        arrival_rate=1.0 + epsilon,
        tau_step=steps,
        tau_cum=cumulative,
        seconds_scale=seconds_scale,
    )


@dc.dataclass(frozen=True, slots=True)
class SigmaSweep:
    """``E[tau_{0,n}]`` against ``1 / sigma2`` with a least-squares line."""

    n: int
    epsilon: float
    inverse_sigma2: FloatArray
    tau_cum: FloatArray
    slope: float
    intercept: float
    r_squared: float


def tau_sigma_sweep(
    n: int, epsilon: float, sigma2_grid: cabc.Sequence[float] | FloatArray
) -> SigmaSweep:
    """Return ``E[tau_{0,n}]`` over a grid of noise levels with a linear fit.

    Parameters
    ----------
    n : int
        Target user count.
    epsilon : float
        Excess arrival rate in chain units.
    sigma2_grid : cabc.Sequence[float] | numpy.ndarray
        Noise levels, at least two.

    Returns
    -------
    SigmaSweep
        The sweep with the fitted line against ``1 / sigma2`` and its
        coefficient of determination.

    Raises
    ------
    ParameterError
        If fewer than two noise levels are given.
    """  # noqa: DOC502 -- raised through _require
    noise = np.asarray(sigma2_grid, dtype=np.float64)
    _require(noise.size >= 2, "the sweep needs at least two noise levels.")
    values = np.array([tau_cum(n, epsilon, float(level)) for level in noise])
    inverse = 1.0 / noise
    slope, intercept = np.polyfit(inverse, values, 1)
    fitted = slope * inverse + intercept
    spread = float(np.sum((values - values.mean()) ** 2))
    r_squared = 1.0 - float(np.sum((values - fitted) ** 2)) / spread if spread else 1.0
    return SigmaSweep(
        n=n,
        epsilon=epsilon,
        inverse_sigma2=inverse,
        tau_cum=values,
        slope=float(slope),
        intercept=float(intercept),
        r_squared=r_squared,
    )


def growth_slopes(table: PassageTable) -> FloatArray:
    """Return the local log-log slope ``d ln E[tau_{0,n}] / d ln n`` for ``n >= 1``.

    A slope near two marks the quadratic regime below the drift bound and a
    slope near one the linear tail.
    """
    counts = np.arange(1, table.tau_cum.size, dtype=np.float64)
    if counts.size < 2:
        return np.zeros(counts.size)
    return np.gradient(np.log(table.tau_cum[1:]), np.log(counts))
