"""Physical model of the single-cell uplink.

Users arrive uniformly on a disk of radius ``R`` and upload a file of
exponentially distributed size to a base station at the centre. Each user
transmits with fractional channel inversion, so the power received from a
user at distance ``r`` is proportional to ``L(r)^(1-l)`` with path loss
``L(r) = (1 + r)^(-eta)``. The instantaneous service rate of a user is
either the Shannon rate treating interference as noise or its low-SINR
linearisation.

Every quantity uses SI units: metres, seconds, bits, and hertz. The
normalised noise ``sigma2`` is the dimensionless ratio of noise power to
transmit power.

Examples
--------
>>> params = baseline_params(arrival_rate=0.3)
>>> round(critical_rate(params), 5)
0.45922
>>> classify_regime(params).kind
<RegimeKind.STABLE: 'stable'>
"""

from __future__ import annotations

import dataclasses as dc
import enum
import logging
import math
import typing as typ

import numpy as np

from cellflow.exceptions import CellflowError

if typ.TYPE_CHECKING:
    import numpy.typing as npt

LOGGER = logging.getLogger(__name__)

type FloatOrArray = float | npt.NDArray[np.float64]

_BOUNDARY_RTOL = 1e-12


class ParameterError(CellflowError):
    """Raised when physical parameters or arguments violate the model domain."""


class RateMode(enum.StrEnum):
    """Rate function used to serve users."""

    LOW_SINR = "low-sinr"
    GENERAL = "general"


class RegimeKind(enum.StrEnum):
    """Qualitative long-run behaviour of the user population."""

    STABLE = "stable"
    METASTABLE = "metastable"
    UNSTABLE = "unstable"
    BOUNDARY = "boundary"


@dc.dataclass(frozen=True, slots=True)
class Regime:
    """Regime classification together with the thresholds that produced it."""

    kind: RegimeKind
    critical_rate: float
    upper_edge: float | None = None


@dc.dataclass(frozen=True, slots=True)
class PathLossModel:
    """Bounded, non-increasing path loss ``L(r) = (1 + r)^(-eta)``."""

    eta: float

    def __post_init__(self) -> None:
        """Reject non-positive exponents."""
        if not self.eta > 0.0:
            message = f"path loss exponent must be positive; received {self.eta!r}."
            raise ParameterError(message)

    def __call__(self, distance: FloatOrArray) -> FloatOrArray:
        """Return the path loss gain at ``distance`` metres."""
        return path_loss(distance, self.eta)

    def minimum(self, radius: float) -> float:
        """Return ``L(radius)``, the smallest gain on a disk of that radius."""
        return float(path_loss(radius, self.eta))


@dc.dataclass(frozen=True, slots=True, kw_only=True)
class NetworkParams:
    """All physical constants of one network; validated on construction.

    Attributes
    ----------
    arrival_rate : float
        Arrival intensity ``lambda`` in users per square metre per second.
    mu : float
        Reciprocal mean file size in 1/bits.
    bandwidth : float
        Channel bandwidth ``B`` in hertz.
    sigma2 : float
        Normalised noise ``sigma^2 / P`` (dimensionless).
    inversion : float
        Channel inversion factor ``l`` in ``[0, 1]``.
    eta : float
        Path loss exponent.
    radius : float
        Cell radius ``R`` in metres.
    rate_mode : RateMode
        Service rate function.
    """

    arrival_rate: float
    mu: float
    bandwidth: float
    sigma2: float
    inversion: float
    eta: float
    radius: float
    rate_mode: RateMode = RateMode.LOW_SINR

    def __post_init__(self) -> None:
        """Validate every field against the model domain."""
        checks = (
            (self.arrival_rate >= 0.0, "arrival rate must be non-negative"),
            (self.mu > 0.0, "inverse file size must be positive"),
            (self.bandwidth > 0.0, "bandwidth must be positive"),
            (self.sigma2 > 0.0, "normalised noise must be positive"),
            (0.0 <= self.inversion <= 1.0, "inversion factor must lie in [0, 1]"),
            (self.eta > 0.0, "path loss exponent must be positive"),
            (self.radius > 0.0, "cell radius must be positive"),
        )
        for ok, message in checks:
            if not ok:
                detail = f"{message}; received {self!r}."
                raise ParameterError(detail)

    @property
    def area(self) -> float:
        """Cell area ``|D| = pi R^2`` in square metres."""
        return math.pi * self.radius**2

    @property
    def rho(self) -> float:
        """Offered load ``lambda / mu`` in bits per second per square metre."""
        return self.arrival_rate / self.mu

    @property
    def arrivals_per_second(self) -> float:
        """Total arrival rate ``lambda |D|`` over the cell in users per second."""
        return self.arrival_rate * self.area

    @property
    def path_loss_model(self) -> PathLossModel:
        """Path loss model for this network."""
        return PathLossModel(self.eta)

    @property
    def min_gain(self) -> float:
        """Smallest effective gain on the disk, reached at the cell edge."""
        return float(effective_gain(self.radius, self))

    def with_arrival_rate(self, arrival_rate: float) -> NetworkParams:
        """Return a copy with ``arrival_rate`` replaced."""
        return dc.replace(self, arrival_rate=arrival_rate)


def baseline_params(**overrides: typ.Any) -> NetworkParams:  # noqa: ANN401
    """Return the reference network, optionally with fields overridden.

    The reference uses ``mu = 1/100`` per bit, ``B = 1`` MHz, ``R = 100`` m,
    ``sigma2 = 1e-8`` (a -50 dBm noise figure over a 1 W transmitter),
    ``eta = 4``, ``l = 0`` and ``lambda = 0.3``.

    Parameters
    ----------
    **overrides : typing.Any
        Field values replacing the reference ones.

    Returns
    -------
    NetworkParams
        The validated parameter set.

    Examples
    --------
    >>> baseline_params(eta=5.0).eta
    5.0
    """
    fields: dict[str, typ.Any] = {
        "arrival_rate": 0.3,
        "mu": 0.01,
        "bandwidth": 1e6,
        "sigma2": 1e-8,
        "inversion": 0.0,
        "eta": 4.0,
        "radius": 100.0,
    }
    fields.update(overrides)
    return NetworkParams(**fields)


def noise_from_dbm(dbm: float) -> float:
    """Return the normalised noise for a noise figure of ``dbm`` over 1 W.

    Examples
    --------
    >>> noise_from_dbm(-50.0)
    1e-08
    """
    return float(10.0 ** ((dbm - 30.0) / 10.0))


def path_loss(distance: FloatOrArray, eta: float) -> FloatOrArray:
    """Return the path loss ``(1 + r)^(-eta)`` at ``distance`` metres.

    Parameters
    ----------
    distance : float | numpy.ndarray
        Non-negative distance(s) in metres.
    eta : float
        Positive path loss exponent.

    Returns
    -------
    float | numpy.ndarray
        Gain(s) in ``(0, 1]``; the shape follows ``distance``.

    Raises
    ------
    ParameterError
        If any distance is negative or ``eta`` is not positive.

    Examples
    --------
    >>> path_loss(1.0, 4.0)
    0.0625
    """
    if not eta > 0.0:
        message = f"path loss exponent must be positive; received {eta!r}."
        raise ParameterError(message)
    values = np.asarray(distance, dtype=np.float64)
    if np.any(values < 0.0):
        message = "distance must be non-negative."
        raise ParameterError(message)
    gains = np.power(1.0 + values, -eta)
    return float(gains) if gains.ndim == 0 else gains


def effective_gain(distance: FloatOrArray, params: NetworkParams) -> FloatOrArray:
    """Return the received-power gain ``L(r)^(1-l)`` after channel inversion.

    Parameters
    ----------
    distance : float | numpy.ndarray
        Distance(s) in metres, within ``[0, R]``.
    params : NetworkParams
        Network providing ``eta``, ``l`` and ``R``.

    Returns
    -------
    float | numpy.ndarray
        Gain(s) in ``(0, 1]``; identically one under full inversion.

    Raises
    ------
    ParameterError
        If any distance lies outside the cell.

    Examples
    --------
    >>> effective_gain(1.0, baseline_params(inversion=0.5))
    0.25
    """
    values = np.asarray(distance, dtype=np.float64)
    if np.any(values > params.radius * (1.0 + 1e-12)):
        message = f"distance must not exceed the cell radius {params.radius} m."
        raise ParameterError(message)
    gains = np.power(path_loss(values, params.eta), 1.0 - params.inversion)
    return float(gains) if np.ndim(gains) == 0 else gains


def rate_low_sinr(
    gain_self: FloatOrArray, interference_sum: FloatOrArray, params: NetworkParams
) -> FloatOrArray:
    """Return the low-SINR rate ``(B / ln 2) g / (I + sigma2)`` in bits/s.

    ``interference_sum`` is the sum of the effective gains of all other
    active users. Arrays broadcast.

    Examples
    --------
    >>> round(rate_low_sinr(1.0, 1.0, baseline_params(sigma2=1.0)))
    721348
    """
    scale = params.bandwidth / math.log(2.0)
    return scale * gain_self / (interference_sum + params.sigma2)


def rate_general(
    gain_self: FloatOrArray, interference_sum: FloatOrArray, params: NetworkParams
) -> FloatOrArray:
    """Return the Shannon rate ``B log2(1 + g / (I + sigma2))`` in bits/s.

    Never exceeds :func:`rate_low_sinr` for the same inputs.

    Examples
    --------
    >>> round(rate_general(3.0, 0.0, baseline_params(sigma2=1.0)))
    2000000
    """
    sinr = np.asarray(gain_self) / (np.asarray(interference_sum) + params.sigma2)
    rates = params.bandwidth * np.log1p(sinr) / math.log(2.0)
    return float(rates) if np.ndim(rates) == 0 else rates


def service_rate(
    gain_self: FloatOrArray, interference_sum: FloatOrArray, params: NetworkParams
) -> FloatOrArray:
    """Return the service rate selected by ``params.rate_mode``."""
    match params.rate_mode:
        case RateMode.GENERAL:
            return rate_general(gain_self, interference_sum, params)
        case _:
            return rate_low_sinr(gain_self, interference_sum, params)


def critical_rate(params: NetworkParams) -> float:
    """Return the critical arrival rate ``B mu / (ln 2 |D|)``.

    The threshold is the same for both rate functions and does not depend on
    the path loss, the inversion factor, or the noise.

    Parameters
    ----------
    params : NetworkParams
        Network providing ``B``, ``mu`` and ``R``.

    Returns
    -------
    float
        The critical rate in users per square metre per second.

    Examples
    --------
    >>> round(critical_rate(baseline_params()), 5)
    0.45922
    """
    return params.bandwidth * params.mu / (math.log(2.0) * params.area)


def classify_regime(params: NetworkParams) -> Regime:
    """Classify the network as stable, metastable, unstable, or boundary.

    Below the critical rate the network is stable. Above it, the first-order
    fixed point decides: two solutions mean a metastable operating point
    exists, none means the population grows without bound.

    Parameters
    ----------
    params : NetworkParams
        Network to classify.

    Returns
    -------
    Regime
        The classification, the critical rate, and the upper edge of the
        metastable window when one exists.

    Raises
    ------
    MeanFieldError
        Propagated from the first-order solver when it cannot conclude.

    Examples
    --------
    >>> classify_regime(baseline_params(arrival_rate=0.8)).kind
    <RegimeKind.METASTABLE: 'metastable'>
    """  # noqa: DOC502 -- propagated from the first-order solver
    # Deferred: the first-order solver itself depends on this module.
    from cellflow.meanfield import first_order

    threshold = critical_rate(params)
    window = first_order.metastable_window(params)
    upper = window.upper_edge
    if math.isclose(params.arrival_rate, threshold, rel_tol=_BOUNDARY_RTOL):
        return Regime(RegimeKind.BOUNDARY, threshold, upper)
    if params.arrival_rate < threshold:
        return Regime(RegimeKind.STABLE, threshold, upper)
    solutions = first_order.solve_fixed_point(params.arrival_rate, params)
    kind = RegimeKind.METASTABLE if len(solutions) == 2 else RegimeKind.UNSTABLE
    LOGGER.debug(
        "classify_regime: lambda=%g lambda_c=%g solutions=%d -> %s",
        params.arrival_rate,
        threshold,
        len(solutions),
        kind,
    )
    return Regime(kind, threshold, upper)
