"""JSON records written by the commands.

Every JSON artefact is a frozen :class:`msgspec.Struct` encoded with
:mod:`msgspec.json` in deterministic key order. Non-finite floats encode as
``null``.
"""

from __future__ import annotations

import logging
import math
import typing as typ

import msgspec
import msgspec.json as msjson

from cellflow.outputs.errors import OutputError

if typ.TYPE_CHECKING:
    from pathlib import Path

    from cellflow.model import NetworkParams

LOGGER = logging.getLogger(__name__)


class NetworkRecord(msgspec.Struct, frozen=True, kw_only=True):
    """Echo of the simulated or solved network."""

    arrival_rate_per_m2_s: float
    inverse_file_size_per_bit: float
    bandwidth_hz: float
    noise_normalized: float
    inversion_factor: float
    path_loss_exponent: float
    cell_radius_m: float
    rate_mode: str

    @classmethod
    def from_params(cls, params: NetworkParams) -> NetworkRecord:
        """Build the echo of ``params``."""
        return cls(
            arrival_rate_per_m2_s=params.arrival_rate,
            inverse_file_size_per_bit=params.mu,
            bandwidth_hz=params.bandwidth,
            noise_normalized=params.sigma2,
            inversion_factor=params.inversion,
            path_loss_exponent=params.eta,
            cell_radius_m=params.radius,
            rate_mode=str(params.rate_mode),
        )


class RegimePoint(msgspec.Struct, frozen=True, kw_only=True):
    """Regime at one arrival rate."""

    arrival_rate_per_m2_s: float
    regime: str


class CriticalReport(msgspec.Struct, frozen=True, kw_only=True):
    """Output of ``cellflow critical``."""

    network: NetworkRecord
    critical_rate_per_m2_s: float
    metastable_upper_edge_per_m2_s: float | None
    regime: str
    regime_map: tuple[RegimePoint, ...]


class FoSolutionRecord(msgspec.Struct, frozen=True, kw_only=True):
    """One first-order solution."""

    branch: str
    z_star: float
    nbar_users: float
    arrival_rate_per_m2_s: float
    residual: float
    degenerate: bool


class FirstOrderReport(msgspec.Struct, frozen=True, kw_only=True):
    """Output of ``cellflow solve-fo``."""

    network: NetworkRecord
    critical_rate_per_m2_s: float
    metastable_upper_edge_per_m2_s: float | None
    regime: str
    solutions: tuple[FoSolutionRecord, ...]


class SecondOrderReport(msgspec.Struct, frozen=True, kw_only=True):
    """Output of ``cellflow solve-so`` with the FO/SO/simulation comparison."""

    network: NetworkRecord
    weights: tuple[float, ...]
    converged: bool
    iterations: int
    residual_history: tuple[float, ...]
    gamma1_residual: float | None
    gamma2_residual: float | None
    nbar_fo_users: float | None
    nbar_so_users: float
    nbar_sim_users: float | None
    center_edge_ratio: float | None


class SolverDiagnosticsRecord(msgspec.Struct, frozen=True, kw_only=True):
    """State of a second-order run that did not converge."""

    reason: str
    iterations: int
    residual_history: tuple[float, ...]
    gamma1_residual: float | None = None
    gamma2_residual: float | None = None
    radii_m: tuple[float, ...] = ()
    gamma1_per_m2: tuple[float, ...] = ()


class HittingRecord(msgspec.Struct, frozen=True, kw_only=True):
    """First-passage statistics of the user count."""

    target_users: int
    samples: int
    censored: int
    mean_s: float | None
    variance_s2: float | None
    ci_low_s: float | None
    ci_high_s: float | None


class ReplicaRecord(msgspec.Struct, frozen=True, kw_only=True):
    """Summary of one simulation replica."""

    replica: int
    seed: int
    events: int
    clock_s: float
    nbar_users: float | None
    departures: int
    diverged: bool
    escape_time_s: float | None
    conservation_error: float | None
    conservation_low_confidence: bool


class SimulationReport(msgspec.Struct, frozen=True, kw_only=True):
    """Output of ``cellflow simulate``."""

    network: NetworkRecord
    mode: str
    bands: int
    seeds: tuple[int, ...]
    n_effective: int
    failed_replicas: tuple[int, ...]
    nbar_users: float | None
    nbar_stderr: float | None
    nbar_ci_low: float | None
    nbar_ci_high: float | None
    nbar_fo_users: float | None
    diverged: bool
    replicas: tuple[ReplicaRecord, ...]
    hitting: HittingRecord | None = None


class PassageCurveRecord(msgspec.Struct, frozen=True, kw_only=True):
    """Headline numbers of one passage table."""

    noise_normalized: float
    max_users: int
    tau_cum_final: float
    tau_cum_final_s: float
    final_growth_slope: float | None


class NoiseSweepRecord(msgspec.Struct, frozen=True, kw_only=True):
    """Linear fit of the mean passage time against ``1 / sigma2``."""

    users: int
    epsilon: float
    slope: float
    intercept: float
    r_squared: float


class PassageReport(msgspec.Struct, frozen=True, kw_only=True):
    """Output of ``cellflow passage``."""

    epsilon: float
    method: str
    seconds_per_unit: float
    curves: tuple[PassageCurveRecord, ...]
    sweep: NoiseSweepRecord


_ENCODER = msjson.Encoder(order="deterministic")


def write_json(path: Path, record: msgspec.Struct) -> Path:
    """Encode ``record`` to ``path`` and return the path.

    Raises
    ------
    OutputError
        If the file cannot be written.
    """
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(msjson.format(_ENCODER.encode(record), indent=2) + b"\n")
    except OSError as exc:
        message = f"cannot write {path}: {exc}"
        raise OutputError(message) from exc
    LOGGER.debug("wrote %s", path)
    return path


def read_json[T](path: Path, record_type: type[T]) -> T:
    """Decode ``path`` into ``record_type``.

    Raises
    ------
    OutputError
        If the file is missing or does not match ``record_type``.
    """
    try:
        return msjson.decode(path.read_bytes(), type=record_type)
    except OSError as exc:
        message = f"cannot read {path}: {exc}"
        raise OutputError(message) from exc
    except msgspec.DecodeError as exc:
        message = f"{path} is not a valid {record_type.__name__}: {exc}"
        raise OutputError(message) from exc


def finite_or_none(value: float | None) -> float | None:
    """Return ``value`` as a float, or ``None`` when it is missing or not finite.

    Examples
    --------
    >>> finite_or_none(float("nan")) is None
    True
    """
    if value is None or not math.isfinite(value):
        return None
    return float(value)
