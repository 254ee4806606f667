"""Section tables of the experiment file.

Each ``[section]`` of ``cellflow.toml`` is validated into a frozen dataclass
whose field names are the TOML keys. Every section builds the domain object
it configures, so a section that parses is one the solvers accept.
"""

from __future__ import annotations

import collections.abc as cabc
import dataclasses as dc
import functools
import typing as typ

import numpy as np

from cellflow import toml_coerce
from cellflow.exceptions import CellflowError
from cellflow.meanfield.first_order import FirstOrderOptions
from cellflow.meanfield.second_order import (
    DEFAULT_WEIGHTS,
    RadialGrid,
    SecondOrderOptions,
)
from cellflow.model import NetworkParams, RateMode, noise_from_dbm
from cellflow.numerics import QuadratureSpec
from cellflow.passage import PassageMethod
from cellflow.simulation import SimMode, SimOptions

if typ.TYPE_CHECKING:  # pragma: no cover - type checking only
    import numpy.typing as npt

MAX_SEED = 2**64 - 1


class ConfigurationError(CellflowError):
    """Raised when the :mod:`cellflow` configuration is invalid."""


class ConfigurationNotLoadedError(ConfigurationError):
    """Raised when code accesses the configuration before it is loaded."""


class MissingConfigurationError(ConfigurationError):
    """Raised when an explicitly requested configuration file is absent."""


def _keys(section: type) -> set[str]:
    """Return the TOML keys of a section dataclass."""
    return {field.name for field in dc.fields(section)}


@dc.dataclass(frozen=True, slots=True)
class NetworkConfig:
    """Physical network constants (``[network]``)."""

    arrival_rate_per_m2_s: float = 0.3
    inverse_file_size_per_bit: float = 0.01
    bandwidth_hz: float = 1e6
    noise_normalized: float = 1e-8
    inversion_factor: float = 0.0
    path_loss_exponent: float = 4.0
    cell_radius_m: float = 100.0
    rate_mode: str = RateMode.LOW_SINR.value

    @classmethod
    def from_mapping(
        cls, mapping: cabc.Mapping[str, typ.Any] | None
    ) -> NetworkConfig:
        """Create a :class:`NetworkConfig` from the ``[network]`` table.

        ``noise_dbm`` may replace ``noise_normalized``; it is converted to
        the linear normalised noise and the two keys are mutually exclusive.

        Parameters
        ----------
        mapping : cabc.Mapping[str, typ.Any] | None
            The parsed table, or ``None`` for defaults.

        Returns
        -------
        NetworkConfig
            Validated network constants.

        Raises
        ------
        ConfigurationError
            If a key is unknown, a value is invalid, or both noise keys are
            present.

        Examples
        --------
        >>> NetworkConfig.from_mapping({"noise_dbm": -50}).noise_normalized
        1e-08
        >>> NetworkConfig.from_mapping(None).path_loss_exponent
        4.0
        """
        if mapping is None:
            return cls()
        validate_mapping_keys(mapping, _keys(cls) | {"noise_dbm"}, "network")
        noise = _network_noise(mapping)
        return cls(
            arrival_rate_per_m2_s=_real(
                mapping.get("arrival_rate_per_m2_s"),
                "network.arrival_rate_per_m2_s",
                0.3,
                bound="non-negative",
            ),
            inverse_file_size_per_bit=_real(
                mapping.get("inverse_file_size_per_bit"),
                "network.inverse_file_size_per_bit",
                0.01,
                bound="positive",
            ),
            bandwidth_hz=_real(
                mapping.get("bandwidth_hz"),
                "network.bandwidth_hz",
                1e6,
                bound="positive",
            ),
            noise_normalized=noise,
            inversion_factor=_real(
                mapping.get("inversion_factor"),
                "network.inversion_factor",
                0.0,
                bound="unit-interval",
            ),
            path_loss_exponent=_real(
                mapping.get("path_loss_exponent"),
                "network.path_loss_exponent",
                4.0,
                bound="positive",
            ),
            cell_radius_m=_real(
                mapping.get("cell_radius_m"),
                "network.cell_radius_m",
                100.0,
                bound="positive",
            ),
            rate_mode=_choice(
                mapping.get("rate_mode"),
                "network.rate_mode",
                tuple(mode.value for mode in RateMode),
            )
            or RateMode.LOW_SINR.value,
        )

    def to_params(self) -> NetworkParams:
        """Return the validated :class:`~cellflow.model.NetworkParams`."""
        return NetworkParams(
            arrival_rate=self.arrival_rate_per_m2_s,
            mu=self.inverse_file_size_per_bit,
            bandwidth=self.bandwidth_hz,
            sigma2=self.noise_normalized,
            inversion=self.inversion_factor,
            eta=self.path_loss_exponent,
            radius=self.cell_radius_m,
            rate_mode=RateMode(self.rate_mode),
        )


def _network_noise(mapping: cabc.Mapping[str, typ.Any]) -> float:
    """Resolve ``noise_normalized`` or ``noise_dbm`` into the linear noise."""
    normalized = mapping.get("noise_normalized")
    dbm = mapping.get("noise_dbm")
    if normalized is not None and dbm is not None:
        message = "network.noise_normalized and network.noise_dbm are exclusive."
        raise ConfigurationError(message)
    if dbm is not None:
        return noise_from_dbm(_real(dbm, "network.noise_dbm", 0.0))
    return _real(normalized, "network.noise_normalized", 1e-8, bound="positive")


@dc.dataclass(frozen=True, slots=True)
class RunConfig:
    """Seed and parallelism shared by every command (``[run]``)."""

    seed: int = 1
    threads: int = 1

    @classmethod
    def from_mapping(cls, mapping: cabc.Mapping[str, typ.Any] | None) -> RunConfig:
        """Create a :class:`RunConfig` from the ``[run]`` table.

        Raises
        ------
        ConfigurationError
            If a key is unknown or the seed is not an unsigned 64-bit value.

        Examples
        --------
        >>> RunConfig.from_mapping({"seed": 7}).seed
        7
        """
        if mapping is None:
            return cls()
        validate_mapping_keys(mapping, _keys(cls), "run")
        seed = _non_negative_int(mapping.get("seed"), "run.seed", 1)
        if seed > MAX_SEED:
            message = "run.seed must be an unsigned 64-bit integer."
            raise ConfigurationError(message)
        return cls(
            seed=seed, threads=_positive_int(mapping.get("threads"), "run.threads", 1)
        )


@dc.dataclass(frozen=True, slots=True)
class QuadratureConfig:
    """Adaptive quadrature tolerances (``[quadrature]``)."""

    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_subdivisions: int = 200

    @classmethod
    def from_mapping(
        cls, mapping: cabc.Mapping[str, typ.Any] | None
    ) -> QuadratureConfig:
        """Create a :class:`QuadratureConfig` from the ``[quadrature]`` table."""
        if mapping is None:
            return cls()
        validate_mapping_keys(mapping, _keys(cls), "quadrature")
        return cls(
            rel_tol=_real(
                mapping.get("rel_tol"), "quadrature.rel_tol", 1e-9, bound="positive"
            ),
            abs_tol=_real(
                mapping.get("abs_tol"), "quadrature.abs_tol", 1e-12, bound="positive"
            ),
            max_subdivisions=_positive_int(
                mapping.get("max_subdivisions"), "quadrature.max_subdivisions", 200
            ),
        )

    def to_spec(self) -> QuadratureSpec:
        """Return the matching :class:`~cellflow.numerics.QuadratureSpec`."""
        return QuadratureSpec(self.rel_tol, self.abs_tol, self.max_subdivisions)


@dc.dataclass(frozen=True, slots=True)
class FirstOrderConfig:
    """Scan grid of the first-order solver (``[first_order]``)."""

    grid_points: int = 400
    nbar_min_users: float = 1e-4
    nbar_max_users: float = 1e4
    bracket_tol: float = 1e-8

    @classmethod
    def from_mapping(
        cls, mapping: cabc.Mapping[str, typ.Any] | None
    ) -> FirstOrderConfig:
        """Create a :class:`FirstOrderConfig` from the ``[first_order]`` table."""
        if mapping is None:
            return cls()
        validate_mapping_keys(mapping, _keys(cls), "first_order")
        return cls(
            grid_points=_positive_int(
                mapping.get("grid_points"), "first_order.grid_points", 400
            ),
            nbar_min_users=_real(
                mapping.get("nbar_min_users"),
                "first_order.nbar_min_users",
                1e-4,
                bound="positive",
            ),
            nbar_max_users=_real(
                mapping.get("nbar_max_users"),
                "first_order.nbar_max_users",
                1e4,
                bound="positive",
            ),
            bracket_tol=_real(
                mapping.get("bracket_tol"),
                "first_order.bracket_tol",
                1e-8,
                bound="positive",
            ),
        )

    def to_options(self, quadrature: QuadratureSpec) -> FirstOrderOptions:
        """Return solver options using ``quadrature`` tolerances."""
        return FirstOrderOptions(
            grid_points=self.grid_points,
            nbar_min=self.nbar_min_users,
            nbar_max=self.nbar_max_users,
            bracket_tol=self.bracket_tol,
            quadrature=quadrature,
        )


SWEEP_SPACINGS: typ.Final[tuple[str, ...]] = ("geometric", "linear")


@dc.dataclass(frozen=True, slots=True)
class SweepConfig:
    """``nbar`` range of the first-order sweep (``[sweep]``).

    Empty ``path_loss_exponents`` or ``inversion_factors`` keep the
    ``[network]`` value; each listed value produces one curve.
    """

    nbar_min_users: float = 1e-2
    nbar_max_users: float = 1e3
    points: int = 200
    spacing: str = "geometric"
    path_loss_exponents: tuple[float, ...] = ()
    inversion_factors: tuple[float, ...] = ()

    @classmethod
    def from_mapping(cls, mapping: cabc.Mapping[str, typ.Any] | None) -> SweepConfig:
        """Create a :class:`SweepConfig` from the ``[sweep]`` table.

        Examples
        --------
        >>> SweepConfig.from_mapping({"points": 0}).grid().size
        0
        """
        if mapping is None:
            return cls()
        validate_mapping_keys(mapping, _keys(cls), "sweep")
        sweep = cls(
            nbar_min_users=_real(
                mapping.get("nbar_min_users"),
                "sweep.nbar_min_users",
                1e-2,
                bound="positive",
            ),
            nbar_max_users=_real(
                mapping.get("nbar_max_users"),
                "sweep.nbar_max_users",
                1e3,
                bound="positive",
            ),
            points=_non_negative_int(mapping.get("points"), "sweep.points", 200),
            spacing=_choice(mapping.get("spacing"), "sweep.spacing", SWEEP_SPACINGS)
            or "geometric",
            path_loss_exponents=_real_tuple(
                mapping.get("path_loss_exponents"), "sweep.path_loss_exponents"
            ),
            inversion_factors=_real_tuple(
                mapping.get("inversion_factors"), "sweep.inversion_factors"
            ),
        )
        if sweep.nbar_min_users > sweep.nbar_max_users:
            message = "sweep.nbar_min_users must not exceed sweep.nbar_max_users."
            raise ConfigurationError(message)
        return sweep

    def grid(self) -> npt.NDArray[np.float64]:
        """Return the ``nbar`` values of the sweep."""
        if self.spacing == "linear":
            return np.linspace(self.nbar_min_users, self.nbar_max_users, self.points)
        return np.geomspace(self.nbar_min_users, self.nbar_max_users, self.points)


@dc.dataclass(frozen=True, slots=True)
class SecondOrderConfig:
    """Grid, closure and iteration controls of ``solve-so`` (``[second_order]``)."""

    radial_cells: int = 32
    angular_cells: int = 16
    weights: tuple[float, ...] = DEFAULT_WEIGHTS
    tolerance: float = 1e-5
    max_outer: int = 200
    damping: float = 0.5
    allow_unstable: bool = False
    simulation_summary: str = ""

    @classmethod
    def from_mapping(
        cls, mapping: cabc.Mapping[str, typ.Any] | None
    ) -> SecondOrderConfig:
        """Create a :class:`SecondOrderConfig` from the ``[second_order]`` table."""
        if mapping is None:
            return cls()
        validate_mapping_keys(mapping, _keys(cls), "second_order")
        return cls(
            radial_cells=_positive_int(
                mapping.get("radial_cells"), "second_order.radial_cells", 32
            ),
            angular_cells=_positive_int(
                mapping.get("angular_cells"), "second_order.angular_cells", 16
            ),
            weights=_real_tuple(
                mapping.get("weights"), "second_order.weights", DEFAULT_WEIGHTS
            ),
            tolerance=_real(
                mapping.get("tolerance"),
                "second_order.tolerance",
                1e-5,
                bound="positive",
            ),
            max_outer=_positive_int(
                mapping.get("max_outer"), "second_order.max_outer", 200
            ),
            damping=_real(
                mapping.get("damping"),
                "second_order.damping",
                0.5,
                bound="unit-interval",
            ),
            allow_unstable=_boolean(
                mapping.get("allow_unstable"), "second_order.allow_unstable"
            ),
            simulation_summary=_optional_string(
                mapping.get("simulation_summary"), "second_order.simulation_summary"
            ),
        )

    def to_grid(self, radius: float) -> RadialGrid:
        """Return the polar grid over a cell of ``radius`` metres."""
        return RadialGrid(radius, self.radial_cells, self.angular_cells)

    def to_options(self) -> SecondOrderOptions:
        """Return the solver iteration controls."""
        return SecondOrderOptions(
            tolerance=self.tolerance,
            max_outer=self.max_outer,
            damping=self.damping,
            allow_unstable=self.allow_unstable,
        )


@dc.dataclass(frozen=True, slots=True)
class SimulationConfig:
    """Simulation horizon, replicas and recording (``[simulation]``)."""

    mode: str = SimMode.EXACT.value
    events: int = 1_000_000
    replicas: int = 3
    warmup_fraction: float = 0.2
    bands: int = 1
    divergence_users: float = 0.0
    snapshot_every: int = 1000
    annuli: int = 20
    step_users_per_cell: float = 100.0
    hitting_target_users: int = 0
    hitting_replicas: int = 10_000

    @classmethod
    def from_mapping(
        cls, mapping: cabc.Mapping[str, typ.Any] | None
    ) -> SimulationConfig:
        """Create a :class:`SimulationConfig` from the ``[simulation]`` table.

        Examples
        --------
        >>> SimulationConfig.from_mapping({"events": 1e4}).events
        10000
        """
        if mapping is None:
            return cls()
        validate_mapping_keys(mapping, _keys(cls), "simulation")
        get = mapping.get
        return cls(
            mode=_choice(
                get("mode"), "simulation.mode", tuple(mode.value for mode in SimMode)
            )
            or SimMode.EXACT.value,
            events=_positive_int(get("events"), "simulation.events", 1_000_000),
            replicas=_positive_int(get("replicas"), "simulation.replicas", 3),
            warmup_fraction=_real(
                get("warmup_fraction"),
                "simulation.warmup_fraction",
                0.2,
                bound="unit-interval",
            ),
            bands=_positive_int(get("bands"), "simulation.bands", 1),
            divergence_users=_real(
                get("divergence_users"),
                "simulation.divergence_users",
                0.0,
                bound="non-negative",
            ),
            snapshot_every=_positive_int(
                get("snapshot_every"), "simulation.snapshot_every", 1000
            ),
            annuli=_positive_int(get("annuli"), "simulation.annuli", 20),
            step_users_per_cell=_real(
                get("step_users_per_cell"),
                "simulation.step_users_per_cell",
                100.0,
                bound="positive",
            ),
            hitting_target_users=_non_negative_int(
                get("hitting_target_users"), "simulation.hitting_target_users", 0
            ),
            hitting_replicas=_positive_int(
                get("hitting_replicas"), "simulation.hitting_replicas", 10_000
            ),
        )

    def to_options(self, run: RunConfig) -> SimOptions:
        """Return engine options seeded and parallelised by ``run``."""
        return SimOptions(
            mode=SimMode(self.mode),
            events=self.events,
            replicas=self.replicas,
            seed=run.seed,
            warmup_fraction=self.warmup_fraction,
            bands=self.bands,
            divergence_users=self.divergence_users,
            snapshot_every=self.snapshot_every,
            annuli=self.annuli,
            step_divisor=self.step_users_per_cell,
            threads=run.threads,
        )


@dc.dataclass(frozen=True, slots=True)
class PassageConfig:
    """First-passage tables and the noise sweep (``[passage]``)."""

    epsilon: float = 0.01
    noise_levels: tuple[float, ...] = (0.01, 11.0)
    max_users: int = 30_000
    method: str = PassageMethod.RECURSION.value
    sweep_users: int = 20_000
    sweep_noise_min: float = 1e-4
    sweep_noise_max: float = 1e-1
    sweep_points: int = 25

    @classmethod
    def from_mapping(
        cls, mapping: cabc.Mapping[str, typ.Any] | None
    ) -> PassageConfig:
        """Create a :class:`PassageConfig` from the ``[passage]`` table."""
        if mapping is None:
            return cls()
        validate_mapping_keys(mapping, _keys(cls), "passage")
        get = mapping.get
        passage = cls(
            epsilon=_real(get("epsilon"), "passage.epsilon", 0.01, bound="positive"),
            noise_levels=_real_tuple(
                get("noise_levels"), "passage.noise_levels", (0.01, 11.0)
            ),
            max_users=_positive_int(get("max_users"), "passage.max_users", 30_000),
            method=_choice(
                get("method"),
                "passage.method",
                tuple(method.value for method in PassageMethod),
            )
            or PassageMethod.RECURSION.value,
            sweep_users=_positive_int(
                get("sweep_users"), "passage.sweep_users", 20_000
            ),
            sweep_noise_min=_real(
                get("sweep_noise_min"),
                "passage.sweep_noise_min",
                1e-4,
                bound="positive",
            ),
            sweep_noise_max=_real(
                get("sweep_noise_max"),
                "passage.sweep_noise_max",
                1e-1,
                bound="positive",
            ),
            sweep_points=_positive_int(
                get("sweep_points"), "passage.sweep_points", 25
            ),
        )
        if any(level <= 0.0 for level in passage.noise_levels):
            message = "passage.noise_levels must all be positive."
            raise ConfigurationError(message)
        return passage

    def sweep_grid(self) -> npt.NDArray[np.float64]:
        """Return the geometric ``sigma2`` grid of the noise sweep."""
        return np.geomspace(
            self.sweep_noise_min, self.sweep_noise_max, self.sweep_points
        )


@dc.dataclass(frozen=True, slots=True)
class OutputConfig:
    """Output location (``[output]``)."""

    directory: str = "results"

    @classmethod
    def from_mapping(cls, mapping: cabc.Mapping[str, typ.Any] | None) -> OutputConfig:
        """Create an :class:`OutputConfig` from the ``[output]`` table."""
        if mapping is None:
            return cls()
        validate_mapping_keys(mapping, _keys(cls), "output")
        directory = _optional_string(mapping.get("directory"), "output.directory")
        return cls(directory=directory or "results")


# Coercion helpers bound to the configuration error type.
validate_mapping_keys = functools.partial(
    toml_coerce.reject_unknown_keys, error=ConfigurationError
)
_real = functools.partial(toml_coerce.real_number, error=ConfigurationError)
_real_tuple = functools.partial(toml_coerce.real_tuple, error=ConfigurationError)
_boolean = functools.partial(toml_coerce.boolean, error=ConfigurationError)
_choice = functools.partial(toml_coerce.choice, error=ConfigurationError)
_positive_int = functools.partial(toml_coerce.positive_int, error=ConfigurationError)
_non_negative_int = functools.partial(
    toml_coerce.non_negative_int, error=ConfigurationError
)
_optional_string = functools.partial(
    toml_coerce.optional_string, error=ConfigurationError
)
