"""Experiment configuration for :mod:`cellflow`.

One TOML file describes an experiment. Every section is validated into a
frozen dataclass whose field names are the TOML keys, so the effective
configuration can be dumped back to TOML and parsed into an equal object.
Physical quantities carry their unit in the key name.
"""

from __future__ import annotations

import collections.abc as cabc
import contextlib
import contextvars
import dataclasses as dc
import functools
import hashlib
import typing as typ
from pathlib import Path

import tomlkit
from cyclopts.config import Toml
from tomlkit.exceptions import TOMLKitError

from cellflow import toml_coerce
from cellflow.config_sections import (
    MAX_SEED,
    SWEEP_SPACINGS,
    ConfigurationError,
    ConfigurationNotLoadedError,
    FirstOrderConfig,
    MissingConfigurationError,
    NetworkConfig,
    OutputConfig,
    PassageConfig,
    QuadratureConfig,
    RunConfig,
    SecondOrderConfig,
    SimulationConfig,
    SweepConfig,
    validate_mapping_keys,
)
from cellflow.exceptions import CellflowError
from cellflow.meanfield.second_order import validate_weights

CONFIG_FILENAME = "cellflow.toml"

CONFIG_ROOT_TOML_KEYS: typ.Final[frozenset[str]] = frozenset({
    "network",
    "run",
    "quadrature",
    "first_order",
    "sweep",
    "second_order",
    "simulation",
    "passage",
    "output",
})


@dc.dataclass(frozen=True, slots=True)
class CellflowConfig:
    """Strongly-typed representation of ``cellflow.toml``."""

    network: NetworkConfig = dc.field(default_factory=NetworkConfig)
    run: RunConfig = dc.field(default_factory=RunConfig)
    quadrature: QuadratureConfig = dc.field(default_factory=QuadratureConfig)
    first_order: FirstOrderConfig = dc.field(default_factory=FirstOrderConfig)
    sweep: SweepConfig = dc.field(default_factory=SweepConfig)
    second_order: SecondOrderConfig = dc.field(default_factory=SecondOrderConfig)
    simulation: SimulationConfig = dc.field(default_factory=SimulationConfig)
    passage: PassageConfig = dc.field(default_factory=PassageConfig)
    output: OutputConfig = dc.field(default_factory=OutputConfig)

    @classmethod
    def from_mapping(cls, mapping: cabc.Mapping[str, typ.Any]) -> CellflowConfig:
        """Create a :class:`CellflowConfig` from a parsed configuration mapping.

        Sections are validated key by key, then the physical parameters and
        solver options they describe are built once so domain violations are
        reported as configuration errors.

        Parameters
        ----------
        mapping : cabc.Mapping[str, typ.Any]
            The parsed root configuration table.

        Returns
        -------
        CellflowConfig
            Fully populated configuration with defaults for absent sections.

        Raises
        ------
        ConfigurationError
            If a section or key is unknown, a value is invalid, or the
            resulting parameters violate the model domain.

        Examples
        --------
        >>> config = CellflowConfig.from_mapping({"run": {"seed": 3}})
        >>> config.run.seed
        3
        """
        validate_mapping_keys(
            mapping, set(CONFIG_ROOT_TOML_KEYS), "configuration section"
        )
        config = cls(
            network=NetworkConfig.from_mapping(_section(mapping, "network")),
            run=RunConfig.from_mapping(_section(mapping, "run")),
            quadrature=QuadratureConfig.from_mapping(_section(mapping, "quadrature")),
            first_order=FirstOrderConfig.from_mapping(
                _section(mapping, "first_order")
            ),
            sweep=SweepConfig.from_mapping(_section(mapping, "sweep")),
            second_order=SecondOrderConfig.from_mapping(
                _section(mapping, "second_order")
            ),
            simulation=SimulationConfig.from_mapping(_section(mapping, "simulation")),
            passage=PassageConfig.from_mapping(_section(mapping, "passage")),
            output=OutputConfig.from_mapping(_section(mapping, "output")),
        )
        config.validate_domain()
        return config

    def validate_domain(self) -> None:
        """Build every domain object once and re-raise failures as config errors.

        Raises
        ------
        ConfigurationError
            If the parameters or options violate a model or solver contract.
        """
        try:
            params = self.network.to_params()
            self.first_order.to_options(self.quadrature.to_spec())
            self.second_order.to_grid(params.radius)
            self.second_order.to_options()
            validate_weights(self.second_order.weights)
            self.simulation.to_options(self.run)
        except ConfigurationError:
            raise
        except CellflowError as exc:
            raise ConfigurationError(str(exc)) from exc

    def to_mapping(self) -> dict[str, dict[str, typ.Any]]:
        """Return the configuration as plain TOML-ready tables.

        Examples
        --------
        >>> CellflowConfig().to_mapping()["run"]
        {'seed': 1, 'threads': 1}
        """
        tables: dict[str, dict[str, typ.Any]] = {}
        for field in dc.fields(self):
            section = getattr(self, field.name)
            table: dict[str, typ.Any] = {}
            for key, value in dc.asdict(section).items():
                if value == "" and key == "simulation_summary":
                    continue
                table[key] = list(value) if isinstance(value, tuple) else value
            tables[field.name] = table
        return tables


_active_config: contextvars.ContextVar[CellflowConfig] = contextvars.ContextVar(
    "cellflow_active_config"
)


def _section(
    mapping: cabc.Mapping[str, typ.Any], name: str
) -> cabc.Mapping[str, typ.Any] | None:
    """Return the ``name`` table of ``mapping`` or ``None`` when absent."""
    return _optional_table(mapping.get(name), name)


def dump_configuration(configuration: CellflowConfig) -> str:
    """Render ``configuration`` as TOML text.

    Parsing the text back with :func:`parse_configuration` yields an equal
    configuration.

    Examples
    --------
    >>> text = dump_configuration(CellflowConfig())
    >>> parse_configuration(text) == CellflowConfig()
    True
    """
    document = tomlkit.document()
    for name, table in configuration.to_mapping().items():
        section = tomlkit.table()
        for key, value in table.items():
            section.add(key, value)
        document.add(name, section)
    return tomlkit.dumps(document)


def parse_configuration(
    text: str, overrides: cabc.Sequence[str] = ()
) -> CellflowConfig:
    """Parse TOML ``text`` into a configuration, applying ``overrides``.

    Raises
    ------
    ConfigurationError
        If the text is not valid TOML or fails validation.
    """  # noqa: DOC502 -- validation errors propagate from from_mapping
    try:
        raw = tomlkit.parse(text).unwrap()
    except TOMLKitError as exc:
        message = f"invalid TOML: {exc}"
        raise ConfigurationError(message) from exc
    return CellflowConfig.from_mapping(apply_overrides(raw, overrides))


def configuration_digest(configuration: CellflowConfig) -> str:
    """Return the SHA-256 of the dumped configuration."""
    text = dump_configuration(configuration)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _override_value(text: str) -> object:
    """Parse ``text`` as a TOML literal, falling back to the raw string."""
    try:
        return tomlkit.parse(f"value = {text}").unwrap()["value"]
    except TOMLKitError:
        return text


def apply_overrides(
    mapping: cabc.Mapping[str, typ.Any], overrides: cabc.Sequence[str]
) -> dict[str, typ.Any]:
    """Return a copy of ``mapping`` with ``section.key=value`` overrides applied.

    Values are parsed as TOML literals, so ``--set run.seed=7`` sets an
    integer and ``--set simulation.mode=discrete`` a string.

    Raises
    ------
    ConfigurationError
        If an override is not of the form ``section.key=value`` or targets a
        section that is not a table.

    Examples
    --------
    >>> apply_overrides({}, ["run.seed=7"])
    {'run': {'seed': 7}}
    """
    merged: dict[str, typ.Any] = {
        name: dict(table) if isinstance(table, cabc.Mapping) else table
        for name, table in mapping.items()
    }
    for override in overrides:
        target, separator, text = override.partition("=")
        section, dot, key = target.strip().partition(".")
        if not (separator and dot and section and key):
            message = (
                f"override {override!r} must have the form section.key=value."
            )
            raise ConfigurationError(message)
        table = merged.setdefault(section, {})
        if not isinstance(table, dict):
            message = f"override {override!r} targets {section!r}, not a table."
            raise ConfigurationError(message)
        table[key] = _override_value(text.strip())
    return merged


def build_loader(config_path: Path | None = None) -> Toml:
    """Return a Cyclopts loader for the experiment file.

    Parameters
    ----------
    config_path : Path | None
        Explicit configuration file; ``cellflow.toml`` in the working
        directory when ``None``.

    Returns
    -------
    Toml
        Loader targeting the resolved file.

    Examples
    --------
    >>> build_loader().path.name
    'cellflow.toml'
    """
    path = config_path if config_path is not None else Path.cwd() / CONFIG_FILENAME
    return Toml(
        path=path,
        must_exist=False,
        search_parents=False,
        allow_unknown=True,
        use_commands_as_keys=True,
    )


def load_from_loader(
    loader: Toml, overrides: cabc.Sequence[str] = ()
) -> CellflowConfig:
    """Load and validate configuration using ``loader``.

    Parameters
    ----------
    loader : Toml
        The Cyclopts loader providing the parsed TOML table.
    overrides : cabc.Sequence[str], optional
        ``section.key=value`` overrides applied after loading.

    Returns
    -------
    CellflowConfig
        Validated configuration.

    Raises
    ------
    ConfigurationError
        If reading ``loader.config`` raises :class:`ValueError`, the parsed
        configuration root is not a TOML table, or validation fails.
    """
    try:
        raw = loader.config
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc
    if not isinstance(raw, cabc.Mapping):
        message = "Configuration root must be a TOML table."
        raise ConfigurationError(message)
    return CellflowConfig.from_mapping(apply_overrides(raw, overrides))


def load_configuration(
    config_path: Path | None = None, overrides: cabc.Sequence[str] = ()
) -> CellflowConfig:
    """Load configuration from ``config_path`` (or the default file).

    A missing default file yields the default configuration; a missing
    explicit file is an error.

    Raises
    ------
    MissingConfigurationError
        If ``config_path`` is given but does not exist.
    """  # noqa: DOC502 -- validation errors propagate from load_from_loader
    if config_path is not None and not config_path.is_file():
        message = f"configuration file {config_path} does not exist."
        raise MissingConfigurationError(message)
    return load_from_loader(build_loader(config_path), overrides)


@contextlib.contextmanager
def use_configuration(configuration: CellflowConfig) -> cabc.Iterator[None]:
    """Set ``configuration`` as the active configuration for the current context.

    Examples
    --------
    >>> config = CellflowConfig()
    >>> with use_configuration(config):
    ...     current_configuration() is config
    True
    """
    token = _active_config.set(configuration)
    try:
        yield
    finally:
        _active_config.reset(token)


def current_configuration() -> CellflowConfig:
    """Return the active configuration or raise if none has been set.

    Raises
    ------
    ConfigurationNotLoadedError
        If no configuration is active in the current context.
    """
    try:
        return _active_config.get()
    except LookupError as exc:
        message = "Configuration has not been loaded yet."
        raise ConfigurationNotLoadedError(message) from exc


_optional_table = functools.partial(
    toml_coerce.optional_table, error=ConfigurationError
)

__all__ = [
    "CONFIG_FILENAME",
    "CONFIG_ROOT_TOML_KEYS",
    "MAX_SEED",
    "SWEEP_SPACINGS",
    "CellflowConfig",
    "ConfigurationError",
    "ConfigurationNotLoadedError",
    "FirstOrderConfig",
    "MissingConfigurationError",
    "NetworkConfig",
    "OutputConfig",
    "PassageConfig",
    "QuadratureConfig",
    "RunConfig",
    "SecondOrderConfig",
    "SimulationConfig",
    "SweepConfig",
    "apply_overrides",
    "build_loader",
    "configuration_digest",
    "current_configuration",
    "dump_configuration",
    "load_configuration",
    "load_from_loader",
    "parse_configuration",
    "use_configuration",
]
