"""``cellflow critical``: the critical arrival rate and a regime map."""

from __future__ import annotations

import logging
import typing as typ

from cellflow.commands._shared import command_run, format_rows
from cellflow.meanfield import MeanFieldError
from cellflow.model import classify_regime, critical_rate
from cellflow.outputs import records, write_json

if typ.TYPE_CHECKING:  # pragma: no cover - typing helper only
    from pathlib import Path

    from cellflow.config import CellflowConfig
    from cellflow.model import NetworkParams

LOGGER = logging.getLogger(__name__)

#: Multiples of the critical rate sampled by the regime map.
REGIME_MAP_FACTORS: typ.Final[tuple[float, ...]] = (0.5, 0.9, 1.1, 1.5, 2.0)
UNDETERMINED = "undetermined"


def _regime_at(params: NetworkParams, arrival_rate: float) -> str:
    """Classify ``params`` at ``arrival_rate``; log and mark failures."""
    try:
        return str(classify_regime(params.with_arrival_rate(arrival_rate)).kind)
    except MeanFieldError as exc:
        LOGGER.warning("regime at lambda=%g undetermined: %s", arrival_rate, exc)
        return UNDETERMINED


def run(configuration: CellflowConfig, output_dir: Path) -> str:
    """Report ``lambda_c`` and the regime at the configured and nearby rates.

    Writes ``critical.json`` with the network echo, ``lambda_c``, the upper
    edge of the metastable window, and the regime map.

    Parameters
    ----------
    configuration : CellflowConfig
        Active configuration; only ``[network]`` is used.
    output_dir : Path
        Directory receiving ``critical.json`` and the manifest.

    Returns
    -------
    str
        Human-readable table of the regime map.

    Raises
    ------
    MeanFieldError
        If the regime at the configured rate cannot be determined.
    """  # noqa: DOC502 -- propagated from classify_regime
    params = configuration.network.to_params()
    with command_run("critical", configuration, output_dir) as recorder:
        regime = classify_regime(params)
        threshold = critical_rate(params)
        multiples = (factor * threshold for factor in REGIME_MAP_FACTORS)
        rates = sorted({params.arrival_rate, *multiples})
        regime_map = tuple(
            records.RegimePoint(
                arrival_rate_per_m2_s=rate,
                regime=str(regime.kind)
                if rate == params.arrival_rate
                else _regime_at(params, rate),
            )
            for rate in rates
        )
        report = records.CriticalReport(
            network=records.NetworkRecord.from_params(params),
            critical_rate_per_m2_s=threshold,
            metastable_upper_edge_per_m2_s=regime.upper_edge,
            regime=str(regime.kind),
            regime_map=regime_map,
        )
        recorder.register(write_json(output_dir / "critical.json", report))
    LOGGER.info(
        "lambda_c=%.6g; lambda=%g is %s", threshold, params.arrival_rate, regime.kind
    )
    edge = "none" if regime.upper_edge is None else f"{regime.upper_edge:.6g}"
    table = format_rows(
        ("lambda_per_m2_s", "lambda/lambda_c", "regime"),
        (
            (p.arrival_rate_per_m2_s, p.arrival_rate_per_m2_s / threshold, p.regime)
            for p in regime_map
        ),
    )
    return (
        f"Critical arrival rate: {threshold:.6g} users/m^2/s\n"
        f"Metastable window upper edge: {edge}\n"
        f"Regime at lambda={params.arrival_rate:g}: {regime.kind}\n\n{table}"
    )
