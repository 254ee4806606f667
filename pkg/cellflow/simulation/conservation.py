"""Rate conservation check of a simulated trace.

In steady state the bits served per second per square metre equal the
offered load ``rho = lambda / mu`` everywhere in the cell, both in aggregate
and within each annulus.
"""

from __future__ import annotations

import dataclasses as dc
import logging
import math
import typing as typ

import numpy as np

if typ.TYPE_CHECKING:
    from cellflow.model import NetworkParams
    from cellflow.simulation.state import FloatArray
    from cellflow.simulation.summary import TraceSummary

LOGGER = logging.getLogger(__name__)

MIN_DEPARTURES = 100


@dc.dataclass(frozen=True, slots=True)
class ConservationReport:
    """Relative gap between served bit rate density and offered load.

    Attributes
    ----------
    offered_load : float
        ``N_f rho`` in bits per second per square metre.
    aggregate_error : float
        Relative error over the whole cell; ``nan`` when undefined.
    annulus_errors : FloatArray
        Relative error per annulus.
    departures : int
        Post-warm-up departures behind the estimate.
    low_confidence : bool
        True with fewer than ``MIN_DEPARTURES`` departures.
    defined : bool
        False when the offered load is zero.
    stationary : bool
        False when the trace diverged, so no steady state was observed.
    """

    offered_load: float
    aggregate_error: float
    annulus_errors: FloatArray
    departures: int
    low_confidence: bool
    defined: bool
    stationary: bool


def rate_conservation_check(
    trace: TraceSummary, params: NetworkParams
) -> ConservationReport:
    """Compare the served bit rate per unit area of ``trace`` with ``rho``.

    Parameters
    ----------
    trace : TraceSummary
        Replica summary past its warm-up.
    params : NetworkParams
        Network the trace was simulated on.

    Returns
    -------
    ConservationReport
        Aggregate and per-annulus relative errors with confidence flags.
    """
    offered = trace.bands * params.rho
    areas = trace.annulus_areas
    if offered <= 0.0 or trace.observed_time <= 0.0:
        LOGGER.warning(
            "rate conservation undefined: offered load %g over %g s",
            offered,
            trace.observed_time,
        )
        return ConservationReport(
            offered,
            math.nan,
            np.full(areas.size, np.nan),
            trace.departures,
            low_confidence=True,
            defined=False,
            stationary=not trace.diverged,
        )
    measured = trace.served_bits / trace.observed_time / float(areas.sum())
    per_annulus = trace.annulus_served_bits / trace.observed_time / areas
    low_confidence = trace.departures < MIN_DEPARTURES
    if low_confidence:
        LOGGER.warning(
            "rate conservation from only %d departures is low-confidence",
            trace.departures,
        )
    if trace.diverged:
        LOGGER.warning("rate conservation on a diverging trace is not meaningful")
    return ConservationReport(
        offered,
        abs(measured - offered) / offered,
        np.abs(per_annulus - offered) / offered,
        trace.departures,
        low_confidence=low_confidence,
        defined=True,
        stationary=not trace.diverged,
    )
