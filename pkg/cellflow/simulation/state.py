"""Mutable state of one simulated cell.

Active users live in parallel arrays that grow by doubling and shrink by
swapping the removed user with the last one, so insertions and removals are
O(1). The per-band interference sums ``S_b`` (the sum of effective gains of
the users on band ``b``) are maintained incrementally and recomputed from
scratch every ``recompute_every`` updates to bound the floating-point drift.
"""

from __future__ import annotations

import dataclasses as dc
import logging
import math
import typing as typ

import numpy as np

from cellflow.exceptions import CellflowError
from cellflow.model import NetworkParams, effective_gain, service_rate

if typ.TYPE_CHECKING:
    import numpy.typing as npt

LOGGER = logging.getLogger(__name__)

type FloatArray = npt.NDArray[np.float64]
type IntArray = npt.NDArray[np.int64]

_INITIAL_CAPACITY = 64
_SUM_RTOL = 1e-9


class SimulationError(CellflowError):
    """Raised when a simulation is misconfigured or its state is corrupted."""


@dc.dataclass(slots=True)
class SimState:
    """Active users, simulation clock, and per-band interference sums.

    Attributes
    ----------
    params : NetworkParams
        Network being simulated.
    bands : int
        Number of frequency bands ``N_f``.
    annuli : int
        Number of equal-width annuli used to bin user positions.
    clock : float
        Simulation time in seconds.
    count : int
        Number of active users; only the first ``count`` array rows are live.
    """

    params: NetworkParams
    bands: int = 1
    annuli: int = 20
    recompute_every: int = 10_000
    clock: float = 0.0
    count: int = 0
    radius: FloatArray = dc.field(default_factory=lambda: np.empty(_INITIAL_CAPACITY))
    angle: FloatArray = dc.field(default_factory=lambda: np.empty(_INITIAL_CAPACITY))
    gain: FloatArray = dc.field(default_factory=lambda: np.empty(_INITIAL_CAPACITY))
    residual: FloatArray = dc.field(default_factory=lambda: np.empty(_INITIAL_CAPACITY))
    band: IntArray = dc.field(
        default_factory=lambda: np.empty(_INITIAL_CAPACITY, dtype=np.int64)
    )
    annulus: IntArray = dc.field(
        default_factory=lambda: np.empty(_INITIAL_CAPACITY, dtype=np.int64)
    )
    sums: FloatArray = dc.field(init=False)
    _updates: int = dc.field(default=0, init=False)

    def __post_init__(self) -> None:
        """Allocate one interference sum per band."""
        if self.bands < 1 or self.annuli < 1:
            message = "a simulation needs at least one band and one annulus."
            raise SimulationError(message)
        self.sums = np.zeros(self.bands)

    @property
    def capacity(self) -> int:
        """Number of allocated user slots."""
        return self.radius.size

    def _grow(self) -> None:
        """Double every per-user array."""
        for name in ("radius", "angle", "gain", "residual", "band", "annulus"):
            old = getattr(self, name)
            grown = np.empty(2 * old.size, dtype=old.dtype)
            grown[: self.count] = old[: self.count]
            setattr(self, name, grown)

    def annulus_of(self, radius: float | FloatArray) -> int | IntArray:
        """Return the equal-width annulus index of ``radius``."""
        scaled = np.asarray(radius) / self.params.radius * self.annuli
        index = np.minimum(scaled.astype(np.int64), self.annuli - 1)
        return int(index) if index.ndim == 0 else index

    def add_user(
        self, radius: float, angle: float, residual: float, band: int = 0
    ) -> None:
        """Insert a user at polar position ``(radius, angle)`` on ``band``."""
        if self.count == self.capacity:
            self._grow()
        slot = self.count
        gain = float(effective_gain(radius, self.params))
        self.radius[slot] = radius
        self.angle[slot] = angle
        self.gain[slot] = gain
        self.residual[slot] = residual
        self.band[slot] = band
        self.annulus[slot] = self.annulus_of(radius)
        self.count += 1
        self.sums[band] += gain
        self._after_update()

    def remove_user(self, index: int) -> None:
        """Remove user ``index`` by moving the last user into its slot."""
        if not 0 <= index < self.count:
            message = f"no active user at index {index} (count {self.count})."
            raise SimulationError(message)
        self.sums[self.band[index]] -= self.gain[index]
        last = self.count - 1
        for name in ("radius", "angle", "gain", "residual", "band", "annulus"):
            array = getattr(self, name)
            array[index] = array[last]
        self.count = last
        self._after_update()

    def remove_many(self, mask: npt.NDArray[np.bool_]) -> int:
        """Remove every live user flagged in ``mask``; return how many left."""
        keep = ~mask[: self.count]
        removed = self.count - int(np.count_nonzero(keep))
        if removed:
            for name in ("radius", "angle", "gain", "residual", "band", "annulus"):
                array = getattr(self, name)
                kept = array[: self.count][keep]
                array[: kept.size] = kept
            self.count -= removed
            self.recompute_sums()
        return removed

    def _after_update(self) -> None:
        """Recompute the sums periodically and clamp cancellation noise."""
        self._updates += 1
        if self.count == 0:
            self.sums[:] = 0.0
        elif self._updates % self.recompute_every == 0:
            self.recompute_sums()

    def recompute_sums(self) -> None:
        """Rebuild the per-band interference sums from the cached gains."""
        self.sums = np.bincount(
            self.band[: self.count],
            weights=self.gain[: self.count],
            minlength=self.bands,
        ).astype(np.float64)

    def sums_consistent(self) -> bool:
        """Return whether the maintained sums match a fresh recomputation."""
        live = slice(0, self.count)
        fresh = np.bincount(
            self.band[live], weights=self.gain[live], minlength=self.bands
        )
        return bool(np.allclose(self.sums, fresh, rtol=_SUM_RTOL, atol=1e-300))

    def redraw_bands(self, rng: np.random.Generator) -> None:
        """Assign every active user a fresh uniformly random band."""
        self.band[: self.count] = rng.integers(0, self.bands, size=self.count)
        self.recompute_sums()

    def rates(self) -> FloatArray:
        """Return the service rate in bits per second of every active user."""
        gains = self.gain[: self.count]
        others = self.sums[self.band[: self.count]] - gains
        # Incremental sums can leave a tiny negative remainder for a lone user.
        others = np.maximum(others, 0.0)
        return np.asarray(service_rate(gains, others, self.params), dtype=np.float64)

    def annulus_counts(self) -> IntArray:
        """Return the number of active users in each annulus."""
        return np.bincount(self.annulus[: self.count], minlength=self.annuli)

    def annulus_areas(self) -> FloatArray:
        """Return the area of each annulus in square metres."""
        edges = np.linspace(0.0, self.params.radius, self.annuli + 1)
        return math.pi * np.diff(edges**2)


def sample_disk(
    rng: np.random.Generator, radius: float, size: int
) -> tuple[FloatArray, FloatArray]:
    """Return ``size`` uniform points on the disk as ``(radii, angles)``.

    Radii are ``R sqrt(U)`` so that positions are uniform in area.
    """
    radii = radius * np.sqrt(rng.random(size))
    angles = rng.uniform(0.0, 2.0 * math.pi, size)
    return radii, angles
