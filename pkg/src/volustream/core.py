"""Quality ladder, tile sizing and per-chunk selection containers.

A volumetric video is cut into GoFs (groups of frames) along the timeline
and each GoF into an L x W x H grid of equal-sized tiles. Every tile can be
fetched at any rung of a quality ladder; a rung is described by its
downsampling factor m, the fraction of original points it retains (eta, the
point cloud density or PLD) and the data rate of the full content encoded
at that rung.

Tile sizes are linear in the retained point fraction, so one byte figure
per (level, ladder) pair covers every tile. Sizes are carried as exact
rationals and rounded to integer bytes exactly once, which keeps byte
budgets and conservation checks deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "QualityLevel",
    "QualityLadder",
    "TileSelection",
    "default_ladder",
    "tile_size",
    "tile_size_exact",
    "full_chunk_size",
]


@dataclass(frozen=True)
class QualityLevel:
    """One rung of the quality ladder.

    Attributes:
        index: position in the ladder, 0 = lowest quality.
        m: downsampling factor used at encode time, in (0, 1].
        eta: fraction of original points retained (PLD), in (0, 1].
        bitrate_mbps: data rate of the full content at this rung, Mbps.
    """

    index: int
    m: float
    eta: float
    bitrate_mbps: float

    def __post_init__(self):
        if not (0.0 < self.m <= 1.0):
            raise ValueError(f"sampling factor m must be in (0, 1], got {self.m}")
        if not (0.0 < self.eta <= 1.0):
            raise ValueError(f"eta must be in (0, 1], got {self.eta}")
        if self.bitrate_mbps <= 0.0:
            raise ValueError(f"bitrate must be positive, got {self.bitrate_mbps}")


@dataclass(frozen=True)
class QualityLadder:
    """Ordered quality levels plus the temporal/spatial chunking geometry."""

    levels: tuple[QualityLevel, ...]
    gof_duration: float
    tile_grid: tuple[int, int, int] = (4, 4, 4)

    def __post_init__(self):
        if not self.levels:
            raise ValueError("ladder needs at least one level")
        if self.gof_duration <= 0.0:
            raise ValueError("gof_duration must be positive")
        if any(n <= 0 for n in self.tile_grid):
            raise ValueError(f"tile grid counts must be positive, got {self.tile_grid}")
        for i, lvl in enumerate(self.levels):
            if lvl.index != i:
                raise ValueError(f"level {i} carries index {lvl.index}")
        for lo, hi in zip(self.levels, self.levels[1:]):
            if not (hi.eta > lo.eta and hi.bitrate_mbps > lo.bitrate_mbps):
                raise ValueError("eta and bitrate must strictly increase with level index")
            if hi.m < lo.m:
                raise ValueError("eta(m) must be nondecreasing in m")
        if self.levels[-1].eta != 1.0:
            raise ValueError("top level must retain the full point cloud (eta = 1)")

    @property
    def tile_count(self) -> int:
        l, w, h = self.tile_grid
        return l * w * h

    @property
    def top(self) -> QualityLevel:
        return self.levels[-1]

    @property
    def num_levels(self) -> int:
        return len(self.levels)

    def eta_values(self) -> np.ndarray:
        return np.array([lvl.eta for lvl in self.levels], dtype=float)

    def tile_bytes(self) -> np.ndarray:
        """Integer byte size of one tile of one GoF, per level."""
        return np.array([tile_size(lvl, self) for lvl in self.levels], dtype=np.int64)

    def cap_level_for(self, eta_star: float) -> int:
        """Lowest level whose retained fraction reaches eta_star.

        Falls back to the top level when even full density sits below the
        boundary (cannot happen for eta_star <= 1 but guards float noise).
        """
        for lvl in self.levels:
            if lvl.eta >= eta_star:
                return lvl.index
        return self.levels[-1].index


def default_ladder(gof_duration: float = 1.0 / 3.0,
                   tile_grid: tuple[int, int, int] = (4, 4, 4)) -> QualityLadder:
    """Six-rung ladder used throughout the tests and as the config default."""
    etas = [0.1, 0.2, 0.4, 0.6, 0.8, 1.0]
    rates = [87.5, 161.6, 296.4, 420.7, 565.2, 651.0]
    levels = tuple(
        QualityLevel(index=i, m=eta, eta=eta, bitrate_mbps=rate)
        for i, (eta, rate) in enumerate(zip(etas, rates))
    )
    return QualityLadder(levels=levels, gof_duration=gof_duration, tile_grid=tile_grid)


def tile_size_exact(level: QualityLevel, ladder: QualityLadder) -> Fraction:
    """Exact rational byte size of one tile of one GoF at the given level.

    The full content at the top rung streams at ``top.bitrate_mbps``; one
    GoF of it therefore weighs rate * gof_duration bytes, split evenly over
    the tile grid. Lower rungs scale linearly with the retained fraction,
    so sizes pass exactly through the origin.
    """
    top = ladder.top
    full_gof_bytes = (
        Fraction(top.bitrate_mbps) * Fraction(1_000_000, 8) * Fraction(ladder.gof_duration)
    )
    return full_gof_bytes * Fraction(level.eta) / ladder.tile_count


def tile_size(level: QualityLevel, ladder: QualityLadder) -> int:
    """Byte size of one tile of one GoF, rounded once from the exact rational."""
    return round(tile_size_exact(level, ladder))


def full_chunk_size(ladder: QualityLadder) -> int:
    """Byte size of a whole GoF at top quality; the hard transmission cap."""
    return ladder.tile_count * tile_size(ladder.top, ladder)


@dataclass
class TileSelection:
    """Per-tile outcome of one chunk decision.

    ``levels`` holds the assigned ladder index for every tile (invisible
    tiles keep the lowest level for reporting). ``transmit`` marks tiles
    that are actually sent; schemes that stream the full object may mark
    out-of-frustum tiles as well.
    """

    levels: np.ndarray
    visible: np.ndarray
    distances: np.ndarray
    transmit: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self):
        self.levels = np.asarray(self.levels, dtype=np.int64)
        self.visible = np.asarray(self.visible, dtype=bool)
        self.distances = np.asarray(self.distances, dtype=float)
        if self.transmit is None:
            self.transmit = self.visible.copy()
        else:
            self.transmit = np.asarray(self.transmit, dtype=bool)
        n = len(self.levels)
        if not (len(self.visible) == len(self.distances) == len(self.transmit) == n):
            raise ValueError("per-tile arrays must share one length")
        if np.any(self.distances[self.visible] <= 0.0):
            raise ValueError("visible tiles need positive distances")

    @property
    def tile_count(self) -> int:
        return len(self.levels)

    def transmitted_bytes(self, ladder: QualityLadder) -> int:
        sizes = ladder.tile_bytes()
        return int(sizes[self.levels[self.transmit]].sum())
