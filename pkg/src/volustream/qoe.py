"""Per-chunk quality-of-experience model for tiled volumetric streaming.

Four factors per chunk, all over tiles inside the view frustum:

  q1  perceived quality: visibility-weighted mean of PSNR(eta, d) times an
      acuity weight that discounts tiles below the boundary density eta*.
  q2  rebuffering: download time beyond the buffer level, seconds.
  q3  temporal variation: |q1 - previous q1|.
  q4  spatial variation: population std of the per-tile weighted PSNR.

The scalar objective is q1 - p*q2 - q*q3 - r*q4.

The PSNR model can saturate at the boundary density: densities above eta*
render identically at that distance, so extra points buy nothing. That is
the property the acuity-pruned solver exploits; a no-saturation mode exists
for schemes that ignore acuity.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .core import QualityLadder, TileSelection, tile_size

__all__ = [
    "PsnrModel",
    "QoEWeights",
    "QoEBreakdown",
    "indicator",
    "tile_quality_values",
    "perceived_quality",
    "transmission_time",
    "rebuffer_time",
    "temporal_variation",
    "spatial_variation",
    "qoe_total",
]


@dataclass(frozen=True)
class QoEWeights:
    """Relative prices of rebuffering (p), temporal (q) and spatial (r)
    variation against perceived quality; all nonnegative."""

    p: float = 50.0
    q: float = 1.0
    r: float = 1.0

    def __post_init__(self):
        if self.p < 0.0 or self.q < 0.0 or self.r < 0.0:
            raise ValueError("QoE weights must be nonnegative")


@dataclass(frozen=True)
class QoEBreakdown:
    q1: float
    q2: float
    q3: float
    q4: float
    total: float


class PsnrModel:
    """PSNR as a function of retained density eta and viewing distance d.

    Parametric form: psnr(eta, d) = c0 + c1*ln(eta) - c2*ln(d / d_ref),
    nondecreasing in eta and nonincreasing in d. A tabulated grid with
    bilinear interpolation in (ln eta, ln d) can replace it.

    With ``saturate`` set (the default), evaluation clips eta at the
    chunk's boundary density before the lookup: quality stops improving
    once the viewer cannot resolve additional points.
    """

    def __init__(self, c0: float = 55.0, c1: float = 4.0, c2: float = 3.0,
                 d_ref: float = 1.0, saturate: bool = True):
        if d_ref <= 0.0:
            raise ValueError("d_ref must be positive")
        if c1 < 0.0 or c2 < 0.0:
            raise ValueError("c1 and c2 must be nonnegative")
        self.c0, self.c1, self.c2 = c0, c1, c2
        self.d_ref = d_ref
        self.saturate = saturate
        self._table = None

    @classmethod
    def from_table(cls, etas, distances, grid_db, saturate: bool = True) -> "PsnrModel":
        """Tabulated model over an (eta, distance) grid, values in dB."""
        model = cls(saturate=saturate)
        etas = np.asarray(etas, dtype=float)
        distances = np.asarray(distances, dtype=float)
        grid = np.asarray(grid_db, dtype=float)
        if grid.shape != (len(etas), len(distances)):
            raise ValueError("grid shape must be (len(etas), len(distances))")
        if np.any(np.diff(etas) <= 0.0) or np.any(np.diff(distances) <= 0.0):
            raise ValueError("table axes must strictly increase")
        if np.any(etas <= 0.0) or np.any(distances <= 0.0):
            raise ValueError("table axes must be positive")
        if np.any(np.diff(grid, axis=0) < 0.0):
            raise ValueError("psnr must be nondecreasing in eta")
        if np.any(np.diff(grid, axis=1) > 0.0):
            raise ValueError("psnr must be nonincreasing in distance")
        model._table = (np.log(etas), np.log(distances), grid)
        return model

    @classmethod
    def load_csv(cls, path, saturate: bool = True) -> "PsnrModel":
        """Table from CSV rows 'eta,d,psnr_db' covering a full grid."""
        cells: dict[tuple[float, float], float] = {}
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            next(reader, None)
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    cells[(float(row[0]), float(row[1]))] = float(row[2])
                except (IndexError, ValueError) as exc:
                    raise ValueError(f"{path}:{lineno}: bad psnr row {row}") from exc
        etas = sorted({k[0] for k in cells})
        ds = sorted({k[1] for k in cells})
        try:
            grid = np.array([[cells[(e, d)] for d in ds] for e in etas])
        except KeyError as exc:
            raise ValueError(f"{path}: grid is not complete, missing {exc}") from exc
        return cls.from_table(etas, ds, grid, saturate=saturate)

    def raw(self, eta, d):
        """PSNR without acuity saturation; accepts scalars or arrays."""
        eta = np.asarray(eta, dtype=float)
        d = np.asarray(d, dtype=float)
        if np.any(eta <= 0.0) or np.any(d <= 0.0):
            raise ValueError("eta and d must be positive")
        if self._table is None:
            out = self.c0 + self.c1 * np.log(eta) - self.c2 * np.log(d / self.d_ref)
        else:
            log_etas, log_ds, grid = self._table
            le = np.clip(np.log(eta), log_etas[0], log_etas[-1])
            ld = np.clip(np.log(d), log_ds[0], log_ds[-1])
            ie = np.clip(np.searchsorted(log_etas, le) - 1, 0, len(log_etas) - 2)
            idx = np.clip(np.searchsorted(log_ds, ld) - 1, 0, len(log_ds) - 2)
            te = (le - log_etas[ie]) / (log_etas[ie + 1] - log_etas[ie])
            td = (ld - log_ds[idx]) / (log_ds[idx + 1] - log_ds[idx])
            out = ((1 - te) * (1 - td) * grid[ie, idx]
                   + te * (1 - td) * grid[ie + 1, idx]
                   + (1 - te) * td * grid[ie, idx + 1]
                   + te * td * grid[ie + 1, idx + 1])
        return out if out.shape else float(out)

    def value(self, eta, d, eta_star: float | None = None):
        """PSNR with saturation at the boundary density when enabled."""
        if self.saturate and eta_star is not None:
            eta = np.minimum(np.asarray(eta, dtype=float), eta_star)
        return self.raw(eta, d)


def indicator(eta_level: float, eta_star: float):
    """Acuity weight: 1 once the density reaches the boundary, else the
    shortfall ratio eta/eta*. Continuous at eta = eta*."""
    eta_level = np.asarray(eta_level, dtype=float)
    if np.any(eta_level <= 0.0) or not (0.0 < eta_star <= 1.0):
        raise ValueError("densities must lie in (0, 1]")
    out = np.where(eta_level >= eta_star, 1.0, eta_level / eta_star)
    return out if out.shape else float(out)


def tile_quality_values(sel: TileSelection, ladder: QualityLadder,
                        eta_star: float, psnr: PsnrModel) -> np.ndarray:
    """Weighted PSNR of each visible tile: value = psnr * indicator."""
    etas = ladder.eta_values()[sel.levels[sel.visible]]
    d = sel.distances[sel.visible]
    if len(etas) == 0:
        return np.empty(0)
    return np.asarray(psnr.value(etas, d, eta_star)) * np.asarray(indicator(etas, eta_star))


def perceived_quality(sel: TileSelection, ladder: QualityLadder,
                      eta_star: float, psnr: PsnrModel) -> float:
    """Mean weighted PSNR over visible tiles; 0 for an all-invisible chunk
    (callers flag that case separately)."""
    vals = tile_quality_values(sel, ladder, eta_star, psnr)
    if len(vals) == 0:
        return 0.0
    return float(vals.mean())


def transmission_time(sel: TileSelection, ladder: QualityLadder, bw_mbps: float) -> float:
    """Seconds to push the visible tiles at the given average bandwidth."""
    if bw_mbps <= 0.0:
        raise ValueError("bandwidth must be positive")
    total = sum(tile_size(ladder.levels[l], ladder) for l in sel.levels[sel.visible])
    return total * 8.0 / (bw_mbps * 1e6)


def rebuffer_time(tau: float, buffer_s: float) -> float:
    """Stall time: download beyond what the buffer covers, floored at 0."""
    if buffer_s < 0.0:
        raise ValueError("buffer occupancy cannot be negative")
    return max(tau - buffer_s, 0.0)


def temporal_variation(q1_now: float, q1_prev: float | None) -> float:
    """|q1 - previous q1|; 0 for the first chunk (no predecessor)."""
    if q1_prev is None:
        return 0.0
    return abs(q1_now - q1_prev)


def spatial_variation(sel: TileSelection, ladder: QualityLadder,
                      eta_star: float, psnr: PsnrModel) -> float:
    """Population standard deviation of the visible tiles' weighted PSNR."""
    vals = tile_quality_values(sel, ladder, eta_star, psnr)
    if len(vals) == 0:
        return 0.0
    return float(vals.std())


def qoe_total(q1: float, q2: float, q3: float, q4: float, weights: QoEWeights) -> float:
    return q1 - weights.p * q2 - weights.q * q3 - weights.r * q4
