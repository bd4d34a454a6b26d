"""Octree voxel downsampling and the empirical density map.

Point clouds are plain (N, 3) float arrays in meters. Voxelization
quantizes points onto a grid of edge v anchored at a fixed origin (the
cloud's bounding-box minimum unless given), with boundary ties resolved by
floor. The occupied cells are found through an octree over the quantized
integer coordinates, one representative centroid per occupied cell.

Downsampling a cloud at growing voxel sizes and dividing the surviving
cell counts by the count at the source resolution v0 yields the empirical
density map eta(v) that the acuity chain inverts.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DensityMap",
    "voxel_downsample",
    "occupied_voxel_count",
    "density_for_voxel",
    "build_density_map",
    "read_xyz",
    "crop",
]


def _as_cloud(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) == 0:
        raise ValueError("point cloud must be a nonempty (N, 3) array")
    return pts


def _voxel_indices(pts: np.ndarray, v: float, origin: np.ndarray) -> np.ndarray:
    return np.floor((pts - origin) / v).astype(np.int64)


def _octree_leaves(idx: np.ndarray, rows: np.ndarray, depth: int,
                   out: list[tuple[tuple[int, int, int], np.ndarray]]) -> None:
    """Recursively split quantized coordinates into the 8 children per level.

    idx holds voxel coordinates relative to the current node, rows the
    original point row numbers. depth counts remaining bit levels; at 0 the
    node is a single voxel.
    """
    if depth == 0:
        out.append((tuple(int(c) for c in idx[0]), rows))
        return
    bit = depth - 1
    child = ((idx[:, 0] >> bit) & 1) << 2 | ((idx[:, 1] >> bit) & 1) << 1 | ((idx[:, 2] >> bit) & 1)
    for code in range(8):
        mask = child == code
        if not mask.any():
            continue
        _octree_leaves(idx[mask], rows[mask], bit, out)


def voxel_downsample(points, v: float, origin=None) -> np.ndarray:
    """One centroid per occupied voxel of edge v, sorted by voxel index.

    Output size never exceeds the input size; running it again at the same
    v reproduces the same occupancy (representatives stay in their cells).
    """
    pts = _as_cloud(points)
    if v <= 0.0:
        raise ValueError(f"voxel size must be positive, got {v}")
    origin = pts.min(axis=0) if origin is None else np.asarray(origin, dtype=float)

    idx = _voxel_indices(pts, v, origin)
    span = int(idx.max() - idx.min()) if len(idx) else 0
    shift = idx.min(axis=0)
    rel = idx - shift  # nonnegative, so bit tests partition cleanly
    depth = max(int(np.ceil(np.log2(span + 1))), 1) if span > 0 else 1

    leaves: list[tuple[tuple[int, int, int], np.ndarray]] = []
    _octree_leaves(rel, np.arange(len(pts)), depth, leaves)

    keys = np.array([k for k, _ in leaves], dtype=np.int64)
    reps = np.array([pts[rows].mean(axis=0) for _, rows in leaves])
    order = np.lexsort((keys[:, 2], keys[:, 1], keys[:, 0]))
    return reps[order]


def occupied_voxel_count(points, v: float, origin=None) -> int:
    return len(voxel_downsample(points, v, origin=origin))


def density_for_voxel(points, v: float, v0: float, origin=None) -> float:
    """Fraction of v0-resolution cells surviving a downsample at edge v."""
    if not (v >= v0 > 0.0):
        raise ValueError(f"need v >= v0 > 0, got v={v}, v0={v0}")
    base = occupied_voxel_count(points, v0, origin=origin)
    return occupied_voxel_count(points, v, origin=origin) / base


@dataclass
class DensityMap:
    """Tabulated eta(v): sorted voxel sizes with nonincreasing densities."""

    voxel_sizes: np.ndarray
    etas: np.ndarray
    v0: float

    def __post_init__(self):
        self.voxel_sizes = np.asarray(self.voxel_sizes, dtype=float)
        self.etas = np.asarray(self.etas, dtype=float)
        if len(self.voxel_sizes) != len(self.etas) or len(self.etas) == 0:
            raise ValueError("density map needs matching nonempty columns")
        if np.any(np.diff(self.voxel_sizes) <= 0.0):
            raise ValueError("voxel sizes must strictly increase")
        if np.any(np.diff(self.etas) > 0.0):
            raise ValueError("etas must be nonincreasing in voxel size")
        if np.any((self.etas <= 0.0) | (self.etas > 1.0)):
            raise ValueError("etas must lie in (0, 1]")
        if self.voxel_sizes[0] != self.v0 or self.etas[0] != 1.0:
            raise ValueError("map must start at (v0, 1)")

    def eta_for_voxel(self, v: float) -> float:
        """Monotone piecewise-linear interpolation in log-log space.

        Queries outside the measured domain clamp to the nearest endpoint
        with a warning; the map is only trusted where measured.
        """
        if v <= 0.0:
            raise ValueError("voxel size must be positive")
        lo, hi = self.voxel_sizes[0], self.voxel_sizes[-1]
        if v < lo or v > hi:
            warnings.warn(
                f"voxel size {v:.6g} outside measured domain [{lo:.6g}, {hi:.6g}]; clamping",
                stacklevel=2,
            )
            v = min(max(v, lo), hi)
        log_eta = np.interp(np.log(v), np.log(self.voxel_sizes), np.log(self.etas))
        return float(np.exp(log_eta))

    def voxel_for_eta(self, eta: float) -> float:
        """Inverse lookup, clamped to the measured eta range."""
        if not (0.0 < eta <= 1.0):
            raise ValueError("eta must lie in (0, 1]")
        eta = min(max(eta, float(self.etas[-1])), float(self.etas[0]))
        # etas decrease along the table; np.interp wants ascending x
        log_v = np.interp(np.log(eta), np.log(self.etas[::-1]), np.log(self.voxel_sizes[::-1]))
        return float(np.exp(log_v))

    def save(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["voxel_size_m", "eta"])
            for v, eta in zip(self.voxel_sizes, self.etas):
                writer.writerow([f"{v:.9g}", f"{eta:.9g}"])

    @classmethod
    def load(cls, path) -> "DensityMap":
        sizes, etas = [], []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise ValueError(f"{path}: empty density map file")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    sizes.append(float(row[0]))
                    etas.append(float(row[1]))
                except (IndexError, ValueError) as exc:
                    raise ValueError(f"{path}:{lineno}: bad density map row {row}") from exc
        return cls(np.array(sizes), np.array(etas), v0=sizes[0])


def build_density_map(points, v0: float, voxel_sizes, origin=None) -> DensityMap:
    """Tabulate eta(v) for the given cloud over an ascending voxel grid.

    The grid must start at v0. Count ties can leave equal etas; genuine
    inversions (possible only between non-nested grids) are flattened to
    keep the map monotone.
    """
    pts = _as_cloud(points)
    grid = np.asarray(voxel_sizes, dtype=float)
    if len(grid) == 0 or grid[0] != v0:
        raise ValueError("voxel grid must be nonempty and start at v0")
    if np.any(np.diff(grid) <= 0.0):
        raise ValueError("voxel grid must strictly increase")
    origin = pts.min(axis=0) if origin is None else np.asarray(origin, dtype=float)

    base = occupied_voxel_count(pts, v0, origin=origin)
    etas = []
    for v in grid:
        etas.append(occupied_voxel_count(pts, v, origin=origin) / base)
    etas = np.minimum.accumulate(np.array(etas))
    return DensityMap(voxel_sizes=grid, etas=etas, v0=v0)


def read_xyz(path) -> np.ndarray:
    """Read an ASCII cloud, one 'x y z' triple per line; '#' lines skipped."""
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) < 3:
                raise ValueError(f"{path}:{lineno}: expected 'x y z', got {line!r}")
            try:
                rows.append([float(parts[0]), float(parts[1]), float(parts[2])])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-numeric coordinate in {line!r}") from exc
    if not rows:
        raise ValueError(f"{path}: no points found")
    return np.array(rows)


def crop(points, box_min, box_max) -> np.ndarray:
    """Points inside an axis-aligned box; lets density maps be built per tile."""
    pts = _as_cloud(points)
    lo = np.asarray(box_min, dtype=float)
    hi = np.asarray(box_max, dtype=float)
    mask = np.all((pts >= lo) & (pts < hi), axis=1)
    if not mask.any():
        raise ValueError("crop region contains no points")
    return pts[mask]
