"""Camera pose, view frustum construction and tile visibility.

Conventions: world frame is right-handed with z up. Quaternions are unit,
ordered (w, x, y, z), and rotate camera-frame vectors into the world. The
camera looks along its local -z axis with +y up and +x right, so an
identity orientation faces world -z.

Visibility uses the standard six-plane rejection: a tile box is invisible
only when it lies fully outside at least one frustum plane. The test is
conservative (a box crossing two planes near a corner can pass), which is
acceptable because false positives only add candidate tiles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

__all__ = [
    "Pose",
    "Frustum",
    "TileBox",
    "build_frustum",
    "tile_visibility",
    "visibility_mask",
    "content_distance",
    "tile_distance",
    "make_tile_grid",
    "look_at",
]


@dataclass(frozen=True)
class Pose:
    """6DoF camera state: position plus orientation at a timestamp."""

    t: float
    position: np.ndarray
    orientation: np.ndarray  # unit quaternion (w, x, y, z)

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        q = np.asarray(self.orientation, dtype=float)
        if self.position.shape != (3,) or q.shape != (4,):
            raise ValueError("pose needs a 3-vector position and 4-vector quaternion")
        norm = float(np.linalg.norm(q))
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"quaternion norm {norm} too far from 1")
        object.__setattr__(self, "orientation", q / norm)

    def rotation(self) -> Rotation:
        w, x, y, z = self.orientation
        return Rotation.from_quat([x, y, z, w])

    def forward(self) -> np.ndarray:
        return self.rotation().apply([0.0, 0.0, -1.0])


def look_at(t: float, eye, target, up=(0.0, 0.0, 1.0)) -> Pose:
    """Pose at eye facing target, rolled so camera-up tracks world-up."""
    eye = np.asarray(eye, dtype=float)
    fwd = np.asarray(target, dtype=float) - eye
    norm = np.linalg.norm(fwd)
    if norm < 1e-12:
        raise ValueError("eye and target coincide")
    fwd = fwd / norm
    up = np.asarray(up, dtype=float)
    right = np.cross(fwd, up)
    if np.linalg.norm(right) < 1e-9:
        # looking straight along world-up: any horizontal right axis works
        right = np.array([1.0, 0.0, 0.0])
    right = right / np.linalg.norm(right)
    cam_up = np.cross(right, fwd)
    mat = np.column_stack([right, cam_up, -fwd])  # camera axes as world columns
    x, y, z, w = Rotation.from_matrix(mat).as_quat()
    return Pose(t=t, position=eye, orientation=np.array([w, x, y, z]))


@dataclass(frozen=True)
class Frustum:
    """Six oriented planes (inward normals): point p is inside one plane
    when normals[i] . p + offsets[i] >= 0."""

    normals: np.ndarray   # (6, 3)
    offsets: np.ndarray   # (6,)
    fov_h_deg: float
    fov_v_deg: float
    near: float
    far: float

    def contains_point(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(self.normals @ p + self.offsets >= 0.0))


def build_frustum(pose: Pose, fov_h_deg: float, fov_v_deg: float,
                  near: float = 0.01, far: float = 100.0) -> Frustum:
    if not (0.0 < fov_h_deg < 180.0 and 0.0 < fov_v_deg < 180.0):
        raise ValueError("FoV angles must lie in (0, 180) degrees")
    if not (0.0 < near < far):
        raise ValueError("need 0 < near < far")

    tan_h = np.tan(np.radians(fov_h_deg) / 2.0)
    tan_v = np.tan(np.radians(fov_v_deg) / 2.0)
    # camera space: looking down -z, so a frontal point has z = -k, k > 0
    cam_normals = np.array([
        [0.0, 0.0, -1.0],        # near
        [0.0, 0.0, 1.0],         # far
        [-1.0, 0.0, -tan_h],     # right
        [1.0, 0.0, -tan_h],      # left
        [0.0, -1.0, -tan_v],     # top
        [0.0, 1.0, -tan_v],      # bottom
    ])
    cam_normals /= np.linalg.norm(cam_normals, axis=1, keepdims=True)

    rot = pose.rotation()
    normals = rot.apply(cam_normals)
    eye = pose.position
    offsets = -(normals @ eye)
    fwd = normals[0]  # world forward, unit
    offsets[0] -= near          # inside means fwd . (p - eye) >= near
    offsets[1] += far           # inside means fwd . (p - eye) <= far
    return Frustum(normals=normals, offsets=offsets,
                   fov_h_deg=fov_h_deg, fov_v_deg=fov_v_deg, near=near, far=far)


@dataclass(frozen=True)
class TileBox:
    """Axis-aligned bounding box of one tile."""

    bmin: np.ndarray
    bmax: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "bmin", np.asarray(self.bmin, dtype=float))
        object.__setattr__(self, "bmax", np.asarray(self.bmax, dtype=float))
        if not np.all(self.bmin < self.bmax):
            raise ValueError("box min must be strictly below max on every axis")

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.bmin + self.bmax)

    @property
    def half_extent(self) -> np.ndarray:
        return 0.5 * (self.bmax - self.bmin)


def make_tile_grid(bbox_min, bbox_max, grid: tuple[int, int, int]) -> list[TileBox]:
    """Split a content box into grid[0] x grid[1] x grid[2] tile boxes.

    Tiles are ordered x-major, then y, then z, and share edges exactly
    (built from the same linspace), so they partition the box.
    """
    lo = np.asarray(bbox_min, dtype=float)
    hi = np.asarray(bbox_max, dtype=float)
    edges = [np.linspace(lo[a], hi[a], grid[a] + 1) for a in range(3)]
    boxes = []
    for ix in range(grid[0]):
        for iy in range(grid[1]):
            for iz in range(grid[2]):
                bmin = np.array([edges[0][ix], edges[1][iy], edges[2][iz]])
                bmax = np.array([edges[0][ix + 1], edges[1][iy + 1], edges[2][iz + 1]])
                boxes.append(TileBox(bmin=bmin, bmax=bmax))
    return boxes


def tile_visibility(frustum: Frustum, box: TileBox) -> int:
    """1 when the box may intersect the frustum, 0 when provably outside."""
    c = box.center
    r = np.abs(frustum.normals) @ box.half_extent
    dist = frustum.normals @ c + frustum.offsets
    return 0 if np.any(dist + r < 0.0) else 1


def visibility_mask(frustum: Frustum, boxes: list[TileBox]) -> np.ndarray:
    """Vectorized tile_visibility over a tile grid."""
    centers = np.array([b.center for b in boxes])
    extents = np.array([b.half_extent for b in boxes])
    dist = centers @ frustum.normals.T + frustum.offsets
    radius = extents @ np.abs(frustum.normals).T
    return np.all(dist + radius >= 0.0, axis=1)


def content_distance(pose: Pose, content_center) -> float:
    """Euclidean distance from the camera to the content center."""
    return float(np.linalg.norm(pose.position - np.asarray(content_center, dtype=float)))


def tile_distance(pose: Pose, box: TileBox) -> float:
    """Euclidean distance from the camera to the tile center."""
    return float(np.linalg.norm(pose.position - box.center))
