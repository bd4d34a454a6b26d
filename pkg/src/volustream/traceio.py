"""Trace parsing, synthetic trace generation, config loading and reports.

Canonical on-disk formats, all plain CSV with headers:

  bandwidth trace   t_s,mbps                 piecewise-constant samples
  pose trace        t_s,x,y,z,qw,qx,qy,qz    positions in meters
  density map       voxel_size_m,eta         (see voxelizer)
  psnr table        eta,d,psnr_db            full grid

Experiment configuration is one JSON document; ``load_config`` fills in
defaults so a minimal file (or empty dict) describes a complete session.
Converters for third-party datasets should emit these canonical CSVs
rather than being parsed directly.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .acuity import AcuityParams, ParametricDensityMap
from .core import QualityLadder, QualityLevel
from .geometry import Pose, look_at
from .qoe import PsnrModel, QoEWeights
from .voxelizer import DensityMap

__all__ = [
    "TraceFormatError",
    "SessionTraces",
    "parse_bandwidth_trace",
    "parse_pose_trace",
    "write_bandwidth_trace",
    "write_pose_trace",
    "generate_synthetic_traces",
    "BW_PROFILES",
    "TRACE_PROFILES",
    "load_config",
    "build_ladder",
    "build_acuity",
    "build_density_map_cfg",
    "build_psnr",
    "build_weights",
]

SCHEMES = ("proposed", "rate_utility", "viewport_utility", "distance_tile")

# bandwidth random-walk ranges in Mbps
BW_PROFILES = {
    "ample": (900.0, 1200.0),
    "high": (220.0, 380.0),
    "medium": (140.0, 260.0),
    "low": (70.0, 140.0),
}

# viewing-distance envelopes as multiples of d0
TRACE_PROFILES = ("far-orbit", "far-ring", "close-in", "crossing")


class TraceFormatError(ValueError):
    """Malformed trace file; message carries the offending line number."""


@dataclass
class SessionTraces:
    """Time-aligned inputs of one session."""

    bw_t: np.ndarray          # seconds, strictly increasing
    bw_mbps: np.ndarray       # positive rates, piecewise constant
    poses: list[Pose]         # strictly increasing timestamps
    content_center: np.ndarray
    bbox_min: np.ndarray
    bbox_max: np.ndarray

    def __post_init__(self):
        self.bw_t = np.asarray(self.bw_t, dtype=float)
        self.bw_mbps = np.asarray(self.bw_mbps, dtype=float)
        self.content_center = np.asarray(self.content_center, dtype=float)
        self.bbox_min = np.asarray(self.bbox_min, dtype=float)
        self.bbox_max = np.asarray(self.bbox_max, dtype=float)
        if len(self.bw_t) == 0 or len(self.poses) == 0:
            raise ValueError("traces must be nonempty")
        if np.any(np.diff(self.bw_t) <= 0.0):
            raise ValueError("bandwidth timestamps must strictly increase")
        if np.any(self.bw_mbps <= 0.0):
            raise ValueError("bandwidth samples must be positive")
        ts = [p.t for p in self.poses]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("pose timestamps must strictly increase")
        if not np.all(self.bbox_min < self.bbox_max):
            raise ValueError("content bounding box must have positive extent")

    @property
    def pose_end(self) -> float:
        return self.poses[-1].t

    def pose_at(self, t: float) -> Pose:
        """Pose sample nearest to t without exceeding it (hold-last)."""
        ts = np.array([p.t for p in self.poses])
        i = int(np.clip(np.searchsorted(ts, t, side="right") - 1, 0, len(ts) - 1))
        return self.poses[i]

    def bandwidth_at(self, t: float) -> float:
        i = int(np.clip(np.searchsorted(self.bw_t, t, side="right") - 1, 0, len(self.bw_t) - 1))
        return float(self.bw_mbps[i])

    def mean_bandwidth(self, t0: float, t1: float) -> float:
        """Average rate over [t0, t1] of the piecewise-constant trace."""
        if t1 <= t0:
            return self.bandwidth_at(t0)
        edges = np.concatenate([[t0], self.bw_t[(self.bw_t > t0) & (self.bw_t < t1)], [t1]])
        vals = np.array([self.bandwidth_at(e) for e in edges[:-1]])
        return float((vals * np.diff(edges)).sum() / (t1 - t0))


def parse_bandwidth_trace(path) -> tuple[np.ndarray, np.ndarray]:
    ts, rates = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise TraceFormatError(f"{path}: empty bandwidth trace")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                t, mbps = float(row[0]), float(row[1])
            except (IndexError, ValueError) as exc:
                raise TraceFormatError(f"{path}:{lineno}: expected 't_s,mbps', got {row}") from exc
            if ts and t <= ts[-1]:
                raise TraceFormatError(f"{path}:{lineno}: timestamp {t} not increasing")
            if mbps <= 0.0:
                raise TraceFormatError(f"{path}:{lineno}: nonpositive rate {mbps}")
            ts.append(t)
            rates.append(mbps)
    if not ts:
        raise TraceFormatError(f"{path}: no bandwidth samples")
    return np.array(ts), np.array(rates)


def parse_pose_trace(path) -> list[Pose]:
    poses: list[Pose] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise TraceFormatError(f"{path}: empty pose trace")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                vals = [float(x) for x in row[:8]]
                t, x, y, z, qw, qx, qy, qz = vals
            except ValueError as exc:
                raise TraceFormatError(f"{path}:{lineno}: expected 8 numeric fields") from exc
            if poses and t <= poses[-1].t:
                raise TraceFormatError(f"{path}:{lineno}: timestamp {t} not increasing")
            quat = np.array([qw, qx, qy, qz])
            norm = float(np.linalg.norm(quat))
            if abs(norm - 1.0) > 1e-3:
                raise TraceFormatError(f"{path}:{lineno}: quaternion norm {norm:.6f} too far from 1")
            poses.append(Pose(t=t, position=np.array([x, y, z]), orientation=quat / norm))
    if not poses:
        raise TraceFormatError(f"{path}: no pose samples")
    return poses


def write_bandwidth_trace(path, ts, rates) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_s", "mbps"])
        for t, r in zip(ts, rates):
            writer.writerow([f"{t:.9g}", f"{r:.9g}"])


def write_pose_trace(path, poses: list[Pose]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_s", "x", "y", "z", "qw", "qx", "qy", "qz"])
        for p in poses:
            row = [p.t, *p.position, *p.orientation]
            writer.writerow([f"{v:.9g}" for v in row])


DEFAULT_BBOX = (np.array([-0.5, -0.5, -0.9]), np.array([0.5, 0.5, 0.9]))


def generate_synthetic_traces(profile: str, seed: int, duration_s: float = 15.0,
                              bw_profile: str = "medium", d0: float = 1.0,
                              pose_hz: float = 30.0, bw_hz: float = 1.0) -> SessionTraces:
    """Deterministic desk-scale session traces.

    Profiles shape the viewing-distance envelope around the content:
    far-orbit keeps d in [1.35, 3] * d0, far-ring circles at one constant
    far radius (the cleanest probe of distance-driven savings), close-in
    stays below d0, crossing sweeps through d0. The user orbits the
    content center at bounded speed, always facing it; bandwidth is a
    reflecting random walk inside the chosen profile's range.
    """
    if profile not in TRACE_PROFILES:
        raise ValueError(f"unknown trace profile {profile!r}, pick from {TRACE_PROFILES}")
    if bw_profile not in BW_PROFILES:
        raise ValueError(f"unknown bandwidth profile {bw_profile!r}, pick from {sorted(BW_PROFILES)}")
    rng = np.random.default_rng([seed, list(TRACE_PROFILES).index(profile),
                                 sorted(BW_PROFILES).index(bw_profile)])

    if profile == "far-orbit":
        r_lo, r_hi = 1.35 * d0, 3.0 * d0
        radius = rng.uniform(1.5 * d0, 2.4 * d0)
    elif profile == "far-ring":
        radius = rng.uniform(1.6 * d0, 2.05 * d0)
        r_lo = r_hi = radius
    elif profile == "close-in":
        r_lo, r_hi = 0.45 * d0, 0.95 * d0
        radius = rng.uniform(0.55 * d0, 0.85 * d0)
    else:  # crossing
        r_lo, r_hi = 0.6 * d0, 2.5 * d0
        radius = rng.uniform(0.8 * d0, 1.2 * d0)

    center = np.zeros(3)
    dt = 1.0 / pose_hz
    n = int(round(duration_s * pose_hz)) + 1
    angle = rng.uniform(0.0, 2.0 * np.pi)
    ang_speed = rng.uniform(0.2, 0.4)  # rad/s, tangential speed <= 1.2 m/s at r=3
    radial_speed = 0.35  # m/s cap keeps total speed under 1.5 m/s

    poses = []
    for i in range(n):
        t = i * dt
        if profile == "crossing":
            # one slow sweep through d0 plus jitter
            target = r_lo + (r_hi - r_lo) * 0.5 * (1.0 - np.cos(2.0 * np.pi * t / duration_s))
            radius += np.clip(target - radius, -radial_speed * dt, radial_speed * dt)
        elif profile != "far-ring":
            radius += rng.uniform(-radial_speed, radial_speed) * dt
            if radius < r_lo:
                radius = r_lo + (r_lo - radius)
            if radius > r_hi:
                radius = r_hi - (radius - r_hi)
        angle += ang_speed * dt
        eye = center + np.array([radius * np.cos(angle), radius * np.sin(angle), 0.0])
        poses.append(look_at(t, eye, center))

    lo, hi = BW_PROFILES[bw_profile]
    m = int(round(duration_s * bw_hz)) + 2
    step = (hi - lo) / 6.0
    rate = rng.uniform(lo, hi)
    bw = []
    for _ in range(m):
        bw.append(rate)
        rate += rng.uniform(-step, step)
        rate = min(max(rate, lo), hi)
    bw_t = np.arange(m) / bw_hz

    return SessionTraces(bw_t=bw_t, bw_mbps=np.array(bw), poses=poses,
                         content_center=center,
                         bbox_min=DEFAULT_BBOX[0].copy(), bbox_max=DEFAULT_BBOX[1].copy())


# --- configuration ---------------------------------------------------------

DEFAULT_CONFIG = {
    "ladder": {
        "gof_duration": 1.0 / 3.0,
        "tile_grid": [4, 4, 4],
        "levels": [
            {"m": 0.1, "eta": 0.1, "bitrate_mbps": 87.5},
            {"m": 0.2, "eta": 0.2, "bitrate_mbps": 161.6},
            {"m": 0.4, "eta": 0.4, "bitrate_mbps": 296.4},
            {"m": 0.6, "eta": 0.6, "bitrate_mbps": 420.7},
            {"m": 0.8, "eta": 0.8, "bitrate_mbps": 565.2},
            {"m": 1.0, "eta": 1.0, "bitrate_mbps": 651.0},
        ],
    },
    "acuity": {"d0": 1.0, "v0": 0.002, "ppi_device": 4000.0, "theta_arcmin": 1.0},
    "density_map": {"type": "parametric", "alpha": 2.0},
    "psnr": {"type": "parametric", "c0": 55.0, "c1": 4.0, "c2": 3.0, "saturate": True},
    "weights": {"p": 50.0, "q": 1.0, "r": 1.0},
    "scheme": "proposed",
    "buffer_chunks": 2.0,
    "fov_deg": [110.0, 110.0],
    "near": 0.01,
    "far": 100.0,
    "prediction": "oracle",
    "seed": 0,
}


def _merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for key, val in extra.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def load_config(path=None) -> dict:
    """Read a JSON config and overlay it on the defaults."""
    cfg = json.loads(json.dumps(DEFAULT_CONFIG))  # deep copy
    if path is not None:
        with open(path) as fh:
            user = json.load(fh)
        if not isinstance(user, dict):
            raise ValueError(f"{path}: config must be a JSON object")
        cfg = _merge(cfg, user)
    return cfg


def build_ladder(cfg: dict) -> QualityLadder:
    lad = cfg["ladder"]
    levels = tuple(
        QualityLevel(index=i, m=lv["m"], eta=lv["eta"], bitrate_mbps=lv["bitrate_mbps"])
        for i, lv in enumerate(lad["levels"])
    )
    return QualityLadder(levels=levels, gof_duration=lad["gof_duration"],
                         tile_grid=tuple(lad["tile_grid"]))


def build_acuity(cfg: dict) -> AcuityParams:
    return AcuityParams(**cfg["acuity"])


def build_density_map_cfg(cfg: dict, base_dir: Path | None = None):
    dm = cfg["density_map"]
    if dm["type"] == "parametric":
        return ParametricDensityMap(v0=cfg["acuity"]["v0"], alpha=dm.get("alpha", 2.0))
    if dm["type"] == "table":
        path = Path(dm["path"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return DensityMap.load(path)
    raise ValueError(f"unknown density map type {dm['type']!r}")


def build_psnr(cfg: dict, base_dir: Path | None = None) -> PsnrModel:
    pm = cfg["psnr"]
    if pm["type"] == "parametric":
        return PsnrModel(c0=pm["c0"], c1=pm["c1"], c2=pm["c2"],
                         d_ref=cfg["acuity"]["d0"], saturate=pm.get("saturate", True))
    if pm["type"] == "table":
        path = Path(pm["path"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return PsnrModel.load_csv(path, saturate=pm.get("saturate", True))
    raise ValueError(f"unknown psnr model type {pm['type']!r}")


def build_weights(cfg: dict) -> QoEWeights:
    return QoEWeights(**cfg["weights"])


def load_traces_cfg(cfg: dict, base_dir: Path | None = None) -> SessionTraces:
    """Traces referenced by a config: file paths or a synthetic block."""
    tr = cfg.get("traces")
    if tr is None:
        raise ValueError("config has no 'traces' section")
    if "synthetic" in tr:
        syn = tr["synthetic"]
        return generate_synthetic_traces(
            profile=syn.get("profile", "far-orbit"),
            seed=syn.get("seed", cfg.get("seed", 0)),
            duration_s=syn.get("duration_s", 15.0),
            bw_profile=syn.get("bw_profile", "medium"),
            d0=cfg["acuity"]["d0"],
        )
    def _resolve(p):
        p = Path(p)
        return p if base_dir is None or p.is_absolute() else base_dir / p
    bw_t, bw = parse_bandwidth_trace(_resolve(tr["bandwidth"]))
    poses = parse_pose_trace(_resolve(tr["pose"]))
    center = np.asarray(tr.get("content_center", [0.0, 0.0, 0.0]), dtype=float)
    bbox = tr.get("content_bbox")
    if bbox is None:
        bmin, bmax = DEFAULT_BBOX[0] + center, DEFAULT_BBOX[1] + center
    else:
        bmin, bmax = np.asarray(bbox[0], dtype=float), np.asarray(bbox[1], dtype=float)
    return SessionTraces(bw_t=bw_t, bw_mbps=bw, poses=poses, content_center=center,
                         bbox_min=bmin, bbox_max=bmax)
