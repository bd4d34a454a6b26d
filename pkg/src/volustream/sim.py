"""Trace-driven session loop and experiment harness.

One session walks the GoF timeline: predict bandwidth and pose, cull tiles
against the predicted view frustum, derive the boundary density from the
predicted viewing distance, let the configured scheme pick levels,
download the transmitted tiles through the bandwidth trace, then account
QoE against the pose actually reached at the chunk's playback midpoint.
The gap between predicted and actual pose is the prediction-error signal;
the oracle prediction mode closes it to isolate selection quality.

Buffer model: the first chunk is prefetched before playback starts (its
download time is reported as startup delay, not rebuffering). From then on
B evolves as min(cap, max(B - tau, 0) + gof); when the min clamps, the
client idles until the buffer drains to capacity before the next download.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import abr
from .acuity import AcuityParams, eta_star_at_distance, ppi_initial
from .core import QualityLadder, TileSelection
from .geometry import (build_frustum, content_distance, make_tile_grid,
                       visibility_mask)
from .predictor import History, predict_bandwidth, predict_pose
from .qoe import (PsnrModel, QoEBreakdown, QoEWeights, perceived_quality,
                  qoe_total, rebuffer_time, spatial_variation,
                  temporal_variation)
from .traceio import (SessionTraces, build_acuity, build_density_map_cfg,
                      build_ladder, build_psnr, build_weights, SCHEMES)

__all__ = [
    "SessionConfig",
    "ChunkReport",
    "SessionResult",
    "run_session",
    "run_experiment",
    "write_reports",
]


@dataclass
class SessionConfig:
    """Built configuration of one simulated session."""

    ladder: QualityLadder
    acuity: AcuityParams
    density_map: object
    psnr: PsnrModel
    weights: QoEWeights
    scheme: str = "proposed"
    buffer_chunks: float = 2.0
    fov_deg: tuple[float, float] = (110.0, 110.0)
    near: float = 0.01
    far: float = 100.0
    prediction: str = "oracle"
    startup_policy: str = "prefetch"
    seed: int = 0
    rate_out_weight: float = 0.1
    distance_bands: np.ndarray | None = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}, pick from {SCHEMES}")
        if self.prediction not in ("oracle", "history"):
            raise ValueError("prediction must be 'oracle' or 'history'")
        if self.startup_policy not in ("prefetch", "immediate"):
            raise ValueError("startup_policy must be 'prefetch' or 'immediate'")
        if self.buffer_chunks <= 0.0:
            raise ValueError("buffer capacity must be positive")

    @classmethod
    def from_dict(cls, cfg: dict, base_dir: Path | None = None) -> "SessionConfig":
        return cls(
            ladder=build_ladder(cfg),
            acuity=build_acuity(cfg),
            density_map=build_density_map_cfg(cfg, base_dir),
            psnr=build_psnr(cfg, base_dir),
            weights=build_weights(cfg),
            scheme=cfg.get("scheme", "proposed"),
            buffer_chunks=cfg.get("buffer_chunks", 2.0),
            fov_deg=tuple(cfg.get("fov_deg", (110.0, 110.0))),
            near=cfg.get("near", 0.01),
            far=cfg.get("far", 100.0),
            prediction=cfg.get("prediction", "oracle"),
            startup_policy=cfg.get("startup_policy", "prefetch"),
            seed=cfg.get("seed", 0),
        )

    @property
    def buffer_capacity(self) -> float:
        return self.buffer_chunks * self.ladder.gof_duration


@dataclass
class ChunkReport:
    index: int
    levels: np.ndarray
    transmit: np.ndarray
    bytes_sent: int
    tau_s: float
    wait_s: float
    buffer_before: float
    buffer_after: float
    qoe: QoEBreakdown
    eta_star: float
    eta_star_pred: float
    visible_count: int
    d_t: float
    bw_mbps: float
    all_invisible: bool


@dataclass
class SessionResult:
    scheme: str
    chunks: list[ChunkReport]
    startup_delay_s: float
    truncated: bool

    def summary(self) -> dict:
        n = len(self.chunks)
        q1 = [c.qoe.q1 for c in self.chunks]
        q3 = [c.qoe.q3 for c in self.chunks]
        q4 = [c.qoe.q4 for c in self.chunks]
        return {
            "scheme": self.scheme,
            "chunks": n,
            "mean_q1_db": sum(q1) / n if n else 0.0,
            "total_rebuffer_s": sum(c.qoe.q2 for c in self.chunks),
            "mean_q3_db": sum(q3) / n if n else 0.0,
            "mean_q4_db": sum(q4) / n if n else 0.0,
            "total_qoe": sum(c.qoe.total for c in self.chunks),
            "total_bytes": sum(c.bytes_sent for c in self.chunks),
            "startup_delay_s": self.startup_delay_s,
            "truncated": self.truncated,
            "all_invisible_chunks": sum(1 for c in self.chunks if c.all_invisible),
        }


class _Downloader:
    """Cumulative byte capacity of a bandwidth trace, for O(log n) queries.

    The trace is piecewise constant; the last sample's rate extends
    indefinitely, so every download finishes.
    """

    def __init__(self, traces: SessionTraces):
        self._t = traces.bw_t
        self._rate = traces.bw_mbps * 1e6 / 8.0  # bytes per second
        spans = np.diff(self._t)
        self._cum = np.concatenate([[0.0], np.cumsum(self._rate[:-1] * spans)])

    def _capacity(self, t: float) -> float:
        i = int(np.clip(np.searchsorted(self._t, t, side="right") - 1, 0, len(self._t) - 1))
        return float(self._cum[i] + (t - self._t[i]) * self._rate[i])

    def time_for(self, nbytes, start: float):
        """Download duration for nbytes starting at start; vectorized."""
        nb = np.asarray(nbytes, dtype=float)
        target = self._capacity(start) + nb
        i = np.clip(np.searchsorted(self._cum, target, side="right") - 1,
                    0, len(self._t) - 1)
        end = self._t[i] + (target - self._cum[i]) / self._rate[i]
        out = np.where(nb > 0, end - start, 0.0)
        return float(out) if out.shape == () else out


def _download_time(nbytes: int, start: float, traces: SessionTraces) -> float:
    """Seconds to move nbytes through the piecewise-constant trace from start."""
    return _Downloader(traces).time_for(nbytes, start)


def _dispatch(scheme: str, inp: abr.ChunkDecisionInput, cfg: SessionConfig) -> TileSelection:
    if scheme == "proposed":
        return abr.select_greedy(inp)
    if scheme == "rate_utility":
        return abr.baseline_rate_utility(inp, out_frustum_weight=cfg.rate_out_weight)
    if scheme == "viewport_utility":
        return abr.baseline_viewport_utility(inp)
    bands = cfg.distance_bands
    if bands is None:
        bands = abr.default_distance_bands(cfg.ladder, d0=cfg.acuity.d0)
    return abr.baseline_distance_tile(inp, bands=bands)


def run_session(cfg: SessionConfig, traces: SessionTraces,
                duration_s: float | None = None) -> SessionResult:
    ladder = cfg.ladder
    gof = ladder.gof_duration
    num_chunks = int(traces.pose_end / gof)
    truncated = False
    if duration_s is not None:
        wanted = int(duration_s / gof)
        if wanted > num_chunks:
            warnings.warn(f"traces cover only {num_chunks} of {wanted} chunks; truncating")
            truncated = True
        else:
            num_chunks = wanted
    if num_chunks == 0:
        raise ValueError("traces shorter than one chunk")

    boxes = make_tile_grid(traces.bbox_min, traces.bbox_max, ladder.tile_grid)
    centers = np.array([b.center for b in boxes])
    ppi0 = ppi_initial(cfg.acuity)
    downloader = _Downloader(traces)

    bw_hist = History(capacity=10)
    pose_hist = History(capacity=10)
    pose_cursor = 0  # next trace pose to feed the history

    wall = 0.0
    buffer_s = 0.0
    prev_q1: float | None = None
    startup_delay = 0.0
    reports: list[ChunkReport] = []

    for t in range(num_chunks):
        midpoint = (t + 0.5) * gof
        chunk_start = t * gof

        if cfg.prediction == "oracle":
            pred_pose = traces.pose_at(midpoint)
            pred_bw = traces.mean_bandwidth(wall, wall + gof)
            stall_fn = (lambda nb, s=wall, b=buffer_s:
                        np.maximum(downloader.time_for(nb, s) - b, 0.0))
        else:
            stall_fn = None
            while pose_cursor < len(traces.poses) and traces.poses[pose_cursor].t <= chunk_start:
                pose_hist.push(traces.poses[pose_cursor].t, traces.poses[pose_cursor])
                pose_cursor += 1
            if len(pose_hist) == 0:
                pose_hist.push(traces.poses[0].t, traces.poses[0])
                pose_cursor = max(pose_cursor, 1)
            if len(bw_hist) == 0:
                bw_hist.push(-1.0, traces.bandwidth_at(wall))
            pred_pose = predict_pose(pose_hist, horizon=midpoint - pose_hist.last()[0])
            pred_bw = predict_bandwidth(bw_hist)

        frustum = build_frustum(pred_pose, cfg.fov_deg[0], cfg.fov_deg[1], cfg.near, cfg.far)
        visible = visibility_mask(frustum, boxes)
        distances = np.linalg.norm(centers - pred_pose.position, axis=1)
        d_pred = content_distance(pred_pose, traces.content_center)
        eta_star_pred = eta_star_at_distance(max(d_pred, 1e-6), cfg.acuity,
                                             cfg.density_map, ppi0)

        inp = abr.ChunkDecisionInput(
            visible=visible, distances=distances, eta_star=eta_star_pred,
            bw_mbps=pred_bw, buffer_s=buffer_s, prev_q1=prev_q1,
            ladder=ladder, weights=cfg.weights, psnr=cfg.psnr,
            startup=(t == 0 and cfg.startup_policy == "prefetch"),
            stall_fn=stall_fn)
        sel = _dispatch(cfg.scheme, inp, cfg)

        bytes_sent = sel.transmitted_bytes(ladder)
        tau = downloader.time_for(bytes_sent, wall)
        bw_real = bytes_sent * 8.0 / (tau * 1e6) if tau > 0.0 else traces.bandwidth_at(wall)

        # account QoE against the pose actually reached at playback midpoint
        act_pose = traces.pose_at(midpoint)
        act_frustum = build_frustum(act_pose, cfg.fov_deg[0], cfg.fov_deg[1], cfg.near, cfg.far)
        act_visible = visibility_mask(act_frustum, boxes)
        act_dist = np.linalg.norm(centers - act_pose.position, axis=1)
        d_t = content_distance(act_pose, traces.content_center)
        eta_star = eta_star_at_distance(max(d_t, 1e-6), cfg.acuity, cfg.density_map, ppi0)
        acct = TileSelection(levels=sel.levels, visible=act_visible,
                             distances=act_dist, transmit=sel.transmit)
        all_invisible = not act_visible.any()

        q1 = perceived_quality(acct, ladder, eta_star, cfg.psnr)
        if t == 0 and cfg.startup_policy == "prefetch":
            q2 = 0.0
            startup_delay = tau
        else:
            q2 = rebuffer_time(tau, buffer_s)
        q3 = temporal_variation(q1, prev_q1)
        q4 = spatial_variation(acct, ladder, eta_star, cfg.psnr)
        breakdown = QoEBreakdown(q1=q1, q2=q2, q3=q3, q4=q4,
                                 total=qoe_total(q1, q2, q3, q4, cfg.weights))

        buf_before = buffer_s
        drained = max(buffer_s - tau, 0.0) + gof
        wait = max(drained - cfg.buffer_capacity, 0.0)
        buffer_s = min(drained, cfg.buffer_capacity)
        if t == 0 and cfg.startup_policy == "prefetch":
            buffer_s = min(gof, cfg.buffer_capacity)
            wait = 0.0
        wall += tau + wait

        reports.append(ChunkReport(
            index=t, levels=sel.levels.copy(), transmit=sel.transmit.copy(),
            bytes_sent=bytes_sent, tau_s=tau,
            wait_s=wait, buffer_before=buf_before, buffer_after=buffer_s,
            qoe=breakdown, eta_star=eta_star, eta_star_pred=eta_star_pred,
            visible_count=int(act_visible.sum()), d_t=d_t, bw_mbps=bw_real,
            all_invisible=all_invisible))

        prev_q1 = q1
        bw_hist.push(float(t), bw_real)

    return SessionResult(scheme=cfg.scheme, chunks=reports,
                         startup_delay_s=startup_delay, truncated=truncated)


def run_experiment(cfg: SessionConfig, traces_by_label: list[tuple[str, SessionTraces]],
                   schemes: tuple[str, ...] = SCHEMES) -> dict:
    """Run every scheme over every labeled trace set.

    Returns a dict with per-(label, scheme) summary rows including a QoE
    normalized within each label, plus all chunk rows for CDF-style dumps.
    Rows are ordered by label then scheme, never by completion order.
    """
    rows = []
    chunk_rows = []
    for label, traces in traces_by_label:
        per_scheme = {}
        for scheme in schemes:
            result = run_session(replace(cfg, scheme=scheme), traces)
            per_scheme[scheme] = result
        denom = max(abs(r.summary()["total_qoe"]) for r in per_scheme.values())
        for scheme in schemes:
            summ = per_scheme[scheme].summary()
            summ["label"] = label
            summ["qoe_norm"] = summ["total_qoe"] / denom if denom > 0.0 else 0.0
            rows.append(summ)
            for c in per_scheme[scheme].chunks:
                chunk_rows.append({
                    "label": label, "scheme": scheme, "chunk": c.index,
                    "q1_db": c.qoe.q1, "q2_s": c.qoe.q2, "q3_db": c.qoe.q3,
                    "q4_db": c.qoe.q4, "qoe": c.qoe.total,
                    "bytes": c.bytes_sent, "tau_s": c.tau_s,
                    "eta_star": c.eta_star, "d_t": c.d_t,
                    "visible": c.visible_count,
                })
    return {"rows": rows, "chunk_rows": chunk_rows}


_CHUNK_COLUMNS = [
    "chunk", "levels", "bytes", "tau_s", "wait_s", "buffer_before", "buffer_after",
    "q1_db", "q2_s", "q3_db", "q4_db", "qoe", "eta_star", "eta_star_pred",
    "visible", "d_t", "bw_mbps",
]


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.9g}"
    return str(x)


def write_reports(out_dir, result: SessionResult, fmt: str = "csv") -> list[Path]:
    """Write chunks.csv (or .json) and summary.json for one session."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    chunk_dicts = []
    for c in result.chunks:
        chunk_dicts.append({
            "chunk": c.index,
            "levels": "|".join(str(l) for l in c.levels),
            "bytes": c.bytes_sent, "tau_s": c.tau_s, "wait_s": c.wait_s,
            "buffer_before": c.buffer_before, "buffer_after": c.buffer_after,
            "q1_db": c.qoe.q1, "q2_s": c.qoe.q2, "q3_db": c.qoe.q3,
            "q4_db": c.qoe.q4, "qoe": c.qoe.total,
            "eta_star": c.eta_star, "eta_star_pred": c.eta_star_pred,
            "visible": c.visible_count, "d_t": c.d_t, "bw_mbps": c.bw_mbps,
        })

    if fmt == "csv":
        path = out / "chunks.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_CHUNK_COLUMNS)
            for row in chunk_dicts:
                writer.writerow([_fmt(row[k]) for k in _CHUNK_COLUMNS])
    elif fmt == "json":
        path = out / "chunks.json"
        with open(path, "w") as fh:
            json.dump(chunk_dicts, fh, indent=2, sort_keys=True)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    written.append(path)

    spath = out / "summary.json"
    with open(spath, "w") as fh:
        json.dump(result.summary(), fh, indent=2, sort_keys=True)
    written.append(spath)
    return written
