"""Per-chunk tile quality selection: acuity-pruned greedy, an exhaustive
oracle for small instances, and three reference schemes.

The decision problem: pick a ladder level for every visible tile of one
chunk to maximize that chunk's QoE (perceived quality minus rebuffering,
temporal and spatial variation penalties) subject to the transmitted bytes
staying under the size of a full top-quality chunk.

The proposed scheme prunes the ladder at the boundary density eta*: with a
saturating PSNR model, levels above the lowest rung that reaches eta* buy
zero perceived quality, so the search stops there and the saved bytes are
the whole point.

Greedy search starts every visible tile at the lowest rung and repeatedly
applies the move with the best marginal QoE per added byte. Moves are
single-tile upgrades plus "uniform floor" composites that raise every tile
below a target level to it. The composites matter: the spatial-variation
penalty makes any unilateral first upgrade look bad (it turns one tile
into an outlier), so a pure single-tile ascent would stall at the lowest
rung; raising the floor keeps tiles level with each other.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, replace

import numpy as np

from .core import QualityLadder, TileSelection, full_chunk_size
from .qoe import PsnrModel, QoEWeights, indicator

__all__ = [
    "ChunkDecisionInput",
    "ExhaustiveSizeError",
    "select_greedy",
    "select_exact",
    "baseline_rate_utility",
    "baseline_viewport_utility",
    "baseline_distance_tile",
    "qoe_of_selection",
    "default_distance_bands",
]


class ExhaustiveSizeError(ValueError):
    """Instance too large for the exhaustive oracle."""


@dataclass
class ChunkDecisionInput:
    """Everything one chunk decision sees.

    visible/distances cover the whole tile grid; eta_star is the boundary
    density at the predicted viewing distance; bw_mbps the predicted
    bandwidth; buffer_s the client buffer at download start; prev_q1 the
    realized perceived quality of the previous chunk (None for the first).
    startup marks a prefetched first chunk, whose download time delays
    playback start instead of stalling it, so no rebuffering is charged.

    stall_fn, when set, maps candidate transmitted bytes to the exact
    rebuffering they would cause; perfect-prediction runs use it so the
    decision-time stall estimate matches the realized one. Without it the
    estimate falls back to bytes over the predicted average bandwidth.
    """

    visible: np.ndarray
    distances: np.ndarray
    eta_star: float
    bw_mbps: float
    buffer_s: float
    prev_q1: float | None
    ladder: QualityLadder
    weights: QoEWeights
    psnr: PsnrModel
    startup: bool = False
    stall_fn: Callable | None = None

    def __post_init__(self):
        self.visible = np.asarray(self.visible, dtype=bool)
        self.distances = np.asarray(self.distances, dtype=float)
        n = self.ladder.tile_count
        if len(self.visible) != n or len(self.distances) != n:
            raise ValueError(f"expected {n} tiles, got {len(self.visible)}")
        if np.any(self.distances[self.visible] <= 0.0):
            raise ValueError("visible tiles need positive distances")
        if not (0.0 < self.eta_star <= 1.0):
            raise ValueError(f"eta_star must lie in (0, 1], got {self.eta_star}")
        if self.bw_mbps <= 0.0:
            raise ValueError("predicted bandwidth must be positive")
        if self.buffer_s < 0.0:
            raise ValueError("buffer occupancy cannot be negative")


def _value_matrix(inp: ChunkDecisionInput, acuity_aware: bool = True) -> np.ndarray:
    """Per-tile per-level weighted PSNR for the visible tiles, (nvis, L).

    acuity_aware applies the configured saturation and the boundary-density
    weight; schemes that ignore acuity rank levels by raw PSNR instead.
    """
    etas = inp.ladder.eta_values()
    d = inp.distances[inp.visible]
    if len(d) == 0:
        return np.empty((0, inp.ladder.num_levels))
    if acuity_aware:
        vals = inp.psnr.value(etas[None, :], d[:, None], inp.eta_star)
        return vals * indicator(etas, inp.eta_star)[None, :]
    return inp.psnr.raw(etas[None, :], d[:, None])


def _chunk_qoe(values: np.ndarray, total_bytes: int, inp: ChunkDecisionInput) -> float:
    """Objective for one candidate allocation, from its per-tile values."""
    n = len(values)
    if n == 0:
        return 0.0
    q1 = values.sum() / n
    q4 = float(np.sqrt(max(np.square(values).sum() / n - q1 * q1, 0.0)))
    q2 = _stall_estimate(total_bytes, inp)
    q3 = 0.0 if inp.prev_q1 is None else abs(q1 - inp.prev_q1)
    w = inp.weights
    return q1 - w.p * q2 - w.q * q3 - w.r * q4


def _stall_estimate(total_bytes, inp: ChunkDecisionInput):
    """Predicted rebuffering for candidate byte totals (scalar or array)."""
    if inp.startup:
        return np.zeros_like(np.asarray(total_bytes, dtype=float))
    if inp.stall_fn is not None:
        return inp.stall_fn(total_bytes)
    tau = np.asarray(total_bytes, dtype=float) * 8.0 / (inp.bw_mbps * 1e6)
    return np.maximum(tau - inp.buffer_s, 0.0)


def _selection(inp: ChunkDecisionInput, levels_vis: np.ndarray,
               transmit=None) -> TileSelection:
    levels = np.zeros(inp.ladder.tile_count, dtype=np.int64)
    levels[inp.visible] = levels_vis
    return TileSelection(levels=levels, visible=inp.visible,
                         distances=inp.distances, transmit=transmit)


def _greedy(inp: ChunkDecisionInput, values: np.ndarray, max_level: int) -> np.ndarray:
    """Best-gain-per-byte ascent over singles and uniform-floor composites.

    Candidates are ranked by marginal QoE per added byte; ties resolve to
    the earliest candidate, floors (ascending target level) before singles
    (ascending tile index).
    """
    nvis, num_levels = values.shape
    lv = np.zeros(nvis, dtype=np.int64)
    if nvis == 0 or max_level == 0:
        return lv
    sizes = inp.ladder.tile_bytes()
    byte_cap = full_chunk_size(inp.ladder)
    rows = np.arange(nvis)
    w = inp.weights
    sq = np.square(values)

    def batch_qoe(s1, s2, nbytes):
        q1 = s1 / nvis
        q4 = np.sqrt(np.maximum(s2 / nvis - q1 * q1, 0.0))
        q2 = _stall_estimate(nbytes, inp)
        q3 = 0.0 if inp.prev_q1 is None else np.abs(q1 - inp.prev_q1)
        return q1 - w.p * q2 - w.q * q3 - w.r * q4

    for _ in range(nvis * (num_levels - 1)):
        cur_vals = values[rows, lv]
        s1 = cur_vals.sum()
        s2 = sq[rows, lv].sum()
        cur_bytes = sizes[lv].sum()
        cur_qoe = float(batch_qoe(s1, s2, cur_bytes))

        cand_s1, cand_s2, cand_bytes, cand_moves = [], [], [], []
        for k in range(1, max_level + 1):
            below = lv < k
            if not below.any():
                continue
            cand_s1.append(s1 + (values[below, k] - cur_vals[below]).sum())
            cand_s2.append(s2 + (sq[below, k] - sq[below, lv[below]]).sum())
            cand_bytes.append(cur_bytes + (sizes[k] - sizes[lv[below]]).sum())
            cand_moves.append(("floor", k))
        up = lv < max_level
        if up.any():
            nv, ov = values[up, lv[up] + 1], cur_vals[up]
            for ds1, ds2, db, i in zip(nv - ov, sq[up, lv[up] + 1] - sq[up, lv[up]],
                                       sizes[lv[up] + 1] - sizes[lv[up]], rows[up]):
                cand_s1.append(s1 + ds1)
                cand_s2.append(s2 + ds2)
                cand_bytes.append(cur_bytes + db)
                cand_moves.append(("single", int(i)))
        if not cand_moves:
            break

        cand_bytes = np.array(cand_bytes, dtype=np.int64)
        gains = batch_qoe(np.array(cand_s1), np.array(cand_s2), cand_bytes) - cur_qoe
        rates = gains / (cand_bytes - cur_bytes)
        rates = np.where(cand_bytes <= byte_cap, rates, -np.inf)
        best = int(np.argmax(rates))
        if not rates[best] > 0.0:
            break
        kind, arg = cand_moves[best]
        if kind == "floor":
            lv[lv < arg] = arg
        else:
            lv[arg] += 1
    return lv


def select_greedy(inp: ChunkDecisionInput) -> TileSelection:
    """Acuity-pruned greedy selection for one chunk.

    Visible tiles never exceed the pruning cap (the lowest rung whose
    density reaches eta*); invisible tiles keep the lowest level and are
    not transmitted. Deterministic for identical inputs.
    """
    values = _value_matrix(inp, acuity_aware=True)
    cap = inp.ladder.cap_level_for(inp.eta_star)
    lv = _greedy(inp, values, max_level=cap)
    return _selection(inp, lv)


def select_exact(inp: ChunkDecisionInput, max_tiles: int = 8, max_levels: int = 6,
                 level_limit: int | None = None) -> TileSelection:
    """Exhaustive per-chunk optimum; the oracle the greedy is judged against.

    Enumerates every level assignment of the visible tiles (bounded by
    max_tiles x max_levels), maximizing the chunk QoE under the byte cap,
    ties broken by the lexicographically smallest level vector. level_limit
    restricts the ladder to rungs [0, level_limit] for pruned solves.
    """
    if inp.stall_fn is not None:
        raise ValueError("the exhaustive oracle works on the average-bandwidth model")
    values = _value_matrix(inp, acuity_aware=True)
    nvis, total_levels = values.shape
    num_levels = total_levels if level_limit is None else level_limit + 1
    if nvis > max_tiles or total_levels > max_levels:
        raise ExhaustiveSizeError(
            f"instance {nvis} tiles x {total_levels} levels exceeds "
            f"bound {max_tiles} x {max_levels}")
    if nvis == 0:
        return _selection(inp, np.zeros(0, dtype=np.int64))

    sizes = inp.ladder.tile_bytes()[:num_levels].astype(float)
    vals = values[:, :num_levels]

    # accumulate sum, sum-of-squares and bytes over the full level grid by
    # repeated outer addition; flat index order is lexicographic in levels
    s1 = np.zeros(1)
    s2 = np.zeros(1)
    nbytes = np.zeros(1)
    for i in range(nvis):
        s1 = (s1[:, None] + vals[i][None, :]).ravel()
        s2 = (s2[:, None] + np.square(vals[i])[None, :]).ravel()
        nbytes = (nbytes[:, None] + sizes[None, :]).ravel()

    q1 = s1 / nvis
    q4 = np.sqrt(np.maximum(s2 / nvis - q1 * q1, 0.0))
    q2 = _stall_estimate(nbytes, inp)
    q3 = 0.0 if inp.prev_q1 is None else np.abs(q1 - inp.prev_q1)
    w = inp.weights
    score = q1 - w.p * q2 - w.q * q3 - w.r * q4
    score[nbytes > full_chunk_size(inp.ladder)] = -np.inf

    flat = int(np.argmax(score))  # first max = lexicographically smallest
    lv = np.array(np.unravel_index(flat, (num_levels,) * nvis), dtype=np.int64)
    return _selection(inp, lv)


def qoe_of_selection(inp: ChunkDecisionInput, sel: TileSelection) -> float:
    """Chunk QoE of an arbitrary selection under the acuity-aware model."""
    values = _value_matrix(inp, acuity_aware=True)
    lv = sel.levels[inp.visible]
    per_tile = values[np.arange(len(lv)), lv] if len(lv) else np.empty(0)
    sizes = inp.ladder.tile_bytes()
    return _chunk_qoe(per_tile, int(sizes[lv].sum()), inp)


def baseline_rate_utility(inp: ChunkDecisionInput,
                          out_frustum_weight: float = 0.1) -> TileSelection:
    """Utility-per-distance bit allocation over the whole object.

    Every tile gets a utility (1 inside the frustum, a small weight
    outside, both divided by distance) and, in descending utility order,
    the highest level that still fits a bandwidth budget of one chunk
    duration. All tiles are transmitted; acuity is ignored.
    """
    sizes = inp.ladder.tile_bytes()
    n = inp.ladder.tile_count
    budget = inp.bw_mbps * 1e6 / 8.0 * inp.ladder.gof_duration
    util = np.where(inp.visible, 1.0, out_frustum_weight) / np.maximum(inp.distances, 1e-9)
    order = np.argsort(-util, kind="stable")

    levels = np.zeros(n, dtype=np.int64)
    spent = int(sizes[0]) * n
    for ti in order:
        for lvl in range(inp.ladder.num_levels - 1, 0, -1):
            extra = int(sizes[lvl] - sizes[0])
            if spent + extra <= budget:
                levels[ti] = lvl
                spent += extra
                break
    return TileSelection(levels=levels, visible=inp.visible,
                         distances=inp.distances,
                         transmit=np.ones(n, dtype=bool))


def baseline_viewport_utility(inp: ChunkDecisionInput) -> TileSelection:
    """Frustum-aware QoE greedy without the acuity model.

    Shares the greedy engine but ranks levels by raw PSNR (no saturation,
    no boundary-density weight) and never prunes the ladder. Internally it
    trades quality against stalling only; given enough bandwidth it keeps
    pushing higher-quality tiles all the way to the top rung. The
    variation terms stay in the reported QoE, just not in this scheme's
    own objective (they are defined against the acuity-weighted quality
    scale, which an acuity-blind scheme cannot observe).
    """
    internal = replace(inp, weights=QoEWeights(p=inp.weights.p, q=0.0, r=0.0))
    values = _value_matrix(internal, acuity_aware=False)
    lv = _greedy(internal, values, max_level=inp.ladder.num_levels - 1)
    return _selection(inp, lv)


def default_distance_bands(ladder: QualityLadder, d0: float = 1.0) -> np.ndarray:
    """Distance thresholds for the banded scheme, one fewer than levels."""
    splits = np.array([1.0, 1.5, 2.0, 3.0, 4.5]) * d0
    return splits[: ladder.num_levels - 1]


def baseline_distance_tile(inp: ChunkDecisionInput, bands=None) -> TileSelection:
    """Fixed distance-to-level mapping for visible tiles.

    Tiles nearer than the first threshold get the top level, each band
    outward steps one level down, beyond the last threshold the lowest.
    """
    if bands is None:
        bands = default_distance_bands(inp.ladder)
    bands = np.asarray(bands, dtype=float)
    top = inp.ladder.num_levels - 1
    band_idx = np.searchsorted(bands, inp.distances, side="right")
    levels = np.maximum(top - band_idx, 0).astype(np.int64)
    levels[~inp.visible] = 0
    return TileSelection(levels=levels, visible=inp.visible, distances=inp.distances)
