"""Tile-based volumetric video streaming: acuity model, QoE, selection, sim."""

from .acuity import (AcuityParams, ParametricDensityMap, boundary_pld,
                     distinguishable_voxel, effective_ppi, eta_star_at_distance,
                     ppi_at, ppi_initial)
from .abr import (ChunkDecisionInput, ExhaustiveSizeError,
                  baseline_distance_tile, baseline_rate_utility,
                  baseline_viewport_utility, default_distance_bands,
                  qoe_of_selection, select_exact, select_greedy)
from .core import (QualityLadder, QualityLevel, TileSelection, default_ladder,
                   full_chunk_size, tile_size, tile_size_exact)
from .geometry import (Frustum, Pose, TileBox, build_frustum, content_distance,
                       look_at, make_tile_grid, tile_distance, tile_visibility,
                       visibility_mask)
from .predictor import History, predict_bandwidth, predict_pose
from .qoe import (PsnrModel, QoEBreakdown, QoEWeights, indicator,
                  perceived_quality, qoe_total, rebuffer_time,
                  spatial_variation, temporal_variation, transmission_time)
from .sim import ChunkReport, SessionConfig, SessionResult, run_experiment, run_session
from .traceio import (BW_PROFILES, SCHEMES, TRACE_PROFILES, SessionTraces,
                      TraceFormatError, generate_synthetic_traces, load_config,
                      parse_bandwidth_trace, parse_pose_trace)
from .voxelizer import (DensityMap, build_density_map, density_for_voxel,
                        occupied_voxel_count, read_xyz, voxel_downsample)

__version__ = "0.1.0"
