"""Command line entry point.

Subcommands:
  run        simulate one session from a config file
  compare    run the scheme matrix over one trace set or synthetic seeds
  ladder     build an empirical density map from a point cloud
  acuity     print the boundary-density-versus-distance table
  traces gen write synthetic bandwidth and pose traces

Exit codes: 0 success, 1 input error, 2 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import sim, traceio
from .acuity import AcuityParams, ParametricDensityMap, eta_star_at_distance
from .voxelizer import DensityMap, build_density_map, read_xyz


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON config file")
    p.add_argument("--scheme", choices=traceio.SCHEMES, help="override config scheme")
    p.add_argument("--seed", type=int, help="override config seed")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="volustream",
        description="Tile-based volumetric video streaming simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate one session")
    _add_common(p_run)

    p_cmp = sub.add_parser("compare", help="compare schemes on one trace set")
    _add_common(p_cmp)
    p_cmp.add_argument("--seeds", type=int, default=1,
                       help="number of synthetic seeds when no trace files are given")
    p_cmp.add_argument("--profile", choices=traceio.TRACE_PROFILES, default="far-orbit")
    p_cmp.add_argument("--bw-profile", choices=sorted(traceio.BW_PROFILES), default="medium")

    p_lad = sub.add_parser("ladder", help="build a density map from a cloud")
    p_lad.add_argument("--cloud", type=Path, required=True, help="ASCII xyz file")
    p_lad.add_argument("--v0", type=float, required=True, help="source voxel size, m")
    p_lad.add_argument("--doublings", type=int, default=5,
                       help="table covers v0 * 2^k for k = 0..doublings")
    p_lad.add_argument("--out", type=Path, default=Path("density_map.csv"))

    p_acu = sub.add_parser("acuity", help="print eta* versus distance")
    p_acu.add_argument("--d0", type=float, default=1.0)
    p_acu.add_argument("--v0", type=float, default=0.002)
    p_acu.add_argument("--ppi-device", type=float, default=4000.0)
    p_acu.add_argument("--theta-arcmin", type=float, default=1.0)
    p_acu.add_argument("--alpha", type=float, default=2.0,
                       help="parametric density map exponent")
    p_acu.add_argument("--density-map", type=Path, help="tabulated map CSV instead")
    p_acu.add_argument("--d-min", type=float, default=0.25)
    p_acu.add_argument("--d-max", type=float, default=4.0)
    p_acu.add_argument("--steps", type=int, default=16)

    p_tr = sub.add_parser("traces", help="trace utilities")
    tr_sub = p_tr.add_subparsers(dest="traces_command", required=True)
    p_gen = tr_sub.add_parser("gen", help="generate synthetic traces")
    p_gen.add_argument("--profile", choices=traceio.TRACE_PROFILES, default="far-orbit")
    p_gen.add_argument("--bw-profile", choices=sorted(traceio.BW_PROFILES), default="medium")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--duration", type=float, default=15.0)
    p_gen.add_argument("--d0", type=float, default=1.0)
    p_gen.add_argument("--out", type=Path, default=Path("traces"))

    return parser


def _load_session(args) -> tuple[sim.SessionConfig, dict, Path | None]:
    base_dir = args.config.parent if args.config else None
    cfg = traceio.load_config(args.config)
    if args.scheme:
        cfg["scheme"] = args.scheme
    if args.seed is not None:
        cfg["seed"] = args.seed
        if "traces" in cfg and "synthetic" in cfg["traces"]:
            cfg["traces"]["synthetic"]["seed"] = args.seed
    return sim.SessionConfig.from_dict(cfg, base_dir), cfg, base_dir


def _cmd_run(args) -> int:
    session_cfg, cfg, base_dir = _load_session(args)
    if "traces" not in cfg:
        print("error: config needs a 'traces' section (files or synthetic)", file=sys.stderr)
        return 1
    traces = traceio.load_traces_cfg(cfg, base_dir)
    result = sim.run_session(session_cfg, traces)
    paths = sim.write_reports(args.out, result, fmt=args.format)
    summ = result.summary()
    print(f"{session_cfg.scheme}: {summ['chunks']} chunks, "
          f"qoe={summ['total_qoe']:.3f}, rebuffer={summ['total_rebuffer_s']:.3f}s, "
          f"bytes={summ['total_bytes']}")
    for p in paths:
        print(f"wrote {p}")
    return 0


def _cmd_compare(args) -> int:
    session_cfg, cfg, base_dir = _load_session(args)
    if "traces" in cfg:
        labeled = [("trace", traceio.load_traces_cfg(cfg, base_dir))]
    else:
        seed0 = cfg.get("seed", 0)
        labeled = [
            (f"{args.profile}-s{seed0 + k}",
             traceio.generate_synthetic_traces(args.profile, seed0 + k,
                                               bw_profile=args.bw_profile,
                                               d0=session_cfg.acuity.d0))
            for k in range(args.seeds)
        ]
    result = sim.run_experiment(session_cfg, labeled)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    import csv as _csv
    cols = ["label", "scheme", "chunks", "total_qoe", "qoe_norm", "mean_q1_db",
            "total_rebuffer_s", "mean_q3_db", "mean_q4_db", "total_bytes",
            "startup_delay_s"]
    with open(out / "comparison.csv", "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(cols)
        for row in result["rows"]:
            writer.writerow([sim._fmt(row[c]) for c in cols])
    with open(out / "chunk_metrics.csv", "w", newline="") as fh:
        writer = _csv.writer(fh)
        ccols = ["label", "scheme", "chunk", "q1_db", "q2_s", "q3_db", "q4_db",
                 "qoe", "bytes", "tau_s", "eta_star", "d_t", "visible"]
        writer.writerow(ccols)
        for row in result["chunk_rows"]:
            writer.writerow([sim._fmt(row[c]) for c in ccols])

    for row in result["rows"]:
        print(f"{row['label']:>18} {row['scheme']:>17}: qoe={row['total_qoe']:>10.3f} "
              f"norm={row['qoe_norm']:.3f} rebuf={row['total_rebuffer_s']:.3f}s")
    print(f"wrote {out / 'comparison.csv'}")
    return 0


def _cmd_ladder(args) -> int:
    cloud = read_xyz(args.cloud)
    grid = args.v0 * (2.0 ** np.arange(args.doublings + 1))
    dmap = build_density_map(cloud, args.v0, grid)
    dmap.save(args.out)
    print(f"wrote {args.out} ({len(dmap.voxel_sizes)} rows, "
          f"eta range {dmap.etas[-1]:.4g}..1)")
    return 0


def _cmd_acuity(args) -> int:
    params = AcuityParams(d0=args.d0, v0=args.v0, ppi_device=args.ppi_device,
                          theta_arcmin=args.theta_arcmin)
    if args.density_map:
        dmap = DensityMap.load(args.density_map)
    else:
        dmap = ParametricDensityMap(v0=args.v0, alpha=args.alpha)
    print("d_m,eta_star")
    for d in np.linspace(args.d_min, args.d_max, args.steps):
        eta = eta_star_at_distance(float(d), params, dmap)
        print(f"{d:.4f},{eta:.6f}")
    return 0


def _cmd_traces_gen(args) -> int:
    traces = traceio.generate_synthetic_traces(
        args.profile, args.seed, duration_s=args.duration,
        bw_profile=args.bw_profile, d0=args.d0)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    traceio.write_bandwidth_trace(out / "bandwidth.csv", traces.bw_t, traces.bw_mbps)
    traceio.write_pose_trace(out / "pose.csv", traces.poses)
    meta = {
        "profile": args.profile, "bw_profile": args.bw_profile, "seed": args.seed,
        "content_center": traces.content_center.tolist(),
        "content_bbox": [traces.bbox_min.tolist(), traces.bbox_max.tolist()],
    }
    with open(out / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    print(f"wrote {out / 'bandwidth.csv'}, {out / 'pose.csv'}, {out / 'meta.json'}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "compare": _cmd_compare,
        "ladder": _cmd_ladder,
        "acuity": _cmd_acuity,
    }
    try:
        if args.command == "traces":
            return _cmd_traces_gen(args)
        return handlers[args.command](args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # internal invariant violation
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
