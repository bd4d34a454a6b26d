import json

import numpy as np

from volustream.cli import main


def test_acuity_table_monotone(capsys):
    assert main(["acuity", "--d0", "1", "--ppi-device", "4000"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "d_m,eta_star"
    rows = [tuple(float(x) for x in line.split(",")) for line in lines[1:]]
    ds = [r[0] for r in rows]
    etas = [r[1] for r in rows]
    assert ds == sorted(ds)
    assert all(b <= a + 1e-12 for a, b in zip(etas, etas[1:]))


def test_missing_config_is_input_error(capsys):
    rc = main(["run", "--config", "/nonexistent/cfg.json"])
    assert rc == 1
    assert "error" in capsys.readouterr().err


def test_run_on_synthetic_config(tmp_path, capsys):
    cfg = {"traces": {"synthetic": {"profile": "far-orbit", "seed": 2,
                                    "duration_s": 3.0, "bw_profile": "medium"}}}
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    rc = main(["run", "--config", str(cfg_path), "--out", str(out)])
    assert rc == 0
    assert (out / "chunks.csv").exists()
    assert (out / "summary.json").exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["chunks"] == 9


def test_run_without_traces_fails(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text("{}")
    assert main(["run", "--config", str(cfg_path)]) == 1


def test_run_scheme_override(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(
        {"traces": {"synthetic": {"duration_s": 2.0}}}))
    out = tmp_path / "out"
    rc = main(["run", "--config", str(cfg_path), "--scheme", "distance_tile",
               "--out", str(out), "--format", "json"])
    assert rc == 0
    assert json.loads((out / "summary.json").read_text())["scheme"] == "distance_tile"


def test_traces_gen_writes_files(tmp_path):
    out = tmp_path / "traces"
    rc = main(["traces", "gen", "--profile", "close-in", "--seed", "5",
               "--duration", "3", "--out", str(out)])
    assert rc == 0
    assert (out / "bandwidth.csv").exists()
    assert (out / "pose.csv").exists()
    meta = json.loads((out / "meta.json").read_text())
    assert meta["profile"] == "close-in"


def test_ladder_builds_density_map(tmp_path):
    rng = np.random.default_rng(0)
    pts = rng.uniform(0.0, 0.5, size=(3000, 3))
    cloud = tmp_path / "cloud.xyz"
    cloud.write_text("\n".join(" ".join(f"{c:.6f}" for c in p) for p in pts))
    out = tmp_path / "map.csv"
    rc = main(["ladder", "--cloud", str(cloud), "--v0", "0.02",
               "--doublings", "3", "--out", str(out)])
    assert rc == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "voxel_size_m,eta"
    assert len(lines) == 5


def test_compare_synthetic(tmp_path, capsys):
    out = tmp_path / "cmp"
    rc = main(["compare", "--seeds", "1", "--profile", "far-orbit",
               "--bw-profile", "medium", "--out", str(out)])
    assert rc == 0
    lines = (out / "comparison.csv").read_text().strip().splitlines()
    assert len(lines) == 1 + 4  # header + 4 schemes
    assert (out / "chunk_metrics.csv").exists()
