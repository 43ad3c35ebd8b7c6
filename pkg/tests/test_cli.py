import json

import pytest

from fresnelwave.cli import main

VOLATILE = {"timestamp_utc", "argv", "out"}


def _strip(obj):
    if isinstance(obj, dict):
        return {k: _strip(v) for k, v in obj.items() if k not in VOLATILE}
    if isinstance(obj, list):
        return [_strip(v) for v in obj]
    return obj


def test_identities_exit_zero(tmp_path):
    assert main(["identities", "--samples", "300", "--seed", "2", "--out", str(tmp_path)]) == 0
    env = json.loads((tmp_path / "identities.json").read_text())
    assert env["passed"] is True


@pytest.mark.parametrize("argv", [
    ["identities", "--eps", "1,x,3"],
    ["identities", "--eps", "1,-2,3"],
    ["nonsense"],
    ["probe"],
    ["geometry", "--cmd", "mesh", "--h", "-0.1"],
])
def test_validation_errors_exit_one(tmp_path, argv):
    assert main(argv + ["--out", str(tmp_path)] if argv[0] != "nonsense" else argv) == 1


def test_runs_are_deterministic(tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / str(k)
        assert main(["identities", "--samples", "200", "--seed", "5", "--random-materials", "--out", str(d)]) == 0
        outs.append(_strip(json.loads((d / "identities.json").read_text())))
    assert outs[0] == outs[1]


def test_config_file_and_threads(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"params": {"samples": 100}, "seed": 3}))
    assert main(["identities", "--config", str(cfg), "--threads", "1", "--out", str(tmp_path)]) == 0
    env = json.loads((tmp_path / "identities.json").read_text())
    assert env["config"]["seed"] == 3
    assert env["reports"][0]["parameters"]["samples"] == 100


def test_mesh_export_and_report(tmp_path):
    assert main(["geometry", "--cmd", "mesh", "--h", "0.35", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "geometry_mesh.json").exists()
    assert list(tmp_path.glob("*.obj")) and list(tmp_path.glob("*.csv"))
    plots = tmp_path / "plots"
    assert main(["report", "--in", str(tmp_path / "geometry_mesh.json"), "--out", str(plots)]) == 0
    assert (plots / "fits.csv").exists()
