import json
import subprocess
import sys

import numpy as np
import pytest

from pcprep.cli import PRESETS, main, strip_timings
from pcprep.core import PointCloud
from pcprep.io import write_xyz


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, (json.loads(out.out) if code == 0 and out.out else None), out.err


def test_pipeline_strict_verify(capsys):
    code, rep, err = run(["pipeline", "--gen", "uniform:2000", "--k", "256", "--gather", "veg-knn:16",
                          "--mode", "strict", "--verify", "--centrals", "32"], capsys)
    assert code == 0
    assert rep["gathering"]["equivalence"] is True and rep["gathering"]["recall"] == 1.0
    assert rep["feature_map"]["shape"] == [32, 16, 3]
    assert rep["sampling"]["counters"]["point_reads"] == 256
    assert "savings vs FPS" in err


def test_pipeline_k_equals_n(tmp_path, capsys, rng):
    write_xyz(PointCloud(rng.random((16, 3))), tmp_path / "p.xyz")
    code, rep, _ = run(["pipeline", "--in", str(tmp_path / "p.xyz"), "--k", "16", "--emit-picks"], capsys)
    assert code == 0
    assert sorted(rep["sampling"]["picks_original_index"]) == list(range(16))


def test_preset_sets_k(capsys):
    code, rep, _ = run(["pipeline", "--gen", "uniform:3000", "--preset", "modelnet40", "--sample", "rs"], capsys)
    assert code == 0 and rep["sampling"]["K"] == PRESETS["modelnet40"] == 1024


def test_ball_pipeline_fills_rows(capsys):
    code, rep, _ = run(["pipeline", "--gen", "uniform:1000", "--k", "200", "--gather", "veg-ball:8",
                        "--radius", "0.1", "--verify"], capsys)
    assert code == 0 and rep["gathering"]["equivalence"] is True
    assert rep["feature_map"]["shape"] == [128, 8, 3]


@pytest.mark.parametrize("argv", [
    ["pipeline", "--k", "4"],
    ["pipeline", "--gen", "uniform:10"],
    ["pipeline", "--gen", "uniform:10", "--k", "4", "--gather", "veg-ball:4"],
    ["pipeline", "--gen", "uniform:10", "--k", "4", "--gather", "kd-tree:4"],
    ["bench", "--gen", "uniform:10", "--k", "4", "--methods", "magic"],
    ["pipeline", "--gen", "uniform:10", "--k", "4", "--workers", "0"],
])
def test_usage_errors_exit_2(argv, capsys):
    with pytest.raises(SystemExit) as e:
        main(argv)
    assert e.value.code == 2


def test_data_errors_exit_1(tmp_path, capsys):
    (tmp_path / "t.bin").write_bytes(b"\0" * 17)
    assert main(["pipeline", "--in", str(tmp_path / "t.bin"), "--k", "1"])== 1
    assert "truncated record" in capsys.readouterr().err
    assert main(["pipeline", "--gen", "uniform:10", "--k", "11"]) == 1
    assert "sample larger than cloud" in capsys.readouterr().err


def test_determinism_with_workers(tmp_path, capsys):
    reports, blobs = [], []
    for i, workers in enumerate(("1", "8")):
        d = tmp_path / str(i)
        d.mkdir()
        argv = ["pipeline", "--gen", "gaussian_mixture:3000:k=3", "--k", "300", "--gather", "veg-knn:16",
                "--mode", "semi-approx", "--rng-seed", "5", "--workers", workers,
                "--export-index", str(d / "idx.pcot"), "--export-featuremap", str(d / "fm.bin"),
                "--out", str(d / "r.json")]
        assert main(argv) == 0
        rep = strip_timings(json.loads((d / "r.json").read_text()))
        rep["config"].pop("workers")
        for key in ("export_index", "export_featuremap"):
            rep["config"].pop(key)
        reports.append(rep)
        blobs.append([(d / n).read_bytes() for n in ("idx.pcot", "fm.bin", "fm.bin.json")])
    assert reports[0] == reports[1]
    assert blobs[0] == blobs[1]


def test_bench_summary(capsys):
    code, rep, _ = run(["bench", "--gen", "uniform:4000", "--k", "64", "--methods", "fps,ois,rs",
                        "--frames", "2", "--gather", "veg-knn:32", "--mode", "paper", "--verify",
                        "--centrals", "16"], capsys)
    assert code == 0
    s = rep["summary"]
    assert s["ois"]["savings_ratio_median"] == pytest.approx(64 * 4000 / 4064)
    assert s["ois"]["reported_band"] == [1700.0, 7900.0]
    assert len(s["gathering"]["sort_candidates"]["values"]) == 32
    assert [f["rng_seed"] for f in rep["frames"]] == [0, 1]


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "pcprep", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and "pcprep" in out.stdout
