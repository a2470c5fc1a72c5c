import numpy as np
import pytest

from pcprep.core import PcprepError, PointCloud
from pcprep.io import (
    FrameSource,
    generate,
    parse_generator,
    read_bin_f32x4,
    read_cloud,
    read_xyz,
    write_bin_f32x4,
    write_xyz,
)
from pcprep.octree import build_index


def test_xyz_with_comments_and_features(tmp_path):
    p = tmp_path / "a.xyz"
    p.write_text("# header\n0 0 0 1.5\n\n1 2 3 2.5\n")
    c = read_xyz(p)
    assert c.xyz.tolist() == [[0, 0, 0], [1, 2, 3]]
    assert c.features.tolist() == [[1.5], [2.5]]


@pytest.mark.parametrize(
    "text, match",
    [("", "empty input"), ("# only\n", "empty input"), ("0 0\n", ":1:"),
     ("0 0 0\n1 1 1 1\n", ":2:"), ("0 0 x\n", ":1:"), ("0 nan 0\n", "invalid coordinate")],
)
def test_xyz_errors(tmp_path, text, match):
    p = tmp_path / "bad.xyz"
    p.write_text(text)
    with pytest.raises(PcprepError, match=match):
        read_xyz(p)


def test_xyz_round_trip_is_exact(tmp_path, rng):
    c = PointCloud(rng.normal(size=(50, 3)) * 1e3, rng.random((50, 2)))
    write_xyz(c, tmp_path / "c.xyz")
    back = read_xyz(tmp_path / "c.xyz")
    assert np.array_equal(back.xyz, c.xyz) and np.array_equal(back.features, c.features)


def test_bin_round_trip(tmp_path, rng):
    c = PointCloud(rng.random((33, 3)).astype(np.float32), rng.random(33).astype(np.float32))
    write_bin_f32x4(c, tmp_path / "f.bin")
    assert (tmp_path / "f.bin").stat().st_size == 33 * 16
    back = read_cloud(tmp_path / "f.bin")
    assert np.array_equal(back.xyz, c.xyz) and np.array_equal(back.features, c.features)


def test_bin_errors(tmp_path):
    (tmp_path / "e.bin").write_bytes(b"")
    with pytest.raises(PcprepError, match="empty input"):
        read_bin_f32x4(tmp_path / "e.bin")
    (tmp_path / "t.bin").write_bytes(b"\0" * 20)
    with pytest.raises(PcprepError, match="truncated record"):
        read_bin_f32x4(tmp_path / "t.bin")


def test_frame_source_dispatch(tmp_path):
    assert FrameSource.for_path("x.BIN").format == "BIN_F32X4"
    assert FrameSource.for_path("x.xyz").format == "XYZ_ASCII"
    with pytest.raises(PcprepError):
        FrameSource("PLY", tmp_path).read()


def test_generators_deterministic():
    a = generate("gaussian_mixture", 500, {"k": 3}, 7)
    b = generate("gaussian_mixture", 500, {"k": 3}, 7)
    assert np.array_equal(a.xyz, b.xyz)
    u = generate("uniform", 100, None, 1)
    assert u.xyz.min() >= 0 and u.xyz.max() < 1


def test_mixture_builds_deeper_tree():
    u = build_index(generate("uniform", 4096, None, 0))
    g = build_index(generate("gaussian_mixture", 4096, {"k": 4, "sigma": 0.005}, 0))
    assert g.depth > u.depth


@pytest.mark.parametrize("params", [{"k": 0}, {"sigma": -1.0}, {"k": 2, "weights": [0.5, 0.6]},
                                    {"k": 2, "centers": [[0, 0, 0]]}])
def test_mixture_param_errors(params):
    with pytest.raises(PcprepError):
        generate("gaussian_mixture", 10, params)


def test_parse_generator():
    assert parse_generator("uniform:1e4") == ("uniform", 10000, {})
    assert parse_generator("gaussian_mixture:64:k=3,sigma=0.5") == ("gaussian_mixture", 64, {"k": 3, "sigma": 0.5})
    for bad in ("uniform", "uniform:x", "uniform:4:k"):
        with pytest.raises(PcprepError):
            parse_generator(bad)
    with pytest.raises(PcprepError):
        generate("cube", 4)
