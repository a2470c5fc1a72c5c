import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import oct_code
from pcprep.core import (
    Aabb,
    MortonCode,
    PcprepError,
    PointCloud,
    encode_array,
    hamming_distance,
    morton_decode,
    morton_encode,
    normalize_bounds,
    quantize,
)

UNIT = Aabb(np.zeros(3), 1.0)


def slow_encode(p, box, depth):
    """Bit-by-bit reference: per level, emit one X, Y and Z bit."""
    cells = []
    for axis in range(3):
        t = (p[axis] - box.min_corner[axis]) / box.edge
        cells.append(min(int(np.floor(t * 2**depth)), 2**depth - 1))
    bits = 0
    for level in range(depth - 1, -1, -1):
        for c in cells:
            bits = (bits << 1) | ((c >> level) & 1)
    return bits


class TestNormalizeBounds:
    def test_single_point(self):
        box = normalize_bounds(PointCloud([[0.0, 0.0, 0.0]]))
        assert np.array_equal(box.min_corner, [0, 0, 0])
        assert box.edge > 0
        assert box.contains([0, 0, 0])

    def test_max_axis_sets_edge(self):
        box = normalize_bounds(PointCloud([[0, 0, 0], [1, 2, 4]]))
        assert np.array_equal(box.min_corner, [0, 0, 0])
        assert box.edge == pytest.approx(4 * (1 + 1e-9), rel=1e-15)

    def test_uniform_containment(self, rng):
        xyz = rng.random((1000, 3))
        box = normalize_bounds(PointCloud(xyz))
        assert 0 < box.edge <= 1 + 1e-6
        assert np.all(xyz >= box.min_corner) and np.all(xyz < box.max_corner)

    def test_far_offset_still_contains(self):
        xyz = np.array([[1e12, 0, 0], [1e12 + 1e-3, 1e-3, 0]])
        box = normalize_bounds(PointCloud(xyz))
        assert all(box.contains(p) for p in xyz)

    def test_errors(self):
        with pytest.raises(PcprepError, match="empty input"):
            normalize_bounds(np.zeros((0, 3)))
        with pytest.raises(PcprepError, match="invalid coordinate"):
            normalize_bounds(np.array([[0.0, np.nan, 0.0]]))
        with pytest.raises(PcprepError, match="invalid coordinate"):
            PointCloud([[0.0, np.inf, 0.0]])


class TestMorton:
    @pytest.mark.parametrize("depth", [1, 5, 21])
    def test_min_corner_is_zero(self, depth):
        assert morton_encode([0, 0, 0], UNIT, depth).bits == 0

    def test_far_corner_all_ones(self):
        p = np.nextafter(np.ones(3), 0)
        assert str(morton_encode(p, UNIT, 2)) == "111111"

    def test_axis_order(self):
        assert morton_encode([0.6, 0.1, 0.1], UNIT, 1).bits == 0b100
        assert morton_encode([0.1, 0.6, 0.1], UNIT, 1).bits == 0b010
        assert morton_encode([0.1, 0.1, 0.6], UNIT, 1).bits == 0b001

    def test_quadtree_refined_code(self, letter_a):
        # the lone point of leaf 110011 carries 11001100 one level further down
        cloud, cells = letter_a
        box = normalize_bounds(cloud)
        p = cloud.xyz[cells.index("110011")]
        assert morton_encode(p, box, 3).bits == oct_code("110011")
        assert morton_encode(p, box, 4).bits == oct_code("11001100")

    def test_out_of_bounds(self):
        with pytest.raises(PcprepError, match="out of bounds"):
            morton_encode([1.0, 0.5, 0.5], UNIT, 3)
        with pytest.raises(PcprepError, match="out of bounds"):
            morton_encode([-1e-12, 0.5, 0.5], UNIT, 3)

    def test_depth_cap(self):
        with pytest.raises(PcprepError, match="depth exceeds code width"):
            morton_encode([0.5, 0.5, 0.5], UNIT, 22)

    def test_matches_bitwise_reference(self, rng):
        box = Aabb(np.array([-2.0, 1.0, 0.5]), 3.0)
        pts = box.min_corner + rng.random((500, 3)) * box.edge
        for depth in (1, 3, 8, 21):
            fast = encode_array(pts, box, depth)
            assert [int(c) for c in fast] == [slow_encode(p, box, depth) for p in pts]

    def test_decode_zero_code(self):
        corner, edge = morton_decode(MortonCode(0, 3), UNIT)
        assert np.array_equal(corner, [0, 0, 0]) and edge == 1 / 8

    def test_decode_high_octant(self):
        box = Aabb(np.array([1.0, 2.0, 3.0]), 2.0)
        corner, edge = morton_decode(MortonCode(0b111, 1), box)
        assert np.array_equal(corner, [2.0, 3.0, 4.0]) and edge == 1.0

    def test_round_trip_contains_point(self, rng):
        box = Aabb(np.array([-5.0, -5.0, -5.0]), 10.0)
        pts = box.min_corner + rng.random((10_000, 3)) * box.edge
        for p, depth in zip(pts, rng.integers(1, 22, len(pts))):
            corner, edge = morton_decode(morton_encode(p, box, int(depth)), box)
            assert np.all(p >= corner) and np.all(p < corner + edge)

    @given(st.integers(1, 12).flatmap(lambda d: st.tuples(st.just(d), st.integers(0, 2 ** (3 * d) - 1))))
    def test_decode_center_reencodes(self, case):
        depth, bits = case
        corner, edge = morton_decode(MortonCode(bits, depth), UNIT)
        assert morton_encode(corner + edge / 2, UNIT, depth).bits == bits

    @given(st.integers(2, 21).flatmap(lambda d: st.tuples(st.just(d), st.integers(0, 2 ** (3 * d) - 1))))
    def test_parent_is_truncation(self, case):
        depth, bits = case
        code = MortonCode(bits, depth)
        corner, edge = morton_decode(code, UNIT)
        assert morton_encode(corner + edge / 2, UNIT, depth - 1) == code.parent()

    def test_code_range_invariant(self):
        with pytest.raises(PcprepError):
            MortonCode(8, 1)

    def test_sort_groups_voxels_contiguously(self, rng):
        pts = rng.random((3000, 3)) ** 2  # skewed so depths differ in density
        box = normalize_bounds(pts)
        d = 6
        order = np.argsort(encode_array(pts, box, d), kind="stable")
        for level in range(1, d + 1):
            codes = encode_array(pts[order], box, level)
            change = np.flatnonzero(np.diff(codes)) + 1
            blocks = np.split(codes, change)
            assert len({int(b[0]) for b in blocks}) == len(blocks)


class TestHamming:
    def test_identical(self):
        assert hamming_distance(MortonCode(0b101101, 2), MortonCode(0b101101, 2)) == 0

    def test_quadtree_first_level(self):
        assert hamming_distance(MortonCode(oct_code("00"), 1), MortonCode(oct_code("11"), 1)) == 2

    def test_worked_codes(self):
        assert hamming_distance(MortonCode(0b000000, 2), MortonCode(0b110101, 2)) == 4

    def test_depth_mismatch(self):
        with pytest.raises(PcprepError, match="incomparable codes"):
            hamming_distance(MortonCode(0, 1), MortonCode(0, 2))

    @pytest.mark.parametrize("depth", [1, 2])
    def test_metric_axioms_exhaustive(self, depth):
        codes = np.arange(2 ** (3 * depth), dtype=np.uint64)
        d = np.bitwise_count(codes[:, None] ^ codes[None, :]).astype(int)
        assert np.array_equal(d, d.T)
        assert np.array_equal(d == 0, np.eye(len(codes), dtype=bool))
        # d[a, c] <= d[a, b] + d[b, c] for every triple
        assert np.all(d[:, None, :] <= d[:, :, None] + d[None, :, :])
        for a, b in itertools.product(range(len(codes)), repeat=2):
            if (a * 7 + b) % 97 == 0:
                assert d[a, b] == hamming_distance(MortonCode(a, depth), MortonCode(b, depth))


def test_quantize_boundary_goes_to_higher_cell():
    cells = quantize(np.array([[0.5, 0.25, 0.0]]), UNIT, 2)
    assert cells.tolist() == [[2, 1, 0]]


def test_point_cloud_rejects_bad_index():
    with pytest.raises(PcprepError):
        PointCloud(np.zeros((3, 3)), original_index=[0, 0, 1])
