"""Geometry primitives, bounding cubes and Morton (m-code) machinery.

Codes interleave one bit per axis per level, X first, then Y, then Z, with the
root-adjacent level in the most significant bits.  A code word is 64 bits wide,
so the deepest representable level is 21.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

MAX_DEPTH = 21
CODE_BITS = 64
BOX_PAD = 1e-9


class PcprepError(ValueError):
    """Raised for invalid inputs anywhere in the toolkit."""


@dataclass
class PointCloud:
    """Ordered points with optional per-point features.

    ``xyz`` is (N, 3) float64, ``features`` is (N, F) float64 or None and
    ``original_index`` records each row's position in the raw input order.
    """

    xyz: np.ndarray
    features: Optional[np.ndarray] = None
    original_index: Optional[np.ndarray] = None

    def __post_init__(self):
        xyz = np.asarray(self.xyz, dtype=np.float64)
        if xyz.ndim != 2 or xyz.shape[1] != 3:
            raise PcprepError(f"expected (N, 3) coordinates, got shape {xyz.shape}")
        if len(xyz) == 0:
            raise PcprepError("empty input")
        if not np.isfinite(xyz).all():
            raise PcprepError("invalid coordinate")
        self.xyz = xyz
        if self.features is not None:
            feats = np.asarray(self.features, dtype=np.float64)
            if feats.ndim == 1:
                feats = feats[:, None]
            if len(feats) != len(xyz):
                raise PcprepError("feature rows do not match point count")
            self.features = feats
        if self.original_index is None:
            self.original_index = np.arange(len(xyz), dtype=np.int64)
        else:
            idx = np.asarray(self.original_index, dtype=np.int64)
            if idx.shape != (len(xyz),) or not np.array_equal(np.sort(idx), np.arange(len(xyz))):
                raise PcprepError("original_index must be a permutation of 0..N-1")
            self.original_index = idx

    def __len__(self) -> int:
        return len(self.xyz)

    @property
    def feature_dim(self) -> int:
        return 0 if self.features is None else self.features.shape[1]

    def take(self, positions) -> "PointCloud":
        """Sub-cloud at ``positions``, relabelled 0..len-1 in the given order."""
        positions = np.asarray(positions, dtype=np.int64)
        feats = None if self.features is None else self.features[positions]
        return PointCloud(self.xyz[positions], feats)


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned cube ``[min_corner, min_corner + edge)``."""

    min_corner: np.ndarray = field(compare=False)
    edge: float

    @property
    def max_corner(self) -> np.ndarray:
        return self.min_corner + self.edge

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=np.float64)
        return bool(np.all(p >= self.min_corner) and np.all(p < self.max_corner))

    def __eq__(self, other):
        return (
            isinstance(other, Aabb)
            and self.edge == other.edge
            and np.array_equal(self.min_corner, other.min_corner)
        )

    def __hash__(self):
        return hash((self.edge, tuple(self.min_corner.tolist())))


@dataclass(frozen=True, order=True)
class MortonCode:
    bits: int
    depth: int

    def __post_init__(self):
        if not 1 <= self.depth <= MAX_DEPTH:
            raise PcprepError("depth exceeds code width")
        if not 0 <= self.bits < (1 << (3 * self.depth)):
            raise PcprepError(f"code {self.bits} does not fit depth {self.depth}")

    def parent(self) -> "MortonCode":
        if self.depth == 1:
            raise PcprepError("root-level codes have no parent code")
        return MortonCode(self.bits >> 3, self.depth - 1)

    def prefix(self, level: int) -> int:
        """Bits of the enclosing voxel at ``level`` (0 is the root)."""
        return self.bits >> (3 * (self.depth - level))

    def __str__(self) -> str:
        return format(self.bits, f"0{3 * self.depth}b")


def check_depth(depth: int) -> int:
    if not isinstance(depth, (int, np.integer)) or depth < 1:
        raise PcprepError("depth must be a positive integer")
    if 3 * depth > CODE_BITS or depth > MAX_DEPTH:
        raise PcprepError("depth exceeds code width")
    return int(depth)


def normalize_bounds(cloud: PointCloud | np.ndarray) -> Aabb:
    """Tight cube on the widest axis, padded on the max side.

    Every input point satisfies ``min <= p < min + edge``.
    """
    xyz = cloud.xyz if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)
    if xyz.size == 0:
        raise PcprepError("empty input")
    if not np.isfinite(xyz).all():
        raise PcprepError("invalid coordinate")
    lo = xyz.min(axis=0)
    hi = xyz.max(axis=0)
    extent = float(np.max(hi - lo))
    if extent > 0:
        edge = extent * (1.0 + BOX_PAD)
    else:
        edge = BOX_PAD * max(1.0, float(np.max(np.abs(lo))))
    # large offsets can swallow the relative pad; widen until containment holds
    while np.any(hi >= lo + edge):
        edge = edge + float(np.max(np.spacing(np.abs(hi))))
    return Aabb(lo.copy(), float(edge))


def unit_coords(xyz: np.ndarray, box: Aabb) -> np.ndarray:
    """Coordinates scaled into [0, 1) relative to ``box``.

    All quantization goes through this one expression so that cells computed
    at different depths agree exactly (scaling by 2**d is exact in binary).
    """
    return (np.asarray(xyz, dtype=np.float64) - box.min_corner) / box.edge


def quantize(xyz: np.ndarray, box: Aabb, depth: int) -> np.ndarray:
    """Integer cell coordinates (N, 3) at ``depth``; floor on half-open cells."""
    depth = check_depth(depth)
    xyz = np.atleast_2d(np.asarray(xyz, dtype=np.float64))
    if np.any(xyz < box.min_corner) or np.any(xyz >= box.max_corner):
        raise PcprepError("out of bounds")
    side = 1 << depth
    cells = np.floor(unit_coords(xyz, box) * side).astype(np.int64)
    return np.clip(cells, 0, side - 1).astype(np.uint64)


def _spread3(v: np.ndarray) -> np.ndarray:
    # 21-bit integer -> bits placed every third position
    v = v.astype(np.uint64) & np.uint64(0x1FFFFF)
    v = (v | (v << np.uint64(32))) & np.uint64(0x1F00000000FFFF)
    v = (v | (v << np.uint64(16))) & np.uint64(0x1F0000FF0000FF)
    v = (v | (v << np.uint64(8))) & np.uint64(0x100F00F00F00F00F)
    v = (v | (v << np.uint64(4))) & np.uint64(0x10C30C30C30C30C3)
    v = (v | (v << np.uint64(2))) & np.uint64(0x1249249249249249)
    return v


def _compact3(v: np.ndarray) -> np.ndarray:
    v = v.astype(np.uint64) & np.uint64(0x1249249249249249)
    v = (v | (v >> np.uint64(2))) & np.uint64(0x10C30C30C30C30C3)
    v = (v | (v >> np.uint64(4))) & np.uint64(0x100F00F00F00F00F)
    v = (v | (v >> np.uint64(8))) & np.uint64(0x1F0000FF0000FF)
    v = (v | (v >> np.uint64(16))) & np.uint64(0x1F00000000FFFF)
    v = (v | (v >> np.uint64(32))) & np.uint64(0x1FFFFF)
    return v


def interleave(cells: np.ndarray) -> np.ndarray:
    """Pack (N, 3) cell coordinates into codes, X in the high bit of each triple."""
    cells = np.atleast_2d(np.asarray(cells, dtype=np.uint64))
    return (
        (_spread3(cells[:, 0]) << np.uint64(2))
        | (_spread3(cells[:, 1]) << np.uint64(1))
        | _spread3(cells[:, 2])
    )


def deinterleave(codes) -> np.ndarray:
    codes = np.atleast_1d(np.asarray(codes, dtype=np.uint64))
    return np.stack(
        [_compact3(codes >> np.uint64(2)), _compact3(codes >> np.uint64(1)), _compact3(codes)],
        axis=1,
    )


def encode_array(xyz: np.ndarray, box: Aabb, depth: int) -> np.ndarray:
    """Vectorised :func:`morton_encode` returning raw uint64 codes."""
    return interleave(quantize(xyz, box, depth))


def morton_encode(p: Sequence[float], box: Aabb, depth: int) -> MortonCode:
    code = encode_array(np.asarray(p, dtype=np.float64)[None, :], box, depth)[0]
    return MortonCode(int(code), int(depth))


def cell_box(bits: int, depth: int, box: Aabb) -> tuple[np.ndarray, float]:
    """Min corner and edge of the voxel with code ``bits`` at ``depth``."""
    cell = deinterleave(np.uint64(bits))[0].astype(np.float64)
    edge = box.edge / (1 << depth)
    return box.min_corner + cell * edge, edge


def morton_decode(code: MortonCode, box: Aabb) -> tuple[np.ndarray, float]:
    """Voxel (min corner, edge) addressed by ``code`` inside ``box``."""
    return cell_box(code.bits, code.depth, box)


def hamming_distance(a: MortonCode, b: MortonCode) -> int:
    if a.depth != b.depth:
        raise PcprepError("incomparable codes")
    return (a.bits ^ b.bits).bit_count()


def popcount(v: np.ndarray) -> np.ndarray:
    return np.bitwise_count(np.asarray(v, dtype=np.uint64)).astype(np.int64)
