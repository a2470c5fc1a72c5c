"""Octree index over an SFC-reordered copy of a point cloud.

The build computes one fine (depth-21) code per point in a single sweep over
the raw data, stable-sorts by ``(code, original_index)`` and derives the node
table from code prefixes.  Because children are split on code prefixes, every
node's subtree owns one contiguous range of the reordered array.

Nodes are numbered breadth-first with the root at 0.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Optional

import numpy as np

from .core import (
    MAX_DEPTH,
    Aabb,
    MortonCode,
    PcprepError,
    PointCloud,
    deinterleave,
    encode_array,
    normalize_bounds,
    popcount,
)
from .instrumentation import AccessCounters

FORMAT_MAGIC = b"PCOT"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class OctreeConfig:
    max_depth: int = 12
    leaf_capacity: int = 8

    def validate(self) -> None:
        if not 1 <= self.max_depth <= MAX_DEPTH:
            raise PcprepError("depth exceeds code width")
        if self.leaf_capacity < 1:
            raise PcprepError("leaf_capacity must be >= 1")


@dataclass(frozen=True)
class NodeRecord:
    code: int  # prefix bits at `level`; the root is 0 at level 0
    level: int
    child_mask: int
    children: tuple  # 8 slots, -1 where the octant is empty
    start: int  # subtree range in the reordered array
    end: int
    parent: int

    @property
    def is_leaf(self) -> bool:
        return self.child_mask == 0

    @property
    def leaf_range(self) -> Optional[tuple[int, int]]:
        return (self.start, self.end) if self.is_leaf else None

    @property
    def morton(self) -> MortonCode:
        return MortonCode(self.code, self.level)

    def label(self) -> str:
        return format(self.code, f"0{3 * self.level}b") if self.level else "root"


class Located(NamedTuple):
    node: int
    empty_region: bool


@dataclass
class OctreeIndex:
    nodes: list
    depth: int
    reordered: PointCloud
    perm: np.ndarray
    box: Aabb
    codes: np.ndarray  # depth-21 code per reordered point
    config: OctreeConfig = field(default_factory=OctreeConfig)
    build_stats: AccessCounters = field(default_factory=AccessCounters)

    def __post_init__(self):
        self.depth = int(self.depth)
        n = len(self.nodes)
        self.node_code = np.array([nd.code for nd in self.nodes], dtype=np.uint64)
        self.node_level = np.array([nd.level for nd in self.nodes], dtype=np.int64)
        self.node_start = np.array([nd.start for nd in self.nodes], dtype=np.int64)
        self.node_end = np.array([nd.end for nd in self.nodes], dtype=np.int64)
        self.node_parent = np.array([nd.parent for nd in self.nodes], dtype=np.int64)
        self.node_children = np.array([nd.children for nd in self.nodes], dtype=np.int64).reshape(n, 8)
        leaves = [i for i, nd in enumerate(self.nodes) if nd.is_leaf]
        leaves.sort(key=lambda i: self.nodes[i].start)
        self.leaves = np.array(leaves, dtype=np.int64)
        # each leaf owns a block of depth-`depth` cells: [lo, hi] per axis
        shift = self.depth - self.node_level[self.leaves]
        base = deinterleave(self.node_code[self.leaves]).astype(np.int64)
        self.leaf_lo = base << shift[:, None]
        self.leaf_hi = self.leaf_lo + (np.int64(1) << shift)[:, None] - 1
        self.leaf_of_point = np.empty(len(self.perm), dtype=np.int64)
        for li, leaf in enumerate(self.leaves):
            self.leaf_of_point[self.node_start[leaf]:self.node_end[leaf]] = li

    @property
    def n_points(self) -> int:
        return len(self.perm)

    @property
    def leaf_edge(self) -> float:
        return self.box.edge / (1 << self.depth)

    def depth_codes(self, depth: Optional[int] = None) -> np.ndarray:
        """Per-point codes truncated to ``depth`` (defaults to the index depth)."""
        d = self.depth if depth is None else depth
        return self.codes >> np.uint64(3 * (MAX_DEPTH - d))

    def leaf_points(self, node: int) -> range:
        nd = self.nodes[node]
        return range(nd.start, nd.end)

    def point_cells(self, positions) -> np.ndarray:
        return deinterleave(self.depth_codes()[np.asarray(positions, dtype=np.int64)]).astype(np.int64)

    def stats(self) -> dict:
        n_leaves = len(self.leaves)
        return {
            "depth": self.depth,
            "nodes": len(self.nodes),
            "leaves": n_leaves,
            "mean_leaf_size": self.n_points / n_leaves,
            "max_leaf_size": int((self.node_end[self.leaves] - self.node_start[self.leaves]).max()),
        }


def build_index(cloud: PointCloud, cfg: OctreeConfig | None = None) -> OctreeIndex:
    cfg = cfg or OctreeConfig()
    cfg.validate()
    stats = AccessCounters()
    box = normalize_bounds(cloud)

    # the single pass over raw points
    fine = encode_array(cloud.xyz, box, MAX_DEPTH)
    stats.add("point_reads", len(cloud))

    order = np.lexsort((cloud.original_index, fine))
    codes = fine[order]
    perm = cloud.original_index[order]
    feats = None if cloud.features is None else cloud.features[order]
    reordered = PointCloud(cloud.xyz[order], feats, perm)
    stats.add("point_writes", len(cloud))
    stats.add("table_lookups", len(cloud))  # permutation entries

    nodes: list[dict] = [dict(code=0, level=0, start=0, end=len(cloud), parent=-1, children=[-1] * 8)]
    head = 0
    deepest = 0
    bounds = np.arange(9, dtype=np.uint64)
    while head < len(nodes):
        nd = nodes[head]
        level, s, e = nd["level"], nd["start"], nd["end"]
        if e - s <= cfg.leaf_capacity or level == cfg.max_depth:
            deepest = max(deepest, level)
            head += 1
            continue
        shift = np.uint64(3 * (MAX_DEPTH - level - 1))
        digits = (codes[s:e] >> shift) & np.uint64(7)
        cuts = np.searchsorted(digits, bounds) + s
        for octant in range(8):
            cs, ce = int(cuts[octant]), int(cuts[octant + 1])
            if cs == ce:
                continue
            nd["children"][octant] = len(nodes)
            nodes.append(
                dict(code=(nd["code"] << 3) | octant, level=level + 1, start=cs, end=ce, parent=head, children=[-1] * 8)
            )
        head += 1
    stats.add("table_lookups", len(nodes))

    records = []
    for nd in nodes:
        mask = sum(1 << o for o, c in enumerate(nd["children"]) if c >= 0)
        records.append(
            NodeRecord(nd["code"], nd["level"], mask, tuple(nd["children"]), nd["start"], nd["end"], nd["parent"])
        )
    return OctreeIndex(records, max(1, deepest), reordered, perm, box, codes, cfg, stats)


def locate_leaf(index: OctreeIndex, p, counters: AccessCounters | None = None) -> Located:
    """Walk from the root towards the leaf containing ``p``."""
    p = np.asarray(p, dtype=np.float64)
    if not index.box.contains(p):
        raise PcprepError("out of bounds")
    code = int(encode_array(p[None, :], index.box, MAX_DEPTH)[0])
    node = 0
    while True:
        nd = index.nodes[node]
        if counters is not None:
            counters.add("table_lookups")
        if nd.is_leaf:
            return Located(node, False)
        octant = (code >> (3 * (MAX_DEPTH - nd.level - 1))) & 7
        child = nd.children[octant]
        if child < 0:
            return Located(node, True)
        node = child


def remaining_counts(index: OctreeIndex, exhausted: Iterable[int] = ()) -> np.ndarray:
    """Per-node count of points outside the ``exhausted`` leaves."""
    remaining = index.node_end - index.node_start
    for leaf in exhausted:
        if not index.nodes[leaf].is_leaf:
            raise PcprepError(f"node {leaf} is not a leaf")
        size = remaining[leaf]
        node = leaf
        while node >= 0:
            remaining[node] -= size
            node = index.node_parent[node]
    return remaining


def _descend(index: OctreeIndex, seed_bits: int, remaining: np.ndarray, start: int = 0) -> tuple[int, int]:
    """Greedy max-Hamming descent below ``start``; returns (leaf, levels visited)."""
    d = index.depth
    node = start
    steps = 0
    children = index.node_children
    while index.nodes[node].child_mask:
        kids = children[node]
        kids = kids[kids >= 0]
        kids = kids[remaining[kids] > 0]
        level = index.node_level[node] + 1
        seed_prefix = np.uint64(seed_bits >> (3 * (d - level)))
        dist = popcount(index.node_code[kids] ^ seed_prefix)
        # children are stored in octant order, so the first max is the smallest code
        node = int(kids[np.argmax(dist)])
        steps += 1
    return node, steps


def farthest_leaf(
    index: OctreeIndex,
    seed: MortonCode,
    exhausted: Iterable[int] = (),
    counters: AccessCounters | None = None,
    remaining: np.ndarray | None = None,
) -> int:
    """Leaf reached by picking, level by level, the live child with the
    largest Hamming distance to the seed's prefix (ties: smallest code)."""
    if seed.depth != index.depth:
        raise PcprepError("incomparable codes")
    if remaining is None:
        remaining = remaining_counts(index, exhausted)
    if remaining[0] <= 0:
        raise PcprepError("cloud exhausted")
    leaf, steps = _descend(index, seed.bits, remaining)
    if counters is not None:
        counters.add("table_lookups", steps)
    return leaf


def farthest_leaf_parallel(
    index: OctreeIndex,
    seed: MortonCode,
    remaining: np.ndarray,
    executor,
    counters: AccessCounters | None = None,
) -> int:
    """Same result as :func:`farthest_leaf`, with the root's subtrees descended
    concurrently and merged by a deterministic max-reduction."""
    if remaining[0] <= 0:
        raise PcprepError("cloud exhausted")
    root = index.nodes[0]
    if root.is_leaf:
        return 0
    kids = [c for c in root.children if c >= 0 and remaining[c] > 0]
    seed_prefix = seed.bits >> (3 * (index.depth - 1))
    futures = [executor.submit(_descend, index, seed.bits, remaining, c) for c in kids]
    results = [f.result() for f in futures]
    keys = [(-(int(index.node_code[c]) ^ seed_prefix).bit_count(), int(index.node_code[c])) for c in kids]
    best = min(range(len(kids)), key=keys.__getitem__)
    leaf, steps = results[best]
    if counters is not None:
        counters.add("table_lookups", steps + 1)
    return leaf


def chebyshev_rings(index: OctreeIndex, lo, hi=None) -> np.ndarray:
    """Ring number of every leaf (in SFC order) around the cell block [lo, hi]."""
    lo = np.asarray(lo, dtype=np.int64)
    hi = lo if hi is None else np.asarray(hi, dtype=np.int64)
    gap = np.maximum(np.maximum(index.leaf_lo - hi, lo - index.leaf_hi), 0)
    return gap.max(axis=1)


def voxel_ring(index: OctreeIndex, center_leaf: int, n: int) -> list[int]:
    """Leaves at Chebyshev cell distance exactly ``n`` from ``center_leaf``."""
    if not index.nodes[center_leaf].is_leaf:
        raise PcprepError(f"node {center_leaf} is not a leaf")
    if n < 0:
        raise PcprepError("ring number must be non-negative")
    li = int(np.searchsorted(index.node_start[index.leaves], index.nodes[center_leaf].start))
    rings = chebyshev_rings(index, index.leaf_lo[li], index.leaf_hi[li])
    return index.leaves[rings == n].tolist()


# -- serialization ---------------------------------------------------------

_HEADER = struct.Struct("<4sIQBBHIII4d")
_NODE_DTYPE = np.dtype(
    [
        ("code", "<u8"),
        ("level", "u1"),
        ("child_mask", "u1"),
        ("children", "<i4", (8,)),
        ("start", "<u8"),
        ("end", "<u8"),
        ("parent", "<i4"),
    ]
)
_STATS = struct.Struct("<5Q")


def index_to_bytes(index: OctreeIndex) -> bytes:
    n = index.n_points
    fdim = index.reordered.feature_dim
    header = _HEADER.pack(
        FORMAT_MAGIC,
        FORMAT_VERSION,
        n,
        index.depth,
        index.config.max_depth,
        0,
        index.config.leaf_capacity,
        fdim,
        len(index.nodes),
        *index.box.min_corner.tolist(),
        index.box.edge,
    )
    table = np.zeros(len(index.nodes), dtype=_NODE_DTYPE)
    table["code"] = index.node_code
    table["level"] = index.node_level
    table["child_mask"] = [nd.child_mask for nd in index.nodes]
    table["children"] = index.node_children
    table["start"] = index.node_start
    table["end"] = index.node_end
    table["parent"] = index.node_parent
    st = index.build_stats
    parts = [
        header,
        _STATS.pack(st.point_reads, st.point_writes, st.table_lookups, st.distance_evals, st.sort_candidates),
        table.tobytes(),
        index.perm.astype("<u8").tobytes(),
        index.codes.astype("<u8").tobytes(),
        index.reordered.xyz.astype("<f8").tobytes(),
    ]
    if fdim:
        parts.append(index.reordered.features.astype("<f8").tobytes())
    return b"".join(parts)


def index_from_bytes(blob: bytes) -> OctreeIndex:
    if len(blob) < _HEADER.size or blob[:4] != FORMAT_MAGIC:
        raise PcprepError("not a PCOT index file")
    magic, version, n, depth, max_depth, _, cap, fdim, n_nodes, x, y, z, edge = _HEADER.unpack_from(blob)
    if version != FORMAT_VERSION:
        raise PcprepError(f"unsupported PCOT version {version}")
    off = _HEADER.size
    reads, writes, lookups, dist, sortc = _STATS.unpack_from(blob, off)
    off += _STATS.size

    def take(dtype, count, shape=None):
        nonlocal off
        arr = np.frombuffer(blob, dtype=dtype, count=count, offset=off)
        off += arr.nbytes
        return arr.reshape(shape) if shape else arr

    try:
        table = take(_NODE_DTYPE, n_nodes)
        perm = take("<u8", n).astype(np.int64)
        codes = take("<u8", n).astype(np.uint64)
        xyz = take("<f8", 3 * n, (n, 3)).astype(np.float64)
        feats = take("<f8", fdim * n, (n, fdim)).astype(np.float64) if fdim else None
    except ValueError as exc:
        raise PcprepError("truncated PCOT index file") from exc
    if off != len(blob):
        raise PcprepError("trailing bytes in PCOT index file")
    nodes = [
        NodeRecord(
            int(r["code"]), int(r["level"]), int(r["child_mask"]), tuple(int(c) for c in r["children"]),
            int(r["start"]), int(r["end"]), int(r["parent"]),
        )
        for r in table
    ]
    stats = AccessCounters(reads, writes, lookups, dist, sortc)
    box = Aabb(np.array([x, y, z]), edge)
    return OctreeIndex(
        nodes, depth, PointCloud(xyz, feats, perm), perm, box, codes, OctreeConfig(max_depth, cap), stats
    )


def save_index(index: OctreeIndex, path) -> None:
    Path(path).write_bytes(index_to_bytes(index))


def load_index(path) -> OctreeIndex:
    return index_from_bytes(Path(path).read_bytes())
