"""Neighbor gathering around central points.

Brute-force KNN / ball query serve as oracles.  Voxel-expanded gathering
(VEG) grows Chebyshev rings of leaf voxels around the central point's cell
until enough points are in hand, and only ranks the points it must.

All rankings use the lexicographic key (squared distance, reordered position).
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import PcprepError, PointCloud
from .octree import OctreeIndex, chebyshev_rings

VEG_MODES = ("paper", "strict", "semi_approx")
# strict mode stops only when the K-th distance clears the unexplored region
# by this relative margin, so floating-point noise cannot flip the decision
CLEARANCE_MARGIN = 1e-9


@dataclass
class WorkloadStats:
    distance_evals: int = 0
    sort_candidates: int = 0
    rings_expanded: int = 0
    leaves_visited: int = 0

    def merge(self, other: "WorkloadStats") -> "WorkloadStats":
        return WorkloadStats(
            self.distance_evals + other.distance_evals,
            self.sort_candidates + other.sort_candidates,
            max(self.rings_expanded, other.rings_expanded),
            self.leaves_visited + other.leaves_visited,
        )


@dataclass
class NeighborSet:
    central: int
    neighbors: np.ndarray
    distances: np.ndarray
    workload: WorkloadStats = field(default_factory=WorkloadStats)

    def __len__(self) -> int:
        return len(self.neighbors)


def sq_dist(xyz: np.ndarray, c: np.ndarray) -> np.ndarray:
    # fixed evaluation order so every route produces bit-identical values
    dx = xyz[:, 0] - c[0]
    dy = xyz[:, 1] - c[1]
    dz = xyz[:, 2] - c[2]
    return (dx * dx + dy * dy) + dz * dz


def _rank(positions: np.ndarray, d2: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    order = np.lexsort((positions, d2))[:k]
    return positions[order], d2[order]


def _cloud_xyz(src) -> np.ndarray:
    if isinstance(src, OctreeIndex):
        return src.reordered.xyz
    if isinstance(src, PointCloud):
        return src.xyz
    return np.asarray(src, dtype=np.float64)


def _check_centrals(centrals, n: int) -> np.ndarray:
    centrals = np.asarray(centrals, dtype=np.int64).reshape(-1)
    if len(centrals) and (centrals.min() < 0 or centrals.max() >= n):
        raise PcprepError("central position outside the cloud")
    return centrals


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# -- brute-force oracles ---------------------------------------------------


def brute_knn(cloud, centrals: Sequence[int], K: int) -> list[NeighborSet]:
    """Exact K nearest neighbors of each central, scanning every other point."""
    xyz = _cloud_xyz(cloud)
    n = len(xyz)
    if K < 1:
        raise PcprepError("K must be positive")
    if K >= n:
        raise PcprepError("not enough points")
    everyone = np.arange(n)
    out = []
    for c in _check_centrals(centrals, n):
        others = np.delete(everyone, c)
        d2 = sq_dist(xyz[others], xyz[c])
        nb, nd2 = _rank(others, d2, K)
        out.append(NeighborSet(int(c), nb, np.sqrt(nd2), WorkloadStats(n - 1, n - 1, 0)))
    return out


def brute_ball(cloud, centrals: Sequence[int], radius: float, maxK: int) -> list[NeighborSet]:
    """All other points within ``radius`` (inclusive), truncated to the maxK nearest."""
    if radius <= 0:
        raise PcprepError("radius must be positive")
    xyz = _cloud_xyz(cloud)
    n = len(xyz)
    everyone = np.arange(n)
    r2 = radius * radius
    out = []
    for c in _check_centrals(centrals, n):
        others = np.delete(everyone, c)
        d2 = sq_dist(xyz[others], xyz[c])
        inside = d2 <= r2
        nb, nd2 = _rank(others[inside], d2[inside], maxK)
        out.append(NeighborSet(int(c), nb, np.sqrt(nd2), WorkloadStats(n - 1, int(inside.sum()), 0)))
    return out


# -- voxel-expanded gathering ----------------------------------------------


def _expand_ranges(starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    lengths = ends - starts
    total = int(lengths.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    offsets = np.repeat(starts - np.cumsum(lengths) + lengths, lengths)
    return offsets + np.arange(total)


class _Rings:
    """Leaves around one central cell, grouped by ring number."""

    def __init__(self, index: OctreeIndex, central: int):
        cell = index.point_cells([central])[0]
        rings = chebyshev_rings(index, cell)
        order = np.argsort(rings, kind="stable")  # stable keeps SFC order within a ring
        self.rings = rings[order]
        self.starts = index.node_start[index.leaves[order]]
        self.ends = index.node_end[index.leaves[order]]
        self.max_ring = int(self.rings[-1])
        sizes = np.bincount(self.rings, weights=self.ends - self.starts, minlength=self.max_ring + 1)
        sizes[0] -= 1  # the central point itself
        self.cumulative = np.cumsum(sizes).astype(np.int64)
        self.bounds = np.searchsorted(self.rings, np.arange(self.max_ring + 2))
        self.central = central

    def first_ring_reaching(self, k: int) -> int:
        return int(np.searchsorted(self.cumulative, k))

    def points(self, lo: int, hi: int) -> np.ndarray:
        """Positions in rings lo..hi inclusive, minus the central point."""
        a, b = self.bounds[lo], self.bounds[min(hi, self.max_ring) + 1]
        pts = _expand_ranges(self.starts[a:b], self.ends[a:b])
        return pts[pts != self.central]

    def leaves_upto(self, n: int) -> int:
        return int(self.bounds[min(n, self.max_ring) + 1])


def _veg_one(index: OctreeIndex, central: int, K: int, mode: str, rng_seed: int) -> NeighborSet:
    xyz = index.reordered.xyz
    c = xyz[central]
    rings = _Rings(index, central)
    n = rings.first_ring_reaching(K)
    work = WorkloadStats()

    if mode == "strict":
        pos = rings.points(0, n)
        d2 = sq_dist(xyz[pos], c)
        work.distance_evals += len(pos)
        while n < rings.max_ring:
            kth = float(np.partition(d2, K - 1)[K - 1])
            clearance = n * index.leaf_edge * (1.0 - CLEARANCE_MARGIN)
            if kth < clearance * clearance:
                break
            n += 1
            extra = rings.points(n, n)
            pos = np.concatenate([pos, extra])
            d2 = np.concatenate([d2, sq_dist(xyz[extra], c)])
            work.distance_evals += len(extra)
        work.sort_candidates = len(pos)
        nb, nd2 = _rank(pos, d2, K)
    else:
        inner = rings.points(0, n - 1) if n > 0 else np.empty(0, dtype=np.int64)
        last = rings.points(n, n)
        need = K - len(inner)
        if mode == "paper":
            d2_last = sq_dist(xyz[last], c)
            work.distance_evals += len(last)
            work.sort_candidates += len(last)
            chosen, _ = _rank(last, d2_last, need)
        else:
            rng = np.random.default_rng([rng_seed, central])
            chosen = rng.choice(last, size=need, replace=False)
        # output distances belong to the buffering stage, not the selection workload
        gathered = np.concatenate([inner, chosen])
        nb, nd2 = _rank(gathered, sq_dist(xyz[gathered], c), K)
    work.rings_expanded = n
    work.leaves_visited = rings.leaves_upto(n)
    return NeighborSet(int(central), nb, np.sqrt(nd2), work)


def veg_knn(
    index: OctreeIndex,
    centrals: Sequence[int],
    K: int,
    mode: str = "strict",
    rng_seed: int = 0,
    workers: int = 1,
) -> list[NeighborSet]:
    """K nearest neighbors by voxel ring expansion.

    ``paper`` takes every point of the inner rings unranked and sorts only the
    last ring; ``strict`` keeps expanding until the K-th distance is provably
    smaller than anything outside the explored rings, which makes the result
    equal to :func:`brute_knn`; ``semi_approx`` fills the last-ring remainder
    by random choice.
    """
    if mode not in VEG_MODES:
        raise PcprepError(f"unknown VEG mode {mode!r}")
    if K < 1:
        raise PcprepError("K must be positive")
    if K >= index.n_points:
        raise PcprepError("not enough points")
    centrals = _check_centrals(centrals, index.n_points)
    return _map(lambda c: _veg_one(index, int(c), K, mode, rng_seed), centrals, workers)


def veg_ball(
    index: OctreeIndex, centrals: Sequence[int], radius: float, maxK: int, workers: int = 1
) -> list[NeighborSet]:
    """Ball query over the rings that can hold points within ``radius``."""
    if radius <= 0:
        raise PcprepError("radius must be positive")
    xyz = index.reordered.xyz
    r2 = radius * radius
    n = math.ceil(radius / index.leaf_edge) + 1

    def one(central: int) -> NeighborSet:
        c = xyz[central]
        rings = _Rings(index, central)
        pos = rings.points(0, n)
        d2 = sq_dist(xyz[pos], c)
        inside = d2 <= r2
        nb, nd2 = _rank(pos[inside], d2[inside], maxK)
        work = WorkloadStats(len(pos), int(inside.sum()), min(n, rings.max_ring), rings.leaves_upto(n))
        return NeighborSet(int(central), nb, np.sqrt(nd2), work)

    centrals = _check_centrals(centrals, index.n_points)
    return _map(lambda c: one(int(c)), centrals, workers)


def total_workload(sets: Sequence[NeighborSet]) -> WorkloadStats:
    out = WorkloadStats()
    for s in sets:
        out = out.merge(s.workload)
    return out


# -- feature map -----------------------------------------------------------


@dataclass
class FeatureMap:
    """Dense (centrals, K, channels) block: relative xyz then point features."""

    data: np.ndarray
    channels: list

    @property
    def num_centrals(self) -> int:
        return self.data.shape[0]

    @property
    def K(self) -> int:
        return self.data.shape[1]

    def sidecar(self) -> dict:
        return {"num_centrals": self.num_centrals, "K": self.K, "channels": self.channels}

    def save(self, path) -> Path:
        """Write little-endian float32 values plus a ``.json`` sidecar; returns the sidecar path."""
        path = Path(path)
        path.write_bytes(np.ascontiguousarray(self.data, dtype="<f4").tobytes())
        side = path.with_suffix(path.suffix + ".json")
        side.write_text(json.dumps(self.sidecar(), indent=2) + "\n")
        return side

    @classmethod
    def load(cls, path) -> "FeatureMap":
        path = Path(path)
        meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
        shape = (meta["num_centrals"], meta["K"], len(meta["channels"]))
        data = np.frombuffer(path.read_bytes(), dtype="<f4").reshape(shape)
        return cls(data.astype(np.float32), list(meta["channels"]))


def assemble_feature_map(index: OctreeIndex | PointCloud, sets: Sequence[NeighborSet], K: int) -> FeatureMap:
    """Stack gathered neighborhoods into a fixed-shape block.

    Sets shorter than K (ball-query underfill) repeat their nearest member;
    an empty set repeats the central point, i.e. zero offsets.
    """
    if K < 1:
        raise PcprepError("empty gather width")
    cloud = index.reordered if isinstance(index, OctreeIndex) else index
    xyz, feats = cloud.xyz, cloud.features
    fdim = cloud.feature_dim
    channels = ["dx", "dy", "dz"] + [f"f{i}" for i in range(fdim)]
    block = np.empty((len(sets), K, 3 + fdim), dtype=np.float64)
    for row, s in enumerate(sets):
        nb = np.asarray(s.neighbors, dtype=np.int64)[:K]
        if len(nb) == 0:
            nb = np.array([s.central])
        if len(nb) < K:
            nb = np.concatenate([nb, np.full(K - len(nb), nb[0])])
        if nb.min() < 0 or nb.max() >= len(xyz):
            raise PcprepError("neighbor position outside the cloud")
        block[row, :, :3] = xyz[nb] - xyz[s.central]
        if fdim:
            block[row, :, 3:] = feats[nb]
    return FeatureMap(block, channels)


def recall(result: Sequence[NeighborSet], oracle: Sequence[NeighborSet]) -> float:
    """Mean fraction of each oracle neighborhood recovered by ``result``."""
    if len(result) != len(oracle):
        raise PcprepError("result and oracle cover different centrals")
    if not oracle:
        return 1.0
    scores = []
    for r, o in zip(result, oracle):
        if r.central != o.central or len(r.neighbors) != len(o.neighbors):
            raise PcprepError("result and oracle shapes differ")
        k = len(o.neighbors)
        scores.append(1.0 if k == 0 else len(np.intersect1d(r.neighbors, o.neighbors)) / k)
    return float(np.mean(scores))
