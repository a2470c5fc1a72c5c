"""Down-sampling: exact FPS and random sampling baselines, and octree-indexed
sampling (OIS) that replaces the per-pick scan with a table descent."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import MAX_DEPTH, MortonCode, PcprepError, PointCloud, encode_array, popcount
from .instrumentation import AccessCounters
from .octree import OctreeIndex, farthest_leaf, farthest_leaf_parallel

METHODS = ("FPS", "RS", "OIS", "OIS_APPROX")
OIS_MODES = ("exact_leaf_pick", "approx_random_pick")
# extra levels of code resolution used to rank points inside one leaf
REFINE_LEVELS = 4


@dataclass
class SamplingConfig:
    K: int
    seed_point: Optional[int] = None  # original_index of the first pick; None -> 0
    rng_seed: int = 0
    summary: str = "centroid"  # virtual seed of the picked set: centroid | medoid

    def check(self, n: int) -> None:
        if self.K < 1:
            raise PcprepError("K must be positive")
        if self.K > n:
            raise PcprepError("sample larger than cloud")
        if self.seed_point is not None and not 0 <= self.seed_point < n:
            raise PcprepError("seed_point is not a valid original_index")
        if self.summary not in ("centroid", "medoid"):
            raise PcprepError(f"unknown summary point {self.summary!r}")


@dataclass
class SampledPointTable:
    picks: np.ndarray
    K: int
    method: str
    counters: AccessCounters = field(default_factory=AccessCounters)

    def __post_init__(self):
        self.picks = np.asarray(self.picks, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.picks)

    def validate(self, n: int) -> None:
        if len(self.picks) != self.K or len(np.unique(self.picks)) != self.K:
            raise PcprepError("picks must be K distinct positions")
        if self.picks.min() < 0 or self.picks.max() >= n:
            raise PcprepError("pick outside the cloud")


def _seed_position(original_index: np.ndarray, cfg: SamplingConfig) -> int:
    target = 0 if cfg.seed_point is None else cfg.seed_point
    return int(np.flatnonzero(original_index == target)[0])


def fps_exact(cloud: PointCloud, cfg: SamplingConfig) -> SampledPointTable:
    """Farthest point sampling with a cached nearest-pick distance per point.

    Each pick is charged N point reads (a full scan of the cloud), seed
    included.  Ties go to the smallest original_index.
    """
    n = len(cloud)
    cfg.check(n)
    t0 = time.perf_counter()
    counters = AccessCounters()
    xyz, oi = cloud.xyz, cloud.original_index
    seed = _seed_position(oi, cfg)
    picks = [seed]
    picked = np.zeros(n, dtype=bool)
    picked[seed] = True
    counters.add("point_reads", n)
    nearest = np.full(n, np.inf)
    last = seed
    while len(picks) < cfg.K:
        diff = xyz - xyz[last]
        np.minimum(nearest, np.einsum("ij,ij->i", diff, diff), out=nearest)
        counters.add("point_reads", n)
        counters.add("distance_evals", n)
        cand = np.where(picked, -1.0, nearest)
        ties = np.flatnonzero(cand == cand.max())
        last = int(ties[np.argmin(oi[ties])])
        picked[last] = True
        picks.append(last)
    counters.wall_time = time.perf_counter() - t0
    return SampledPointTable(np.array(picks), cfg.K, "FPS", counters)


def random_sample(cloud: PointCloud | int, cfg: SamplingConfig) -> SampledPointTable:
    """K distinct positions by a seeded partial Fisher-Yates shuffle."""
    n = cloud if isinstance(cloud, int) else len(cloud)
    cfg.check(n)
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg.rng_seed)
    pool = np.arange(n, dtype=np.int64)
    draws = rng.integers(np.arange(cfg.K), n)
    for i, j in enumerate(draws):
        pool[i], pool[j] = pool[j], pool[i]
    counters = AccessCounters()
    counters.add("point_reads", cfg.K)
    counters.wall_time = time.perf_counter() - t0
    return SampledPointTable(pool[: cfg.K].copy(), cfg.K, "RS", counters)


def _clamped_code(index: OctreeIndex, point: np.ndarray, depth: int) -> int:
    box = index.box
    p = np.clip(point, box.min_corner, np.nextafter(box.max_corner, -np.inf))
    return int(encode_array(p[None, :], box, depth)[0])


def virtual_seed(index: OctreeIndex, picks, summary: str = "centroid") -> MortonCode:
    """Code (at index depth) of the point summarising the picked set."""
    picks = np.asarray(getattr(picks, "picks", picks), dtype=np.int64)
    if len(picks) == 0:
        raise PcprepError("virtual seed needs at least one pick")
    pts = index.reordered.xyz[picks]
    return MortonCode(_clamped_code(index, _summary_point(pts, summary), index.depth), index.depth)


def _summary_point(pts: np.ndarray, summary: str) -> np.ndarray:
    if summary == "medoid":
        d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)).sum(1)
        return pts[int(np.argmin(d))]
    return pts.mean(axis=0)


def ois_sample(
    index: OctreeIndex,
    cfg: SamplingConfig,
    mode: str = "exact_leaf_pick",
    executor=None,
) -> SampledPointTable:
    """Octree-indexed sampling.

    Every pick descends the node table towards the live leaf farthest (by
    code Hamming distance) from the virtual seed of the current picks, then
    reads exactly one point from that leaf.  Leaves whose points are all
    picked drop out of the descent.  With an ``executor`` the root's
    subtrees are descended concurrently; the result is identical.
    """
    if mode not in OIS_MODES:
        raise PcprepError(f"unknown OIS mode {mode!r}")
    n = index.n_points
    cfg.check(n)
    t0 = time.perf_counter()
    counters = AccessCounters()
    rng = np.random.default_rng(cfg.rng_seed)
    xyz = index.reordered.xyz
    oi = index.perm
    refine = min(index.depth + REFINE_LEVELS, MAX_DEPTH)
    refined = index.codes >> np.uint64(3 * (MAX_DEPTH - refine))

    remaining = index.node_end - index.node_start
    picked = np.zeros(n, dtype=bool)
    parents = index.node_parent
    leaf_nodes = index.leaves
    leaf_of_point = index.leaf_of_point

    def take(pos: int) -> np.ndarray:
        picked[pos] = True
        node = leaf_nodes[leaf_of_point[pos]]
        while node >= 0:
            remaining[node] -= 1
            node = parents[node]
        counters.add("point_reads")
        return xyz[pos]

    seed = _seed_position(oi, cfg)
    picks = [seed]
    total = take(seed).copy()
    got = [xyz[seed]] if cfg.summary == "medoid" else None
    while len(picks) < cfg.K:
        if got is None:
            centre = total / len(picks)
        else:
            centre = _summary_point(np.asarray(got), "medoid")
        vseed = MortonCode(_clamped_code(index, centre, index.depth), index.depth)
        if executor is None:
            leaf = farthest_leaf(index, vseed, counters=counters, remaining=remaining)
        else:
            leaf = farthest_leaf_parallel(index, vseed, remaining, executor, counters=counters)
        nd = index.nodes[leaf]
        cand = np.arange(nd.start, nd.end)
        cand = cand[~picked[cand]]
        if mode == "approx_random_pick":
            pos = int(cand[rng.integers(len(cand))])
        else:
            seed_fine = np.uint64(_clamped_code(index, centre, refine))
            dist = popcount(refined[cand] ^ seed_fine)
            ties = cand[dist == dist.max()]
            pos = int(ties[np.argmin(oi[ties])])
        p = take(pos)
        total += p
        if got is not None:
            got.append(p)
        picks.append(pos)
    counters.wall_time = time.perf_counter() - t0
    method = "OIS" if mode == "exact_leaf_pick" else "OIS_APPROX"
    return SampledPointTable(np.array(picks), cfg.K, method, counters)


def coverage_radius(cloud: PointCloud | np.ndarray, picks) -> float:
    """Largest distance from any cloud point to its nearest pick."""
    xyz = cloud.xyz if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)
    picks = np.asarray(getattr(picks, "picks", picks), dtype=np.int64)
    centres = xyz[picks]
    chunk = max(1, 4_000_000 // len(centres))
    worst = 0.0
    for s in range(0, len(xyz), chunk):
        block = xyz[s : s + chunk]
        d2 = ((block[:, None, :] - centres[None, :, :]) ** 2).sum(-1)
        worst = max(worst, float(d2.min(axis=1).max()))
    return float(np.sqrt(worst))
