"""Access counters shared by the sampling and gathering engines.

A "memory access" is a read or write of a point record (coordinates plus
features).  Octree-table lookups are tracked separately because the table is
small and assumed to stay on chip.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from .core import PcprepError

U64_MAX = (1 << 64) - 1
COUNT_FIELDS = ("point_reads", "point_writes", "table_lookups", "distance_evals", "sort_candidates")


@dataclass
class AccessCounters:
    point_reads: int = 0
    point_writes: int = 0
    table_lookups: int = 0
    distance_evals: int = 0
    sort_candidates: int = 0
    wall_time: float = 0.0
    saturated: bool = False

    def add(self, name: str, amount: int = 1) -> None:
        if amount < 0:
            raise PcprepError("counters are monotone")
        total = getattr(self, name) + int(amount)
        if total > U64_MAX:
            total = U64_MAX
            self.saturated = True
        setattr(self, name, total)

    @property
    def memory_accesses(self) -> int:
        return self.point_reads + self.point_writes

    def copy(self) -> "AccessCounters":
        return AccessCounters(**asdict(self))

    def to_dict(self, timings: bool = True) -> dict:
        d = asdict(self)
        if not timings:
            d.pop("wall_time")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AccessCounters":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


def merge(a: AccessCounters, b: AccessCounters, parallel: bool = False) -> AccessCounters:
    """Field-wise sum; wall time is the max for parallel workers, else the sum."""
    out = AccessCounters(saturated=a.saturated or b.saturated)
    for name in COUNT_FIELDS:
        total = getattr(a, name) + getattr(b, name)
        if total > U64_MAX:
            total = U64_MAX
            out.saturated = True
        setattr(out, name, total)
    out.wall_time = max(a.wall_time, b.wall_time) if parallel else a.wall_time + b.wall_time
    return out


def merge_all(counters, parallel: bool = False) -> AccessCounters:
    out = AccessCounters()
    for c in counters:
        out = merge(out, c, parallel=parallel)
    return out


def savings_ratio(baseline: AccessCounters, candidate: AccessCounters) -> float:
    """Ratio of point-record traffic, baseline over candidate."""
    denom = candidate.memory_accesses
    if denom <= 0:
        raise PcprepError("candidate has no memory accesses")
    return baseline.memory_accesses / denom


def closed_form_savings(n: int, k: int) -> float:
    """FPS reads N points per pick, OIS reads each pick once plus one build pass."""
    return k * n / (n + k)
