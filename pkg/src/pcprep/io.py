"""Point cloud ingestion, export and synthetic generation.

Two on-disk formats are supported:

* XYZ ASCII: whitespace-separated reals, one point per line, ``#`` comments.
  Columns beyond the third become the feature vector.
* BIN f32x4: packed little-endian float32 ``(x, y, z, intensity)`` records with
  no header (KITTI velodyne layout).  Intensity becomes a 1-d feature.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .core import PcprepError, PointCloud

FORMATS = ("XYZ_ASCII", "BIN_F32X4")


@dataclass(frozen=True)
class FrameSource:
    format: str
    path: Optional[Path] = None
    frame_limit: Optional[int] = None

    @classmethod
    def for_path(cls, path) -> "FrameSource":
        path = Path(path)
        fmt = "BIN_F32X4" if path.suffix.lower() == ".bin" else "XYZ_ASCII"
        return cls(fmt, path)

    def read(self) -> PointCloud:
        if self.format == "XYZ_ASCII":
            return read_xyz(self.path)
        if self.format == "BIN_F32X4":
            return read_bin_f32x4(self.path)
        raise PcprepError(f"unknown format {self.format!r}")


def read_xyz(path) -> PointCloud:
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split()
            if len(parts) < 3:
                raise PcprepError(f"{path}:{lineno}: expected at least 3 fields, got {len(parts)}")
            if width is not None and len(parts) != width:
                raise PcprepError(f"{path}:{lineno}: expected {width} fields, got {len(parts)}")
            try:
                values = [float(v) for v in parts]
            except ValueError as exc:
                raise PcprepError(f"{path}:{lineno}: {exc}") from None
            if not all(np.isfinite(values[:3])):
                raise PcprepError(f"{path}:{lineno}: invalid coordinate")
            width = len(parts)
            rows.append(values)
    if not rows:
        raise PcprepError("empty input")
    arr = np.array(rows, dtype=np.float64)
    return PointCloud(arr[:, :3], arr[:, 3:] if width > 3 else None)


def write_xyz(cloud: PointCloud, path) -> None:
    arr = cloud.xyz if cloud.features is None else np.hstack([cloud.xyz, cloud.features])
    np.savetxt(path, arr, fmt="%.17g")


def read_bin_f32x4(path) -> PointCloud:
    raw = Path(path).read_bytes()
    if len(raw) == 0:
        raise PcprepError("empty input")
    if len(raw) % 16:
        raise PcprepError("truncated record")
    rec = np.frombuffer(raw, dtype="<f4").reshape(-1, 4).astype(np.float64)
    return PointCloud(rec[:, :3], rec[:, 3:4])


def write_bin_f32x4(cloud: PointCloud, path) -> None:
    rec = np.zeros((len(cloud), 4), dtype="<f4")
    rec[:, :3] = cloud.xyz
    if cloud.features is not None:
        rec[:, 3] = cloud.features[:, 0]
    Path(path).write_bytes(rec.tobytes())


def read_cloud(path) -> PointCloud:
    return FrameSource.for_path(path).read()


def generate(kind: str, n: int, params: Optional[dict] = None, rng_seed: int = 0) -> PointCloud:
    """Synthetic cloud.

    ``uniform`` fills the unit cube.  ``gaussian_mixture`` draws from
    isotropic blobs; params: ``k`` (components, default 4), ``sigma``
    (default 0.02), optional ``weights`` and ``centers``.
    """
    if n < 1:
        raise PcprepError("N must be positive")
    params = dict(params or {})
    rng = np.random.default_rng(rng_seed)
    if kind == "uniform":
        return PointCloud(rng.random((n, 3)))
    if kind != "gaussian_mixture":
        raise PcprepError(f"unknown generator {kind!r}")
    k = int(params.get("k", 4))
    sigma = float(params.get("sigma", 0.02))
    if k < 1 or sigma <= 0:
        raise PcprepError("gaussian_mixture needs k >= 1 and sigma > 0")
    weights = np.asarray(params.get("weights", np.full(k, 1.0 / k)), dtype=np.float64)
    if weights.shape != (k,) or np.any(weights < 0) or not np.isclose(weights.sum(), 1.0):
        raise PcprepError("mixture weights must be k non-negative values summing to 1")
    centers = params.get("centers")
    centers = rng.random((k, 3)) if centers is None else np.asarray(centers, dtype=np.float64)
    if centers.shape != (k, 3):
        raise PcprepError("centers must have shape (k, 3)")
    comp = rng.choice(k, size=n, p=weights / weights.sum())
    return PointCloud(centers[comp] + rng.normal(scale=sigma, size=(n, 3)))


def parse_generator(spec: str) -> tuple[str, int, dict]:
    """Parse ``kind:N[:key=value,...]``, e.g. ``gaussian_mixture:4096:k=3,sigma=0.01``."""
    parts = spec.split(":")
    if len(parts) < 2:
        raise PcprepError(f"generator spec {spec!r} must look like kind:N")
    kind = parts[0]
    try:
        n = int(float(parts[1]))
    except ValueError:
        raise PcprepError(f"bad point count in {spec!r}") from None
    params: dict = {}
    if len(parts) > 2 and parts[2]:
        for item in parts[2].split(","):
            key, _, value = item.partition("=")
            if not _:
                raise PcprepError(f"bad generator parameter {item!r}")
            params[key.strip()] = float(value) if key.strip() != "k" else int(value)
    return kind, n, params
