"""Coverage radius of OIS, RS and FPS samples on uniform clouds."""
import argparse
import statistics

import numpy as np

from pcprep.core import PointCloud
from pcprep.octree import build_index
from pcprep.sampling import SamplingConfig, coverage_radius, fps_exact, ois_sample, random_sample


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=10_000)
    ap.add_argument("--k", type=int, default=256)
    ap.add_argument("--trials", type=int, default=5)
    ap.add_argument("--summary", choices=["centroid", "medoid"], default="centroid")
    args = ap.parse_args()
    rows = {m: [] for m in ("FPS", "RS", "OIS", "OIS_APPROX")}
    for seed in range(args.trials):
        rng = np.random.default_rng(seed)
        idx = build_index(PointCloud(rng.random((args.n, 3))))
        pts = idx.reordered
        cfg = SamplingConfig(args.k, rng_seed=seed, summary=args.summary)
        rows["FPS"].append(coverage_radius(pts, fps_exact(pts, cfg)))
        rows["RS"].append(coverage_radius(pts, random_sample(pts, cfg)))
        rows["OIS"].append(coverage_radius(pts, ois_sample(idx, cfg)))
        rows["OIS_APPROX"].append(coverage_radius(pts, ois_sample(idx, cfg, "approx_random_pick")))
    fps = statistics.median(rows["FPS"])
    for m, r in rows.items():
        med = statistics.median(r)
        print(f"{m:>10}: median coverage radius {med:.4f}  ratio vs FPS {med / fps:.2f}")


if __name__ == "__main__":
    main()
