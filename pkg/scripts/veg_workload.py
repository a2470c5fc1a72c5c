"""Sort-candidate counts of VEG gathering against the brute-force N-1."""
import argparse

import numpy as np

from pcprep.core import PointCloud
from pcprep.gathering import brute_knn, recall, veg_knn
from pcprep.octree import OctreeConfig, build_index


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=4096)
    ap.add_argument("--k", type=int, default=32)
    ap.add_argument("--centrals", type=int, default=64)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--leaf-capacity", type=int, default=8)
    args = ap.parse_args()
    cfg = OctreeConfig(leaf_capacity=args.leaf_capacity)
    for mode in ("paper", "semi_approx", "strict"):
        sc, ev, rec = [], [], []
        for seed in range(args.seeds):
            rng = np.random.default_rng(seed)
            idx = build_index(PointCloud(rng.random((args.n, 3))), cfg)
            cs = rng.choice(args.n, args.centrals, replace=False)
            sets = veg_knn(idx, cs, args.k, mode, rng_seed=seed)
            sc += [s.workload.sort_candidates for s in sets]
            ev += [s.workload.distance_evals for s in sets]
            rec.append(recall(sets, brute_knn(idx, cs, args.k)))
        q = np.quantile(sc, [0.5, 0.9, 1.0])
        print(f"{mode:>12}: sort_candidates mean {np.mean(sc):7.1f} (p50 {q[0]:.0f}, p90 {q[1]:.0f}, max {q[2]:.0f})"
              f"  distance_evals mean {np.mean(ev):7.1f}  recall {np.mean(rec):.3f}"
              f"  reduction {(args.n - 1) / max(np.mean(sc), 1):.0f}x vs {args.n - 1}")


if __name__ == "__main__":
    main()
