"""Share of OIS preprocessing spent building the octree, by counters and wall time."""
import argparse
import time

import numpy as np

from pcprep.cli import REPORTED_BUILD_OVERHEAD_BAND, build_work_fraction
from pcprep.core import PointCloud
from pcprep.octree import build_index
from pcprep.sampling import SamplingConfig, ois_sample


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid", default="4096:1024,16384:1024,65536:1024,131072:512")
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'N':>8} {'K':>6} {'N/K':>6} {'counter frac':>13} {'wall frac':>10}")
    for item in args.grid.split(","):
        n, k = map(int, item.split(":"))
        cloud = PointCloud(rng.random((n, 3)))
        t0 = time.perf_counter()
        idx = build_index(cloud)
        tb = time.perf_counter() - t0
        t = ois_sample(idx, SamplingConfig(k))
        wall = tb / (tb + t.counters.wall_time)
        print(f"{n:>8} {k:>6} {n / k:>6.0f} {build_work_fraction(idx, t):>13.3f} {wall:>10.3f}")
    print("reported wall-time range: %.2f-%.2f" % REPORTED_BUILD_OVERHEAD_BAND)


if __name__ == "__main__":
    main()
