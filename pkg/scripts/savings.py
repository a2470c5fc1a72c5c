"""Memory-access savings of OIS over FPS as the cloud grows.

FPS is charged N point reads per pick, so its total is K*N without running
it; OIS is run for real and charged its selection reads plus the build pass.
"""
import argparse

import numpy as np

from pcprep.cli import REPORTED_SAVINGS_BAND, ois_total
from pcprep.core import PointCloud
from pcprep.instrumentation import AccessCounters, closed_form_savings, savings_ratio
from pcprep.octree import build_index
from pcprep.sampling import SamplingConfig, ois_sample


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="10000,30000,100000")
    ap.add_argument("--k", type=int, default=1024)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    print(f"{'N':>8} {'K':>6} {'measured':>10} {'closed form':>12}")
    for n in map(int, args.sizes.split(",")):
        idx = build_index(PointCloud(rng.random((n, 3))))
        t = ois_sample(idx, SamplingConfig(args.k))
        ratio = savings_ratio(AccessCounters(point_reads=args.k * n), ois_total(t, idx))
        print(f"{n:>8} {args.k:>6} {ratio:>10.2f} {closed_form_savings(n, args.k):>12.2f}")
    lo, hi = REPORTED_SAVINGS_BAND
    print(f"closed form at N=1e6, K=4096: {closed_form_savings(10**6, 4096):.1f}x (reported band {lo:.0f}-{hi:.0f}x)")


if __name__ == "__main__":
    main()
