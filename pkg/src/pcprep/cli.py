"""Command-line front end: ``pcprep pipeline`` and ``pcprep bench``.

Reports are JSON.  Every timing-derived field lives either under a
``wall_time`` key or inside the top-level ``timing`` object, so
:func:`strip_timings` leaves a deterministic document.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import statistics
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .core import PcprepError, PointCloud
from .gathering import (
    assemble_feature_map,
    brute_ball,
    brute_knn,
    recall,
    total_workload,
    veg_ball,
    veg_knn,
)
from .instrumentation import AccessCounters, closed_form_savings, merge, savings_ratio
from .io import generate, parse_generator, read_cloud
from .octree import OctreeConfig, build_index, save_index
from .sampling import SamplingConfig, coverage_radius, fps_exact, ois_sample, random_sample

log = logging.getLogger("pcprep")

# sampled sizes used by the four benchmark tasks
PRESETS = {"modelnet40": 1024, "shapenet": 2048, "s3dis": 4096, "kitti": 16384}
REPORTED_SAVINGS_BAND = (1700.0, 7900.0)
REPORTED_BUILD_OVERHEAD_BAND = (0.25, 0.8)
SAMPLERS = ("fps", "rs", "ois", "ois-approx")
GATHERERS = ("veg-knn", "veg-ball", "brute-knn", "brute-ball")
MODES = {"paper": "paper", "strict": "strict", "semi-approx": "semi_approx"}


class UsageError(Exception):
    pass


def strip_timings(obj):
    """Copy of a report without wall-clock fields."""
    if isinstance(obj, dict):
        return {k: strip_timings(v) for k, v in obj.items() if k not in ("wall_time", "timing")}
    if isinstance(obj, list):
        return [strip_timings(v) for v in obj]
    return obj


def _load_source(args) -> tuple[PointCloud, str]:
    if args.input and args.gen:
        raise UsageError("--in and --gen are mutually exclusive")
    if args.input:
        return read_cloud(args.input), str(args.input)
    if args.gen:
        kind, n, params = parse_generator(args.gen)
        return generate(kind, n, params, args.rng_seed), args.gen
    raise UsageError("an input source is required (--in or --gen)")


def _parse_gather(spec: str | None) -> tuple[str | None, int | None]:
    if spec is None:
        return None, None
    method, _, k = spec.partition(":")
    if method not in GATHERERS:
        raise UsageError(f"--gather must be one of {', '.join(GATHERERS)}")
    try:
        return method, int(k) if k else 32
    except ValueError:
        raise UsageError(f"bad gather width in {spec!r}") from None


def run_sampler(method: str, index, K: int, rng_seed: int, executor=None):
    cfg = SamplingConfig(K, rng_seed=rng_seed)
    if method == "fps":
        return fps_exact(index.reordered, cfg)
    if method == "rs":
        return random_sample(index.reordered, cfg)
    if method == "ois":
        return ois_sample(index, cfg, "exact_leaf_pick", executor=executor)
    if method == "ois-approx":
        return ois_sample(index, cfg, "approx_random_pick", executor=executor)
    raise UsageError(f"unknown sampler {method!r}")


def ois_total(table, index) -> AccessCounters:
    """Sampling counters plus the build's one read per raw point."""
    return merge(table.counters, AccessCounters(point_reads=index.build_stats.point_reads))


def build_work_fraction(index, table) -> float:
    build = index.build_stats
    b = build.point_reads + build.point_writes + build.table_lookups
    s = table.counters.point_reads + table.counters.point_writes + table.counters.table_lookups
    return b / (b + s)


def _distribution(values) -> dict:
    v = np.asarray(values, dtype=np.float64)
    q = np.quantile(v, [0.0, 0.25, 0.5, 0.75, 1.0])
    return {
        "mean": float(v.mean()),
        "min": float(q[0]),
        "p25": float(q[1]),
        "median": float(q[2]),
        "p75": float(q[3]),
        "max": float(q[4]),
        "values": [int(x) for x in values],
    }


def run_gather(method, mode, index, centrals, K, radius, rng_seed, workers, verify):
    t0 = time.perf_counter()
    if method == "veg-knn":
        sets = veg_knn(index, centrals, K, mode, rng_seed=rng_seed, workers=workers)
    elif method == "veg-ball":
        sets = veg_ball(index, centrals, radius, K, workers=workers)
    elif method == "brute-knn":
        sets = brute_knn(index, centrals, K)
    else:
        sets = brute_ball(index, centrals, radius, K)
    wall = time.perf_counter() - t0
    work = total_workload(sets)
    out = {
        "method": method,
        "mode": mode if method == "veg-knn" else None,
        "K": K,
        "radius": radius if method.endswith("ball") else None,
        "num_centrals": len(sets),
        "counters": AccessCounters(
            point_reads=work.distance_evals, distance_evals=work.distance_evals,
            sort_candidates=work.sort_candidates, table_lookups=work.leaves_visited, wall_time=wall,
        ).to_dict(),
        "workload": {
            "brute_force_per_central": index.n_points - 1,
            "rings_expanded_max": work.rings_expanded,
            "sort_candidates": _distribution([s.workload.sort_candidates for s in sets]),
            "distance_evals": _distribution([s.workload.distance_evals for s in sets]),
        },
    }
    if verify:
        oracle = brute_knn(index, centrals, K) if method.endswith("knn") else brute_ball(index, centrals, radius, K)
        out["recall"] = recall(sets, oracle) if method.endswith("knn") else None
        out["equivalence"] = all(np.array_equal(a.neighbors, b.neighbors) for a, b in zip(sets, oracle))
    return sets, out


def cmd_pipeline(args) -> dict:
    cloud, source = _load_source(args)
    K = args.k if args.k is not None else PRESETS.get(args.preset)
    if K is None:
        raise UsageError("--k or --preset is required")
    gather, gK = _parse_gather(args.gather)
    if gather and gather.endswith("ball") and args.radius is None:
        raise UsageError(f"{gather} needs --radius")
    mode = MODES[args.mode]
    cfg = OctreeConfig(args.max_depth, args.leaf_capacity)
    timing: dict = {}

    t0 = time.perf_counter()
    index = build_index(cloud, cfg)
    index.build_stats.wall_time = time.perf_counter() - t0
    log.info("octree built: %s", index.stats())
    if args.export_index:
        save_index(index, args.export_index)

    executor = ThreadPoolExecutor(max_workers=args.workers) if args.workers > 1 else None
    try:
        table = run_sampler(args.sample, index, K, args.rng_seed, executor)
    finally:
        if executor is not None:
            executor.shutdown()
    table.validate(index.n_points)

    report = {
        "tool": {"name": "pcprep", "version": __version__},
        "command": "pipeline",
        "config": _config_echo(args, K=K),
        "input": {"source": source, "N": len(cloud), "feature_dim": cloud.feature_dim},
        "octree": dict(index.stats(), build_counters=index.build_stats.to_dict()),
        "sampling": {
            "method": args.sample,
            "K": K,
            "counters": table.counters.to_dict(),
            "picks_original_index": index.perm[table.picks].tolist() if args.emit_picks else None,
        },
    }
    if args.sample.startswith("ois"):
        total = ois_total(table, index)
        report["sampling"]["total_with_build"] = total.to_dict()
        report["sampling"]["fps_equivalent_reads"] = K * len(cloud)
        report["sampling"]["savings_vs_fps"] = K * len(cloud) / total.memory_accesses
        report["octree"]["build_work_fraction"] = build_work_fraction(index, table)
        timing["build_overhead_fraction"] = index.build_stats.wall_time / (
            index.build_stats.wall_time + table.counters.wall_time
        )
        timing["reported_build_overhead_band"] = list(REPORTED_BUILD_OVERHEAD_BAND)
    if args.verify:
        ref = fps_exact(index.reordered, SamplingConfig(K))
        r_method = coverage_radius(index.reordered, table)
        r_fps = coverage_radius(index.reordered, ref)
        report["sampling"]["quality"] = {
            "coverage_radius": r_method,
            "coverage_radius_fps": r_fps,
            "coverage_ratio": r_method / r_fps if r_fps > 0 else (1.0 if r_method == 0 else float("inf")),
        }

    if gather:
        sampled = index.reordered.take(table.picks)
        t1 = time.perf_counter()
        sub = build_index(sampled, cfg)
        sub.build_stats.wall_time = time.perf_counter() - t1
        rng = np.random.default_rng([args.rng_seed, 1])
        m = min(args.centrals, len(sampled))
        centrals = np.sort(rng.choice(len(sampled), size=m, replace=False))
        sets, gout = run_gather(gather, mode, sub, centrals, gK, args.radius, args.rng_seed, args.workers, args.verify)
        gout["index"] = dict(sub.stats(), build_counters=sub.build_stats.to_dict())
        report["gathering"] = gout
        fmap = assemble_feature_map(sub, sets, gK)
        report["feature_map"] = {"shape": list(fmap.data.shape), "channels": fmap.channels}
        if args.export_featuremap:
            fmap.save(args.export_featuremap)

    report["timing"] = timing
    return report


def _config_echo(args, **extra) -> dict:
    d = {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items()) if k not in ("func", "out")}
    d.update(extra)
    return d


def _bench_frame(args, frame: int, methods, gather, gK, mode) -> dict:
    seed = args.rng_seed + frame
    kind, n, params = parse_generator(args.gen)
    cloud = generate(kind, n, params, seed)
    cfg = OctreeConfig(args.max_depth, args.leaf_capacity)
    t0 = time.perf_counter()
    index = build_index(cloud, cfg)
    index.build_stats.wall_time = time.perf_counter() - t0
    out = {"frame": frame, "rng_seed": seed, "N": n, "octree": dict(index.stats(), build_counters=index.build_stats.to_dict())}
    runs = {}
    tables = {}
    for method in methods:
        walls = []
        for rep in range(args.repeats):
            table = run_sampler(method, index, args.k, seed)
            walls.append(table.counters.wall_time)
        table.counters.wall_time = statistics.median(walls)
        tables[method] = table
        entry = {"counters": table.counters.to_dict()}
        if method.startswith("ois"):
            entry["total_with_build"] = ois_total(table, index).to_dict()
            entry["build_work_fraction"] = build_work_fraction(index, table)
            entry["wall_time"] = {
                "build": index.build_stats.wall_time,
                "sample_median": table.counters.wall_time,
                "build_overhead_fraction": index.build_stats.wall_time
                / (index.build_stats.wall_time + table.counters.wall_time),
            }
        runs[method] = entry
    if methods and args.quality:
        ref = tables.get("fps") or fps_exact(index.reordered, SamplingConfig(args.k))
        r_fps = coverage_radius(index.reordered, ref)
        for method in methods:
            r = coverage_radius(index.reordered, tables[method])
            runs[method]["coverage_radius"] = r
            runs[method]["coverage_ratio_vs_fps"] = r / r_fps if r_fps > 0 else None
        out["coverage_radius_fps"] = r_fps
    if "fps" in tables:
        fps_c = tables["fps"].counters
        for method in methods:
            if method.startswith("ois"):
                runs[method]["savings_ratio"] = savings_ratio(fps_c, ois_total(tables[method], index))
    out["sampling"] = runs
    if gather:
        rng = np.random.default_rng([seed, 1])
        m = min(args.centrals, n)
        centrals = np.sort(rng.choice(n, size=m, replace=False))
        _, gout = run_gather(gather, mode, index, centrals, gK, args.radius, seed, 1, args.verify)
        out["gathering"] = gout
    return out


def cmd_bench(args) -> dict:
    if not args.gen:
        raise UsageError("bench needs --gen")
    methods = [m for m in (args.methods.split(",") if args.methods else []) if m]
    for m in methods:
        if m not in SAMPLERS:
            raise UsageError(f"unknown method {m!r}; choose from {', '.join(SAMPLERS)}")
    gather, gK = _parse_gather(args.gather)
    if gather and gather.endswith("ball") and args.radius is None:
        raise UsageError(f"{gather} needs --radius")
    if not methods and not gather:
        raise UsageError("nothing to run: give --methods and/or --gather")
    mode = MODES[args.mode]

    t0 = time.perf_counter()
    frame_ids = range(args.frames)
    if args.workers > 1:
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            frames = list(pool.map(lambda f: _bench_frame(args, f, methods, gather, gK, mode), frame_ids))
    else:
        frames = [_bench_frame(args, f, methods, gather, gK, mode) for f in frame_ids]
    elapsed = time.perf_counter() - t0

    kind, n, _ = parse_generator(args.gen)
    summary: dict = {"frames": args.frames, "N": n, "K": args.k}
    for method in methods:
        s = {}
        ratios = [f["sampling"][method].get("savings_ratio") for f in frames]
        if all(r is not None for r in ratios):
            s["savings_ratio_median"] = statistics.median(ratios)
            s["savings_closed_form"] = closed_form_savings(n, args.k)
            s["closed_form_at_1e6_4096"] = closed_form_savings(10**6, 4096)
            s["reported_band"] = list(REPORTED_SAVINGS_BAND)
        cov = [f["sampling"][method].get("coverage_ratio_vs_fps") for f in frames]
        if args.quality and all(c is not None for c in cov):
            s["coverage_ratio_vs_fps_median"] = statistics.median(cov)
            s["coverage_not_worse_than_fps"] = sum(
                f["sampling"][method]["coverage_radius"] <= f["coverage_radius_fps"] for f in frames
            )
            s["coverage_not_better_than_fps"] = sum(
                f["sampling"][method]["coverage_radius"] >= f["coverage_radius_fps"] for f in frames
            )
        if method.startswith("ois"):
            s["build_work_fraction_median"] = statistics.median(f["sampling"][method]["build_work_fraction"] for f in frames)
        summary[method] = s
    if gather:
        sc = [v for f in frames for v in f["gathering"]["workload"]["sort_candidates"]["values"]]
        summary["gathering"] = {
            "method": gather,
            "mode": mode,
            "K": gK,
            "sort_candidates": _distribution(sc),
            "brute_force_per_central": n - 1,
        }
        if args.verify:
            summary["gathering"]["equivalence_all"] = all(f["gathering"]["equivalence"] for f in frames)
            if gather.endswith("knn"):
                summary["gathering"]["recall_mean"] = float(np.mean([f["gathering"]["recall"] for f in frames]))
    return {
        "tool": {"name": "pcprep", "version": __version__},
        "command": "bench",
        "config": _config_echo(args),
        "frames": frames,
        "summary": summary,
        "timing": {"elapsed": elapsed, "frames_per_second": args.frames / elapsed if elapsed > 0 else None},
    }


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gen", help="synthetic source kind:N[:key=value,...]")
    p.add_argument("--k", type=int, help="number of points to sample")
    p.add_argument("--gather", help="gather method and width, e.g. veg-knn:32")
    p.add_argument("--mode", choices=sorted(MODES), default="strict")
    p.add_argument("--radius", type=float)
    p.add_argument("--centrals", type=int, default=128)
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--verify", action="store_true", help="run brute-force oracles and embed equivalence")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--max-depth", type=int, default=12)
    p.add_argument("--leaf-capacity", type=int, default=8)
    p.add_argument("--out", type=Path, help="write the JSON report here instead of stdout")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pcprep", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"pcprep {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pipeline", help="index -> sample -> gather -> feature map")
    _common(p)
    p.add_argument("--in", dest="input", type=Path, help=".xyz or .bin point file")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--sample", choices=SAMPLERS, default="ois")
    p.add_argument("--export-index", type=Path)
    p.add_argument("--export-featuremap", type=Path)
    p.add_argument("--emit-picks", action="store_true", help="include picked original indices in the report")
    p.set_defaults(func=cmd_pipeline)

    b = sub.add_parser("bench", help="method x frame grid with savings and workload statistics")
    _common(b)
    b.add_argument("--methods", default="fps,ois", help="comma list of samplers (may be empty)")
    b.add_argument("--frames", type=int, default=1)
    b.add_argument("--repeats", type=int, default=1)
    b.add_argument("--no-quality", dest="quality", action="store_false", help="skip coverage radii")
    b.set_defaults(func=cmd_bench)
    return parser


def _summarize(report: dict) -> str:
    lines = [f"pcprep {report['command']}"]
    if report["command"] == "pipeline":
        s = report["sampling"]
        lines.append(f"  N={report['input']['N']} depth={report['octree']['depth']} sample={s['method']} K={s['K']}")
        if "savings_vs_fps" in s:
            lines.append(f"  memory-access savings vs FPS: {s['savings_vs_fps']:.1f}x")
        g = report.get("gathering")
        if g:
            lines.append(
                f"  gather={g['method']} mean sort candidates={g['workload']['sort_candidates']['mean']:.1f}"
                f" (brute force {g['workload']['brute_force_per_central']})"
            )
            if "equivalence" in g:
                lines.append(f"  oracle equivalence={g['equivalence']} recall={g['recall']}")
    else:
        for key, val in report["summary"].items():
            if isinstance(val, dict):
                brief = {k: v for k, v in val.items() if not isinstance(v, (dict, list))}
                lines.append(f"  {key}: {brief}")
    return "\n".join(lines)


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("PCPREP_LOG", "WARNING").upper(), stream=sys.stderr)
    parser = make_parser()
    args = parser.parse_args(argv)
    if args.workers < 1 or args.centrals < 1 or (args.k is not None and args.k < 1):
        parser.error("--workers, --centrals and --k must be positive")
    try:
        report = args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except PcprepError as exc:
        print(f"pcprep: error: {exc}", file=sys.stderr)
        return 1
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    print(_summarize(report), file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
