"""Benchmark the DBSCAN kernel: numba JIT path vs. pure-numpy fallback.

Usage:
    python3 benchmarks/bench_dbscan.py [--sizes 100,500,2000] [--repeats 5]

Both paths run on identical inputs; results are checked for equality so a
speedup never comes from divergent behavior.
"""

import argparse
import random
import statistics
import time

from cgtkit.clustering import dbscan


def bench(n: int, repeats: int, use_numba: bool, seed: int = 0) -> float:
    rng = random.Random(seed)
    pts = [(rng.uniform(0, 100), rng.uniform(0, 100)) for _ in range(n)]
    # Warm up (includes JIT compilation on the numba path).
    dbscan(pts, eps=3.0, min_pts=4, use_numba=use_numba)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        dbscan(pts, eps=3.0, min_pts=4, use_numba=use_numba)
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="100,500,2000",
                    help="comma-separated point counts")
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    print(f"{'n':>8}{'numpy (ms)':>14}{'numba (ms)':>14}{'speedup':>10}")
    for n in sizes:
        rng = random.Random(n)
        pts = [(rng.uniform(0, 100), rng.uniform(0, 100)) for _ in range(n)]
        assert dbscan(pts, eps=3.0, min_pts=4, use_numba=True) == \
            dbscan(pts, eps=3.0, min_pts=4, use_numba=False), "paths diverge"
        t_np = bench(n, args.repeats, use_numba=False)
        t_nb = bench(n, args.repeats, use_numba=True)
        print(f"{n:>8}{t_np * 1e3:>14.2f}{t_nb * 1e3:>14.2f}{t_np / t_nb:>10.1f}x")


if __name__ == "__main__":
    main()
