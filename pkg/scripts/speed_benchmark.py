#!/usr/bin/env python3
"""Time the Lloyd solver against exhaustive grid search, and a large-N solve.

    python3 scripts/speed_benchmark.py --n 100000 --segments 5 --grid-points 10
    python3 scripts/speed_benchmark.py --large 1200000
"""
import argparse
import json
import time

from coarse_personalization import SolverConfig, SynthConfig, generate_population, solve, speed_benchmark


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--segments", type=int, default=5)
    ap.add_argument("--grid-points", type=int, default=10)
    ap.add_argument("--seed", type=int, default=5)
    ap.add_argument("--large", type=int, default=0, help="also time one solve at this N")
    args = ap.parse_args()

    pop = generate_population(SynthConfig(seed=args.seed, n=args.n, covariates="none"))
    res = speed_benchmark(pop, args.segments, args.grid_points)
    print(json.dumps({"lloyd_seconds": res.lloyd_seconds, "grid_seconds": res.grid_seconds,
                      "ratio": res.ratio, "lloyd_profit": res.lloyd_profit,
                      "grid_profit": res.grid_profit, **res.config}, indent=1))

    if args.large:
        big = generate_population(SynthConfig(seed=args.seed, n=args.large, covariates="none"))
        t0 = time.perf_counter()
        out = solve(big, SolverConfig(num_treatments=args.segments))
        print(f"N={args.large} L={args.segments}: {time.perf_counter() - t0:.1f} s, "
              f"ratio to granular {out.report.ratio_to_granular:.4f}")


if __name__ == "__main__":
    main()
