#!/usr/bin/env python3
"""Write every start's iteration trace for one solve as JSON lines."""
import argparse
from pathlib import Path

from coarse_personalization import SolverConfig, solve
from coarse_personalization.io import load_population, parse_space


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("population")
    ap.add_argument("--segments", type=int, default=5)
    ap.add_argument("--starts", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--upper-bounds")
    ap.add_argument("-o", "--output", default="traces.jsonl")
    args = ap.parse_args()

    pop = load_population(args.population, parse_space(args.upper_bounds) if args.upper_bounds else None)
    res = solve(pop, SolverConfig(num_treatments=args.segments, num_starts=args.starts, seed=args.seed))
    Path(args.output).write_text("".join(t.to_jsonl() for t in res.traces))
    for t, p in zip(res.traces, res.start_profits):
        print(f"start {t.start}\t{t.seed_kind}\t{len(t.iterations)} iterations\t{t.termination}\t{p!r}")


if __name__ == "__main__":
    main()
