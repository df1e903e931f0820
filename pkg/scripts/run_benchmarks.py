#!/usr/bin/env python3
"""Run the build, lookup and search benchmarks and write one CSV per experiment."""

import argparse
import logging
from pathlib import Path

from privshard.bench import EXPERIMENTS, BenchConfig, write_csv

log = logging.getLogger("run_benchmarks")

DEFAULT_SIZES = {
    "build": (1_000, 10_000, 100_000),
    "lookup": (1_000, 10_000, 100_000),
    "search": (1_000, 10_000),
}


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out-dir", default="results")
    p.add_argument("--only", choices=sorted(EXPERIMENTS), action="append")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--quick", action="store_true", help="use sizes 100 and 1000 for a smoke run")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name in args.only or sorted(EXPERIMENTS):
        sizes = (100, 1_000) if args.quick else DEFAULT_SIZES[name]
        config = BenchConfig(sizes=sizes, seed=args.seed, repetitions=args.reps)
        log.info("running %s at sizes %s", name, sizes)
        rows = EXPERIMENTS[name](config)
        path = out / f"{name}.csv"
        write_csv(rows, path)
        for r in sorted(rows, key=lambda r: (r.n, r.phase)):
            agree = "" if r.agreement is None else f" agreement={r.agreement:.2f}"
            log.info("  n=%-7d %-10s median=%.3f ms p90=%.3f ms%s", r.n, r.phase, r.median_ns / 1e6, r.p90_ns / 1e6, agree)
        log.info("wrote %s", path)


if __name__ == "__main__":
    main()
