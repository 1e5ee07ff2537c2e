"""Accuracy grid on the overlapping-squares problem (losses x m x seeds).

    python scripts/squares_benchmark.py --out runs/squares --M 64
"""

import argparse
import time
from dataclasses import replace
from pathlib import Path

from rkbsvm.benchmark import BenchmarkConfig, format_table, run_benchmark, write_benchmark_csv


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, default=Path("runs/squares"))
    p.add_argument("--M", type=int, default=64)
    p.add_argument("--max-outer", type=int, default=1000)
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    p.add_argument("--jobs", type=int, default=1)
    args = p.parse_args(argv)

    base = BenchmarkConfig()
    config = replace(base, M=args.M, seeds=tuple(args.seeds),
                     solver=replace(base.solver, max_outer=args.max_outer))
    args.out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    rows = run_benchmark(config, trace_dir=args.out / "traces", n_jobs=args.jobs)
    write_benchmark_csv(rows, args.out / "benchmark.csv")
    table = format_table(rows, config.M)
    (args.out / "table.txt").write_text(table + "\n")
    print(table)
    print(f"{time.perf_counter() - start:.0f} s")


if __name__ == "__main__":
    main()
