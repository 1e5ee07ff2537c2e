"""Loss-by-space accuracy grid on the overlapping-squares problem."""

from __future__ import annotations

import csv
import logging
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .admm import NewtonSolveError, SolverConfig, SolverDivergence, multi_start_solve, write_trace_csv
from .data import generate_overlapping_squares
from .kernels import KernelSpec, build_feature_matrix
from .losses import BUILTIN_LOSSES, get_loss
from .model import TrainedModel, evaluate_accuracy
from .tensor import TensorHandle

log = logging.getLogger(__name__)

BENCHMARK_COLUMNS = ("loss", "m", "seed", "accuracy", "objective", "iterations", "converged")


@dataclass(frozen=True)
class BenchmarkConfig:
    losses: tuple = tuple(BUILTIN_LOSSES)
    ms: tuple = (1, 2, 3)
    seeds: tuple = (0, 1, 2, 3, 4)
    n_train: int = 300
    n_test: int = 120
    M: int = 64
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(lam=0.01, beta=1.0, max_outer=1000))


@dataclass(frozen=True)
class BenchmarkRow:
    loss: str
    m: int
    seed: int
    accuracy: float
    objective: float
    iterations: int
    converged: bool
    error: str = ""


def run_benchmark(config: BenchmarkConfig, trace_dir=None, n_jobs: int = 1) -> list[BenchmarkRow]:
    """One row per (seed, loss, m) cell, in that nesting order.

    The data seed doubles as the restart seed. A cell whose restarts all
    fail gets a row with NaN accuracy and the error message.
    """
    kernel = KernelSpec("min", 2)
    if trace_dir is not None:
        os.makedirs(trace_dir, exist_ok=True)
    rows = []
    for seed in config.seeds:
        train, test = generate_overlapping_squares(config.n_train, config.n_test, seed)
        fm = build_feature_matrix(kernel, config.M, train.points)
        for loss_name in config.losses:
            loss = get_loss(loss_name)
            for m in config.ms:
                cfg = replace(config.solver, m=m, seed=seed)
                try:
                    res = multi_start_solve(TensorHandle(fm, m), loss, train, cfg, n_jobs=n_jobs)
                except (SolverDivergence, NewtonSolveError) as exc:
                    log.warning("cell %s m=%d seed=%d failed: %s", loss.name, m, seed, exc)
                    rows.append(BenchmarkRow(loss.name, m, seed, math.nan, math.nan, 0, False, str(exc)))
                    continue
                model = TrainedModel(kernel, config.M, m, res.c_star, train.points, cfg.lam, cfg.beta, res.objective)
                rows.append(BenchmarkRow(loss.name, m, seed, evaluate_accuracy(model, test), res.objective,
                                         res.iterations, res.converged))
                if trace_dir is not None:
                    write_trace_csv(res.trace, os.path.join(trace_dir, f"trace_{loss.name}_m{m}_seed{seed}.csv"))
    return rows


def write_benchmark_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(BENCHMARK_COLUMNS)
        for r in rows:
            writer.writerow([r.loss, r.m, r.seed, repr(r.accuracy), repr(r.objective), r.iterations, r.converged])


def cell_means(rows) -> dict:
    """Mean accuracy per (loss, m) over seeds; NaN if any seed failed."""
    cells: dict = {}
    for r in rows:
        cells.setdefault((r.loss, r.m), []).append(r.accuracy)
    return {key: float(np.mean(vals)) for key, vals in cells.items()}


def format_table(rows, M: int) -> str:
    """Loss-by-space grid of mean accuracies."""
    means = cell_means(rows)
    losses = list(dict.fromkeys(r.loss for r in rows))
    ms = sorted({r.m for r in rows})
    width = max(len(name) for name in losses) + 2
    lines = [f"mean test accuracy (M={M})", "loss".ljust(width) + "".join(f"m={m}".rjust(8) for m in ms)]
    for name in losses:
        lines.append(name.ljust(width) + "".join(f"{means[(name, m)]:8.3f}" for m in ms))
    return "\n".join(lines)
