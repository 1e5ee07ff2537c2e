"""Command-line interface: ``rkbsvm {train,predict,evaluate,check,benchmark}``.

Settings come from built-in defaults, then an optional JSON file given by
``--config`` (keys are the long flag names with dashes or underscores),
then explicit flags.

Exit codes
----------
0  success
1  benchmark: every cell failed
2  configuration error (bad flag value, unreadable config file)
3  data error (missing or malformed file, point outside the kernel domain,
   bad model file)
4  solver divergence in every restart
5  check: the rank condition does not hold
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import replace

from .admm import NewtonSolveError, SolverConfig, SolverDivergence, multi_start_solve, write_trace_csv
from .benchmark import BenchmarkConfig, format_table, run_benchmark, write_benchmark_csv
from .data import DataError, generate_overlapping_squares, load_csv, load_points
from .kernels import KernelDomainError, KernelSpec, build_feature_matrix, check_rank_assumption, default_truncation
from .losses import BUILTIN_LOSSES, get_loss
from .model import (
    ModelFormatError,
    TrainedModel,
    confusion_counts,
    decision_values,
    evaluate_accuracy,
    load_model,
    save_model,
)
from .tensor import TensorHandle

EXIT_OK = 0
EXIT_ALL_FAILED = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGENCE = 4
EXIT_NOT_SATISFIED = 5

DEFAULTS = {
    "kernel": "gaussian",
    "sigma": 1.0,
    "m": 1,
    "loss": "hinge",
    "lambda": 0.04,
    "beta": 0.1,
    "M": None,
    "eps1": 1e-10,
    "eps2": None,
    "max_outer": 5000,
    "max_newton": 50,
    "restarts": 20,
    "seed": 0,
    "init_box": [-1.0, 1.0],
    "train": None,
    "test": None,
    "model": "model.json",
    "out": None,
    "trace": None,
    "generate": None,
    "label_column": "-1",
    "jobs": 1,
    "losses": ",".join(BUILTIN_LOSSES),
    "ms": "1,2,3",
    "seeds": "0,1,2,3,4",
}


class ConfigError(ValueError):
    pass


def _add_common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model and solver")
    g.add_argument("--config", help="JSON file with default settings; flags override it")
    g.add_argument("--kernel", choices=("gaussian", "min"), help="kernel family (default gaussian)")
    g.add_argument("--sigma", type=float, help="Gaussian shape parameter (default 1)")
    g.add_argument("--m", type=int, help="space exponent: the norm is l^{2m/(2m-1)} (default 1)")
    g.add_argument("--loss", help=f"one of {', '.join(BUILTIN_LOSSES)} or l1..l4 (default hinge)")
    g.add_argument("--lambda", dest="lambda_", type=float, help="regularization weight (default 0.04)")
    g.add_argument("--beta", type=float, help="augmented Lagrangian penalty (default 0.1)")
    g.add_argument("--M", type=int, help="number of features kept (default max(N(N+1)/2, 64))")
    g.add_argument("--eps1", type=float, help="Newton step tolerance (default 1e-10)")
    g.add_argument("--eps2", type=float, help="primal residual tolerance (default 1e-12*sqrt(N))")
    g.add_argument("--max-outer", type=int, help="outer iteration cap (default 5000)")
    g.add_argument("--max-newton", type=int, help="Newton iteration cap per c-step (default 50)")
    g.add_argument("--restarts", type=int, help="random initializations (default 20)")
    g.add_argument("--seed", type=int, help="base seed; restart j uses seed XOR j (default 0)")
    g.add_argument("--init-box", type=float, nargs=2, metavar=("LO", "HI"),
                   help="box for random initial coefficients (default -1 1)")
    g.add_argument("--jobs", type=int, help="threads for restarts (default 1)")
    d = p.add_argument_group("data and files")
    d.add_argument("--train", help="training CSV (features then label by default)")
    d.add_argument("--test", help="test CSV")
    d.add_argument("--label-column", help="label column name or index (default -1, the last)")
    d.add_argument("--generate", metavar="squares:N_TRAIN:N_TEST",
                   help="use generated overlapping-squares data instead of CSV files")
    d.add_argument("--model", help="model file to write or read (default model.json)")
    d.add_argument("--out", help="output file")
    d.add_argument("--trace", help="trace CSV written by train (default <model>.trace.csv)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rkbsvm", description=__doc__.split("\n")[0],
                                     epilog="exit codes: 0 ok, 1 all benchmark cells failed, 2 config error, "
                                            "3 data error, 4 solver divergence, 5 rank condition not met",
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver warnings")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "train": "fit a model and write it with its iteration trace",
        "predict": "write decision values and labels for unlabelled points",
        "evaluate": "report accuracy and a confusion table on labelled data",
        "check": "test whether the feature matrix meets the rank condition",
        "benchmark": "run the loss-by-space accuracy grid on overlapping squares",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        _add_common(p)
        if name == "benchmark":
            p.add_argument("--losses", help="comma-separated losses (default all four)")
            p.add_argument("--ms", help="comma-separated m values (default 1,2,3)")
            p.add_argument("--seeds", help="comma-separated seeds (default 0,1,2,3,4)")
    return parser


def resolve_settings(args: argparse.Namespace) -> dict:
    settings = dict(DEFAULTS)
    if args.command == "benchmark":
        settings.update({"kernel": "min", "lambda": 0.01, "beta": 1.0, "M": 64, "max_outer": 1000,
                         "out": "benchmark.csv"})
    if args.config:
        try:
            with open(args.config) as fh:
                file_settings = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from exc
        if not isinstance(file_settings, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, value in file_settings.items():
            norm = key.replace("-", "_")
            if norm not in settings:
                raise ConfigError(f"unknown config key {key!r}")
            settings[norm] = value
    for key, value in vars(args).items():
        norm = "lambda" if key == "lambda_" else key
        if norm in settings and value is not None:
            settings[norm] = value
    return settings


def _solver_config(s: dict) -> SolverConfig:
    try:
        return SolverConfig(lam=float(s["lambda"]), beta=float(s["beta"]), m=int(s["m"]), eps1=float(s["eps1"]),
                            eps2=None if s["eps2"] is None else float(s["eps2"]), max_outer=int(s["max_outer"]),
                            max_newton=int(s["max_newton"]), restarts=int(s["restarts"]), seed=int(s["seed"]),
                            init_box=tuple(s["init_box"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _kernel(s: dict, d: int) -> KernelSpec:
    try:
        return KernelSpec(s["kernel"], d, float(s["sigma"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _loss(s: dict):
    try:
        return get_loss(str(s["loss"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _parse_generate(spec: str):
    parts = str(spec).split(":")
    if len(parts) != 3 or parts[0] != "squares":
        raise ConfigError(f"--generate expects squares:N_TRAIN:N_TEST, got {spec!r}")
    try:
        return int(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"--generate sizes must be integers, got {spec!r}") from None


def _datasets(s: dict, need_train: bool, need_test: bool):
    if s["generate"]:
        n_train, n_test = _parse_generate(s["generate"])
        return generate_overlapping_squares(n_train, n_test, int(s["seed"]))
    train = test = None
    if need_train:
        if not s["train"]:
            raise ConfigError("no training data: pass --train or --generate")
        train = load_csv(s["train"], label_column=s["label_column"])
    if need_test:
        if not s["test"]:
            raise ConfigError("no test data: pass --test or --generate")
        test = load_csv(s["test"], label_column=s["label_column"])
    return train, test


def _truncation(s: dict, N: int) -> int:
    if s["M"] is None:
        return default_truncation(N)
    M = int(s["M"])
    if M < 1:
        raise ConfigError(f"M must be positive, got {M}")
    return M


def _rank_line(report) -> str:
    rank = "not computed" if report.numeric_rank is None else str(report.numeric_rank)
    return (f"M={report.M} N={report.N} N(N+1)/2={report.required} rank={rank} "
            f"satisfied={str(report.satisfied).lower()}")


def cmd_train(s: dict) -> int:
    config = _solver_config(s)
    loss = _loss(s)
    train, _ = _datasets(s, need_train=True, need_test=False)
    kernel = _kernel(s, train.d)
    M = _truncation(s, train.N)
    fm = build_feature_matrix(kernel, M, train.points)
    report = check_rank_assumption(fm)
    result = multi_start_solve(TensorHandle(fm, config.m), loss, train, config, n_jobs=int(s["jobs"]))
    model = TrainedModel(kernel, M, config.m, result.c_star, train.points, config.lam, config.beta,
                         result.objective)
    save_model(model, s["model"])
    trace_path = s["trace"] or os.path.splitext(s["model"])[0] + ".trace.csv"
    write_trace_csv(result.trace, trace_path)
    print(f"objective={result.objective!r}")
    print(f"iterations={result.iterations}")
    print(f"converged={str(result.converged).lower()}")
    print(f"restart={result.restart_index}")
    print(f"rank condition: {_rank_line(report)}")
    print(f"model written to {s['model']}, trace to {trace_path}")
    return EXIT_OK


def cmd_predict(s: dict) -> int:
    model = load_model(s["model"])
    if s["generate"]:
        _, test = _datasets(s, need_train=False, need_test=True)
        points = test.points
    elif s["test"]:
        points = load_points(s["test"])
    else:
        raise ConfigError("no points: pass --test or --generate")
    f = decision_values(model, points)
    fh = open(s["out"], "w", newline="") if s["out"] else sys.stdout
    try:
        writer = csv.writer(fh)
        writer.writerow(["decision_value", "label"])
        for v in f:
            writer.writerow([repr(float(v)), 1 if v >= 0.0 else -1])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def cmd_evaluate(s: dict) -> int:
    model = load_model(s["model"])
    _, test = _datasets(s, need_train=False, need_test=True)
    acc = evaluate_accuracy(model, test)
    counts = confusion_counts(model, test)
    print(f"accuracy={acc:.3f}")
    print("            pred +1  pred -1")
    for t in (1, -1):
        print(f"true {t:+d}   {counts[(t, 1)]:7d}  {counts[(t, -1)]:7d}")
    return EXIT_OK


def cmd_check(s: dict) -> int:
    train, _ = _datasets(s, need_train=True, need_test=False)
    kernel = _kernel(s, train.d)
    M = _truncation(s, train.N)
    report = check_rank_assumption(build_feature_matrix(kernel, M, train.points))
    print(_rank_line(report))
    if report.numeric_rank is None:
        print(f"M={M} is below N(N+1)/2={report.required}, so the rank condition cannot hold")
    return EXIT_OK if report.satisfied else EXIT_NOT_SATISFIED


def _int_list(text, name):
    try:
        return tuple(int(v) for v in str(text).split(","))
    except ValueError:
        raise ConfigError(f"--{name} expects comma-separated integers, got {text!r}") from None


def cmd_benchmark(s: dict) -> int:
    losses = tuple(get_loss(name).name for name in str(s["losses"]).split(","))
    n_train, n_test = _parse_generate(s["generate"]) if s["generate"] else (300, 120)
    M = _truncation(s, n_train)
    bench = BenchmarkConfig(losses=losses, ms=_int_list(s["ms"], "ms"), seeds=_int_list(s["seeds"], "seeds"),
                            n_train=n_train, n_test=n_test, M=M, solver=replace(_solver_config(s), m=1))
    trace_dir = os.path.splitext(s["out"])[0] + "_traces"
    rows = run_benchmark(bench, trace_dir=trace_dir, n_jobs=int(s["jobs"]))
    write_benchmark_csv(rows, s["out"])
    print(format_table(rows, M))
    print(f"table written to {s['out']}, traces to {trace_dir}")
    failed = sum(1 for r in rows if r.error)
    if failed:
        print(f"{failed} of {len(rows)} cells failed")
    return EXIT_ALL_FAILED if failed == len(rows) else EXIT_OK


COMMANDS = {"train": cmd_train, "predict": cmd_predict, "evaluate": cmd_evaluate, "check": cmd_check,
            "benchmark": cmd_benchmark}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        settings = resolve_settings(args)
        if args.command == "benchmark" and str(settings["kernel"]) != "min":
            raise ConfigError("benchmark uses the min kernel on [0,1]^2")
        return COMMANDS[args.command](settings)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, KernelDomainError, ModelFormatError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SolverDivergence, NewtonSolveError) as exc:
        print(f"solver diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
