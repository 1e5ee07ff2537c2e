"""Banknote authentication recipe: PCA to three components, Gaussian kernel.

Needs a local copy of the UCI file ``data_banknote_authentication.txt``
(four features then a 0/1 class, comma separated, no header). Class 1 is
mapped to +1 and class 0 to -1. A balanced random sample of 200 training
and 100 test points is drawn.

    python scripts/banknote_recipe.py data_banknote_authentication.txt
"""

import argparse

import numpy as np

from rkbsvm.admm import NewtonSolveError, SolverConfig, SolverDivergence, multi_start_solve
from rkbsvm.data import Dataset, load_csv, pca_project
from rkbsvm.kernels import KernelSpec, build_feature_matrix, default_truncation
from rkbsvm.losses import BUILTIN_LOSSES, get_loss
from rkbsvm.model import TrainedModel, evaluate_accuracy
from rkbsvm.tensor import TensorHandle


def balanced_split(data, n_train, n_test, seed):
    rng = np.random.default_rng(seed)
    train_ix, test_ix = [], []
    for label in (1.0, -1.0):
        ix = rng.permutation(np.flatnonzero(data.labels == label))
        train_ix.extend(ix[:n_train // 2])
        test_ix.extend(ix[n_train // 2:(n_train + n_test) // 2])
    pick = lambda ix: Dataset(data.points[ix], data.labels[ix])  # noqa: E731
    return pick(np.array(train_ix)), pick(np.array(test_ix))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("path")
    p.add_argument("--sigma", type=float, default=0.5)
    p.add_argument("--M", type=int, default=None)
    p.add_argument("--max-outer", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    raw = load_csv(args.path, label_column=4, header=False, label_map={"0": -1, "1": 1})
    data = Dataset(pca_project(raw.points, 3), raw.labels, "banknote-pca3")
    train, test = balanced_split(data, 200, 100, args.seed)
    kernel = KernelSpec("gaussian", 3, args.sigma)
    M = args.M or default_truncation(train.N)
    fm = build_feature_matrix(kernel, M, train.points)
    print(f"M={M}")
    for name in BUILTIN_LOSSES:
        for m in (1, 2, 3):
            cfg = SolverConfig(lam=0.01, beta=0.01, m=m, max_outer=args.max_outer, seed=args.seed)
            try:
                res = multi_start_solve(TensorHandle(fm, m), get_loss(name), train, cfg)
            except (SolverDivergence, NewtonSolveError) as exc:
                print(f"{name:14s} m={m}  diverged: {exc}")
                continue
            model = TrainedModel(kernel, M, m, res.c_star, train.points, cfg.lam, cfg.beta, res.objective)
            print(f"{name:14s} m={m}  accuracy {evaluate_accuracy(model, test):.3f}")


if __name__ == "__main__":
    main()
