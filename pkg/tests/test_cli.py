import csv
import json

import numpy as np
import pytest

from rkbsvm.cli import (
    EXIT_ALL_FAILED,
    EXIT_CONFIG,
    EXIT_DATA,
    EXIT_NOT_SATISFIED,
    EXIT_OK,
    build_parser,
    main,
)
from rkbsvm.data import Dataset, save_csv
from rkbsvm.kernels import KernelSpec
from rkbsvm.model import TrainedModel, load_model, save_model

SMALL = ["--generate", "squares:20:10", "--kernel", "min", "--restarts", "3"]


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def test_help_lists_every_flag(capsys):
    with pytest.raises(SystemExit):
        build_parser().parse_args(["train", "--help"])
    text = capsys.readouterr().out
    for flag in ("--kernel", "--sigma", "--m", "--loss", "--lambda", "--beta", "--M", "--eps1", "--eps2",
                 "--max-outer", "--max-newton", "--restarts", "--seed", "--train", "--test", "--model", "--out",
                 "--generate", "--config"):
        assert flag in text


def test_train_then_evaluate(workdir, capsys):
    assert main(["train", *SMALL, "--loss", "squared-hinge", "--model", "m.json"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "converged=true" in out and "rank condition" in out
    assert (workdir / "m.json").exists() and (workdir / "m.trace.csv").exists()
    assert main(["evaluate", *SMALL, "--model", "m.json"]) == EXIT_OK
    line = capsys.readouterr().out.splitlines()[0]
    acc = float(line.split("=")[1])
    assert 0.0 <= acc <= 1.0 and len(line.split("=")[1]) == 5


def test_config_file_and_override(workdir, capsys):
    (workdir / "cfg.json").write_text(json.dumps({"lambda": 0.5, "max-outer": 3, "loss": "l2"}))
    assert main(["train", *SMALL, "--config", "cfg.json", "--max-outer", "4", "--model", "m.json"]) == EXIT_OK
    model = load_model("m.json")
    assert model.lam == 0.5
    assert "iterations=4" in capsys.readouterr().out
    (workdir / "bad.json").write_text(json.dumps({"colour": 1}))
    assert main(["train", *SMALL, "--config", "bad.json"]) == EXIT_CONFIG


def test_error_exit_codes(workdir, capsys):
    assert main(["train", "--train", "missing.csv"]) == EXIT_DATA
    assert "missing.csv" in capsys.readouterr().err
    assert main(["train", *SMALL, "--lambda", "0"]) == EXIT_CONFIG
    assert main(["train", *SMALL, "--loss", "logistic"]) == EXIT_CONFIG
    assert main(["train", "--generate", "circles:3:3"]) == EXIT_CONFIG
    assert main(["evaluate", "--model", "nothing.json", "--generate", "squares:4:4"]) == EXIT_DATA


def test_evaluate_zero_model_and_domain_error(workdir, capsys):
    save_model(TrainedModel(KernelSpec("min", 1), 4, 1, [0.0, 0.0], [[0.2], [0.7]], 0.1, 0.1, 0.0), "z.json")
    save_csv(Dataset([[0.1], [0.5], [0.9]], [1, 1, 1]), "pos.csv")
    assert main(["evaluate", "--model", "z.json", "--test", "pos.csv"]) == EXIT_OK
    assert "accuracy=1.000" in capsys.readouterr().out
    save_csv(Dataset([[1.5]], [1]), "far.csv")
    assert main(["evaluate", "--model", "z.json", "--test", "far.csv"]) == EXIT_DATA
    assert "[0, 1]" in capsys.readouterr().err


def test_predict_writes_values(workdir):
    save_model(TrainedModel(KernelSpec("gaussian", 1), 3, 1, [1.0, -2.0], [[0.2], [0.7]], 0.1, 0.1, 0.0), "g.json")
    (workdir / "pts.csv").write_text("x\n0.1\n0.9\n")
    assert main(["predict", "--model", "g.json", "--test", "pts.csv", "--out", "p.csv"]) == EXIT_OK
    rows = list(csv.DictReader(open("p.csv")))
    assert len(rows) == 2
    for r in rows:
        assert int(r["label"]) == (1 if float(r["decision_value"]) >= 0 else -1)


def test_check_command(workdir, capsys):
    save_csv(Dataset([[0.1], [0.5]], [1, -1]), "two.csv")
    assert main(["check", "--train", "two.csv", "--M", "3"]) == EXIT_OK
    assert "satisfied=true" in capsys.readouterr().out
    save_csv(Dataset([[0.1], [0.5], [0.9]], [1, -1, 1]), "three.csv")
    assert main(["check", "--train", "three.csv", "--M", "5"]) == EXIT_NOT_SATISFIED
    assert "cannot hold" in capsys.readouterr().out
    save_csv(Dataset([[0.1], [0.5], [0.5]], [1, -1, 1]), "dup.csv")
    assert main(["check", "--train", "dup.csv", "--M", "30"]) == EXIT_NOT_SATISFIED


def test_benchmark_grid(workdir, capsys):
    args = ["benchmark", "--generate", "squares:20:10", "--M", "16", "--seeds", "0", "--restarts", "2",
            "--max-outer", "30", "--out", "b.csv"]
    assert main(args) == EXIT_OK
    out = capsys.readouterr().out
    assert "M=16" in out
    rows = list(csv.reader(open("b.csv")))
    assert rows[0] == ["loss", "m", "seed", "accuracy", "objective", "iterations", "converged"]
    assert len(rows) == 13
    assert len(list((workdir / "b_traces").iterdir())) == 12
    first = open("b.csv").read()
    assert main(args) == EXIT_OK
    assert open("b.csv").read() == first


def test_benchmark_all_cells_failing(workdir, monkeypatch):
    import rkbsvm.benchmark as bench
    from rkbsvm.admm import SolverDivergence

    def boom(*a, **k):
        raise SolverDivergence("forced")

    monkeypatch.setattr(bench, "multi_start_solve", boom)
    args = ["benchmark", "--generate", "squares:4:4", "--M", "4", "--seeds", "0", "--ms", "1", "--losses", "l1",
            "--out", "b.csv"]
    assert main(args) == EXIT_ALL_FAILED
    assert list(csv.reader(open("b.csv")))[1][3] == "nan"
