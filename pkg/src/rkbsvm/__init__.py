"""Support vector machines in l^{2m/(2m-1)} reproducing kernel Banach spaces.

Training solves a symmetric-tensor problem by ADMM splitting with a Newton
inner solver; see the README for the command-line interface.
"""

from .admm import SolveResult, SolverConfig, multi_start_solve, solve
from .data import Dataset, generate_overlapping_squares, load_csv
from .kernels import KernelSpec, build_feature_matrix, check_rank_assumption
from .losses import LossSpec, get_loss
from .model import TrainedModel, decision_value, evaluate_accuracy, load_model, save_model
from .tensor import TensorHandle

__all__ = [
    "Dataset", "KernelSpec", "LossSpec", "SolveResult", "SolverConfig", "TensorHandle", "TrainedModel",
    "build_feature_matrix", "check_rank_assumption", "decision_value", "evaluate_accuracy",
    "generate_overlapping_squares", "get_loss", "load_csv", "load_model", "multi_start_solve",
    "save_model", "solve",
]
