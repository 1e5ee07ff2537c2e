"""Trained classifiers: decision values, the sign rule and JSON persistence.

A model is determined by its training points and coefficients c. With
u = B c over the first M features, the decision function is

    f(x) = sum_n u_n^{2m-1} phi_n(x).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .kernels import KernelSpec, build_feature_matrix, feature_columns
from .tensor import int_power

FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """A model file is malformed or violates the schema."""


class ModelVersionError(ModelFormatError):
    """A model file was written in an unsupported format version."""


@dataclass(frozen=True)
class TrainedModel:
    kernel: KernelSpec
    M: int
    m: int
    c: np.ndarray
    training_points: np.ndarray
    lam: float
    beta: float
    objective: float
    format_version: int = FORMAT_VERSION
    _weights: np.ndarray = field(init=False, repr=False, compare=False)
    _index_list: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        c = np.array(self.c, dtype=float).reshape(-1)
        pts = self.kernel.check_domain(self.training_points)
        pts = np.array(pts, dtype=float)
        if c.shape[0] != pts.shape[0]:
            raise ModelFormatError(f"c has {c.shape[0]} entries but there are {pts.shape[0]} training points")
        if int(self.m) != self.m or self.m < 1 or int(self.M) != self.M or self.M < 1:
            raise ModelFormatError("M and m must be positive integers")
        if not np.all(np.isfinite(c)):
            raise ModelFormatError("coefficients must be finite")
        c.setflags(write=False)
        pts.setflags(write=False)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "training_points", pts)
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "m", int(self.m))
        fm = build_feature_matrix(self.kernel, self.M, pts)
        w = int_power(fm.values @ c, 2 * self.m - 1)
        w.setflags(write=False)
        object.__setattr__(self, "_weights", w)
        object.__setattr__(self, "_index_list", fm.index_list)

    @property
    def N(self) -> int:
        return self.c.shape[0]

    @property
    def feature_weights(self) -> np.ndarray:
        """u^{2m-1}, the coefficient of each feature in the decision function."""
        return self._weights


def decision_values(model: TrainedModel, points) -> np.ndarray:
    """f at every row of ``points``."""
    cols = feature_columns(model.kernel, model._index_list, points)
    return model.feature_weights @ cols


def decision_value(model: TrainedModel, x) -> float:
    pt = np.reshape(np.asarray(x, dtype=float), (1, model.kernel.dimension))
    return float(decision_values(model, pt)[0])


def classify_values(f) -> np.ndarray:
    """The sign rule: +1 where f >= 0, else -1."""
    return np.where(np.asarray(f) >= 0.0, 1, -1)


def classify(model: TrainedModel, x) -> int:
    return int(classify_values(decision_value(model, x)))


def predict(model: TrainedModel, points) -> np.ndarray:
    return classify_values(decision_values(model, points))


def evaluate_accuracy(model: TrainedModel, data: Dataset) -> float:
    if len(data.labels) == 0:
        raise ValueError("cannot score an empty dataset")
    return float(np.mean(predict(model, data.points) == data.labels))


def confusion_counts(model: TrainedModel, data: Dataset) -> dict:
    """Counts keyed by (true label, predicted label)."""
    pred = predict(model, data.points)
    return {(t, p): int(np.sum((data.labels == t) & (pred == p))) for t in (1, -1) for p in (1, -1)}


def model_to_dict(model: TrainedModel) -> dict:
    # repr of a Python float is the shortest string that round-trips exactly
    return {
        "format_version": model.format_version,
        "kernel": {"family": model.kernel.family, "d": model.kernel.dimension, "sigma": model.kernel.sigma},
        "M": model.M,
        "m": model.m,
        "lambda": model.lam,
        "beta": model.beta,
        "objective": model.objective,
        "training_points": [[float(v) for v in row] for row in model.training_points],
        "c": [float(v) for v in model.c],
    }


def model_from_dict(doc: dict) -> TrainedModel:
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelVersionError(f"unsupported model format_version {version!r} (expected {FORMAT_VERSION})")
    try:
        k = doc["kernel"]
        kernel = KernelSpec(k["family"], k["d"], k.get("sigma", 1.0))
        pts = np.array(doc["training_points"], dtype=float)
        c = np.array(doc["c"], dtype=float)
        if pts.ndim != 2 or pts.shape[1] != kernel.dimension:
            raise ModelFormatError(f"training_points must be N x {kernel.dimension}")
        if c.ndim != 1 or c.shape[0] != pts.shape[0]:
            raise ModelFormatError(f"c has {c.size} entries but there are {pts.shape[0]} training points")
        return TrainedModel(kernel, doc["M"], doc["m"], c, pts, float(doc["lambda"]), float(doc["beta"]),
                            float(doc["objective"]), version)
    except KeyError as exc:
        raise ModelFormatError(f"model document is missing field {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"invalid model document: {exc}") from exc


def save_model(model: TrainedModel, path) -> None:
    doc = model_to_dict(model)
    if not math.isfinite(model.objective):
        doc["objective"] = None
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_model(path) -> TrainedModel:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path} is not valid JSON: {exc}") from exc
    if isinstance(doc, dict) and doc.get("objective", 0.0) is None:
        doc["objective"] = math.nan
    return model_from_dict(doc)
