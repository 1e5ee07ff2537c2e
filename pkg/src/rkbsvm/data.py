"""Labelled datasets: CSV ingestion and synthetic generators."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np


class DataError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass(frozen=True)
class Dataset:
    points: np.ndarray
    labels: np.ndarray
    name: str = "dataset"

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        lab = np.array(self.labels, dtype=float).reshape(-1)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise DataError("points must be a non-empty (N, d) array")
        if lab.shape[0] != pts.shape[0]:
            raise DataError(f"{pts.shape[0]} points but {lab.shape[0]} labels")
        if not np.all(np.isfinite(pts)):
            raise DataError("points contain non-finite coordinates")
        if not np.all(np.isin(lab, (-1.0, 1.0))):
            raise DataError("labels must be +1 or -1")
        pts.setflags(write=False)
        lab.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", lab)

    @property
    def N(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.N


def _parse_label(raw: str, label_map: Mapping | None, row: int) -> float:
    if label_map is not None:
        raw_num = _as_float(raw)
        for key, val in label_map.items():
            key_num = _as_float(str(key))
            if raw == str(key) or (raw_num is not None and raw_num == key_num):
                return float(val)
        raise DataError(f"row {row}: label {raw!r} is not one of {sorted(map(str, label_map))}")
    value = _as_float(raw)
    if value not in (1.0, -1.0):
        raise DataError(f"row {row}: label {raw!r} is not +1/-1 (pass a label mapping for other codes)")
    return value


def _as_float(raw: str):
    try:
        return float(raw)
    except ValueError:
        return None


def load_csv(path, label_column=-1, feature_columns: Sequence | None = None, *,
             header: bool | None = None, label_map: Mapping | None = None,
             scale_to=None, name: str | None = None) -> Dataset:
    """Read a comma-separated file into a ``Dataset``.

    Columns may be given by header name or by zero-based position. With
    ``header=None`` a header is assumed when the first row does not parse
    as numbers. ``label_map`` maps raw label strings to +1/-1. ``scale_to``
    rescales every feature affinely from its observed range onto a target
    interval: one ``(lo, hi)`` pair for all coordinates or one per coordinate.
    """
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(cell.strip() for cell in r)]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if not rows:
        raise DataError(f"{path} is empty")

    if header is None:
        header = any(_as_float(cell) is None for cell in rows[0])
    names = [c.strip() for c in rows[0]] if header else [str(i) for i in range(len(rows[0]))]
    body = rows[1:] if header else rows
    start = 2 if header else 1

    def resolve(col):
        if isinstance(col, int):
            idx = col if col >= 0 else len(names) + col
            if not 0 <= idx < len(names):
                raise DataError(f"column index {col} out of range for {len(names)} columns")
            return idx
        if col in names:
            return names.index(col)
        if str(col).lstrip("-").isdigit():
            return resolve(int(col))
        raise DataError(f"column {col!r} not found in {path} (have {names})")

    label_idx = resolve(label_column)
    if feature_columns is None:
        feat_idx = [i for i in range(len(names)) if i != label_idx]
    else:
        feat_idx = [resolve(c) for c in feature_columns]

    points, labels = [], []
    for offset, row in enumerate(body):
        lineno = start + offset
        if len(row) != len(names):
            raise DataError(f"row {lineno}: expected {len(names)} fields, got {len(row)}")
        vals = []
        for j in feat_idx:
            v = _as_float(row[j].strip())
            if v is None or not np.isfinite(v):
                raise DataError(f"row {lineno}, column {names[j]!r}: cannot parse {row[j]!r} as a number")
            vals.append(v)
        points.append(vals)
        labels.append(_parse_label(row[label_idx].strip(), label_map, lineno))
    if not points:
        raise DataError(f"{path} has no data rows")

    pts = np.array(points, dtype=float)
    if scale_to is not None:
        pts = rescale(pts, scale_to)
    return Dataset(pts, np.array(labels), name or str(path))


def load_points(path, feature_columns: Sequence | None = None, *, header: bool | None = None) -> np.ndarray:
    """Read unlabelled points (one per row) from a comma-separated file."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(cell.strip() for cell in r)]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if header is None and rows:
        header = any(_as_float(cell) is None for cell in rows[0])
    names = [c.strip() for c in rows[0]] if rows and header else None
    body = rows[1:] if header else rows
    if not body:
        raise DataError(f"{path} has no data rows")
    if feature_columns is None:
        idx = list(range(len(body[0])))
    else:
        idx = []
        for c in feature_columns:
            if names and c in names:
                idx.append(names.index(c))
            elif str(c).lstrip("-").isdigit():
                idx.append(int(c))
            else:
                raise DataError(f"column {c!r} not found in {path}")
    out = []
    for offset, row in enumerate(body):
        lineno = offset + (2 if header else 1)
        try:
            vals = [float(row[j]) for j in idx]
        except (ValueError, IndexError):
            raise DataError(f"row {lineno}: cannot parse {row!r} as {len(idx)} numbers") from None
        if not all(np.isfinite(vals)):
            raise DataError(f"row {lineno}: non-finite coordinate")
        out.append(vals)
    return np.array(out, dtype=float)


def rescale(points: np.ndarray, target) -> np.ndarray:
    """Affinely map each coordinate's observed [min, max] onto ``target``."""
    pts = np.asarray(points, dtype=float)
    target = np.asarray(target, dtype=float)
    if target.ndim == 1:
        target = np.tile(target, (pts.shape[1], 1))
    if target.shape != (pts.shape[1], 2):
        raise DataError(f"scale target must be (lo, hi) or one pair per coordinate, got shape {target.shape}")
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    unit = (pts - lo) / span
    return target[:, 0] + unit * (target[:, 1] - target[:, 0])


def save_csv(data: Dataset, path) -> None:
    """Write features then label, with a header, floats at full precision."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j}" for j in range(data.d)] + ["label"])
        for x, y in zip(data.points, data.labels):
            writer.writerow([repr(float(v)) for v in x] + [int(y)])


def generate_overlapping_squares(n_train: int, n_test: int, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Balanced two-class data: +1 uniform on [0.4,1]^2, -1 uniform on [0,0.6]^2.

    Train and test are independent draws from one seeded stream.
    """
    for n in (n_train, n_test):
        if n < 2 or n % 2:
            raise DataError(f"sample counts must be even and positive, got {n}")
    rng = np.random.default_rng(seed)

    def draw(n, tag):
        half = n // 2
        pos = rng.uniform(0.4, 1.0, size=(half, 2))
        neg = rng.uniform(0.0, 0.6, size=(half, 2))
        pts = np.vstack([pos, neg])
        labels = np.concatenate([np.ones(half), -np.ones(half)])
        order = rng.permutation(n)
        return Dataset(pts[order], labels[order], f"squares-{tag}-seed{seed}")

    return draw(n_train, "train"), draw(n_test, "test")


def checkerboard_labeler(points: np.ndarray) -> np.ndarray:
    """+1 where the coordinate product is >= 0, else -1.

    A stand-in labelling for demos on [-1, 1]^2; not derived from any
    published dataset.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return np.where(np.prod(pts, axis=1) >= 0.0, 1.0, -1.0)


def generate_grid_testset(box, resolution: int, labeler: Callable = checkerboard_labeler,
                          name: str = "grid") -> Dataset:
    """Full tensor grid over ``box`` (a list of (lo, hi) per coordinate)."""
    if resolution < 2:
        raise DataError("resolution must be at least 2")
    axes = [np.linspace(lo, hi, resolution) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.reshape(-1) for m in mesh], axis=1)
    return Dataset(pts, np.asarray(labeler(pts), dtype=float), name)


def generate_uniform_problem(n: int, seed: int = 0, box=((-1.0, 1.0), (-1.0, 1.0)),
                             labeler: Callable = checkerboard_labeler, name: str | None = None) -> Dataset:
    """``n`` uniform points in ``box`` labelled by ``labeler``."""
    if n < 1:
        raise DataError("need at least one point")
    rng = np.random.default_rng(seed)
    box = np.asarray(box, dtype=float)
    pts = box[:, 0] + rng.uniform(size=(n, box.shape[0])) * (box[:, 1] - box[:, 0])
    return Dataset(pts, np.asarray(labeler(pts), dtype=float), name or f"uniform-{n}-seed{seed}")


def pca_project(points: np.ndarray, k: int) -> np.ndarray:
    """Project centred points onto the top-``k`` covariance eigenvectors."""
    pts = np.asarray(points, dtype=float)
    if not 1 <= k <= pts.shape[1]:
        raise DataError(f"k must be between 1 and {pts.shape[1]}")
    centred = pts - pts.mean(axis=0)
    evals, evecs = np.linalg.eigh(np.cov(centred, rowvar=False))
    order = np.argsort(evals)[::-1][:k]
    basis = evecs[:, order]
    # fix the sign of each component so the projection is reproducible
    basis *= np.where(basis[np.argmax(np.abs(basis), axis=0), range(k)] < 0, -1.0, 1.0)
    return centred @ basis
