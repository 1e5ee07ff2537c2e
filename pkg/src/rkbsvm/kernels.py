"""Kernel feature expansions and the truncated feature matrix.

Two kernels with explicit expansions K(x, x') = sum_n phi_n(x) phi_n(x'):

* ``gaussian``: exp(-sigma^2 |x - x'|^2), indices n in (N_0)^d,
  phi_n(x) = prod_j sqrt(2^n_j / n_j!) (sigma x_j)^n_j exp(-sigma^2 x_j^2)
* ``min``: prod_j (min(x_j, x'_j) - x_j x'_j) on [0, 1]^d, indices n in N^d,
  phi_n(x) = prod_j sqrt(2) / (n_j pi) sin(n_j pi x_j)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

GAUSSIAN = "gaussian"
MIN = "min"
FAMILIES = (GAUSSIAN, MIN)

# above this order the Gaussian prefactor is accumulated in log domain
_LOG_DOMAIN_ORDER = 20

DEFAULT_RANK_TOL = 1e-10


class KernelDomainError(ValueError):
    """A point lies outside the domain on which the kernel expansion holds."""


@dataclass(frozen=True)
class KernelSpec:
    family: str
    dimension: int
    sigma: float = 1.0

    def __post_init__(self):
        family = self.family.lower()
        if family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        object.__setattr__(self, "family", family)
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.dimension}")
        object.__setattr__(self, "dimension", int(self.dimension))
        if family == GAUSSIAN and not self.sigma > 0:
            raise ValueError(f"gaussian kernel needs sigma > 0, got {self.sigma}")
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def index_offset(self) -> int:
        """Smallest admissible multi-index entry (0 for Gaussian, 1 for min)."""
        return 0 if self.family == GAUSSIAN else 1

    def check_domain(self, points) -> np.ndarray:
        """Return ``points`` as an (N, d) float array, raising on domain violations."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            # 1-D input: a list of scalars when d == 1, a single point otherwise
            pts = pts.reshape(-1, 1) if self.dimension == 1 else pts.reshape(1, -1)
        if pts.ndim != 2 or pts.shape[1] != self.dimension:
            raise ValueError(f"expected points of dimension {self.dimension}, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise KernelDomainError("points contain non-finite coordinates")
        if self.family == MIN and (np.any(pts < 0.0) or np.any(pts > 1.0)):
            bad = np.argwhere((pts < 0.0) | (pts > 1.0))[0]
            raise KernelDomainError(
                f"min kernel requires coordinates in [0, 1]; point {bad[0]} has "
                f"coordinate {bad[1]} = {pts[bad[0], bad[1]]!r}"
            )
        return pts


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    # all tuples of `parts` naturals summing to `total`, in lexicographic order
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def enumerate_multi_indices(kernel: KernelSpec, M: int) -> list[tuple[int, ...]]:
    """First ``M`` multi-indices in graded lexicographic order.

    Sorted by entry sum, ties broken lexicographically. Gaussian indices
    start at the all-zeros tuple, min-kernel indices at the all-ones tuple.
    """
    if int(M) != M or M < 1:
        raise ValueError(f"M must be a positive integer, got {M}")
    offset = kernel.index_offset
    out: list[tuple[int, ...]] = []
    total = 0
    while len(out) < M:
        for comp in _compositions(total, kernel.dimension):
            out.append(tuple(k + offset for k in comp))
            if len(out) == M:
                break
        total += 1
    return out


def _gaussian_factor(n: int, z: np.ndarray, sigma: float) -> np.ndarray:
    """sqrt(2^n / n!) (sigma z)^n exp(-sigma^2 z^2), elementwise over ``z``."""
    sz = sigma * z
    damp = -(sz * sz)
    if n == 0:
        return np.exp(damp)
    if n <= _LOG_DOMAIN_ORDER:
        coef = math.sqrt(2.0**n / math.factorial(n))
        return coef * sz**n * np.exp(damp)
    log_coef = 0.5 * (n * math.log(2.0) - math.lgamma(n + 1))
    with np.errstate(divide="ignore"):
        log_abs = log_coef + n * np.log(np.abs(sz)) + damp
    sign = np.sign(sz) if n % 2 else np.ones_like(sz)
    # log(0) = -inf gives exp(-inf) = 0, which is the right limit for n >= 1
    return sign * np.exp(log_abs)


def _min_factor(n: int, z: np.ndarray) -> np.ndarray:
    return math.sqrt(2.0) / (n * math.pi) * np.sin(n * math.pi * z)


def _feature_rows(kernel: KernelSpec, indices: Sequence[tuple[int, ...]], pts: np.ndarray) -> np.ndarray:
    # factor tables are cached per (coordinate, order) since graded indices repeat orders heavily
    values = np.empty((len(indices), pts.shape[0]))
    cache: dict[tuple[int, int], np.ndarray] = {}
    for row, idx in enumerate(indices):
        acc = None
        for j, nj in enumerate(idx):
            key = (j, nj)
            fac = cache.get(key)
            if fac is None:
                if kernel.family == GAUSSIAN:
                    fac = _gaussian_factor(nj, pts[:, j], kernel.sigma)
                else:
                    fac = _min_factor(nj, pts[:, j])
                cache[key] = fac
            acc = fac.copy() if acc is None else acc * fac
        values[row] = acc
    return values


def _check_index(kernel: KernelSpec, n) -> tuple[int, ...]:
    idx = tuple(int(k) for k in np.atleast_1d(n))
    if len(idx) != kernel.dimension:
        raise ValueError(f"multi-index {idx} has length {len(idx)}, kernel dimension is {kernel.dimension}")
    if min(idx) < kernel.index_offset:
        raise ValueError(f"multi-index {idx} has entries below {kernel.index_offset} for the {kernel.family} kernel")
    return idx


def feature_value(kernel: KernelSpec, n, x) -> float:
    """Evaluate the single basis function phi_n at point ``x``."""
    idx = _check_index(kernel, n)
    pts = kernel.check_domain(np.reshape(np.asarray(x, dtype=float), (1, kernel.dimension)))
    return float(_feature_rows(kernel, [idx], pts)[0, 0])


@dataclass(frozen=True)
class FeatureMatrix:
    """M x N matrix with entry (n, i) = phi_n(x_i), rows in enumeration order.

    Stands in for the truncated order-2m tensor, which is never formed.
    """

    values: np.ndarray
    kernel: KernelSpec
    index_list: tuple = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 2:
            raise ValueError("feature matrix must be two-dimensional")
        if len(self.index_list) != vals.shape[0]:
            raise ValueError("index_list length must match the number of rows")
        if not np.all(np.isfinite(vals)):
            raise ValueError("feature matrix has non-finite entries")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "index_list", tuple(tuple(i) for i in self.index_list))

    @property
    def M(self) -> int:
        return self.values.shape[0]

    @property
    def N(self) -> int:
        return self.values.shape[1]


def build_feature_matrix(kernel: KernelSpec, M: int, points) -> FeatureMatrix:
    pts = kernel.check_domain(points)
    if pts.shape[0] < 1:
        raise ValueError("need at least one point")
    indices = enumerate_multi_indices(kernel, M)
    return FeatureMatrix(_feature_rows(kernel, indices, pts), kernel, tuple(indices))


def feature_columns(kernel: KernelSpec, index_list: Sequence[tuple[int, ...]], points) -> np.ndarray:
    """Feature values for arbitrary points against a fixed index list, shape (M, P)."""
    return _feature_rows(kernel, list(index_list), kernel.check_domain(points))


def kernel_eval_closed_form(kernel: KernelSpec, x, xp) -> float:
    pts = kernel.check_domain(np.vstack([np.reshape(x, (1, -1)), np.reshape(xp, (1, -1))]))
    a, b = pts
    if kernel.family == GAUSSIAN:
        diff = a - b
        return float(np.exp(-kernel.sigma**2 * np.dot(diff, diff)))
    return float(np.prod(np.minimum(a, b) - a * b))


def kernel_eval_truncated(kernel: KernelSpec, M: int, x, xp) -> float:
    """Partial sum of the feature series over the first ``M`` indices."""
    pts = np.vstack([np.reshape(x, (1, -1)), np.reshape(xp, (1, -1))])
    rows = feature_columns(kernel, enumerate_multi_indices(kernel, M), pts)
    # a correctly rounded sum is exactly symmetric and monotone in M for x == x'
    return math.fsum(rows[:, 0] * rows[:, 1])


def default_truncation(N: int, floor: int = 64) -> int:
    """Smallest M that can satisfy the rank condition, but never below ``floor``."""
    return max(N * (N + 1) // 2, floor)


@dataclass(frozen=True)
class RankReport:
    satisfied: bool
    numeric_rank: int | None  # None when M alone rules the condition out
    required: int
    M: int
    N: int


def vectorized_outer_rows(values: np.ndarray) -> np.ndarray:
    """Rows are the upper triangles (diagonal included) of Phi_n Phi_n^T."""
    B = np.asarray(values, dtype=float)
    iu, ju = np.triu_indices(B.shape[1])
    return B[:, iu] * B[:, ju]


def check_rank_assumption(fm, tolerance: float = DEFAULT_RANK_TOL) -> RankReport:
    """Check that the rank-one matrices Phi_n Phi_n^T span all symmetric N x N matrices.

    The numeric rank counts singular values above ``tolerance`` times the
    largest one. When ``M < N(N+1)/2`` the answer is negative without any
    decomposition.
    """
    B = fm.values if isinstance(fm, FeatureMatrix) else np.asarray(fm, dtype=float)
    M, N = B.shape
    required = N * (N + 1) // 2
    if M < required:
        return RankReport(False, None, required, M, N)
    s = np.linalg.svd(vectorized_outer_rows(B), compute_uv=False)
    rank = 0 if s.size == 0 or s[0] == 0.0 else int(np.sum(s > tolerance * s[0]))
    return RankReport(rank == required, rank, required, M, N)
