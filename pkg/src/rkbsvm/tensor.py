"""Matrix-free contractions of the symmetric tensor A = sum_n Phi_n^{(x) 2m}.

With B the M x N feature matrix (rows Phi_n^T) and u = B c:

    A c^{2m}   = sum_n u_n^{2m}
    A c^{2m-1} = B^T u^{2m-1}
    A c^{2m-2} = B^T diag(u^{2m-2}) B

``materialize_tensor`` forms the dense tensor and is only meant as a test
oracle on tiny instances.
"""

from __future__ import annotations

from functools import reduce

import numpy as np

from .kernels import FeatureMatrix

MATERIALIZE_LIMIT = 10**6


def int_power(u: np.ndarray, p: int) -> np.ndarray:
    """Entrywise ``u**p`` for integer ``p >= 0`` by binary exponentiation.

    Only multiplications are used, so odd powers keep the sign of ``u`` and
    the result does not depend on the platform's ``pow``.
    """
    u = np.asarray(u, dtype=float)
    result = np.ones_like(u)
    base = u
    while p:
        if p & 1:
            result = result * base
        p >>= 1
        if p:
            base = base * base
    return result


class TensorHandle:
    """The order-2m tensor, held implicitly through its feature matrix."""

    def __init__(self, fm, m: int):
        if int(m) != m or m < 1:
            raise ValueError(f"m must be a positive integer, got {m}")
        self.fm = fm
        self.m = int(m)
        B = fm.values if isinstance(fm, FeatureMatrix) else np.array(fm, dtype=float)
        if B.ndim != 2:
            raise ValueError("feature matrix must be two-dimensional")
        B = np.ascontiguousarray(B)
        B.setflags(write=False)
        self.B = B
        self._gram_rows = None

    @property
    def M(self) -> int:
        return self.B.shape[0]

    @property
    def N(self) -> int:
        return self.B.shape[1]

    @property
    def gram_rows(self) -> np.ndarray:
        """B B^T (M x M), computed once on first use."""
        if self._gram_rows is None:
            G = self.B @ self.B.T
            G.setflags(write=False)
            self._gram_rows = G
        return self._gram_rows

    def project(self, c) -> np.ndarray:
        """u = B c, the coefficient sequence of the dual element."""
        c = np.asarray(c, dtype=float)
        if c.shape != (self.N,):
            raise ValueError(f"coefficient vector must have shape ({self.N},), got {c.shape}")
        return self.B @ c

    def __repr__(self):
        return f"TensorHandle(M={self.M}, N={self.N}, m={self.m})"


def contract_full(t: TensorHandle, c) -> float:
    """A c^{2m} = sum_n (Phi_n^T c)^{2m}, always >= 0."""
    u = t.project(c)
    return float(np.sum(int_power(u, 2 * t.m)))


def contract_2m_minus_1(t: TensorHandle, c) -> np.ndarray:
    u = t.project(c)
    return t.B.T @ int_power(u, 2 * t.m - 1)


def contract_2m_minus_2(t: TensorHandle, c) -> np.ndarray:
    """A c^{2m-2} = B^T diag(u^{2m-2}) B.

    For m = 1 the weights are identically one, so the result is B^T B for
    every c, including c = 0.
    """
    u = t.project(c)
    w = int_power(u, 2 * t.m - 2)
    H = t.B.T @ (w[:, None] * t.B)
    # symmetrize away the rounding asymmetry of the two-sided product
    return 0.5 * (H + H.T)


def materialize_tensor(t: TensorHandle) -> np.ndarray:
    """Dense N^{2m} array with entry (i_1..i_2m) = sum_n prod_k Phi_n(x_{i_k})."""
    order = 2 * t.m
    size = t.N**order
    if size > MATERIALIZE_LIMIT:
        raise ValueError(f"refusing to materialize {size} entries (limit {MATERIALIZE_LIMIT})")
    T = np.zeros((t.N,) * order)
    for phi in t.B:
        T += reduce(np.multiply.outer, [phi] * order)
    return T


def contract_dense(T: np.ndarray, c, times: int) -> np.ndarray:
    """Contract the last ``times`` modes of a dense tensor with ``c``."""
    c = np.asarray(c, dtype=float)
    out = T
    for _ in range(times):
        out = out @ c
    return out


def objective_value(t: TensorHandle, c, loss, data, lam: float) -> float:
    """Empirical risk of the represented function plus lam * A c^{2m}."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    labels = _labels(data, t.N)
    f = contract_2m_minus_1(t, c)
    risk = float(np.mean(loss.evaluate(labels, f)))
    return risk + lam * contract_full(t, c)


def augmented_lagrangian(t: TensorHandle, alpha, c, gamma, beta: float, loss, data, lam: float) -> float:
    """F(alpha) + G(c) + gamma^T r + (beta/2)|r|^2 with r = alpha - A c^{2m-1}."""
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    labels = _labels(data, t.N)
    alpha = _vec(alpha, t.N, "alpha")
    gamma = _vec(gamma, t.N, "gamma")
    r = alpha - contract_2m_minus_1(t, c)
    F = float(np.mean(loss.evaluate(labels, alpha)))
    G = lam * contract_full(t, c)
    return F + G + float(gamma @ r) + 0.5 * beta * float(r @ r)


def _vec(v, N: int, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (N,):
        raise ValueError(f"{name} must have shape ({N},), got {v.shape}")
    return v


def _labels(data, N: int) -> np.ndarray:
    labels = np.asarray(getattr(data, "labels", data), dtype=float)
    if labels.shape != (N,):
        raise ValueError(f"expected {N} labels, got shape {labels.shape}")
    return labels
