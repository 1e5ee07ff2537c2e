import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from rkbsvm.losses import HINGE, RAMP2
from rkbsvm.tensor import (
    TensorHandle,
    augmented_lagrangian,
    contract_2m_minus_1,
    contract_2m_minus_2,
    contract_dense,
    contract_full,
    int_power,
    materialize_tensor,
    objective_value,
)

finite = st.floats(-2, 2, allow_nan=False)


def dense_oracle(B, m):
    # entry by entry from the definition, independent of the package code
    M, N = B.shape
    T = np.zeros((N,) * (2 * m))
    for idx in itertools.product(range(N), repeat=2 * m):
        T[idx] = sum(np.prod([B[n, i] for i in idx]) for n in range(M))
    return T


def handle(rows, m):
    return TensorHandle(np.array(rows, dtype=float), m)


def test_contract_examples():
    t = handle([[1, 2]], 1)
    assert contract_full(t, [0, 0]) == 0.0
    assert contract_full(t, [1, 1]) == 9.0
    assert contract_2m_minus_1(t, [1, 1]).tolist() == [3.0, 6.0]
    assert contract_2m_minus_1(t, [0, 0]).tolist() == [0.0, 0.0]
    t2 = handle([[1, 0], [0, 1]], 2)
    assert contract_full(t2, [2, 3]) == 97.0
    assert contract_2m_minus_1(t2, [2, 3]).tolist() == [8.0, 27.0]
    assert contract_2m_minus_2(handle([[1, 2]], 2), [1, 1]).tolist() == [[9, 18], [18, 36]]
    assert contract_2m_minus_2(t2, [0, 0]).tolist() == [[0, 0], [0, 0]]
    B = np.array([[1.0, 2.0], [0.5, -1.0]])
    np.testing.assert_array_equal(contract_2m_minus_2(TensorHandle(B, 1), [0, 0]), B.T @ B)


def test_materialize_examples():
    assert materialize_tensor(handle([[1.5]], 1)).tolist() == [[2.25]]
    assert materialize_tensor(handle([[1, 2]], 1)).tolist() == [[1, 2], [2, 4]]
    assert materialize_tensor(handle([[1, 0], [0, 1]], 1)).tolist() == [[1, 0], [0, 1]]
    with pytest.raises(ValueError, match="refusing"):
        materialize_tensor(TensorHandle(np.ones((1, 40)), 2))


@settings(max_examples=60)
@given(st.integers(1, 4), st.integers(1, 5), st.integers(1, 2), st.integers(0, 2**32 - 1))
def test_materialized_tensor_matches_definition(N, M, m, seed):
    B = np.random.default_rng(seed).normal(size=(M, N))
    T = materialize_tensor(TensorHandle(B, m))
    np.testing.assert_allclose(T, dense_oracle(B, m), atol=1e-12)
    # full symmetry under any permutation of modes
    perm = tuple(np.random.default_rng(seed).permutation(2 * m))
    np.testing.assert_allclose(T, np.transpose(T, perm), atol=1e-12)


@given(arrays(float, st.integers(0, 8), elements=finite), st.integers(0, 9))
def test_int_power_matches_repeated_product(u, p):
    want = np.ones_like(u)
    for _ in range(p):
        want = want * u
    np.testing.assert_allclose(int_power(u, p), want, rtol=1e-14, atol=0)
    if p % 2:
        r = int_power(u, p)
        # odd powers keep the sign unless they underflow to zero
        assert np.all((np.sign(r) == np.sign(u)) | (r == 0.0))


@settings(max_examples=100)
@given(st.integers(1, 6), st.integers(1, 8), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_contraction_identities(N, M, m, seed):
    rng = np.random.default_rng(seed)
    t = TensorHandle(rng.normal(size=(M, N)), m)
    c = rng.normal(size=N)
    full = contract_full(t, c)
    v = contract_2m_minus_1(t, c)
    H = contract_2m_minus_2(t, c)
    assert full >= 0.0
    assert abs(full - v @ c) <= 1e-10 * (1 + abs(full))
    assert np.linalg.norm(v - H @ c) <= 1e-10 * (1 + np.linalg.norm(v))
    np.testing.assert_array_equal(H, H.T)
    assert np.linalg.eigvalsh(H).min() >= -1e-10 * (1 + np.abs(H).max())


def test_contract_dense_agrees_on_example():
    t = handle([[1, 2], [3, -1]], 2)
    T = materialize_tensor(t)
    c = np.array([0.3, -0.7])
    assert contract_dense(T, c, 4) == pytest.approx(contract_full(t, c), abs=1e-12)


def test_shape_errors():
    t = handle([[1, 2]], 1)
    with pytest.raises(ValueError):
        contract_full(t, [1, 2, 3])
    with pytest.raises(ValueError):
        TensorHandle(np.ones((2, 2)), 0)
    with pytest.raises(ValueError):
        TensorHandle(np.ones(3), 1)


def test_objective_examples():
    t = TensorHandle(np.random.default_rng(0).normal(size=(3, 4)), 1)
    labels = np.array([1.0, -1.0, 1.0, -1.0])
    assert objective_value(t, np.zeros(4), HINGE, labels, 0.3) == 1.0
    assert objective_value(t, np.zeros(4), RAMP2, labels, 0.3) == 2.0
    assert objective_value(handle([[1.0]], 1), [2.0], HINGE, [1.0], 0.5) == 2.0
    with pytest.raises(ValueError):
        objective_value(t, np.zeros(4), HINGE, labels, 0.0)


def test_augmented_lagrangian_examples():
    assert augmented_lagrangian(handle([[1.0]], 1), [2.0], [1.0], [1.0], 2.0, HINGE, [1.0], 1.0) == 3.0
    t = TensorHandle(np.random.default_rng(3).normal(size=(3, 4)), 1)
    labels = np.array([1.0, -1.0, 1.0, 1.0])
    z = np.zeros(4)
    assert augmented_lagrangian(t, z, z, z, 0.7, HINGE, labels, 0.2) == 1.0
    c = np.array([0.1, -0.4, 0.3, 0.2])
    alpha = contract_2m_minus_1(t, c)
    want = objective_value(t, c, HINGE, labels, 0.2)
    got = augmented_lagrangian(t, alpha, c, np.array([5.0, -3.0, 2.0, 1.0]), 0.7, HINGE, labels, 0.2)
    assert got == pytest.approx(want, rel=1e-14)
