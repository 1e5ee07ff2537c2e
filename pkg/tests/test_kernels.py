import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rkbsvm.kernels import (
    FeatureMatrix,
    KernelDomainError,
    KernelSpec,
    build_feature_matrix,
    check_rank_assumption,
    default_truncation,
    enumerate_multi_indices,
    feature_columns,
    feature_value,
    kernel_eval_closed_form,
    kernel_eval_truncated,
    vectorized_outer_rows,
)

G1 = KernelSpec("gaussian", 1)
MIN1 = KernelSpec("min", 1)


def test_enumeration_examples():
    assert enumerate_multi_indices(G1, 3) == [(0,), (1,), (2,)]
    assert enumerate_multi_indices(MIN1, 3) == [(1,), (2,), (3,)]
    assert enumerate_multi_indices(KernelSpec("gaussian", 2), 4) == [(0, 0), (0, 1), (1, 0), (0, 2)]


@given(st.sampled_from(["gaussian", "min"]), st.integers(1, 4), st.integers(1, 80))
def test_enumeration_is_graded_lex_and_complete(family, d, M):
    k = KernelSpec(family, d)
    idx = enumerate_multi_indices(k, M)
    assert idx == enumerate_multi_indices(k, M)
    assert len(idx) == M and len(set(idx)) == M
    assert all(len(i) == d and min(i) >= k.index_offset for i in idx)
    assert idx == sorted(idx, key=lambda i: (sum(i), i))
    # every index of a strictly smaller degree than the last one is present
    top = sum(idx[-1]) - d * k.index_offset
    expected = math.comb(top - 1 + d, d) if top > 0 else 0
    assert sum(1 for i in idx if sum(i) - d * k.index_offset < top) == expected


def test_feature_value_examples():
    assert feature_value(G1, (0,), 0.0) == 1.0
    assert feature_value(G1, (2,), 1.0) == pytest.approx(math.sqrt(2) * math.exp(-1), abs=1e-15)
    assert feature_value(MIN1, (1,), 0.5) == pytest.approx(math.sqrt(2) / math.pi, abs=1e-15)


def _gaussian_oracle(n, x, sigma):
    # high-precision direct product formula
    with mpmath.workdps(50):
        v = mpmath.sqrt(mpmath.mpf(2) ** n / mpmath.factorial(n)) * (sigma * mpmath.mpf(x)) ** n
        return float(v * mpmath.exp(-(sigma * mpmath.mpf(x)) ** 2))


@given(st.integers(0, 60), st.floats(-3, 3), st.floats(0.1, 3))
def test_gaussian_factor_matches_high_precision(n, x, sigma):
    got = feature_value(KernelSpec("gaussian", 1, sigma), (n,), x)
    want = _gaussian_oracle(n, x, sigma)
    assert got == pytest.approx(want, rel=1e-11, abs=1e-300)


def test_gaussian_high_order_does_not_overflow():
    assert math.isfinite(feature_value(G1, (400,), 0.9))
    assert feature_value(G1, (171,), 0.0) == 0.0


def test_feature_matrix_examples():
    fm = build_feature_matrix(G1, 1, [0.0])
    assert fm.values.tolist() == [[1.0]]
    fm = build_feature_matrix(MIN1, 2, [0.5, 0.25])
    r2 = math.sqrt(2)
    want = [[r2 / math.pi, r2 / math.pi * math.sin(math.pi / 4)], [r2 / (2 * math.pi) * math.sin(math.pi), r2 / (2 * math.pi)]]
    np.testing.assert_allclose(fm.values, want, atol=1e-15)
    np.testing.assert_allclose(fm.values, [[0.450158, 0.318310], [0.0, 0.225079]], atol=1e-6)
    assert build_feature_matrix(G1, 3, [0.0]).values[:, 0].tolist() == [1.0, 0.0, 0.0]


def test_feature_matrix_rows_match_feature_value():
    k = KernelSpec("gaussian", 2, 0.7)
    pts = np.random.default_rng(1).uniform(-1, 1, size=(5, 2))
    fm = build_feature_matrix(k, 12, pts)
    for r, idx in enumerate(fm.index_list):
        for i, x in enumerate(pts):
            assert fm.values[r, i] == feature_value(k, idx, x)
    assert not fm.values.flags.writeable


def test_min_kernel_rejects_points_outside_cube():
    with pytest.raises(KernelDomainError, match="coordinate"):
        build_feature_matrix(KernelSpec("min", 2), 3, [[0.5, 1.2]])
    with pytest.raises(KernelDomainError):
        feature_value(MIN1, (1,), -0.1)
    with pytest.raises(KernelDomainError):
        kernel_eval_closed_form(MIN1, 0.5, 1.5)


def test_invalid_specs():
    with pytest.raises(ValueError):
        KernelSpec("laplace", 1)
    with pytest.raises(ValueError):
        KernelSpec("gaussian", 0)
    with pytest.raises(ValueError):
        KernelSpec("gaussian", 1, 0.0)
    with pytest.raises(ValueError):
        feature_value(MIN1, (0,), 0.5)
    with pytest.raises(ValueError):
        enumerate_multi_indices(G1, 0)
    with pytest.raises(ValueError):
        FeatureMatrix(np.array([[np.nan]]), G1, ((0,),))


def test_closed_form_examples():
    assert kernel_eval_closed_form(G1, 0.3, 0.3) == 1.0
    assert kernel_eval_closed_form(MIN1, 0.5, 0.5) == 0.25
    assert kernel_eval_closed_form(KernelSpec("gaussian", 2), [0, 0], [1, 1]) == pytest.approx(math.exp(-2), abs=1e-15)


def test_truncated_examples():
    assert kernel_eval_truncated(G1, 1, 0.0, 0.0) == 1.0
    assert kernel_eval_truncated(MIN1, 4, 0.5, 0.5) == pytest.approx(2 / math.pi**2 * (1 + 1 / 9), abs=1e-15)
    assert abs(kernel_eval_truncated(G1, 30, 0.3, -0.2) - math.exp(-0.25)) <= 1e-6


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(0.2, 2), st.integers(1, 40))
def test_truncated_kernel_is_exactly_symmetric(x, xp, sigma, M):
    k = KernelSpec("gaussian", 1, sigma)
    assert kernel_eval_truncated(k, M, x, xp) == kernel_eval_truncated(k, M, xp, x)


@given(st.lists(st.floats(-1, 1), min_size=2, max_size=2), st.floats(0.2, 2))
def test_gaussian_partial_sums_increase_to_closed_form(x, sigma):
    k = KernelSpec("gaussian", 2, sigma)
    sums = [kernel_eval_truncated(k, M, x, x) for M in range(1, 40)]
    assert all(b >= a for a, b in zip(sums, sums[1:]))
    assert sums[-1] <= kernel_eval_closed_form(k, x, x) + 1e-15


@settings(max_examples=50)
@given(st.integers(1, 12), st.integers(1, 30), st.integers(0, 2**32 - 1), st.sampled_from(["gaussian", "min"]))
def test_gram_matrix_is_psd(N, M, seed, family):
    k = KernelSpec(family, 2)
    lo = 0.0 if family == "min" else -1.0
    pts = np.random.default_rng(seed).uniform(lo, 1.0, size=(N, 2))
    B = build_feature_matrix(k, M, pts).values
    assert np.linalg.eigvalsh(B.T @ B).min() >= -1e-10


def test_feature_columns_match_matrix():
    k = KernelSpec("min", 2)
    pts = np.random.default_rng(2).uniform(0, 1, size=(6, 2))
    fm = build_feature_matrix(k, 10, pts)
    np.testing.assert_array_equal(feature_columns(k, fm.index_list, pts), fm.values)


def test_rank_examples():
    rep = check_rank_assumption(np.array([[0.3], [0.0]]))
    assert rep.satisfied and rep.numeric_rank == 1
    B = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    np.testing.assert_array_equal(vectorized_outer_rows(B), [[1, 0, 0], [0, 0, 1], [1, 1, 1]])
    rep = check_rank_assumption(B)
    assert rep.satisfied and rep.numeric_rank == 3 and rep.required == 3
    rep = check_rank_assumption(np.ones((5, 3)))
    assert not rep.satisfied and rep.numeric_rank is None and rep.required == 6


def test_rank_fails_with_duplicate_point():
    pts = np.array([0.1, 0.5, 0.5])
    fm = build_feature_matrix(G1, 30, pts)
    assert not check_rank_assumption(fm).satisfied
    assert check_rank_assumption(build_feature_matrix(G1, 30, [0.1, 0.5, 0.9])).satisfied


def test_default_truncation():
    assert default_truncation(5) == 64
    assert default_truncation(25) == 325
