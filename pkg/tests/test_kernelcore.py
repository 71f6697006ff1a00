import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from kbandit.kernelcore import (
    KernelSpec,
    NumericalError,
    chol_append,
    chol_rank1_update,
    information_gain,
    kernel_eval,
    kernel_matrix,
    logdet_ratio,
    spd_factor,
)

finite = st.floats(-3, 3, allow_nan=False)


def test_kernel_eval_examples(gauss, linear):
    x = np.array([0.3, -1.2, 2.0])
    assert kernel_eval(gauss, x, x) == 1.0
    assert kernel_eval(gauss, [0.0], [1.0]) == pytest.approx(math.exp(-1), abs=1e-15)
    assert kernel_eval(linear, [1, 2], [3, 4]) == 11


def test_kernel_eval_dimension_mismatch(gauss):
    with pytest.raises(ValueError):
        kernel_eval(gauss, [1.0, 2.0], [1.0])


def test_kernel_spec_validation():
    with pytest.raises(ValueError):
        KernelSpec("gaussian", 0.0)
    with pytest.raises(ValueError):
        KernelSpec("matern")
    KernelSpec("linear", -5.0)  # gamma ignored


@settings(max_examples=50, deadline=None)
@given(arrays(float, 4, elements=finite), arrays(float, 4, elements=finite),
       st.floats(0.01, 5))
def test_symmetry(x, y, g):
    for spec in (KernelSpec("gaussian", g), KernelSpec("linear")):
        assert kernel_eval(spec, x, y) == kernel_eval(spec, y, x)


def test_kernel_matrix_examples(gauss):
    x = np.array([[0.5, 0.1]])
    assert kernel_matrix(gauss, x, x).tolist() == [[1.0]]
    K = kernel_matrix(gauss, [[0.0], [1.0]], [[0.0], [1.0]])
    e = math.exp(-1)
    np.testing.assert_allclose(K, [[1, e], [e, 1]], atol=1e-15)


@pytest.mark.parametrize("family", ["gaussian", "linear"])
def test_kernel_matrix_matches_entrywise_loop(rng, family):
    spec = KernelSpec(family, 0.7)
    A = rng.standard_normal((6, 3))
    K = kernel_matrix(spec, A, A)
    loop = np.array([[kernel_eval(spec, a, b) for b in A] for a in A])
    np.testing.assert_allclose(K, loop, rtol=1e-13, atol=1e-14)
    B = rng.standard_normal((4, 3))
    loop = np.array([[kernel_eval(spec, a, b) for b in B] for a in A])
    np.testing.assert_allclose(kernel_matrix(spec, A, B), loop, rtol=1e-13, atol=1e-14)


def test_kernel_matrix_dimension_mismatch(gauss):
    with pytest.raises(ValueError):
        kernel_matrix(gauss, np.ones((2, 3)), np.ones((2, 2)))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 20), st.integers(1, 6), st.floats(0.05, 4), st.integers(0, 2**32 - 1))
def test_kernel_matrix_psd(n, d, g, seed):
    X = np.random.default_rng(seed).standard_normal((n, d))
    for spec in (KernelSpec("gaussian", g), KernelSpec("linear")):
        K = kernel_matrix(spec, X, X)
        assert np.linalg.eigvalsh(K).min() >= -1e-8 * max(1.0, np.abs(K).max())


def test_spd_factor_identity():
    f = spd_factor(np.eye(3), 0.0)
    assert f.jitter == 0.0
    np.testing.assert_array_equal(f.L, np.eye(3))


def test_spd_factor_hand_cholesky():
    f = spd_factor(np.array([[4.0, 2.0], [2.0, 3.0]]))
    np.testing.assert_allclose(f.L, [[2, 0], [1, math.sqrt(2)]], atol=1e-15)


def test_spd_factor_zero_matrix_uses_jitter():
    f = spd_factor(np.zeros((2, 2)))
    assert f.jitter > 0
    assert f.logdet() == pytest.approx(2 * 2 * math.log(math.sqrt(f.jitter)))


def test_spd_factor_fails_on_indefinite():
    with pytest.raises(NumericalError) as err:
        spd_factor(np.array([[1.0, 0.0], [0.0, -1.0]]))
    assert err.value.min_eigenvalue == pytest.approx(-1.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 15), st.integers(0, 2**32 - 1))
def test_spd_factor_round_trip(n, seed):
    r = np.random.default_rng(seed)
    B = r.standard_normal((n, max(1, n // 2)))
    M = B @ B.T  # often singular
    f = spd_factor(M)
    err = np.linalg.norm(f.L @ f.L.T - (M + f.jitter * np.eye(n)))
    assert err <= 1e-8 * (1 + np.linalg.norm(M))


def test_chol_append_matches_full(rng):
    B = rng.standard_normal((5, 5))
    M = B @ B.T + np.eye(5)
    L = np.linalg.cholesky(M[:4, :4])
    L5 = chol_append(L, M[:4, 4], M[4, 4])
    np.testing.assert_allclose(L5, np.linalg.cholesky(M), atol=1e-12)
    assert chol_append(np.eye(1), np.array([2.0]), 1.0) is None


def test_chol_rank1_update(rng):
    B = rng.standard_normal((6, 6))
    M = B @ B.T + np.eye(6)
    x = rng.standard_normal(6)
    L = np.linalg.cholesky(M)
    chol_rank1_update(L, x)
    np.testing.assert_allclose(L, np.linalg.cholesky(M + np.outer(x, x)), atol=1e-12)


def test_logdet_ratio_examples(gauss):
    assert logdet_ratio(gauss, 1.0, [[0.0]], np.zeros((0, 1))) == 0.0
    assert logdet_ratio(gauss, 1.0, None, [[0.3]]) == pytest.approx(math.log(2), abs=1e-14)
    # log det([[2, e^-1], [e^-1, 2]]) - log 2, by hand
    assert logdet_ratio(gauss, 1.0, [[0.0]], [[1.0]]) == pytest.approx(0.6587277491430558, abs=1e-13)


def test_information_gain_examples(gauss):
    assert information_gain(gauss, 1.0, np.zeros((0, 3))) == 0.0
    assert information_gain(gauss, 1.0, [[1.0, 2.0]]) == pytest.approx(0.5 * math.log(2), abs=1e-15)


@pytest.mark.parametrize("lam", [0.1, 1.0, 10.0])
def test_information_gain_eigen_oracle(rng, gauss, lam):
    X = rng.standard_normal((10, 3))
    K = np.array([[kernel_eval(gauss, a, b) for b in X] for a in X])
    oracle = 0.5 * np.sum(np.log(np.linalg.eigvalsh(np.eye(10) + K / lam)))
    assert information_gain(gauss, lam, X) == pytest.approx(oracle, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 25), st.integers(0, 2**32 - 1), st.sampled_from([0.1, 1.0, 10.0]))
def test_telescoping_and_monotone(n, seed, lam):
    r = np.random.default_rng(seed)
    X = r.standard_normal((n, 3)) * 0.5
    spec = KernelSpec("gaussian", 1.0)
    cuts = sorted(set(r.integers(1, n, size=3).tolist()))
    bounds = [0] + cuts + [n]
    total = sum(logdet_ratio(spec, lam, X[:a], X[a:b]) for a, b in zip(bounds, bounds[1:]))
    gain = information_gain(spec, lam, X)
    assert total == pytest.approx(2 * gain, rel=1e-9, abs=1e-10)
    assert information_gain(spec, lam, X[:-1]) <= gain + 1e-12
