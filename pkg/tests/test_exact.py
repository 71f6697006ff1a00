import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kbandit.exact import ExactPosterior, posterior_mean_var, theory_alpha_exact, ucb_score
from kbandit.kernelcore import KernelSpec, kernel_eval

from .conftest import ball


def primal_ridge(X, y, lam, x):
    d = X.shape[1]
    A = X.T @ X + lam * np.eye(d)
    theta = np.linalg.solve(A, X.T @ y)
    return x @ theta, math.sqrt(x @ np.linalg.solve(A, x))


def test_empty_posterior(gauss):
    p = ExactPosterior(gauss, 1.0, 3)
    assert posterior_mean_var(p, [0.1, 0.2, 0.3]) == (0.0, 1.0)


def test_one_point_by_hand(linear):
    p = ExactPosterior(linear, 1.0, 1).append([1.0], 1.0)
    mean, std = posterior_mean_var(p, [1.0])
    assert mean == pytest.approx(0.5, abs=1e-15)
    assert std == pytest.approx(math.sqrt(0.5), abs=1e-15)


def test_matches_primal_ridge(rng, linear):
    X = rng.standard_normal((20, 5))
    y = rng.standard_normal(20)
    p = ExactPosterior.from_data(linear, 1.0, X, y)
    for x in rng.standard_normal((10, 5)):
        m, s = posterior_mean_var(p, x)
        pm, ps = primal_ridge(X, y, 1.0, x)
        assert abs(m - pm) < 1e-8 and abs(s - ps) < 1e-8


def test_dimension_mismatch(gauss):
    p = ExactPosterior(gauss, 1.0, 3)
    with pytest.raises(ValueError):
        posterior_mean_var(p, [1.0, 2.0])
    with pytest.raises(ValueError):
        p.append([1.0], 0.0)


def test_append_to_empty(gauss):
    p = ExactPosterior(gauss, 0.5, 2).append([0.3, 0.4], 1.0)
    assert p.count == 1
    np.testing.assert_allclose(p.factor.L, [[math.sqrt(1.0 + 0.5)]])


def test_append_vs_batch(rng, gauss):
    X = ball(rng, 5, 3)
    y = rng.standard_normal(5)
    inc = ExactPosterior(gauss, 1.0, 3)
    for x, v in zip(X, y):
        inc.append(x, v)
    batch = ExactPosterior.from_data(gauss, 1.0, X, y)
    Q = ball(rng, 10, 3)
    for a, b in zip(inc.mean_var_many(Q), batch.mean_var_many(Q)):
        np.testing.assert_allclose(a, b, atol=1e-10)


def test_extend_vs_batch(rng, gauss):
    X = ball(rng, 30, 4)
    y = rng.standard_normal(30)
    p = ExactPosterior(gauss, 1.0, 4).extend(X[:7], y[:7]).extend(X[7:], y[7:])
    q = ExactPosterior.from_data(gauss, 1.0, X, y)
    Q = ball(rng, 10, 4)
    for a, b in zip(p.mean_var_many(Q), q.mean_var_many(Q)):
        np.testing.assert_allclose(a, b, atol=1e-10)


def test_duplicate_point_reduces_std(gauss):
    x = np.array([0.2, -0.1])
    p = ExactPosterior(gauss, 1.0, 2).append(x, 1.0)
    s1 = posterior_mean_var(p, x)[1]
    p.append(x, 1.0)
    s2 = posterior_mean_var(p, x)[1]
    assert s2 < s1


def test_ucb_score(rng, gauss):
    p = ExactPosterior(gauss, 1.0, 3)
    assert ucb_score(p, [0.1, 0.1, 0.1], 2.0) == 2.0
    X = ball(rng, 8, 3)
    p.extend(X, rng.standard_normal(8))
    x = ball(rng, 1, 3)[0]
    m, s = posterior_mean_var(p, x)
    assert ucb_score(p, x, 0.0) == m
    assert ucb_score(p, x, 1.7) == pytest.approx(m + 1.7 * s, abs=1e-14)


def test_theory_alpha_exact():
    assert theory_alpha_exact(4.0, 0.5, 0.0, 0.1, 3, 2.0) == pytest.approx(1.0)
    assert theory_alpha_exact(1.0, 1.0, 1.0, math.exp(-4), 1, 0.0) == pytest.approx(5.0)
    assert theory_alpha_exact(1, 1, 1, 0.1, 2, 3.0) > theory_alpha_exact(1, 1, 1, 0.1, 2, 1.0)
    with pytest.raises(ValueError):
        theory_alpha_exact(1, 1, 1, 1.0, 2, 0.0)


def test_regularized_logdet_trailing_block(rng, gauss):
    from kbandit.kernelcore import logdet_ratio
    X = ball(rng, 9, 3)
    p = ExactPosterior.from_data(gauss, 0.5, X, np.zeros(9))
    assert p.regularized_logdet(last=4) == pytest.approx(logdet_ratio(gauss, 0.5, X[:5], X[5:]), rel=1e-10)


# ------------------------------------------------------------------ properties

seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=50, deadline=None)
@given(seeds, st.integers(0, 15), st.sampled_from([0.1, 1.0, 10.0]))
def test_variance_bounds_and_monotone(seed, n, lam):
    r = np.random.default_rng(seed)
    spec = KernelSpec("gaussian", float(r.uniform(0.2, 3)))
    X = ball(r, n, 3)
    p = ExactPosterior.from_data(spec, lam, X.reshape(n, 3), r.standard_normal(n))
    q = ball(r, 1, 3)[0]
    s_before = posterior_mean_var(p, q)[1]
    assert 0 <= s_before**2 <= kernel_eval(spec, q, q) / lam + 1e-12
    p.append(ball(r, 1, 3)[0], r.standard_normal())
    assert posterior_mean_var(p, q)[1] <= s_before + 1e-12


@settings(max_examples=50, deadline=None)
@given(seeds, st.integers(0, 12), st.integers(1, 8))
def test_variance_ratio_sandwich(seed, n, k):
    r = np.random.default_rng(seed)
    spec = KernelSpec("gaussian", 1.0)
    lam = float(r.choice([0.1, 1.0, 10.0]))
    base = ball(r, n, 3)
    ext = ball(r, k, 3)
    p = ExactPosterior.from_data(spec, lam, base.reshape(n, 3), np.zeros(n))
    grown = p.copy().extend(ext, np.zeros(k))
    growth = 1 + np.sum(p.mean_var_many(ext)[1] ** 2)
    Q = ball(r, 5, 3)
    s_old = p.mean_var_many(Q)[1] ** 2
    s_new = grown.mean_var_many(Q)[1] ** 2
    assert np.all(s_new <= s_old + 1e-8)
    assert np.all(s_old <= growth * s_new + 1e-8)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 50), st.integers(1, 10), st.sampled_from([0.1, 1.0, 10.0]))
def test_dual_primal_equivalence(seed, n, d, lam):
    r = np.random.default_rng(seed)
    X = r.standard_normal((n, d))
    y = r.standard_normal(n)
    p = ExactPosterior.from_data(KernelSpec("linear"), lam, X, y)
    x = r.standard_normal(d)
    m, s = posterior_mean_var(p, x)
    pm, ps = primal_ridge(X, y, lam, x)
    assert abs(m - pm) < 1e-8 and abs(s - ps) < 1e-8


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(2, 15))
def test_permutation_invariance(seed, n):
    r = np.random.default_rng(seed)
    spec = KernelSpec("gaussian", 1.0)
    X = ball(r, n, 3)
    y = r.standard_normal(n)
    perm = r.permutation(n)
    a = ExactPosterior.from_data(spec, 1.0, X, y)
    b = ExactPosterior.from_data(spec, 1.0, X[perm], y[perm])
    Q = ball(r, 4, 3)
    for u, v in zip(a.mean_var_many(Q), b.mean_var_many(Q)):
        np.testing.assert_allclose(u, v, atol=1e-9)
