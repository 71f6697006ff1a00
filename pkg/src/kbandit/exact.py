"""Exact dual-form kernel ridge regression posterior with incremental updates."""
from __future__ import annotations

import logging
import math

import numpy as np
from scipy.linalg import solve_triangular

from .kernelcore import (
    KernelSpec,
    SymFactor,
    as_rows,
    chol_append,
    kernel_diag,
    kernel_matrix,
    spd_factor,
)

logger = logging.getLogger(__name__)


class ExactPosterior:
    """Posterior mean/std of kernel ridge regression on a growing dataset.

    Keeps a lower Cholesky factor of ``K_DD + lam I`` that is bordered by one
    row per appended point.
    """

    def __init__(self, kernel: KernelSpec, lam: float, dim: int, capacity: int = 64):
        if not lam > 0:
            raise ValueError("lambda must be positive")
        self.kernel = kernel
        self.lam = float(lam)
        self.dim = int(dim)
        self.count = 0
        self.jitter = 0.0
        self._X = np.zeros((capacity, self.dim))
        self._y = np.zeros(capacity)
        self._L = np.zeros((capacity, capacity))
        self._weights: np.ndarray | None = None

    @classmethod
    def from_data(cls, kernel: KernelSpec, lam: float, X, y) -> "ExactPosterior":
        X = as_rows(X)
        y = np.asarray(y, dtype=float).ravel()
        p = cls(kernel, lam, X.shape[1], capacity=max(64, X.shape[0]))
        if X.shape[0]:
            p._set_data(X, y)
            p._refactor()
        return p

    @property
    def points(self) -> np.ndarray:
        return self._X[: self.count]

    @property
    def rewards(self) -> np.ndarray:
        return self._y[: self.count]

    @property
    def factor(self) -> SymFactor:
        n = self.count
        return SymFactor(self._L[:n, :n], self.jitter)

    def copy(self) -> "ExactPosterior":
        p = ExactPosterior(self.kernel, self.lam, self.dim, capacity=self._X.shape[0])
        p.count = self.count
        p.jitter = self.jitter
        p._X[:] = self._X
        p._y[:] = self._y
        p._L[:] = self._L
        return p

    def _grow(self, needed: int) -> None:
        cap = self._X.shape[0]
        if needed <= cap:
            return
        new_cap = max(needed, 2 * cap)
        X = np.zeros((new_cap, self.dim))
        y = np.zeros(new_cap)
        L = np.zeros((new_cap, new_cap))
        n = self.count
        X[:n], y[:n], L[:n, :n] = self._X[:n], self._y[:n], self._L[:n, :n]
        self._X, self._y, self._L = X, y, L

    def _set_data(self, X: np.ndarray, y: np.ndarray) -> None:
        self._grow(X.shape[0])
        self.count = X.shape[0]
        self._X[: self.count] = X
        self._y[: self.count] = y

    def _refactor(self) -> None:
        n = self.count
        K = kernel_matrix(self.kernel, self.points, self.points)
        f = spd_factor(K + self.lam * np.eye(n))
        self._L[:n, :n] = f.L
        self.jitter = f.jitter
        self._weights = None

    def append(self, x, y: float) -> "ExactPosterior":
        x = np.asarray(x, dtype=float).ravel()
        if x.shape[0] != self.dim:
            raise ValueError(f"dimension mismatch: {x.shape[0]} vs {self.dim}")
        n = self.count
        col = kernel_matrix(self.kernel, self.points, x[None, :])[:, 0]
        diag = float(kernel_diag(self.kernel, x[None, :])[0]) + self.lam + self.jitter
        bordered = chol_append(self._L[:n, :n], col, diag)
        self._grow(n + 1)
        self._X[n] = x
        self._y[n] = y
        self.count = n + 1
        if bordered is None:
            logger.warning("border update failed at n=%d, refactoring", n + 1)
            self._refactor()
        else:
            self._L[: n + 1, : n + 1] = bordered
        self._weights = None
        return self

    def extend(self, X, y) -> "ExactPosterior":
        """Append a block of points with one blocked border update."""
        X = as_rows(X, self.dim)
        y = np.asarray(y, dtype=float).ravel()
        k = X.shape[0]
        if k == 0:
            return self
        if X.shape[1] != self.dim or y.shape[0] != k:
            raise ValueError("dimension mismatch")
        n = self.count
        K22 = kernel_matrix(self.kernel, X, X) + (self.lam + self.jitter) * np.eye(k)
        if n:
            L11 = self._L[:n, :n]
            L21 = solve_triangular(L11, kernel_matrix(self.kernel, self.points, X),
                                   lower=True, check_finite=False).T
            S = K22 - L21 @ L21.T
        else:
            L21 = np.zeros((k, 0))
            S = K22
        self._grow(n + k)
        self._X[n:n + k] = X
        self._y[n:n + k] = y
        self.count = n + k
        try:
            L22 = np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            logger.warning("block border update failed at n=%d, refactoring", n + k)
            self._refactor()
        else:
            self._L[n:n + k, :n] = L21
            self._L[n:n + k, n:n + k] = L22
        self._weights = None
        return self

    def _dual_weights(self) -> np.ndarray:
        if self._weights is None:
            self._weights = self.factor.solve(self.rewards)
        return self._weights

    def mean_var_many(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Posterior means and standard deviations for every row of X."""
        X = as_rows(X, self.dim)
        if X.shape[1] != self.dim:
            raise ValueError(f"dimension mismatch: {X.shape[1]} vs {self.dim}")
        prior = kernel_diag(self.kernel, X)
        if self.count == 0:
            return np.zeros(X.shape[0]), np.sqrt(prior / self.lam)
        Kq = kernel_matrix(self.kernel, self.points, X)
        mean = Kq.T @ self._dual_weights()
        V = self.factor.solve_lower(Kq)
        quad = np.einsum("ij,ij->j", V, V)
        std = np.sqrt(np.maximum(0.0, prior - quad) / self.lam)
        return mean, std

    def regularized_logdet(self, last: int | None = None) -> float:
        """log det(I + K/lam) over all points, or the part contributed by the last rows.

        The contribution of the trailing rows equals the log det ratio between the
        full set and the set without them.
        """
        n = self.count
        k = n if last is None else min(last, n)
        if k == 0:
            return 0.0
        diag = np.diag(self._L[:n, :n])[n - k:]
        return float(2.0 * np.sum(np.log(diag)) - k * math.log(self.lam))


def posterior_mean_var(p: ExactPosterior, x) -> tuple[float, float]:
    mean, std = p.mean_var_many(np.asarray(x, dtype=float).ravel()[None, :])
    return float(mean[0]), float(std[0])


def ucb_score(p: ExactPosterior, x, alpha: float) -> float:
    mean, std = posterior_mean_var(p, x)
    return mean + alpha * std


def theory_alpha_exact(lam: float, theta_norm_bound: float, R: float, delta: float, N: int,
                       logdet: float) -> float:
    """Confidence width for the exact estimator; ``logdet`` is log det(I + K/lam)."""
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if logdet < 0:
        raise ValueError("logdet must be nonnegative")
    return math.sqrt(lam) * theta_norm_bound + R * math.sqrt(4 * math.log(N / delta) + 2 * logdet)
