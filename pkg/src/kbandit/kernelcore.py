"""Kernels, kernel matrices and the Cholesky machinery shared by every estimator."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.linalg import solve_triangular
from scipy.spatial.distance import cdist

logger = logging.getLogger(__name__)

MAX_JITTER = 1e-4
FIRST_JITTER = 1e-10


class NumericalError(ArithmeticError):
    """Factorization failed even at the largest allowed jitter."""

    def __init__(self, message: str, min_eigenvalue: float):
        super().__init__(f"{message} (min eigenvalue estimate {min_eigenvalue:.3e})")
        self.min_eigenvalue = min_eigenvalue


@dataclass(frozen=True)
class KernelSpec:
    family: Literal["gaussian", "linear"] = "gaussian"
    gamma: float = 1.0

    def __post_init__(self):
        if self.family not in ("gaussian", "linear"):
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.family == "gaussian" and not self.gamma > 0:
            raise ValueError("gaussian kernel needs gamma > 0")

    def __call__(self, x, y) -> float:
        return kernel_eval(self, x, y)


def as_rows(a, dim: int | None = None) -> np.ndarray:
    """Coerce a feature matrix (possibly empty or None) into a 2-D float array."""
    if a is None:
        return np.zeros((0, dim or 0))
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        if a.size == 0:
            return np.zeros((0, dim or 0))
        a = a[None, :]
    if a.ndim != 2:
        raise ValueError(f"expected a feature matrix, got shape {a.shape}")
    if a.shape[0] == 0 and dim is not None and a.shape[1] != dim:
        a = np.zeros((0, dim))
    return a


def kernel_eval(spec: KernelSpec, x, y) -> float:
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    if spec.family == "linear":
        return float(x @ y)
    diff = x - y
    return float(np.exp(-spec.gamma * (diff @ diff)))


def kernel_matrix(spec: KernelSpec, A, B) -> np.ndarray:
    A = as_rows(A)
    B = as_rows(B, A.shape[1])
    if A.shape[0] == 0 or B.shape[0] == 0:
        return np.zeros((A.shape[0], B.shape[0]))
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    if spec.family == "linear":
        return A @ B.T
    return np.exp(-spec.gamma * cdist(A, B, "sqeuclidean"))


def kernel_diag(spec: KernelSpec, A) -> np.ndarray:
    """k(x, x) for every row of A."""
    A = as_rows(A)
    if spec.family == "linear":
        return np.einsum("ij,ij->i", A, A)
    return np.ones(A.shape[0])


@dataclass
class SymFactor:
    """Lower Cholesky factor of ``M + jitter * I``."""

    L: np.ndarray
    jitter: float = 0.0

    @property
    def dim(self) -> int:
        return self.L.shape[0]

    def logdet(self) -> float:
        if self.dim == 0:
            return 0.0
        return 2.0 * float(np.sum(np.log(np.diag(self.L))))

    def solve_lower(self, b) -> np.ndarray:
        """L^{-1} b"""
        return solve_triangular(self.L, b, lower=True, check_finite=False)

    def solve(self, b) -> np.ndarray:
        """(L L^T)^{-1} b"""
        y = solve_triangular(self.L, b, lower=True, check_finite=False)
        return solve_triangular(self.L, y, lower=True, trans="T", check_finite=False)

    def reconstruct(self) -> np.ndarray:
        return self.L @ self.L.T


def jitter_schedule(base_jitter: float = 0.0):
    yield base_jitter
    j = FIRST_JITTER
    while j <= MAX_JITTER * (1 + 1e-12):
        if j > base_jitter:
            yield j
        j *= 10.0


def spd_factor(M, base_jitter: float = 0.0) -> SymFactor:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    n = M.shape[0]
    eye = np.eye(n)
    for jitter in jitter_schedule(base_jitter):
        try:
            L = np.linalg.cholesky(M + jitter * eye if jitter else M)
        except np.linalg.LinAlgError:
            continue
        if jitter > 0:
            logger.debug("spd_factor needed jitter %.1e on a %dx%d matrix", jitter, n, n)
        return SymFactor(L, jitter)
    min_eig = float(np.linalg.eigvalsh((M + M.T) / 2).min()) if n else 0.0
    raise NumericalError(f"cholesky failed at jitter {MAX_JITTER:g}", min_eig)


def chol_append(L: np.ndarray, col, diag: float) -> np.ndarray | None:
    """Border a lower factor of M with one new row/column.

    Returns the (n+1)x(n+1) factor of [[M, col], [col^T, diag]], or None when the
    new pivot is not positive.
    """
    n = L.shape[0]
    out = np.zeros((n + 1, n + 1))
    if n:
        row = solve_triangular(L, col, lower=True, check_finite=False)
        out[:n, :n] = L
        out[n, :n] = row
        pivot = diag - row @ row
    else:
        pivot = diag
    if not pivot > 0:
        return None
    out[n, n] = np.sqrt(pivot)
    return out


def chol_rank1_update(L: np.ndarray, x) -> None:
    """In place: L becomes the lower factor of L L^T + x x^T."""
    x = np.array(x, dtype=float)
    n = L.shape[0]
    for k in range(n):
        r = np.hypot(L[k, k], x[k])
        c = r / L[k, k]
        s = x[k] / L[k, k]
        L[k, k] = r
        if k + 1 < n:
            L[k + 1:, k] = (L[k + 1:, k] + s * x[k + 1:]) / c
            x[k + 1:] = c * x[k + 1:] - s * L[k + 1:, k]


def _regularized_factor(spec: KernelSpec, lam: float, X: np.ndarray) -> SymFactor:
    K = kernel_matrix(spec, X, X)
    return spd_factor(np.eye(X.shape[0]) + K / lam)


def logdet_ratio(spec: KernelSpec, lam: float, features_old, features_new_rows) -> float:
    """log det(I + K_all / lam) - log det(I + K_old / lam), old rows first."""
    new = as_rows(features_new_rows)
    if new.shape[0] == 0:
        return 0.0
    old = as_rows(features_old, new.shape[1])
    X = np.vstack([old, new])
    L = _regularized_factor(spec, lam, X).L
    # Leading block of a Cholesky factor is the factor of the leading block.
    tail = np.diag(L)[old.shape[0]:]
    return max(0.0, 2.0 * float(np.sum(np.log(tail))))


def information_gain(spec: KernelSpec, lam: float, features) -> float:
    X = as_rows(features)
    if X.shape[0] == 0:
        return 0.0
    return 0.5 * _regularized_factor(spec, lam, X).logdet()
