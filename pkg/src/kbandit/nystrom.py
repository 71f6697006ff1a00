"""Nystrom dictionary, embedded statistics and the approximated posterior."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .kernelcore import (
    KernelSpec,
    NumericalError,
    SymFactor,
    as_rows,
    chol_rank1_update,
    kernel_diag,
    kernel_matrix,
    spd_factor,
)

# Above this jitter the Cholesky root is replaced by a floored eigen root.
EIG_FALLBACK_JITTER = 1e-6
EIG_FLOOR = 1e-10


class Dictionary:
    """Immutable dictionary S: global time indices, their arms and a root of K_SS."""

    def __init__(self, kernel: KernelSpec, indices, features):
        self.kernel = kernel
        self.indices = tuple(int(s) for s in indices)
        self.features = as_rows(features).copy()
        self.features.setflags(write=False)
        if len(self.indices) != self.features.shape[0]:
            raise ValueError("indices and features disagree in length")
        self.kss_factor: SymFactor | None = None
        self._eig: tuple[np.ndarray, np.ndarray] | None = None
        if self.size:
            Kss = kernel_matrix(kernel, self.features, self.features)
            try:
                f = spd_factor(Kss)
            except NumericalError:
                f = None
            if f is not None and f.jitter <= EIG_FALLBACK_JITTER:
                self.kss_factor = f
            else:
                w, U = np.linalg.eigh(Kss)
                self._eig = (np.maximum(w, EIG_FLOOR), U)

    @classmethod
    def empty(cls, kernel: KernelSpec, dim: int) -> "Dictionary":
        return cls(kernel, (), np.zeros((0, dim)))

    @property
    def size(self) -> int:
        return len(self.indices)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def embed_many(self, X) -> np.ndarray:
        """Rows z(x; S) for every row of X, shape (n, |S|)."""
        if self.size == 0:
            raise ValueError("cannot embed against an empty dictionary")
        X = as_rows(X, self.dim)
        if X.shape[1] != self.dim:
            raise ValueError(f"dimension mismatch: {X.shape[1]} vs {self.dim}")
        Ks = kernel_matrix(self.kernel, self.features, X)
        if self.kss_factor is not None:
            return self.kss_factor.solve_lower(Ks).T
        w, U = self._eig
        return ((U.T @ Ks) / np.sqrt(w)[:, None]).T


def embed(d: Dictionary, x) -> np.ndarray:
    return d.embed_many(np.asarray(x, dtype=float).ravel()[None, :])[0]


@dataclass
class EmbeddedStats:
    gram: np.ndarray
    moment: np.ndarray
    count: int = 0

    @classmethod
    def zeros(cls, size: int) -> "EmbeddedStats":
        return cls(np.zeros((size, size)), np.zeros(size), 0)

    @classmethod
    def from_embedded(cls, Z, y) -> "EmbeddedStats":
        Z = np.asarray(Z, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        return cls(Z.T @ Z, Z.T @ y, Z.shape[0])

    @property
    def size(self) -> int:
        return self.moment.shape[0]

    @property
    def n_scalars(self) -> int:
        m = self.size
        return m * m + m + 1

    def add(self, z, y: float) -> None:
        z = np.asarray(z, dtype=float).ravel()
        if z.shape[0] != self.size:
            raise ValueError(f"dimension mismatch: {z.shape[0]} vs {self.size}")
        self.gram += np.outer(z, z)
        self.moment += y * z
        self.count += 1

    def __add__(self, other: "EmbeddedStats") -> "EmbeddedStats":
        if other.size != self.size:
            raise ValueError("stats built against different dictionaries")
        return EmbeddedStats(self.gram + other.gram, self.moment + other.moment,
                             self.count + other.count)

    def copy(self) -> "EmbeddedStats":
        return EmbeddedStats(self.gram.copy(), self.moment.copy(), self.count)


def accumulate(stats: EmbeddedStats, z, y: float) -> EmbeddedStats:
    stats.add(z, y)
    return stats


@dataclass
class ApproxModel:
    """A dictionary plus embedded statistics, with a cached factor of gram + lam I."""

    dictionary: Dictionary
    stats: EmbeddedStats
    lam: float
    _M: np.ndarray | None = field(default=None, repr=False)
    _owned: bool = field(default=True, repr=False)

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.stats.size != self.dictionary.size:
            raise ValueError("stats built against a different dictionary")

    @classmethod
    def prior(cls, kernel: KernelSpec, dim: int, lam: float) -> "ApproxModel":
        return cls(Dictionary.empty(kernel, dim), EmbeddedStats.zeros(0), lam)

    @property
    def kernel(self) -> KernelSpec:
        return self.dictionary.kernel

    def _factor(self) -> np.ndarray:
        if self._M is None:
            m = self.stats.size
            self._M = np.linalg.cholesky(self.stats.gram + self.lam * np.eye(m))
        return self._M

    def add(self, x, y: float) -> None:
        """Embed (x, y) under the current dictionary and fold it into the stats."""
        if self.dictionary.size == 0:
            self.stats = EmbeddedStats(self.stats.gram, self.stats.moment, self.stats.count + 1)
            return
        z = embed(self.dictionary, x)
        if not self._owned:
            self.stats = self.stats.copy()
            self._M = None if self._M is None else self._M.copy()
            self._owned = True
        self.stats.add(z, y)
        if self._M is not None:
            chol_rank1_update(self._M, z)

    def _quad(self, X) -> tuple[np.ndarray, np.ndarray | None, np.ndarray | None]:
        X = as_rows(X, self.dictionary.dim)
        prior = kernel_diag(self.kernel, X)
        if self.dictionary.size == 0:
            return prior, None, None
        Z = self.dictionary.embed_many(X)
        W = scipy.linalg.solve_triangular(self._factor(), Z.T, lower=True, check_finite=False)
        # z^T G (G + lam I)^{-1} z = |z|^2 - lam |M^{-1} z|^2
        quad = np.einsum("ij,ij->i", Z, Z) - self.lam * np.einsum("ij,ij->j", W, W)
        return np.maximum(0.0, prior - quad), Z, W

    def mean_var_many(self, X) -> tuple[np.ndarray, np.ndarray]:
        resid, Z, W = self._quad(X)
        std = np.sqrt(resid / self.lam)
        if W is None:
            return np.zeros(len(std)), std
        coef = scipy.linalg.solve_triangular(self._factor(), W, lower=True, trans="T", check_finite=False)
        return coef.T @ self.stats.moment, std

    def variances(self, X) -> np.ndarray:
        return self._quad(X)[0] / self.lam

    def shared_view(self) -> "ApproxModel":
        """A model over the same stats and factor that copies them on its first add."""
        return ApproxModel(self.dictionary, self.stats, self.lam, self._factor(), _owned=False)

    def approx_logdet(self) -> float:
        """log det(I + Z^T Z / lam), the Nystrom surrogate of 2 * information gain."""
        m = self.stats.size
        if m == 0:
            return 0.0
        return 2.0 * float(np.sum(np.log(np.diag(self._factor())))) - m * math.log(self.lam)


def approx_mean_var(d: Dictionary, stats: EmbeddedStats, lam: float, x) -> tuple[float, float]:
    model = ApproxModel(d, stats, lam)
    mean, std = model.mean_var_many(np.asarray(x, dtype=float).ravel()[None, :])
    return float(mean[0]), float(std[0])


def lemma_inner(epsilon: float, D_threshold: float) -> float:
    ratio = (1 + epsilon) / (1 - epsilon)
    return -epsilon + 1.0 / (1.0 + ratio * D_threshold)


def theory_alpha_approx(lam: float, theta_norm_bound: float, R: float, delta: float, N: int,
                        epsilon: float, D_threshold: float, gamma_bound: float) -> float:
    if not 0 <= epsilon < 1 / 3:
        raise ValueError(f"epsilon must lie in [0, 1/3), got {epsilon}")
    if not D_threshold > 0:
        raise ValueError("threshold D must be positive")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    inner = lemma_inner(epsilon, D_threshold)
    if not inner > 0:
        raise ValueError(
            f"-eps + 1/(1 + D (1+eps)/(1-eps)) = {inner:.4g} <= 0 for eps={epsilon}, D={D_threshold}; "
            "lower epsilon or the threshold D")
    coef = 1.0 / math.sqrt(inner) + 1.0
    return coef * math.sqrt(lam) * theta_norm_bound + 2 * R * math.sqrt(math.log(N / delta) + gamma_bound)


def epsilon_accuracy(features, weights, lam: float) -> float:
    """Smallest eps with (1-eps)(F^T F + lam I) <= F^T W F + lam I <= (1+eps)(F^T F + lam I)."""
    F = as_rows(features)
    w = np.asarray(weights, dtype=float).ravel()
    p = F.shape[1]
    A = F.T @ F + lam * np.eye(p)
    B = (F * w[:, None]).T @ F + lam * np.eye(p)
    mu = scipy.linalg.eigh(B, A, eigvals_only=True)
    return float(np.max(np.abs(mu - 1.0)))
