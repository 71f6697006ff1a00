"""Ridge leverage score sampling of dictionary points."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def qbar_from_theory(epsilon: float, delta: float, N: int, T: int) -> float:
    """Oversampling factor 6 (1+eps)/(1-eps) log(4NT/delta) / eps^2 (natural log)."""
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if N * T < 1:
        raise ValueError("need N*T >= 1")
    return 6 * (1 + epsilon) / (1 - epsilon) * math.log(4 * N * T / delta) / epsilon**2


@dataclass(frozen=True)
class RlsConfig:
    qbar: float
    epsilon: float = 0.25
    delta: float = 0.05
    select_all: bool = False

    def __post_init__(self):
        if not self.qbar > 0:
            raise ValueError("qbar must be positive")

    @classmethod
    def from_theory(cls, epsilon: float, delta: float, N: int, T: int) -> "RlsConfig":
        return cls(qbar_from_theory(epsilon, delta, N, T), epsilon, delta)


def inclusion_probabilities(variances, qbar: float) -> np.ndarray:
    return np.minimum(1.0, qbar * np.asarray(variances, dtype=float))


def rls_sample(local_indices, variances, qbar: float, rng: np.random.Generator) -> list[int]:
    """Keep each index s independently with probability min(1, qbar * var_s).

    ``variances`` is aligned with ``local_indices``. An empty draw from a
    nonempty input is replaced by the single index with the largest probability.
    """
    idx = list(local_indices)
    if not idx:
        return []
    var = np.asarray(variances, dtype=float).ravel()
    if var.shape[0] != len(idx):
        raise ValueError("one variance per index expected")
    if np.any(var < 0):
        raise ValueError("variances must be nonnegative")
    p = inclusion_probabilities(var, qbar)
    keep = rng.random(len(idx)) < p
    chosen = [s for s, k in zip(idx, keep) if k]
    if not chosen:
        best = p.max()
        chosen = [min(s for s, ps in zip(idx, p) if ps == best)]
    return chosen
