"""Comparison algorithms: DisLinUCB, OneKernelUCB and NKernelUCB."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .exact import ExactPosterior
from .kernelcore import as_rows, chol_rank1_update
from .protocol import DistributedBandit, point_scalars


@dataclass
class LinearStats:
    A: np.ndarray
    b: np.ndarray
    count: int = 0

    @classmethod
    def prior(cls, d: int, lam: float) -> "LinearStats":
        return cls(lam * np.eye(d), np.zeros(d), 0)

    @classmethod
    def zeros(cls, d: int) -> "LinearStats":
        return cls(np.zeros((d, d)), np.zeros(d), 0)

    def add(self, x, y: float) -> None:
        self.A += np.outer(x, x)
        self.b += y * x
        self.count += 1

    def copy(self) -> "LinearStats":
        return LinearStats(self.A.copy(), self.b.copy(), self.count)


@dataclass
class LinClient:
    client_id: int
    stats: LinearStats
    chol: np.ndarray  # lower factor of stats.A, kept current by rank-one updates
    delta: LinearStats
    logdet_at_sync: float
    t_last: int = 0
    local_indices: list[int] = field(default_factory=list)

    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.chol))))


class DisLinUCB(DistributedBandit):
    """Linear UCB clients that exchange d x d sufficient statistics on a det-ratio trigger."""

    name = "dislinucb"

    def __init__(self, N, d, kernel=None, **kw):
        super().__init__(N, d, kernel, **kw)
        start = LinearStats.prior(d, self.lam)
        self.server = start.copy()
        self.clients = [self._fresh_client(i, start) for i in range(1, N + 1)]
        self.t_last = 0

    def _fresh_client(self, i: int, stats: LinearStats) -> LinClient:
        chol = np.linalg.cholesky(stats.A)
        logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
        return LinClient(i, stats.copy(), chol, LinearStats.zeros(self.d), logdet)

    def client(self, i: int) -> LinClient:
        return self.clients[i - 1]

    def mean_std(self, i, X):
        c = self.client(i)
        X = as_rows(X, self.d)
        theta = cho_solve((c.chol, True), c.stats.b)
        V = solve_triangular(c.chol, X.T, lower=True, check_finite=False)
        return X @ theta, np.sqrt(np.einsum("ij,ij->j", V, V))

    def update(self, i, t, x, y):
        c = self.client(i)
        x = np.asarray(x, dtype=float)
        c.stats.add(x, y)
        c.delta.add(x, y)
        chol_rank1_update(c.chol, x)
        c.local_indices.append(t)
        if self.trigger(c):
            self.sync(t)
            return True
        return False

    def trigger(self, c: LinClient) -> bool:
        if c.delta.count == 0:
            return False
        return c.delta.count * (c.logdet() - c.logdet_at_sync) > self.D

    def sync(self, t: int) -> None:
        led = self.ledger
        led.begin_sync(t)
        payload = self.d * self.d + self.d
        for c in self.clients:
            self.server.A += c.delta.A
            self.server.b += c.delta.b
            self.server.count += c.delta.count
            led.send("up", "linear_stats", payload, c.client_id, t)
        for k, c in enumerate(self.clients):
            led.send("down", "aggregated_linear_stats", payload, c.client_id, t)
            fresh = self._fresh_client(c.client_id, self.server)
            fresh.t_last = t
            fresh.local_indices = c.local_indices
            self.clients[k] = fresh
        self.t_last = t
        led.end_sync()


class OneKernelUCB(DistributedBandit):
    """A single shared exact model; every new point is relayed to all peers immediately."""

    name = "one_kernelucb"

    def __init__(self, N, d, kernel, **kw):
        super().__init__(N, d, kernel, **kw)
        self.posterior = ExactPosterior(kernel, self.lam, d)

    def mean_std(self, i, X):
        return self.posterior.mean_var_many(X)

    def update(self, i, t, x, y):
        self.posterior.append(x, y)
        pt = point_scalars(self.d)
        self.ledger.send("up", "raw_points", pt, i, t)
        if self.N > 1:
            self.ledger.send("down", "raw_points", (self.N - 1) * pt, i, t)
        return False


class NKernelUCB(DistributedBandit):
    """Independent exact models, one per client, with no communication."""

    name = "n_kernelucb"

    def __init__(self, N, d, kernel, **kw):
        super().__init__(N, d, kernel, **kw)
        self.posteriors = [ExactPosterior(kernel, self.lam, d) for _ in range(N)]

    def mean_std(self, i, X):
        return self.posteriors[i - 1].mean_var_many(X)

    def update(self, i, t, x, y):
        self.posteriors[i - 1].append(x, y)
        return False

