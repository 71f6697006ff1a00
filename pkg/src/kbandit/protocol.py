"""Star-network protocol: clients, event triggers, synchronization and accounting."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .exact import ExactPosterior, theory_alpha_exact
from .kernelcore import KernelSpec
from .nystrom import ApproxModel, Dictionary, EmbeddedStats, theory_alpha_approx
from .rls import RlsConfig, rls_sample

PayloadKind = Literal["raw_points", "dictionary_points", "embedded_stats",
                      "aggregated_stats", "linear_stats", "aggregated_linear_stats"]


def point_scalars(d: int) -> int:
    return d + 1


def stats_scalars(m: int) -> int:
    return m * m + m + 1


@dataclass(frozen=True)
class SyncMessage:
    direction: Literal["up", "down"]
    kind: PayloadKind
    scalar_count: int
    client: int
    t: int


@dataclass
class CommLedger:
    cumulative_scalars: int = 0
    sync_times: list[int] = field(default_factory=list)
    per_sync_scalars: list[int] = field(default_factory=list)
    dictionary_sizes: list[int] = field(default_factory=list)
    messages: list[SyncMessage] = field(default_factory=list)
    nonsync_scalars: int = 0
    _open: bool = False

    def begin_sync(self, t: int) -> None:
        self.sync_times.append(t)
        self.per_sync_scalars.append(0)
        self._open = True

    def end_sync(self) -> None:
        self._open = False

    def send(self, direction, kind, scalar_count: int, client: int, t: int) -> None:
        msg = SyncMessage(direction, kind, int(scalar_count), client, t)
        self.messages.append(msg)
        self.cumulative_scalars += msg.scalar_count
        if self._open:
            self.per_sync_scalars[-1] += msg.scalar_count
        else:
            self.nonsync_scalars += msg.scalar_count

    @property
    def n_syncs(self) -> int:
        return len(self.sync_times)


@dataclass
class TheoryAlpha:
    """Constants for the theoretically derived exploration width."""

    theta_norm_bound: float = 1.0
    R: float = 0.1
    delta: float = 0.05
    epsilon: float = 0.25
    gamma_bound: float | None = None


class DistributedBandit:
    """Shared surface of every algorithm driven by the round-robin loop."""

    name = "base"

    def __init__(self, N: int, d: int, kernel: KernelSpec, lam: float = 1.0, alpha: float = 1.0,
                 D_threshold: float = 1.0, theory: TheoryAlpha | None = None,
                 ledger: CommLedger | None = None):
        if N < 1:
            raise ValueError("N must be >= 1")
        if not lam > 0:
            raise ValueError("lambda must be positive")
        self.N = N
        self.d = d
        self.kernel = kernel
        self.lam = float(lam)
        self.alpha = float(alpha)
        self.D = float(D_threshold)
        self.theory = theory
        self.ledger = ledger if ledger is not None else CommLedger()

    def mean_std(self, i: int, X) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def alpha_for(self, i: int) -> float:
        return self.alpha

    def select(self, i: int, X) -> int:
        """Index of the UCB-maximizing candidate; ties go to the lowest index."""
        mean, std = self.mean_std(i, X)
        return int(np.argmax(mean + self.alpha_for(i) * std))

    def update(self, i: int, t: int, x, y: float) -> bool:
        """Record (x, y) for client i at global time t; returns True when a sync ran."""
        raise NotImplementedError


# ---------------------------------------------------------------- exact mode


@dataclass
class ExactClient:
    client_id: int
    posterior: ExactPosterior
    local_indices: list[int] = field(default_factory=list)
    merged: set[int] = field(default_factory=set)
    upload_buffer: list[int] = field(default_factory=list)
    t_last: int = 0


class DisKernelUCB(DistributedBandit):
    """Exact kernel UCB clients that exchange raw points on a log-det trigger."""

    name = "diskernel_exact"

    def __init__(self, N, d, kernel, **kw):
        super().__init__(N, d, kernel, **kw)
        self.clients = [ExactClient(i, ExactPosterior(kernel, self.lam, d)) for i in range(1, N + 1)]
        # raw points held by their owning client until uploaded
        self.local_points: dict[int, tuple[np.ndarray, float]] = {}
        self.server_points: dict[int, tuple[np.ndarray, float]] = {}
        self.t_last = 0

    def client(self, i: int) -> ExactClient:
        return self.clients[i - 1]

    def mean_std(self, i, X):
        return self.client(i).posterior.mean_var_many(X)

    def alpha_for(self, i):
        if self.theory is None:
            return self.alpha
        th = self.theory
        return theory_alpha_exact(self.lam, th.theta_norm_bound, th.R, th.delta, self.N,
                                  max(0.0, self.client(i).posterior.regularized_logdet()))

    def update(self, i, t, x, y):
        c = self.client(i)
        c.posterior.append(x, y)
        c.local_indices.append(t)
        c.merged.add(t)
        c.upload_buffer.append(t)
        self.local_points[t] = (np.asarray(x, dtype=float).copy(), float(y))
        if self.exact_trigger(c):
            self.sync(t)
            return True
        return False

    def trigger_value(self, c: ExactClient) -> float:
        """(|D_t| - |D_last|) * log det ratio; the buffered points are the trailing factor rows."""
        k = len(c.upload_buffer)
        if k == 0:
            return 0.0
        return k * c.posterior.regularized_logdet(last=k)

    def exact_trigger(self, c: ExactClient) -> bool:
        if not c.upload_buffer:
            return False
        return self.trigger_value(c) > self.D

    def sync(self, t: int) -> None:
        led = self.ledger
        led.begin_sync(t)
        pt = point_scalars(self.d)
        for c in self.clients:
            for s in c.upload_buffer:
                self.server_points[s] = self.local_points[s]
            led.send("up", "raw_points", len(c.upload_buffer) * pt, c.client_id, t)
            c.upload_buffer = []
        for c in self.clients:
            lacking = [s for s in range(1, t + 1) if s not in c.merged]
            led.send("down", "raw_points", len(lacking) * pt, c.client_id, t)
            if lacking:
                X = np.array([self.server_points[s][0] for s in lacking])
                y = np.array([self.server_points[s][1] for s in lacking])
                c.posterior.extend(X, y)
                c.merged.update(lacking)
            c.t_last = t
        self.t_last = t
        led.end_sync()


# --------------------------------------------------------------- approx mode


@dataclass
class ApproxClient:
    client_id: int
    model: ApproxModel
    rng: np.random.Generator
    local_indices: list[int] = field(default_factory=list)
    local_X: list[np.ndarray] = field(default_factory=list)
    local_y: list[float] = field(default_factory=list)
    merged_count: int = 0
    trigger_accumulator: float = 0.0
    arrival_variances: list[float] = field(default_factory=list)
    t_last: int = 0


class ApproxDisKernelUCB(DistributedBandit):
    """Nystrom-approximated clients that exchange a shared dictionary and embedded stats."""

    name = "approx_diskernel"

    def __init__(self, N, d, kernel, rls: RlsConfig, seed_seq: np.random.SeedSequence | None = None,
                 **kw):
        super().__init__(N, d, kernel, **kw)
        self.rls = rls
        seed_seq = seed_seq if seed_seq is not None else np.random.SeedSequence(0)
        rngs = [np.random.default_rng(s) for s in seed_seq.spawn(N)]
        # The post-sync model as of t_last, shared read-only by all clients.
        self.frozen = ApproxModel.prior(kernel, d, self.lam)
        self.clients = [ApproxClient(i, ApproxModel.prior(kernel, d, self.lam), rngs[i - 1])
                        for i in range(1, N + 1)]
        self.t_last = 0

    def client(self, i: int) -> ApproxClient:
        return self.clients[i - 1]

    @property
    def dictionary(self) -> Dictionary:
        return self.frozen.dictionary

    def mean_std(self, i, X):
        return self.client(i).model.mean_var_many(X)

    def alpha_for(self, i):
        if self.theory is None:
            return self.alpha
        th = self.theory
        gamma = th.gamma_bound
        if gamma is None:
            gamma = 0.5 * self.client(i).model.approx_logdet()
        return theory_alpha_approx(self.lam, th.theta_norm_bound, th.R, th.delta, self.N,
                                   th.epsilon, self.D, gamma)

    def update(self, i, t, x, y):
        c = self.client(i)
        x = np.asarray(x, dtype=float).copy()
        var = float(self.frozen.variances(x[None, :])[0])
        c.trigger_accumulator += var
        c.arrival_variances.append(var)
        c.model.add(x, y)
        c.local_indices.append(t)
        c.local_X.append(x)
        c.local_y.append(float(y))
        c.merged_count += 1
        if self.approx_trigger(c):
            self.sync(t)
            return True
        return False

    def approx_trigger(self, c: ApproxClient) -> bool:
        return c.trigger_accumulator > self.D

    def sample_dictionary(self, c: ApproxClient, variances=None) -> list[int]:
        if not c.local_indices:
            return []
        if self.rls.select_all:
            return list(c.local_indices)
        if variances is None:
            variances = self.frozen.variances(np.array(c.local_X))
        return rls_sample(c.local_indices, variances, self.rls.qbar, c.rng)

    def sync(self, t: int) -> None:
        led = self.ledger
        led.begin_sync(t)
        pt = point_scalars(self.d)
        # (1) clients sample their whole local history and upload the raw points;
        # frozen variances are evaluated in one batch, then split back per client
        sizes = [len(c.local_X) for c in self.clients]
        var = None
        if not self.rls.select_all and sum(sizes):
            var = np.split(self.frozen.variances(np.concatenate([np.array(c.local_X).reshape(-1, self.d)
                                                                  for c in self.clients])),
                           np.cumsum(sizes)[:-1])
        uploaded: dict[int, np.ndarray] = {}
        for k, c in enumerate(self.clients):
            picked = self.sample_dictionary(c, None if var is None else var[k])
            pos = {s: j for j, s in enumerate(c.local_indices)}
            for s in picked:
                uploaded[s] = c.local_X[pos[s]]
            led.send("up", "dictionary_points", len(picked) * pt, c.client_id, t)
        # (2) server broadcasts the union
        S = sorted(uploaded)
        dictionary = Dictionary(self.kernel, S, np.array([uploaded[s] for s in S]).reshape(len(S), self.d))
        for c in self.clients:
            led.send("down", "dictionary_points", len(S) * pt, c.client_id, t)
        # (3) clients re-embed their local history and upload embedded stats
        # (embedding is row-wise, so one batched call serves every client)
        total = EmbeddedStats.zeros(len(S))
        Z_all = dictionary.embed_many(np.concatenate([np.array(c.local_X).reshape(-1, self.d)
                                                      for c in self.clients])) if S else None
        offset = 0
        for c in self.clients:
            if c.local_indices:
                n = len(c.local_X)
                local = EmbeddedStats.from_embedded(Z_all[offset:offset + n], c.local_y)
                offset += n
            else:
                local = EmbeddedStats.zeros(len(S))
            led.send("up", "embedded_stats", local.n_scalars, c.client_id, t)
            total = total + local
        # (4) server broadcasts the aggregate
        self.frozen = ApproxModel(dictionary, total, self.lam)
        for c in self.clients:
            led.send("down", "aggregated_stats", total.n_scalars, c.client_id, t)
            c.model = self.frozen.shared_view()
            c.merged_count = t
            c.trigger_accumulator = 0.0
            c.t_last = t
        led.dictionary_sizes.append(len(S))
        self.t_last = t
        led.end_sync()


# ------------------------------------------------------------ round robin


def global_time(N: int, l: int, i: int) -> int:
    return N * (l - 1) + i


@dataclass
class StepRecord:
    t: int
    regret: float
    chosen: int
    synced: bool


@dataclass
class World:
    """One simulation timeline: an environment and an algorithm."""

    env: object
    algorithm: DistributedBandit
    records: list[StepRecord] = field(default_factory=list)
    chosen_X: list[np.ndarray] = field(default_factory=list)

    @property
    def N(self) -> int:
        return self.algorithm.N


def step_round_robin(world: World, l: int, i: int) -> StepRecord:
    N = world.N
    if not (1 <= i <= N and l >= 1):
        raise ValueError(f"bad round/client pair l={l}, i={i}")
    t = global_time(N, l, i)
    cand = world.env.draw_candidates(t)
    alg = world.algorithm
    k = alg.select(i, cand.features)
    x = cand.features[k]
    y = world.env.observe(x)
    synced = alg.update(i, t, x, y)
    regret = float(cand.means.max() - cand.means[k])
    rec = StepRecord(t, regret, k, synced)
    world.records.append(rec)
    world.chosen_X.append(np.array(x))
    return rec


def sync_count_bound(epsilon: float, D: float, N: int, L: float, lam: float, gamma_hat: float) -> float:
    """Epoch-count bound ((1+e)/(1-e)) [1/D + ((1+e)/(1-e))(N + L^2/(lam D))] 2 gamma."""
    r = (1 + epsilon) / (1 - epsilon)
    return r * (1.0 / D + r * (N + L**2 / (lam * D))) * 2.0 * gamma_hat


__all__ = [
    "CommLedger", "SyncMessage", "DistributedBandit", "DisKernelUCB", "ApproxDisKernelUCB",
    "ExactClient", "ApproxClient", "TheoryAlpha", "World", "step_round_robin", "global_time",
    "point_scalars", "stats_scalars", "sync_count_bound",
]
