"""Reward environments: synthetic f1/f2 over the unit ball and CSV arm pools."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class ArmPoolFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.line = line


class ArmPoolSchemaError(ArmPoolFormatError):
    pass


def f1(x, theta) -> float:
    return math.cos(3.0 * float(np.dot(x, theta)))


def f2(x, theta) -> float:
    u = float(np.dot(x, theta))
    return u**3 - 3 * u**2 - u + 3


REWARD_FUNCTIONS = {"f1": f1, "f2": f2}


def uniform_ball(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    """n points uniform in the d-dimensional unit ball."""
    g = rng.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * rng.random((n, 1)) ** (1.0 / d)


@dataclass
class Candidates:
    features: np.ndarray
    means: np.ndarray  # hidden from the algorithms

    def __len__(self) -> int:
        return self.features.shape[0]


class Environment:
    """Common interface: draw a candidate set, then observe a noisy reward."""

    d: int
    noise_std: float

    def __init__(self, seed_seq: np.random.SeedSequence):
        cand_ss, noise_ss = seed_seq.spawn(2)
        self._cand_rng = np.random.default_rng(cand_ss)
        self._noise_rng = np.random.default_rng(noise_ss)
        self._last: Candidates | None = None

    def draw_candidates(self, t: int) -> Candidates:
        self._last = self._draw(t)
        return self._last

    def _draw(self, t: int) -> Candidates:
        raise NotImplementedError

    def mean_reward(self, x) -> float:
        raise NotImplementedError

    def observe(self, x) -> float:
        noise = self._noise_rng.normal(0.0, self.noise_std) if self.noise_std > 0 else 0.0
        return self.mean_reward(x) + noise


class SyntheticEnv(Environment):
    def __init__(self, d: int = 20, reward_fn: str = "f1", noise_std: float = 0.1,
                 candidate_size: int = 20, seed=0, theta_star=None):
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        theta_ss, env_ss = ss.spawn(2)
        super().__init__(env_ss)
        if reward_fn not in REWARD_FUNCTIONS:
            raise ValueError(f"unknown reward function {reward_fn!r}")
        self.d = int(d)
        self.reward_fn = reward_fn
        self.noise_std = float(noise_std)
        self.candidate_size = int(candidate_size)
        if theta_star is None:
            theta_star = uniform_ball(np.random.default_rng(theta_ss), 1, self.d)[0]
        self.theta_star = np.asarray(theta_star, dtype=float)
        if np.linalg.norm(self.theta_star) > 1 + 1e-12:
            raise ValueError("theta_star must lie in the unit ball")

    def mean_reward(self, x) -> float:
        return REWARD_FUNCTIONS[self.reward_fn](x, self.theta_star)

    def _draw(self, t: int) -> Candidates:
        X = uniform_ball(self._cand_rng, self.candidate_size, self.d)
        means = np.array([self.mean_reward(x) for x in X])
        return Candidates(X, means)


class ArmPoolEnv(Environment):
    POLICIES = ("uniform_k", "one_positive_rest_negative")

    def __init__(self, arms, rewards, policy: str = "uniform_k", candidate_size: int = 20,
                 noise_std: float = 0.1, seed=0):
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        super().__init__(ss)
        self.arms = np.asarray(arms, dtype=float)
        self.rewards = np.asarray(rewards, dtype=float)
        self.d = self.arms.shape[1]
        self.policy = policy
        self.candidate_size = int(candidate_size)
        self.noise_std = float(noise_std)
        if policy not in self.POLICIES:
            raise ValueError(f"unknown candidate policy {policy!r}")
        if self.candidate_size > len(self.arms):
            raise ValueError("candidate_size exceeds the pool size")
        if policy == "one_positive_rest_negative":
            self._pos = np.flatnonzero(self.rewards == 1.0)
            self._neg = np.flatnonzero(self.rewards == 0.0)
            if len(self._pos) < 1 or len(self._neg) < self.candidate_size - 1:
                raise ValueError("pool lacks a positive arm or enough zero-reward arms")

    def _draw(self, t: int) -> Candidates:
        rng = self._cand_rng
        if self.policy == "uniform_k":
            idx = rng.choice(len(self.arms), self.candidate_size, replace=False)
        else:
            pos = rng.choice(self._pos, 1)
            neg = rng.choice(self._neg, self.candidate_size - 1, replace=False)
            idx = rng.permutation(np.concatenate([pos, neg]))
        return Candidates(self.arms[idx].copy(), self.rewards[idx].copy())

    def mean_reward(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if self._last is not None:
            hit = np.flatnonzero(np.all(self._last.features == x, axis=1))
            if hit.size:
                return float(self._last.means[hit[0]])
        hit = np.flatnonzero(np.all(self.arms == x, axis=1))
        if not hit.size:
            raise KeyError("arm not in pool")
        return float(self.rewards[hit[0]])


def load_arm_pool(path, **kwargs) -> ArmPoolEnv:
    """Read a preprocessed arm pool: header f0..f{d-1},reward, one arm per row."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ArmPoolSchemaError("empty file", 1) from None
        if "reward" not in header:
            raise ArmPoolSchemaError("missing 'reward' column", 1)
        feat_cols = [j for j, h in enumerate(header) if h != "reward"]
        expected = [f"f{k}" for k in range(len(feat_cols))]
        if [header[j] for j in feat_cols] != expected:
            raise ArmPoolSchemaError(f"feature columns must be {','.join(expected)}", 1)
        r_col = header.index("reward")
        arms, rewards = [], []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ArmPoolFormatError(f"expected {len(header)} fields, got {len(row)}", line)
            try:
                vals = [float(c) for c in row]
            except ValueError as exc:
                raise ArmPoolFormatError(str(exc), line) from None
            if not all(math.isfinite(v) for v in vals):
                raise ArmPoolFormatError("NaN or Inf value", line)
            arms.append([vals[j] for j in feat_cols])
            rewards.append(vals[r_col])
    if not arms:
        raise ArmPoolSchemaError("no arms in file")
    return ArmPoolEnv(np.array(arms), np.array(rewards), **kwargs)


def write_arm_pool(path, arms, rewards) -> None:
    arms = np.asarray(arms, dtype=float)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"f{k}" for k in range(arms.shape[1])] + ["reward"])
        for x, r in zip(arms, rewards):
            w.writerow([repr(float(v)) for v in x] + [repr(float(r))])
