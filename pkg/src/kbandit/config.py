"""Experiment configuration: a flat TOML document with one section per module.

Grammar (every key optional, defaults in ``ExperimentConfig``)::

    [experiment]
    algorithm = "approx_diskernel"   # diskernel_exact | approx_diskernel | dislinucb
                                     # | one_kernelucb | n_kernelucb
    N = 10
    T = 50
    seed = 0
    replicates = 3

    [kernel]
    family = "gaussian"              # gaussian | linear
    gamma = 1.0

    [estimator]
    lambda = 1.0
    D_threshold = 5.0                # default 20 (exact, linear) or 5 (approx)
    alpha = 1.0                      # a number, or "theory"
    theta_norm_bound = 1.0
    R = 0.1
    L = 1.0

    [approx]
    epsilon = 0.25
    delta = 0.05
    qbar = 2.0                       # omit to use the theoretical oversampling factor
    select_all = false
    gamma_bound = 10.0               # optional, theory alpha only

    [environment]
    kind = "synthetic"               # synthetic | arm_pool
    d = 20
    reward_fn = "f1"                 # f1 | f2
    noise_std = 0.1
    candidate_size = 20
    path = "pool.csv"                # arm_pool only
    policy = "uniform_k"             # uniform_k | one_positive_rest_negative
"""
from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .kernelcore import KernelSpec
from .nystrom import lemma_inner

ALGORITHMS = ("diskernel_exact", "approx_diskernel", "dislinucb", "one_kernelucb", "n_kernelucb")
DEFAULT_THRESHOLD = {"approx_diskernel": 5.0}

SECTIONS = {
    "experiment": {"algorithm": "algorithm", "N": "N", "T": "T", "seed": "seed",
                   "replicates": "replicates"},
    "kernel": {"family": "kernel_family", "gamma": "kernel_gamma"},
    "estimator": {"lambda": "lam", "D_threshold": "D_threshold", "alpha": "alpha",
                  "theta_norm_bound": "theta_norm_bound", "R": "R", "L": "L"},
    "approx": {"epsilon": "epsilon", "delta": "delta", "qbar": "qbar",
               "select_all": "select_all", "gamma_bound": "gamma_bound"},
    "environment": {"kind": "env_kind", "d": "d", "reward_fn": "reward_fn",
                    "noise_std": "noise_std", "candidate_size": "candidate_size",
                    "path": "arm_pool_path", "policy": "candidate_policy"},
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    algorithm: str = "approx_diskernel"
    N: int = 10
    T: int = 50
    seed: int = 0
    replicates: int = 3
    kernel_family: str = "gaussian"
    kernel_gamma: float = 1.0
    lam: float = 1.0
    D_threshold: float | None = None
    alpha: float | str = 1.0
    theta_norm_bound: float = 1.0
    R: float = 0.1
    L: float = 1.0
    epsilon: float = 0.25
    delta: float = 0.05
    qbar: float | None = None
    select_all: bool = False
    gamma_bound: float | None = None
    env_kind: str = "synthetic"
    d: int = 20
    reward_fn: str = "f1"
    noise_std: float = 0.1
    candidate_size: int = 20
    arm_pool_path: str | None = None
    candidate_policy: str = "uniform_k"

    @property
    def kernel(self) -> KernelSpec:
        return KernelSpec(self.kernel_family, self.kernel_gamma)

    @property
    def threshold(self) -> float:
        if self.D_threshold is not None:
            return float(self.D_threshold)
        return DEFAULT_THRESHOLD.get(self.algorithm, 20.0)

    @property
    def theory_alpha(self) -> bool:
        return self.alpha == "theory"

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes).validated()

    def as_dict(self) -> dict:
        return asdict(self)

    def validated(self) -> "ExperimentConfig":
        problems = []
        if self.algorithm not in ALGORITHMS:
            problems.append(f"algorithm must be one of {', '.join(ALGORITHMS)}")
        if self.N < 1:
            problems.append("N must be >= 1")
        if self.T < 0:
            problems.append("T must be >= 0")
        if self.replicates < 1:
            problems.append("replicates must be >= 1")
        if not 0 <= self.seed < 2**64:
            problems.append("seed must be a 64-bit unsigned integer")
        try:
            self.kernel
        except ValueError as exc:
            problems.append(str(exc))
        if not self.lam > 0:
            problems.append("lambda must be positive")
        if not self.threshold > 0:
            problems.append("D_threshold must be positive")
        if isinstance(self.alpha, str):
            if self.alpha != "theory":
                problems.append("alpha must be a number or 'theory'")
        elif self.alpha < 0:
            problems.append("alpha must be nonnegative")
        if not 0 < self.delta < 1:
            problems.append("delta must lie in (0, 1)")
        if self.algorithm == "approx_diskernel":
            if not 0 < self.epsilon < 1:
                problems.append("epsilon must lie in (0, 1)")
            if self.qbar is not None and not self.qbar > 0:
                problems.append("qbar must be positive")
            if self.theory_alpha:
                if not self.epsilon < 1 / 3:
                    problems.append("theory alpha needs epsilon < 1/3")
                elif not lemma_inner(self.epsilon, self.threshold) > 0:
                    problems.append("theory alpha needs -eps + 1/(1 + D (1+eps)/(1-eps)) > 0")
        if self.env_kind not in ("synthetic", "arm_pool"):
            problems.append("environment kind must be synthetic or arm_pool")
        if self.env_kind == "synthetic":
            if self.d < 1:
                problems.append("d must be >= 1")
            if self.reward_fn not in ("f1", "f2"):
                problems.append("reward_fn must be f1 or f2")
        elif not self.arm_pool_path:
            problems.append("arm_pool environment needs a path")
        if self.candidate_size < 1:
            problems.append("candidate_size must be >= 1")
        if self.noise_std < 0:
            problems.append("noise_std must be nonnegative")
        if problems:
            raise ConfigError("; ".join(problems))
        return self


def config_from_mapping(doc: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig)}
    values: dict = {}
    for key, val in doc.items():
        if isinstance(val, dict):
            if key not in SECTIONS:
                raise ConfigError(f"unknown section [{key}]")
            for sub, v in val.items():
                if sub not in SECTIONS[key]:
                    raise ConfigError(f"unknown key {sub!r} in [{key}]")
                values[SECTIONS[key][sub]] = v
        elif key in known:
            values[key] = val
        else:
            raise ConfigError(f"unknown key {key!r}")
    try:
        cfg = replace(base or ExperimentConfig(), **values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validated()


def load_config(path) -> ExperimentConfig:
    try:
        with Path(path).open("rb") as fh:
            doc = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    cfg = config_from_mapping(doc)
    if cfg.arm_pool_path and not Path(cfg.arm_pool_path).is_absolute():
        cfg = replace(cfg, arm_pool_path=str(Path(path).parent / cfg.arm_pool_path))
    return cfg


def load_grid(path) -> dict[str, list]:
    """A sweep grid: a [grid] table mapping flat config field names to value lists."""
    try:
        with Path(path).open("rb") as fh:
            doc = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read grid {path}: {exc}") from None
    grid = doc.get("grid", doc)
    known = {f.name for f in fields(ExperimentConfig)}
    out = {}
    for key, vals in grid.items():
        if key not in known:
            raise ConfigError(f"unknown grid key {key!r}")
        out[key] = vals if isinstance(vals, list) else [vals]
    return out
