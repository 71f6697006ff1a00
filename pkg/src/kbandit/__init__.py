"""Communication-efficient distributed kernelized contextual bandits."""
from .baselines import DisLinUCB, LinearStats, NKernelUCB, OneKernelUCB
from .config import ConfigError, ExperimentConfig, load_config
from .environments import ArmPoolEnv, SyntheticEnv, f1, f2, load_arm_pool
from .exact import ExactPosterior, posterior_mean_var, theory_alpha_exact, ucb_score
from .harness import run, run_replicates, sweep
from .kernelcore import KernelSpec, information_gain, kernel_eval, kernel_matrix, logdet_ratio, spd_factor
from .metrics import MetricsTrace, emit
from .nystrom import (
    ApproxModel,
    Dictionary,
    EmbeddedStats,
    accumulate,
    approx_mean_var,
    embed,
    epsilon_accuracy,
    theory_alpha_approx,
)
from .protocol import ApproxDisKernelUCB, CommLedger, DisKernelUCB, World, step_round_robin
from .rls import RlsConfig, qbar_from_theory, rls_sample

__version__ = "0.1.0"
