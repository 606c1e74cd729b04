"""Recovering bandits: arms whose expected reward recovers with idle time.

GP estimation of per-arm recovery functions, d-step lookahead UCB and
Thompson-sampling policies, a budgeted optimistic planner, a per-(arm,
covariate) UCB baseline, an exact lookahead oracle, and a regret-accounting
simulation harness with a CLI.
"""

from .environment import EnvConfig, EnvState, RecoveryModel, advance_covariates, env_step, recovery_value
from .exceptions import (
    ConfigError,
    DepthExceedsArms,
    FactorizationFailure,
    InvalidLambda,
    IoFailure,
    NoiseZero,
    RecobanditsError,
    TreeTooLarge,
)
from .gp import GpPosterior, information_gain
from .harness import (
    BatchResult,
    ExperimentConfig,
    RegretCurve,
    TrajectoryRecord,
    regret_from_trajectory,
    run_batch,
    run_episode,
)
from .kernels import KernelSpec, kernel_eval
from .lookahead import (
    LeafPath,
    LeafStats,
    best_leaf_exhaustive,
    enumerate_leaves,
    leaf_reward_true,
    leaf_stats,
)
from .planner import PlanResult, SampleTable, g_max, op_error_bound, op_search, psi
from .policies import (
    PolicyConfig,
    UcbZState,
    alpha_t,
    oracle_select,
    ts_select,
    ucb_select,
    ucbz_select,
)

__version__ = "0.1.0"

__all__ = [
    "EnvConfig",
    "EnvState",
    "RecoveryModel",
    "advance_covariates",
    "env_step",
    "recovery_value",
    "ConfigError",
    "DepthExceedsArms",
    "FactorizationFailure",
    "InvalidLambda",
    "IoFailure",
    "NoiseZero",
    "RecobanditsError",
    "TreeTooLarge",
    "GpPosterior",
    "information_gain",
    "BatchResult",
    "ExperimentConfig",
    "RegretCurve",
    "TrajectoryRecord",
    "regret_from_trajectory",
    "run_batch",
    "run_episode",
    "KernelSpec",
    "kernel_eval",
    "LeafPath",
    "LeafStats",
    "best_leaf_exhaustive",
    "enumerate_leaves",
    "leaf_reward_true",
    "leaf_stats",
    "PlanResult",
    "SampleTable",
    "g_max",
    "op_error_bound",
    "op_search",
    "psi",
    "PolicyConfig",
    "UcbZState",
    "alpha_t",
    "oracle_select",
    "ts_select",
    "ucb_select",
    "ucbz_select",
    "__version__",
]
