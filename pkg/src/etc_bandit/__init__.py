"""Win-probability explore-then-commit bandits: estimators, policies and a seeded harness."""

__version__ = "0.1.0"

from .analysis import (
    CostSpec,
    RegretSpec,
    cost_regret_argmin,
    exact_regret_two_arm,
    hoeffding_halfwidth,
    min_exploration_curve,
)
from .arm_models import (
    ArmDistribution,
    BanditModel,
    Component,
    cvar_oracle,
    moments_oracle,
    sample,
    win_probability_oracle,
)
from .errors import BanditError, CapacityError, InputError, NumericError, SamplingError
from .estimators import (
    ExplorationLog,
    MSumSet,
    WinProbabilities,
    build_m_sums,
    estimate_fte,
    estimate_ote_independent,
    estimate_ote_paired,
    sample_size_fte,
    sample_size_ote,
)
from .harness import (
    ExperimentConfig,
    PolicySpec,
    RegretCurve,
    derive_replication_seed,
    run_experiment,
    write_results,
)
from .policies import PolicyDecision, expexp, fte_mab, marab_commit, ote_mab, ucb1_commit
