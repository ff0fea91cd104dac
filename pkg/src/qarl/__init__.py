"""Entropy-regularized zero-sum Markov games with automatic rationality curricula."""

from .agents import EntropyTuner, ReplayBuffer, SoftQTable, temperature_bin
from .curriculum import (
    CurriculumState,
    GammaParams,
    PerformanceSamples,
    clip_force,
    curriculum_update,
    gamma_kl,
    gamma_pdf,
    gamma_sample,
    is_performance_estimate,
    linear_schedule,
    point_update,
)
from .envs import (
    GarnetSpec,
    ParamSweep,
    PendulumSpec,
    WindyGridSpec,
    build_garnet,
    build_pendulum,
    build_windy_grid,
    perturb,
)
from .game import (
    MarkovGame,
    TabularPolicy,
    Trajectory,
    discounted_return,
    expected_return,
    policy_entropy,
    rollout,
)
from .harness import (
    EvalReport,
    ExperimentConfig,
    RunRecord,
    eval_vs_trained_adversary,
    robustness_sweep,
    train,
    train_cat_linear,
    train_force_curriculum,
    train_qarl,
    train_rarl,
    train_sac,
)
from .matrix import (
    MatrixGame,
    QreSolution,
    brute_force_qre_2x2,
    regularized_game_value,
    solve_logit_qre,
    solve_nash_by_annealing,
)
from .planning import (
    JointSoftQ,
    SolverReport,
    anneal_to_nash,
    policy_consistency_residual,
    soft_bellman_backup,
    solve_soft_markov_game,
)

__version__ = "0.1.0"
