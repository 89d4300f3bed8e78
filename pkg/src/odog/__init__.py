"""Online doubly optimistic gradient descent for smooth nonconvex problems.

The package couples an online-to-nonconvex conversion engine with a
doubly optimistic online learner (constant and adaptive step sizes),
reference baselines, and runtime verification of the proven regret and
convergence inequalities.
"""

from .baselines import OgdLearner, gd_step, o2nc_ogd_step, run_descent
from .engine import (ContractViolation, EngineConfig, EpisodeRecord,
                     IterationRecord, RunResult, comparator, episode_average,
                     run, select_output, shifting_regret)
from .learners import (AdaptiveStep, ConstantStep, HyperParams, OdogLearner,
                       OdogState, adaptive_eta, hint, init_delta, odog_update,
                       project_ball, theorem1_hyperparams, theorem2_hyperparams)
from .problems import (NoiseModel, OracleSample, ProblemInstance, eval_f,
                       eval_grad, finite_diff_grad, make_problem, oracle_grad)

__version__ = "0.1.0"

__all__ = [
    "AdaptiveStep", "ConstantStep", "ContractViolation", "EngineConfig",
    "EpisodeRecord", "HyperParams", "IterationRecord", "NoiseModel",
    "OdogLearner", "OdogState", "OgdLearner", "OracleSample",
    "ProblemInstance", "RunResult", "adaptive_eta", "comparator",
    "episode_average", "eval_f", "eval_grad", "finite_diff_grad", "gd_step",
    "hint", "init_delta", "make_problem", "o2nc_ogd_step", "odog_update",
    "oracle_grad", "project_ball", "run", "run_descent", "select_output",
    "shifting_regret", "theorem1_hyperparams", "theorem2_hyperparams",
]
