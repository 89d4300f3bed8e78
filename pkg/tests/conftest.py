import pytest

from odog import (EngineConfig, NoiseModel, OdogLearner, make_problem, run,
                  theorem1_hyperparams)
from odog.learners import ConstantStep


@pytest.fixture(scope="session")
def cosq10():
    # L1 = 2, L2 = 1 by construction
    return make_problem("cosine_quadratic", dim=10, a=1.0, b=1.0, c=1.0, x0=2.0)


@pytest.fixture(scope="session")
def quad2():
    return make_problem("quadratic", dim=2, a=1.0, x0=2.0)


@pytest.fixture(scope="session")
def logistic10():
    return make_problem("logistic", dim=10, n_samples=64, data_seed=3, mu=0.1)


def auto_const_run(problem, sigma, M, seed=1, **kwargs):
    """Theorem-tuned constant-step run, the workhorse of most tests."""
    f_gap = problem.f(problem.x0) - problem.f_star
    hp = theorem1_hyperparams(problem.L1, problem.L2, sigma, f_gap, M)
    mode = "deterministic" if sigma == 0.0 else "stochastic"
    cfg = EngineConfig(M=M, T=hp.T, D=hp.D, mode=mode)
    noise = NoiseModel(sigma=sigma, rng_seed=seed)
    learner = OdogLearner(ConstantStep(hp.eta))
    return run(problem, noise, cfg, learner, **kwargs), hp


@pytest.fixture(scope="session")
def small_const_run(cosq10):
    res, hp = auto_const_run(cosq10, 0.0, 512)
    return res
