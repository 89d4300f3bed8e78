import math

import numpy as np
import pytest

from odog import (AdaptiveStep, ConstantStep, EngineConfig, NoiseModel,
                  OdogLearner, adaptive_eta, hint, init_delta, make_problem,
                  odog_update, project_ball, run, theorem1_hyperparams,
                  theorem2_hyperparams)
from odog.learners import DEFAULT_GAMMA, OdogState, default_alpha


def test_project_ball():
    np.testing.assert_array_equal(project_ball(np.array([3.0, 4.0]), 10.0), [3.0, 4.0])
    np.testing.assert_allclose(project_ball(np.array([3.0, 4.0]), 1.0), [0.6, 0.8])
    np.testing.assert_array_equal(project_ball(np.zeros(2), 1.0), [0.0, 0.0])
    with pytest.raises(ValueError):
        project_ball(np.ones(2), 0.0)


def test_init_delta():
    np.testing.assert_allclose(init_delta(np.array([3.0, 4.0]), 1.0), [-0.6, -0.8])
    np.testing.assert_array_equal(init_delta(np.zeros(2), 1.0), [0.0, 0.0])
    np.testing.assert_allclose(init_delta(np.array([2.0]), 0.5), [-0.5])


def test_hint_evaluates_at_extrapolated_point():
    p = make_problem("quadratic", dim=1, a=1.0)
    oracle = lambda x, sid: p.grad(x)
    h = hint(np.array([1.0]), np.array([0.5]), oracle, 0)
    np.testing.assert_allclose(h, [1.25])
    # zero direction reduces to the gradient at x itself
    h0 = hint(np.array([1.0]), np.array([0.0]), oracle, 0)
    np.testing.assert_allclose(h0, [1.0])
    q = make_problem("cosine_quadratic", dim=1, a=1.0, b=1.0, c=1.0)
    oq = lambda x, sid: q.grad(x)
    hq = hint(np.array([0.0]), np.array([1.0]), oq, 0)
    assert hq[0] == pytest.approx(0.5 - math.sin(0.5), abs=1e-15)


def test_odog_update_scalar_examples():
    state = OdogState(delta=np.array([0.5]), hint=np.array([1.5]),
                      last_error=np.zeros(1), schedule=ConstantStep(0.1))
    new = odog_update(state, np.array([1.0]), np.array([2.0]), 1.0)
    assert new.delta[0] == pytest.approx(0.35, abs=1e-15)
    np.testing.assert_array_equal(new.hint, [2.0])
    np.testing.assert_allclose(new.last_error, [-0.5])

    # zero drift: g = h and no hint leaves delta unchanged
    state = OdogState(delta=np.array([0.3, -0.1]), hint=np.array([1.0, 1.0]),
                      last_error=np.zeros(2), schedule=ConstantStep(0.5))
    new = odog_update(state, np.array([1.0, 1.0]), np.zeros(2), 1.0)
    np.testing.assert_array_equal(new.delta, [0.3, -0.1])

    # projection clips the step onto the ball
    state = OdogState(delta=np.array([0.0]), hint=np.array([7.0]),
                      last_error=np.zeros(1), schedule=ConstantStep(1.0))
    new = odog_update(state, np.array([7.0]), np.array([5.0]), 1.0)
    np.testing.assert_allclose(new.delta, [-1.0])


def test_adaptive_eta_examples():
    s = AdaptiveStep(gamma=1.0, alpha=0.01)
    assert adaptive_eta(s, 1.0) == pytest.approx(10.0, abs=0)
    s = AdaptiveStep(gamma=1.0, alpha=1e-12)
    s.observe(4.0)
    assert adaptive_eta(s, 1.0) == pytest.approx(0.5, rel=1e-12)
    s = AdaptiveStep(gamma=2.0, alpha=1.0)
    s.observe(3.0)
    assert adaptive_eta(s, 0.5) == pytest.approx(0.5, abs=0)
    with pytest.raises(ValueError):
        adaptive_eta(ConstantStep(0.1), 1.0)


def test_adaptive_schedule_monotone_and_reset():
    s = AdaptiveStep(gamma=1.0, alpha=0.01)
    etas = []
    for err in (1.0, 0.5, 2.0):
        s.observe(err)
        etas.append(s.current_eta(1.0))
    assert etas == sorted(etas, reverse=True)
    s.reset()
    assert s.accumulator == 0.0
    assert s.current_eta(1.0) == pytest.approx(10.0, abs=0)


def test_theorem1_deterministic_eta():
    hp = theorem1_hyperparams(L1=2.0, L2=1.0, sigma=0.0, F_gap=5.0, M=1024)
    assert hp.eta == pytest.approx(1.0 / (math.sqrt(3.0) * 2.0), rel=1e-15)


def test_theorem1_numeric_example():
    # direct evaluation of the closed-form expressions at L1 = L2 = 1,
    # sigma = 0, F_gap = 1, M = 1024
    hp = theorem1_hyperparams(1.0, 1.0, 0.0, 1.0, 1024)
    D_expected = (2.0 / 15360.0) ** (3.0 / 7.0)
    assert hp.D == pytest.approx(D_expected, rel=1e-15)
    T_expected = min(max(1, math.ceil((10.0 / D_expected) ** (1.0 / 3.0))), 512)
    assert hp.T == T_expected
    assert hp.K == 1024 // T_expected
    assert hp.eta == pytest.approx(1.0 / math.sqrt(3.0), rel=1e-15)


def test_theorem1_stochastic_branch_and_clamps():
    hp = theorem1_hyperparams(2.0, 1.0, 1.0, 5.0, 4096)
    d_det = (2.0 * 5.0 / (15.0 * 4096 * 2.0 ** (2 / 3))) ** (3 / 7)
    d_sto = (2.0 * 5.0 / (33.0 * 1.0 * 1.0 * 4096)) ** (5 / 7)
    assert hp.D == pytest.approx(min(d_det, d_sto), rel=1e-15)
    t_sto = math.ceil((20.0 / (hp.D * hp.D)) ** 0.4)
    t_det = math.ceil((20.0 / hp.D) ** (1 / 3))
    assert hp.T == min(max(t_sto, t_det), 2048)
    assert hp.K == 4096 // hp.T
    # eta keeps the step-size condition with margin in the noisy regime
    assert hp.eta <= 1.0 / (math.sqrt(3.0) * 2.0)
    # tiny budgets collapse to sane values
    tiny = theorem1_hyperparams(1.0, 1.0, 0.0, 1.0, 2)
    assert tiny.T == 1 and tiny.K == 2


def test_theorem1_quadratic_fallback():
    hp = theorem1_hyperparams(L1=3.0, L2=0.0, sigma=0.0, F_gap=30.0, M=128)
    assert hp.T == 64 and hp.K == 2
    assert hp.D == pytest.approx(math.sqrt(30.0 / 30.0), rel=1e-15)


def test_theorem1_rejects_bad_inputs():
    with pytest.raises(ValueError):
        theorem1_hyperparams(0.0, 1.0, 0.0, 1.0, 16)
    with pytest.raises(ValueError):
        theorem1_hyperparams(1.0, 1.0, 0.0, -1.0, 16)


def test_theorem2_constants_and_structure():
    gamma = 1.0
    c1, c2 = 2.5, 21.0  # 3/(2g)+g and 12/g+8g+1 at g=1
    hp = theorem2_hyperparams(1.0, 1.0, 0.0, 1.0, 1024, gamma=gamma)
    d_expected = (2.0 / 15360.0) ** (3.0 / 7.0)
    assert hp.D == pytest.approx(d_expected, rel=1e-15)
    t_expected = min(max(1, math.ceil(
        (16.0 * c1 ** 1.5 * 1.0 * 1.0 / d_expected) ** (1 / 3))), 512)
    assert hp.T == t_expected
    assert hp.K == 1024 // t_expected
    assert hp.gamma == gamma
    assert hp.alpha == pytest.approx(default_alpha(1.0, hp.D), rel=1e-15)
    sto = theorem2_hyperparams(1.0, 1.0, 2.0, 1.0, 1024, gamma=gamma)
    d_noise = (2.0 / (33.0 * 2.0 ** 0.8 * 1024.0)) ** (5.0 / 7.0)
    assert sto.D == pytest.approx(min(d_noise, d_expected), rel=1e-15)
    t_noise = math.ceil((c2 * 2.0 / (sto.D * sto.D)) ** 0.4)
    t_det = math.ceil((16.0 * c1 ** 1.5 / sto.D) ** (1.0 / 3.0))
    assert sto.T == min(max(t_noise, t_det), 512)
    assert sto.K == 1024 // sto.T


def test_default_gamma_minimizes_c1():
    c1 = lambda g: 3.0 / (2.0 * g) + g
    assert c1(DEFAULT_GAMMA) <= min(c1(0.9 * DEFAULT_GAMMA), c1(1.1 * DEFAULT_GAMMA))


def test_schedule_interchangeable_behind_learner():
    # an adaptive schedule frozen at a constant value reproduces the
    # constant-step run exactly through the same learner interface
    class FrozenAdaptive(AdaptiveStep):
        def observe(self, err_sq):
            pass

    p = make_problem("cosine_quadratic", dim=4, a=1.0, b=1.0, c=1.0)
    eta = 0.05
    gamma, D = 1.0, 0.02
    alpha = (gamma * D / eta) ** 2
    cfg = EngineConfig(M=64, T=8, D=D, mode="deterministic")
    nm = NoiseModel(sigma=0.0, rng_seed=1)
    r_const = run(p, nm, cfg, OdogLearner(ConstantStep(eta)), force_path="numpy")
    r_frozen = run(p, nm, cfg, OdogLearner(FrozenAdaptive(gamma=gamma, alpha=alpha)),
                   force_path="numpy")
    assert np.array_equal(r_const.trace["delta"], r_frozen.trace["delta"])
    assert np.array_equal(r_const.trace["x"], r_frozen.trace["x"])
    assert np.allclose(r_frozen.trace["eta"], eta, rtol=1e-15)


def test_learner_feasibility_property():
    p = make_problem("cosine_quadratic", dim=6, a=1.0, b=2.0, c=1.5)
    nm = NoiseModel(sigma=2.0, rng_seed=11)
    cfg = EngineConfig(M=200, T=10, D=0.3, mode="stochastic")
    res = run(p, nm, cfg, OdogLearner(ConstantStep(0.9)))
    norms = np.linalg.norm(res.trace["delta"], axis=1)
    assert norms.max() <= 0.3 * (1 + 1e-12)
